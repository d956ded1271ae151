//! Tactile reflex layer: slipping coefficient, slip classes, the proportional
//! grip correction and its pseudoenergy, plus the empirical calibration of
//! the class thresholds from labelled force samples.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::plant::{Control, MotorRange};
use crate::FINGERS;

/// Grip quality classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlipClass {
    FirmlyHeld,
    NotFirmlyHeld,
    Slipped,
}

impl SlipClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SlipClass::FirmlyHeld => "firmly_held",
            SlipClass::NotFirmlyHeld => "not_firmly_held",
            SlipClass::Slipped => "slipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "firmly_held" | "firm" => Some(SlipClass::FirmlyHeld),
            "not_firmly_held" | "not_firm" => Some(SlipClass::NotFirmlyHeld),
            "slipped" | "slip" => Some(SlipClass::Slipped),
            _ => None,
        }
    }
}

/// Desired slipping coefficient and the class map thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipCalibration {
    pub alpha_des: f64,
    /// Upper (exclusive) bound of the firmly-held class.
    pub firm_threshold: f64,
    /// Lower (inclusive) bound of the slipped class.
    pub slip_threshold: f64,
    /// Forces are divided by this scale (N) before the squared exponential.
    pub force_scale: f64,
}

impl Default for SlipCalibration {
    fn default() -> Self {
        Self { alpha_des: 0.25, firm_threshold: 0.3, slip_threshold: 0.7, force_scale: 1.0 }
    }
}

impl SlipCalibration {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.alpha_des
            && self.alpha_des < self.firm_threshold
            && self.firm_threshold < self.slip_threshold
            && self.slip_threshold < 1.0
            && self.force_scale > 0.0
            && self.force_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "slip calibration needs 0 < alpha_des < firm < slip < 1 and force_scale > 0, got {self:?}"
            )))
        }
    }

    pub fn alpha(&self, forces: &[f64; FINGERS]) -> Result<f64> {
        slipping_coefficient(forces, self.force_scale)
    }

    pub fn class(&self, alpha: f64) -> Result<SlipClass> {
        slip_class(alpha, self)
    }
}

/// Per-finger proportional gain of the reflex (motor units per unit error).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveGain {
    pub k: [f64; FINGERS],
}

impl Default for ReactiveGain {
    fn default() -> Self {
        Self { k: [DEFAULT_GAIN; FINGERS] }
    }
}

/// Default reflex gain, sized for the default plant's force gain and lag.
pub const DEFAULT_GAIN: f64 = 10.0;

impl ReactiveGain {
    pub fn uniform(k: f64) -> Self {
        Self { k: [k; FINGERS] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.iter().all(|k| *k > 0.0 && k.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("reactive gains must be positive, got {:?}", self.k)))
        }
    }
}

/// One labelled sample from the calibration phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledForceSample {
    pub forces: [f64; FINGERS],
    pub label: SlipClass,
}

/// `exp(-‖f / scale‖²)`: 1 with no contact force, decaying towards 0 as the
/// grip tightens.
pub fn slipping_coefficient(forces: &[f64; FINGERS], force_scale: f64) -> Result<f64> {
    if !forces.iter().all(|f| f.is_finite()) {
        return Err(Error::Numeric(format!("non-finite forces {forces:?}")));
    }
    if !(force_scale > 0.0) || !force_scale.is_finite() {
        return Err(Error::Domain(format!("force scale must be positive, got {force_scale}")));
    }
    let s: f64 = forces.iter().map(|f| (f / force_scale) * (f / force_scale)).sum();
    Ok(math::exp(-s))
}

/// Class of a slipping coefficient. Boundaries belong to the upper class:
/// `[0, firm)`, `[firm, slip)`, `[slip, 1]`.
pub fn slip_class(alpha: f64, cal: &SlipCalibration) -> Result<SlipClass> {
    check_alpha(alpha)?;
    Ok(if alpha < cal.firm_threshold {
        SlipClass::FirmlyHeld
    } else if alpha < cal.slip_threshold {
        SlipClass::NotFirmlyHeld
    } else {
        SlipClass::Slipped
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("slipping coefficient {alpha} outside [0, 1]")))
    }
}

/// Reflex error `alpha - alpha_des`; positive means too slippery.
pub fn control_error(alpha: f64, cal: &SlipCalibration) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha - cal.alpha_des)
}

/// Correction `K e_r`; a positive error closes every finger.
pub fn reactive_correction(e_r: f64, gain: &ReactiveGain) -> [f64; FINGERS] {
    gain.k.map(|k| k * e_r)
}

/// `u_p + u_r`, saturated into the motor bounds.
pub fn combine(u_p: &Control, u_r: &[f64; FINGERS], bounds: &[MotorRange; FINGERS]) -> Control {
    let mut motors = [0.0; FINGERS];
    for i in 0..FINGERS {
        motors[i] = bounds[i].clamp(u_p.motors[i] + u_r[i]);
    }
    Control { motors }
}

/// `|e_r|`.
pub fn reactive_pseudoenergy(e_r: f64) -> f64 {
    e_r.abs()
}

/// Pseudoenergy above which a tick counts as a reflex intervention.
pub const INTERVENTION_THRESHOLD: f64 = 0.25;

/// Number of entries strictly above `threshold`.
pub fn count_interventions<I: IntoIterator<Item = f64>>(pseudoenergies: I, threshold: f64) -> usize {
    pseudoenergies.into_iter().filter(|e| *e > threshold).count()
}

/// Knobs of [`calibrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// `alpha_des = firm_threshold - margin`.
    pub margin: f64,
    /// Thresholds are rounded to this resolution.
    pub resolution: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { margin: 0.05, resolution: 0.01 }
    }
}

pub fn calibrate(samples: &[LabeledForceSample], force_scale: f64) -> Result<SlipCalibration> {
    calibrate_with(samples, force_scale, CalibrationOptions::default())
}

/// Places each threshold midway between the extreme slipping coefficients of
/// the two adjacent classes.
pub fn calibrate_with(
    samples: &[LabeledForceSample],
    force_scale: f64,
    opts: CalibrationOptions,
) -> Result<SlipCalibration> {
    let mut by_class: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for s in samples {
        if s.forces.iter().any(|f| *f < 0.0) {
            return Err(Error::Calibration(format!("negative force in sample {:?}", s.forces)));
        }
        let alpha = slipping_coefficient(&s.forces, force_scale)?;
        by_class[class_index(s.label)].push(alpha);
    }
    let names = ["firmly_held", "not_firmly_held", "slipped"];
    for (i, v) in by_class.iter().enumerate() {
        if v.len() < 2 {
            return Err(Error::Calibration(format!(
                "class {} has {} samples, need at least 2",
                names[i],
                v.len()
            )));
        }
    }
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut thresholds = [0.0; 2];
    for (t, (lower, upper)) in thresholds.iter_mut().zip([(0, 1), (1, 2)]) {
        let top = hi(&by_class[lower]);
        let bottom = lo(&by_class[upper]);
        if top >= bottom {
            return Err(Error::Calibration(overlap_message(names[lower], names[upper], top, bottom)));
        }
        *t = snap(0.5 * (top + bottom), opts.resolution);
    }
    let cal = SlipCalibration {
        alpha_des: snap(thresholds[0] - opts.margin, opts.resolution),
        firm_threshold: thresholds[0],
        slip_threshold: thresholds[1],
        force_scale,
    };
    cal.validate().map_err(|e| Error::Calibration(format!("{e}")))?;
    Ok(cal)
}

fn overlap_message(lower: &str, upper: &str, top: f64, bottom: f64) -> String {
    format!(
        "classes {lower} and {upper} overlap: max alpha of {lower} is {top:.4}, min alpha of {upper} is {bottom:.4}"
    )
}

fn class_index(c: SlipClass) -> usize {
    match c {
        SlipClass::FirmlyHeld => 0,
        SlipClass::NotFirmlyHeld => 1,
        SlipClass::Slipped => 2,
    }
}

fn snap(x: f64, resolution: f64) -> f64 {
    if resolution > 0.0 {
        let steps = math::round(x / resolution);
        // Divide by the reciprocal count so that e.g. 30 steps of 0.01 land on
        // the literal 0.3 rather than 30 * 0.01.
        steps / math::round(1.0 / resolution)
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn cal() -> SlipCalibration {
        SlipCalibration::default()
    }

    #[test]
    fn coefficient_closed_forms() {
        assert_eq!(slipping_coefficient(&[0.0; 3], 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            slipping_coefficient(&[2.0; 3], 1.0).unwrap(),
            math::exp(-12.0),
            max_relative = 1e-15
        );
        // Inverse of alpha = 0.25: ‖f‖ = sqrt(ln 4).
        let r = math::sqrt(math::ln(4.0));
        assert_relative_eq!(slipping_coefficient(&[r, 0.0, 0.0], 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(r, 1.177_410_022_515_474_7, epsilon = 1e-12);
        // Scaling forces and scale together is invariant.
        assert_relative_eq!(
            slipping_coefficient(&[2.0, 4.0, 0.0], 2.0).unwrap(),
            slipping_coefficient(&[1.0, 2.0, 0.0], 1.0).unwrap()
        );
    }

    #[test]
    fn coefficient_rejects_bad_input() {
        assert!(matches!(slipping_coefficient(&[f64::NAN, 0.0, 0.0], 1.0), Err(Error::Numeric(_))));
        assert!(slipping_coefficient(&[1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn classes_use_half_open_intervals() {
        assert_eq!(slip_class(0.1, &cal()).unwrap(), SlipClass::FirmlyHeld);
        assert_eq!(slip_class(0.0, &cal()).unwrap(), SlipClass::FirmlyHeld);
        assert_eq!(slip_class(0.3, &cal()).unwrap(), SlipClass::NotFirmlyHeld);
        assert_eq!(slip_class(0.5, &cal()).unwrap(), SlipClass::NotFirmlyHeld);
        assert_eq!(slip_class(0.7, &cal()).unwrap(), SlipClass::Slipped);
        assert_eq!(slip_class(1.0, &cal()).unwrap(), SlipClass::Slipped);
        assert!(slip_class(1.2, &cal()).is_err());
        assert!(slip_class(-0.1, &cal()).is_err());
    }

    #[test]
    fn error_correction_and_energy() {
        assert_eq!(control_error(0.25, &cal()).unwrap(), 0.0);
        assert_eq!(control_error(1.0, &cal()).unwrap(), 0.75);
        assert_eq!(control_error(0.0, &cal()).unwrap(), -0.25);
        assert_eq!(reactive_correction(0.0, &ReactiveGain::uniform(0.4)), [0.0; 3]);
        let u = reactive_correction(0.5, &ReactiveGain::uniform(0.4));
        assert_eq!(u, [0.2; 3]);
        let open = reactive_correction(-0.25, &ReactiveGain::uniform(0.4));
        assert!(open.iter().all(|v| *v < 0.0));
        assert_relative_eq!(open[0], -0.1);
        assert_eq!(reactive_pseudoenergy(0.0), 0.0);
        assert_eq!(reactive_pseudoenergy(-0.25), 0.25);
    }

    #[test]
    fn pseudoenergy_maximum_over_alpha_grid() {
        // Brute-force extremum of |alpha - 0.25| over [0, 1].
        let max = (0..=10_000)
            .map(|i| reactive_pseudoenergy(control_error(i as f64 / 10_000.0, &cal()).unwrap()))
            .fold(0.0, f64::max);
        assert_relative_eq!(max, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn combine_clamps_into_bounds() {
        let bounds = [MotorRange::new(0.0, 1.0); 3];
        let u_p = Control { motors: [0.5, 0.9, 0.1] };
        assert_eq!(combine(&u_p, &[0.0; 3], &bounds).motors, [0.5, 0.9, 0.1]);
        assert_eq!(combine(&u_p, &[0.2, 0.2, -0.2], &bounds).motors, [0.7, 1.0, 0.0]);
        let over = Control { motors: [2.0, -1.0, 0.5] };
        assert_eq!(combine(&over, &[0.0; 3], &bounds).motors, [1.0, 0.0, 0.5]);
    }

    #[test]
    fn intervention_count() {
        assert_eq!(count_interventions([0.0; 5], INTERVENTION_THRESHOLD), 0);
        assert_eq!(count_interventions([0.3, 0.2, 0.26], INTERVENTION_THRESHOLD), 2);
        assert_eq!(count_interventions([0.25], INTERVENTION_THRESHOLD), 0);
    }

    fn sample_at(alpha: f64, label: SlipClass) -> LabeledForceSample {
        let norm = math::sqrt(-math::ln(alpha));
        let f = norm / math::sqrt(3.0);
        LabeledForceSample { forces: [f; 3], label }
    }

    #[test]
    fn calibrate_separated_clusters() {
        let mut samples = vec![];
        for (a, c) in [
            (0.1, SlipClass::FirmlyHeld),
            (0.5, SlipClass::NotFirmlyHeld),
            (0.9, SlipClass::Slipped),
        ] {
            samples.push(sample_at(a, c));
            samples.push(sample_at(a, c));
        }
        let cal = calibrate(&samples, 1.0).unwrap();
        assert_eq!(cal.firm_threshold, 0.3);
        assert_eq!(cal.slip_threshold, 0.7);
        assert_eq!(cal.alpha_des, 0.25);
    }

    #[test]
    fn calibrate_requires_every_class() {
        let samples = vec![
            sample_at(0.1, SlipClass::FirmlyHeld),
            sample_at(0.15, SlipClass::FirmlyHeld),
            sample_at(0.9, SlipClass::Slipped),
            sample_at(0.95, SlipClass::Slipped),
        ];
        let err = calibrate(&samples, 1.0).unwrap_err();
        assert!(matches!(err, Error::Calibration(ref m) if m.contains("not_firmly_held")));
    }

    #[test]
    fn calibrate_reports_overlap() {
        let samples = vec![
            sample_at(0.1, SlipClass::FirmlyHeld),
            sample_at(0.6, SlipClass::FirmlyHeld),
            sample_at(0.4, SlipClass::NotFirmlyHeld),
            sample_at(0.5, SlipClass::NotFirmlyHeld),
            sample_at(0.9, SlipClass::Slipped),
            sample_at(0.95, SlipClass::Slipped),
        ];
        let err = calibrate(&samples, 1.0).unwrap_err();
        assert!(matches!(err, Error::Calibration(ref m) if m.contains("firmly_held and not_firmly_held")));
    }

    #[test]
    fn class_names_round_trip() {
        for c in [SlipClass::FirmlyHeld, SlipClass::NotFirmlyHeld, SlipClass::Slipped] {
            assert_eq!(SlipClass::parse(c.as_str()), Some(c));
        }
        assert_eq!(SlipClass::parse("Not firmly held"), Some(SlipClass::NotFirmlyHeld));
        assert_eq!(SlipClass::parse("dropped"), None);
    }
}
