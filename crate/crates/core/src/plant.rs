//! Ground-truth simulator of a three-finger underactuated hand holding an
//! object that can be re-oriented about its yaw axis.
//!
//! The model is deliberately small:
//!
//! * each motor command is saturated into its interval and each finger
//!   pushes with `clamp(force_gain · (u_i − c_i(φ)), 0, f_max)`, where
//!   `c_i(φ)` is the contact position, which moves inwards as the object
//!   turns away from its grasp orientation;
//! * the thumb opposes index and middle: the squeeze is the smaller of the
//!   thumb push and the summed finger push, split between index and middle
//!   in proportion to their pushes, and the measured forces relax towards
//!   it with a first-order lag;
//! * the yaw tracks `φ_ref + rotation_gain · (D − D_grasp)`, with `D` the
//!   thumb position minus the mean of index and middle; outside the firmly
//!   held class the tracking weakens with grip quality and the object sags
//!   by `slip_drift_rate` per tick;
//! * consecutive ticks outside the firmly held class are counted, and the
//!   object falls once the count exceeds the current class's fall time.
//!
//! Zero-mean Gaussian noise with `process_noise_std` is added to yaw and
//! forces on every tick.

use alloc::format;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::reactive::{slip_class, slipping_coefficient, SlipCalibration, SlipClass};
use crate::seed::{self, Rng};
use crate::FINGERS;

pub const THUMB: usize = 0;
pub const INDEX: usize = 1;
pub const MIDDLE: usize = 2;

/// Dimension of the full observation `(yaw, f1, f2, f3)`.
pub const STATE_DIM: usize = 1 + FINGERS;

/// Closed interval of admissible motor positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorRange {
    pub lo: f64,
    pub hi: f64,
}

impl MotorRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, u: f64) -> f64 {
        math::clamp(u, self.lo, self.hi)
    }

    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Motor position targets, thumb first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub motors: [f64; FINGERS],
}

impl Control {
    pub fn new(motors: [f64; FINGERS]) -> Self {
        Self { motors }
    }

    /// Thumb position minus the mean of index and middle.
    pub fn differential(&self) -> f64 {
        differential(&self.motors)
    }
}

#[inline]
pub fn differential(motors: &[f64; FINGERS]) -> f64 {
    motors[THUMB] - 0.5 * (motors[INDEX] + motors[MIDDLE])
}

/// The observation available to the learner: yaw (rad) and fingertip
/// normal forces (N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub yaw: f64,
    pub forces: [f64; FINGERS],
}

impl State {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.yaw, self.forces[0], self.forces[1], self.forces[2]]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { yaw: x[0], forces: [x[1], x[2], x[3]] }
    }

    pub fn is_finite(&self) -> bool {
        self.yaw.is_finite() && self.forces.iter().all(|f| f.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    None,
    Fell,
}

/// Parameters of the simulated hand/object pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Motor position at which each fingertip touches the object at grasp time.
    pub contact_positions: [f64; FINGERS],
    pub motor_bounds: [MotorRange; FINGERS],
    /// N per motor unit of closure beyond contact.
    pub force_gain: f64,
    /// N.
    pub force_saturation: f64,
    /// Fraction of the gap to the static force closed per tick.
    pub force_rate: f64,
    /// rad of yaw per motor unit of differential motion.
    pub rotation_gain: f64,
    /// Fraction of the gap to the target yaw closed per tick when firmly held.
    pub yaw_rate: f64,
    /// Inward motion of each contact position per rad of |yaw − grasp yaw|.
    pub contact_yaw_coupling: f64,
    /// rad/tick of sag while not firmly held.
    pub slip_drift_rate: f64,
    /// Consecutive not-firmly-held ticks tolerated before the object falls.
    pub slip_fall_ticks: u32,
    /// Consecutive slipped ticks tolerated before the object falls.
    pub quick_fall_ticks: u32,
    /// Std of the additive noise on (yaw, f1, f2, f3).
    pub process_noise_std: [f64; STATE_DIM],
    /// Seconds per tick.
    pub tick_duration: f64,
    /// Closure beyond contact applied by `reset`.
    pub grip_offset: f64,
    /// Class boundaries the object actually obeys.
    pub slip_classes: SlipCalibration,
    #[serde(with = "crate::seed::text")]
    pub rng_seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        let contact = 0.3;
        Self {
            contact_positions: [contact; FINGERS],
            motor_bounds: [MotorRange::new(contact, contact + 0.8); FINGERS],
            force_gain: 10.0,
            force_saturation: 3.0,
            force_rate: 0.02,
            rotation_gain: 4.0,
            yaw_rate: 0.3,
            contact_yaw_coupling: 0.3,
            slip_drift_rate: 0.002,
            slip_fall_ticks: 300,
            quick_fall_ticks: 25,
            process_noise_std: [0.002, 0.005, 0.005, 0.005],
            tick_duration: 0.01,
            grip_offset: 0.24,
            slip_classes: SlipCalibration::default(),
            rng_seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("plant: {m}")));
        for i in 0..FINGERS {
            let b = self.motor_bounds[i];
            if !(b.lo <= b.hi) || !b.lo.is_finite() || !b.hi.is_finite() {
                return bad(&format!("finger {i} has an empty motor interval {b:?}"));
            }
            if !b.contains(self.contact_positions[i]) {
                return bad(&format!("finger {i} contact position lies outside its motor bounds"));
            }
        }
        if !(self.force_gain > 0.0 && self.force_saturation > 0.0 && self.rotation_gain > 0.0) {
            return bad("force_gain, force_saturation and rotation_gain must be positive");
        }
        if !(self.force_rate > 0.0 && self.force_rate <= 1.0) || !(self.yaw_rate > 0.0 && self.yaw_rate <= 1.0) {
            return bad("force_rate and yaw_rate must lie in (0, 1]");
        }
        if self.process_noise_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("noise std must be finite and non-negative");
        }
        if self.contact_yaw_coupling < 0.0 || self.slip_drift_rate < 0.0 || self.grip_offset < 0.0 {
            return bad("coupling, drift and grip offset must be non-negative");
        }
        if !(self.slip_fall_ticks > self.quick_fall_ticks && self.quick_fall_ticks > 0) {
            return bad("need slip_fall_ticks > quick_fall_ticks > 0");
        }
        if !(self.tick_duration > 0.0) {
            return bad("tick_duration must be positive");
        }
        self.slip_classes.validate()
    }

    /// Ticks spanning `seconds` of simulated time.
    pub fn ticks_for(&self, seconds: f64) -> usize {
        math::round(seconds / self.tick_duration) as usize
    }

    fn grasp_closure(&self) -> [f64; FINGERS] {
        core::array::from_fn(|i| self.motor_bounds[i].clamp(self.contact_positions[i] + self.grip_offset))
    }

    /// Push of one finger against the object, ignoring the opposite side.
    fn push(&self, finger: usize, u: f64, yaw_offset: f64) -> f64 {
        let contact = self.contact_positions[finger] + self.contact_yaw_coupling * yaw_offset.abs();
        math::clamp(self.force_gain * (u - contact), 0.0, self.force_saturation)
    }

    /// Steady contact forces. The thumb opposes index and middle, so the
    /// squeeze is the weaker of the two sides; the stronger side only turns
    /// the object.
    fn static_forces(&self, u: &[f64; FINGERS], yaw_offset: f64) -> [f64; FINGERS] {
        let push: [f64; FINGERS] = core::array::from_fn(|i| self.push(i, u[i], yaw_offset));
        let fingers = push[INDEX] + push[MIDDLE];
        let squeeze = push[THUMB].min(fingers);
        let share = if fingers > 0.0 { squeeze / fingers } else { 0.0 };
        [squeeze, push[INDEX] * share, push[MIDDLE] * share]
    }
}

/// Full hidden state of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub yaw: f64,
    pub forces: [f64; FINGERS],
    pub closure: [f64; FINGERS],
    pub slip_timer: u32,
    pub fallen: bool,
    /// Class of the currently emitted forces.
    pub class: SlipClass,
    /// Yaw the object would settle at with the grasp-time differential;
    /// sags while the grip slips.
    pub yaw_reference: f64,
    pub grasp_yaw: f64,
    pub grasp_differential: f64,
}

/// A seeded simulator instance.
#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    state: PlantState,
    rng: Rng,
    ticks: u64,
}

impl Plant {
    /// Grasps the object at `initial_yaw` with the default grip offset.
    pub fn reset(config: PlantConfig, initial_yaw: f64) -> Result<Self> {
        config.validate()?;
        if !initial_yaw.is_finite() {
            return Err(Error::Domain(format!("initial yaw {initial_yaw} is not finite")));
        }
        let closure = config.grasp_closure();
        let forces = config.static_forces(&closure, 0.0);
        let alpha = slipping_coefficient(&forces, config.slip_classes.force_scale)?;
        let class = slip_class(alpha, &config.slip_classes)?;
        if class != SlipClass::FirmlyHeld {
            return Err(Error::Config(format!(
                "plant: grip offset {} does not hold the object (alpha = {alpha:.3})",
                config.grip_offset
            )));
        }
        let state = PlantState {
            yaw: initial_yaw,
            forces,
            closure,
            slip_timer: 0,
            fallen: false,
            class,
            yaw_reference: initial_yaw,
            grasp_yaw: initial_yaw,
            grasp_differential: differential(&closure),
        };
        let rng = seed::rng(config.rng_seed);
        Ok(Self { config, state, rng, ticks: 0 })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Closure applied at grasp time.
    pub fn grasp_command(&self) -> Control {
        Control { motors: self.config.grasp_closure() }
    }

    pub fn observe(&self) -> State {
        State { yaw: self.state.yaw, forces: self.state.forces }
    }

    /// Slipping coefficient of the current forces.
    pub fn alpha(&self) -> f64 {
        // Forces are kept finite and non-negative, so this cannot fail.
        slipping_coefficient(&self.state.forces, self.config.slip_classes.force_scale).unwrap_or(1.0)
    }

    /// Advances one tick under `command`.
    pub fn step(&mut self, command: &Control) -> Result<Event> {
        if self.state.fallen {
            return Err(Error::Irreversible);
        }
        if !command.motors.iter().all(|u| u.is_finite()) {
            return Err(Error::Numeric(format!("non-finite motor command {:?}", command.motors)));
        }
        let cfg = &self.config;
        let st = &mut self.state;
        let u: [f64; FINGERS] = core::array::from_fn(|i| cfg.motor_bounds[i].clamp(command.motors[i]));
        st.closure = u;

        let cal = &cfg.slip_classes;
        let alpha = slipping_coefficient(&st.forces, cal.force_scale)?;
        let quality = match st.class {
            SlipClass::FirmlyHeld => 1.0,
            SlipClass::NotFirmlyHeld => {
                math::clamp((cal.slip_threshold - alpha) / (cal.slip_threshold - cal.firm_threshold), 0.0, 1.0)
            }
            SlipClass::Slipped => 0.0,
        };
        let yaw_offset = st.yaw - st.grasp_yaw;
        let target = st.yaw_reference + cfg.rotation_gain * (differential(&u) - st.grasp_differential);
        let mut yaw = st.yaw + quality * cfg.yaw_rate * (target - st.yaw);
        if st.class != SlipClass::FirmlyHeld {
            st.yaw_reference -= cfg.slip_drift_rate;
            yaw -= cfg.slip_drift_rate;
        }

        let mut forces = st.forces;
        let target_forces = cfg.static_forces(&u, yaw_offset);
        for (f, target) in forces.iter_mut().zip(target_forces) {
            *f += cfg.force_rate * (target - *f);
        }

        let noise = &cfg.process_noise_std;
        let mut z = || -> f64 { StandardNormal.sample(&mut self.rng) };
        yaw += noise[0] * z();
        for (i, f) in forces.iter_mut().enumerate() {
            *f = math::clamp(*f + noise[i + 1] * z(), 0.0, cfg.force_saturation);
        }

        st.yaw = yaw;
        st.forces = forces;
        st.class = slip_class(slipping_coefficient(&forces, cal.force_scale)?, cal)?;
        st.slip_timer = match st.class {
            SlipClass::FirmlyHeld => 0,
            _ => st.slip_timer.saturating_add(1),
        };
        let limit = match st.class {
            SlipClass::FirmlyHeld => u32::MAX,
            SlipClass::NotFirmlyHeld => cfg.slip_fall_ticks,
            SlipClass::Slipped => cfg.quick_fall_ticks,
        };
        self.ticks += 1;
        if st.slip_timer > limit {
            st.fallen = true;
            Ok(Event::Fell)
        } else {
            Ok(Event::None)
        }
    }
}
