//! Deterministic reference data.

use alloc::vec::Vec;

use crate::math;
use crate::reactive::{LabeledForceSample, SlipClass};

/// Fifty labeled tactile readings (force scale 1). Firm grips span
/// `alpha ∈ [0.02, 0.28]`, loose ones `[0.32, 0.66]`, slipped ones
/// `[0.74, 0.98]`, so calibration yields thresholds `0.3` / `0.7` and
/// `alpha_des = 0.25`.
pub fn calibration_samples() -> Vec<LabeledForceSample> {
    // Unnormalized force directions, cycled through.
    const DIRS: [[f64; 3]; 5] =
        [[1.0, 1.0, 1.0], [2.0, 1.0, 1.0], [1.0, 0.8, 1.2], [1.5, 1.0, 0.5], [0.9, 1.1, 1.0]];
    let groups = [
        (SlipClass::FirmlyHeld, 20, 0.02, 0.28),
        (SlipClass::NotFirmlyHeld, 15, 0.32, 0.66),
        (SlipClass::Slipped, 15, 0.74, 0.98),
    ];
    let mut out = Vec::with_capacity(50);
    let mut k = 0;
    for (label, n, lo, hi) in groups {
        for i in 0..n {
            let alpha = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let radius = math::sqrt(-math::ln(alpha));
            let d = DIRS[k % DIRS.len()];
            let norm = math::sqrt(math::norm_sq(&d));
            out.push(LabeledForceSample { forces: d.map(|c| radius * c / norm), label });
            k += 1;
        }
    }
    out
}
