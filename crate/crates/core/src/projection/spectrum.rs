use serde::{Deserialize, Serialize};

use super::{ProjectionError, Result};
use crate::trajectory::{Trajectory, Window};

/// Integrated power per basis index over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub window: Window,
    pub per_basis_power: Vec<f64>,
    pub total_power: f64,
}

impl PowerSpectrum {
    /// Wraps precomputed powers, e.g. the grouped pointer powers of a chain.
    pub fn from_powers(window: Window, per_basis_power: Vec<f64>) -> Result<Self> {
        if per_basis_power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(ProjectionError::InvalidSpectrum(
                "powers must be finite and non-negative".into(),
            ));
        }
        let total_power = per_basis_power.iter().sum();
        Ok(Self { window, per_basis_power, total_power })
    }

    pub fn dim(&self) -> usize {
        self.per_basis_power.len()
    }

    pub fn power(&self, k: usize) -> f64 {
        self.per_basis_power[k]
    }

    /// Per-basis power divided by the total; all zeros for an empty window.
    pub fn fractions(&self) -> Vec<f64> {
        if self.total_power > 0.0 {
            self.per_basis_power.iter().map(|p| p / self.total_power).collect()
        } else {
            vec![0.0; self.dim()]
        }
    }
}

/// `per_basis_power[k] = sum_{m in w} |lambda_k(t_m)|^2 * dt`.
///
/// The per-sample terms are summed in ascending order, which makes the
/// result bit-for-bit invariant under any reordering of samples inside the
/// window.
pub fn power_spectrum(traj: &Trajectory, w: Window) -> Result<PowerSpectrum> {
    w.check_inside(traj)?;
    let samples = &traj.samples()[w.range()];
    let mut column = Vec::with_capacity(samples.len());
    let per_basis_power = (0..traj.dim())
        .map(|k| {
            column.clear();
            column.extend(samples.iter().map(|s| s.entries()[k].norm_sqr()));
            column.sort_unstable_by(f64::total_cmp);
            column.iter().sum::<f64>() * traj.dt()
        })
        .collect();
    PowerSpectrum::from_powers(w, per_basis_power)
}
