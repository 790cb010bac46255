//! Numerical thresholds shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

/// Thresholds and tolerances. Every output file stamps the values used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Dominance ratio a single component must reach in the one-component projection.
    pub theta: f64,
    /// Strict lower bound on the dominance ratio of every quasi-component.
    pub alpha_min: f64,
    /// Infinite ratios are clamped to this value before dispersion is computed.
    pub alpha_cap: f64,
    /// Normalization tolerance for amplitude vectors.
    pub eps_norm: f64,
    /// Windows shorter than `kappa * t_c` trigger a scale warning.
    pub kappa: f64,
    /// Largest dimension handled by exhaustive partition search.
    pub brute_force_limit: usize,
    /// Decimal digits kept when quasi-states are turned into identifiers.
    pub quantization: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta: 2.0,
            alpha_min: 1.0,
            alpha_cap: 1e6,
            eps_norm: 1e-9,
            kappa: 10.0,
            brute_force_limit: 12,
            quantization: 6,
        }
    }
}
