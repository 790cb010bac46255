//! Amplifying projections.
//!
//! A window of a trajectory is reduced to its integrated power per basis
//! index. The one-component projection keeps the single index whose power
//! dominates all others by a ratio of at least `theta`. The generalized
//! projection looks for blocks of basis indices, each dominated by one
//! member, and keeps the maximal such set of quasi-components. Windows with
//! no dominant structure project to the null vector, represented as `None`.

mod array;
mod partition;
mod spectrum;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Thresholds;
use crate::trajectory::{windows, Trajectory, TrajectoryError, Window};

pub use array::{project_array, ArrayWindow};
pub use partition::{
    enumerate_partitions, greedy_partition, select_maximal, Block, Partition, Selection,
    TieReport, ALPHA_RTOL, DISPERSION_TIE_RTOL,
};
pub use spectrum::{power_spectrum, PowerSpectrum};

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("dimension {dim} exceeds the brute-force limit {limit}; use the greedy search")]
    DimensionAboveLimit { dim: usize, limit: usize },
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid power spectrum: {0}")]
    InvalidSpectrum(String),
}

pub type Result<T> = std::result::Result<T, ProjectionError>;

/// One dominant basis index and its weight `beta_i = sqrt(integrated power)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiComponent {
    pub index: usize,
    pub weight: f64,
    /// Dominance ratio achieved within `subset`.
    pub alpha: f64,
    pub subset: Vec<usize>,
}

/// Normalized sum of quasi-components for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiState {
    pub window: Window,
    /// Sorted by basis index.
    pub components: Vec<QuasiComponent>,
    /// `beta = sqrt(sum_i beta_i^2)`.
    pub beta: f64,
    pub dispersion: f64,
    /// Some ratio was clamped to `alpha_cap` before the dispersion was taken.
    pub clamped: bool,
    pub tie: Option<TieReport>,
}

impl QuasiState {
    fn build(
        window: Window,
        spectrum: &PowerSpectrum,
        blocks: &[Block],
        dispersion: f64,
        clamped: bool,
        tie: Option<TieReport>,
    ) -> Self {
        let mut components: Vec<QuasiComponent> = blocks
            .iter()
            .map(|b| QuasiComponent {
                index: b.dominant,
                weight: spectrum.power(b.dominant).sqrt(),
                alpha: b.alpha,
                subset: b.indices.clone(),
            })
            .collect();
        components.sort_by_key(|c| c.index);
        let beta = components.iter().map(|c| c.weight * c.weight).sum::<f64>().sqrt();
        Self { window, components, beta, dispersion, clamped, tie }
    }

    /// Dimension `N`.
    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.index).collect()
    }

    /// `(beta_i / beta)` for every component; their squares sum to one.
    pub fn normalized_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight / self.beta).collect()
    }
}

/// Single-component projection.
///
/// For each index `r_k = p_k / sum_{j != k} p_j`; when the largest ratio is
/// at least `theta` the window projects onto that index, with stored weight
/// `sqrt(p_k)`. An index with all competitors at zero power has `r_k = inf`.
pub fn q_single(traj: &Trajectory, w: Window, theta: f64) -> Result<Option<QuasiState>> {
    if !(theta > 0.0) {
        return Err(ProjectionError::InvalidThreshold(theta));
    }
    let spectrum = power_spectrum(traj, w)?;
    Ok(q_single_spectrum(&spectrum, theta))
}

pub(crate) fn q_single_spectrum(spectrum: &PowerSpectrum, theta: f64) -> Option<QuasiState> {
    if spectrum.total_power <= 0.0 {
        return None;
    }
    let p = &spectrum.per_basis_power;
    let ratio = |k: usize| {
        let rest: f64 = p.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x).sum();
        if rest > 0.0 {
            p[k] / rest
        } else if p[k] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let (k, r) = (0..p.len())
        .map(|k| (k, ratio(k)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if r < theta {
        return None;
    }
    let block = Block { indices: (0..p.len()).collect(), dominant: k, alpha: r };
    Some(QuasiState::build(spectrum.window, spectrum, &[block], 0.0, false, None))
}

/// The maximal quasi-state of one spectrum, by exhaustive search when the
/// dimension allows it and by [`greedy_partition`] otherwise.
pub fn maximal_from_spectrum(
    spectrum: &PowerSpectrum,
    thresholds: &Thresholds,
) -> Result<Option<QuasiState>> {
    if spectrum.dim() > thresholds.brute_force_limit {
        return Ok(greedy_partition(spectrum, thresholds.alpha_min).map(|p| {
            let (d, clamped) = p.dispersion(thresholds.alpha_cap);
            QuasiState::build(spectrum.window, spectrum, &p.blocks, d, clamped, None)
        }));
    }
    let sel = select_maximal(
        spectrum,
        thresholds.alpha_min,
        thresholds.alpha_cap,
        thresholds.brute_force_limit,
    )?;
    Ok(sel.map(|s| {
        QuasiState::build(
            spectrum.window,
            spectrum,
            &s.partition.blocks,
            s.dispersion,
            s.clamped,
            s.tie,
        )
    }))
}

/// The maximal quasi-state of `traj` over `w`, exhaustive search only.
pub fn maximal_quasi_state(
    traj: &Trajectory,
    w: Window,
    thresholds: &Thresholds,
) -> Result<Option<QuasiState>> {
    let spectrum = power_spectrum(traj, w)?;
    if spectrum.dim() > thresholds.brute_force_limit {
        return Err(ProjectionError::DimensionAboveLimit {
            dim: spectrum.dim(),
            limit: thresholds.brute_force_limit,
        });
    }
    maximal_from_spectrum(&spectrum, thresholds)
}

/// Generalized projection over every non-overlapping window, in order.
/// Windows are evaluated in parallel; the output order is the window order.
pub fn q_general(
    traj: &Trajectory,
    window_len: usize,
    thresholds: &Thresholds,
) -> Result<Vec<Option<QuasiState>>> {
    windows(traj, window_len)?
        .into_par_iter()
        .map(|w| maximal_from_spectrum(&power_spectrum(traj, w)?, thresholds))
        .collect()
}
