//! Arrays of independent subsystems projected one at a time.
//!
//! For `M` uncoupled spins the joint power spectrum factorizes, so the array
//! quasi-state in a window is the collection of per-spin quasi-components.
//! Its dimension `N` counts the spins that carry one.

use serde::{Deserialize, Serialize};

use super::{q_general, QuasiState, Result};
use crate::config::Thresholds;
use crate::trajectory::{Trajectory, TrajectoryError, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayWindow {
    pub window: Window,
    /// One entry per subsystem, `None` where it projects to zero.
    pub members: Vec<Option<QuasiState>>,
}

impl ArrayWindow {
    pub fn dimension(&self) -> usize {
        self.members.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_null(&self) -> bool {
        self.dimension() == 0
    }

    /// Subsystems contributing a quasi-component.
    pub fn contributing(&self) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|_| i))
            .collect()
    }
}

pub fn project_array(
    members: &[Trajectory],
    window_len: usize,
    thresholds: &Thresholds,
) -> Result<Vec<ArrayWindow>> {
    let Some(first) = members.first() else {
        return Ok(Vec::new());
    };
    if members.iter().any(|m| m.len() != first.len() || m.dt() != first.dt()) {
        return Err(TrajectoryError::Mismatch("array members differ in length or time step".into()).into());
    }
    let per_member = members
        .iter()
        .map(|m| q_general(m, window_len, thresholds))
        .collect::<Result<Vec<_>>>()?;
    let n_windows = per_member[0].len();
    Ok((0..n_windows)
        .map(|w| ArrayWindow {
            window: Window::new(w * window_len, window_len),
            members: per_member.iter().map(|seq| seq[w].clone()).collect(),
        })
        .collect())
}
