//! Discrete-time trajectories of finite-dimensional complex state vectors.
//!
//! A [`Trajectory`] is a uniformly sampled sequence of [`AmplitudeVector`]s.
//! Time integrals over a window become left-rectangle Riemann sums
//! `sum_m |lambda(t_m)|^2 * dt`, so per-sample power is exactly additive.

mod csv_io;
mod generate;

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{read_csv, write_csv};
pub use generate::{generate, GeneratorSpec, MartingaleWalk, PiecewiseSegment, Sign};

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("a trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("characteristic time {t_c} is below the time step {dt}")]
    CharacteristicTimeBelowStep { t_c: f64, dt: f64 },
    #[error("sample {index} has dimension {found}, expected {expected}")]
    RaggedSample { index: usize, expected: usize, found: usize },
    #[error("sample {index} has squared norm {norm_sqr}, outside tolerance {eps}")]
    NotNormalized { index: usize, norm_sqr: f64, eps: f64 },
    #[error("expected {expected} basis labels, got {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("window length {length} exceeds trajectory length {samples}")]
    WindowTooLong { length: usize, samples: usize },
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("window [{start}, {end}) lies outside a trajectory of {samples} samples")]
    WindowOutOfRange { start: usize, end: usize, samples: usize },
    #[error("cannot combine trajectories: {0}")]
    Mismatch(String),
    #[error("invalid generator: {0}")]
    Generator(String),
    #[error("malformed trajectory CSV: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, TrajectoryError>;

/// One state vector, one complex amplitude per basis label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeVector {
    entries: Vec<Complex64>,
    #[serde(default)]
    unnormalized: bool,
}

impl AmplitudeVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self { entries, unnormalized: false }
    }

    /// A vector exempt from the normalization invariant.
    pub fn unnormalized(entries: Vec<Complex64>) -> Self {
        Self { entries, unnormalized: true }
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self::new(entries.iter().map(|&re| Complex64::new(re, 0.0)).collect())
    }

    /// The `k`-th standard basis vector of dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim];
        entries[k] = Complex64::new(1.0, 0.0);
        Self::new(entries)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_flagged_unnormalized(&self) -> bool {
        self.unnormalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Squared magnitudes, the instantaneous power per basis index.
    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|c| c.norm_sqr())
    }

    /// Rescales to unit norm. A zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for c in &mut self.entries {
                *c /= n;
            }
        }
        self.unnormalized = false;
        self
    }

    /// Kronecker product, index `i * dim(other) + j`.
    pub fn kron(&self, other: &Self) -> Self {
        let entries = self
            .entries
            .iter()
            .flat_map(|a| other.entries.iter().map(move |b| a * b))
            .collect();
        Self {
            entries,
            unnormalized: self.unnormalized || other.unnormalized,
        }
    }
}

/// A uniformly sampled evolution `|Y(t)>`, immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dt: f64,
    t_c: f64,
    basis_labels: Vec<String>,
    samples: Vec<AmplitudeVector>,
}

impl Trajectory {
    /// Validates every invariant: shared dimension, `dt > 0`, `t_c >= dt`,
    /// at least two samples and per-sample normalization within `eps_norm`.
    pub fn new(
        dt: f64,
        t_c: f64,
        basis_labels: Vec<String>,
        samples: Vec<AmplitudeVector>,
        eps_norm: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TrajectoryError::InvalidTimeStep(dt));
        }
        if !(t_c >= dt) {
            return Err(TrajectoryError::CharacteristicTimeBelowStep { t_c, dt });
        }
        if samples.len() < 2 {
            return Err(TrajectoryError::TooFewSamples(samples.len()));
        }
        let dim = samples[0].dim();
        if dim == 0 {
            return Err(TrajectoryError::ZeroDimension);
        }
        if basis_labels.len() != dim {
            return Err(TrajectoryError::LabelCount {
                expected: dim,
                found: basis_labels.len(),
            });
        }
        for (index, s) in samples.iter().enumerate() {
            if s.dim() != dim {
                return Err(TrajectoryError::RaggedSample {
                    index,
                    expected: dim,
                    found: s.dim(),
                });
            }
            if !s.unnormalized {
                let norm_sqr = s.norm_sqr();
                if (norm_sqr - 1.0).abs() > eps_norm {
                    return Err(TrajectoryError::NotNormalized { index, norm_sqr, eps: eps_norm });
                }
            }
        }
        Ok(Self { dt, t_c, basis_labels, samples })
    }

    /// Like [`Trajectory::new`] with default labels `"0"`, `"1"`, ...
    pub fn with_default_labels(
        dt: f64,
        t_c: f64,
        samples: Vec<AmplitudeVector>,
        eps_norm: f64,
    ) -> Result<Self> {
        let dim = samples.first().map_or(0, AmplitudeVector::dim);
        Self::new(dt, t_c, default_labels(dim), samples, eps_norm)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[AmplitudeVector] {
        &self.samples
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    /// Sample time `m * dt`.
    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// A copy with the two equal-length sample ranges exchanged.
    pub fn with_swapped(&self, a: Range<usize>, b: Range<usize>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(TrajectoryError::Mismatch(format!(
                "segments {a:?} and {b:?} differ in length"
            )));
        }
        if a.end > self.len() || b.end > self.len() {
            return Err(TrajectoryError::WindowOutOfRange {
                start: a.start.min(b.start),
                end: a.end.max(b.end),
                samples: self.len(),
            });
        }
        if a.start < b.end && b.start < a.end && a != b {
            return Err(TrajectoryError::Mismatch(format!(
                "segments {a:?} and {b:?} overlap"
            )));
        }
        let mut samples = self.samples.clone();
        for (i, j) in a.zip(b) {
            samples.swap(i, j);
        }
        Ok(Self { samples, ..self.clone() })
    }

    /// A copy with samples reordered so that sample `m` of the result is
    /// sample `order[m]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(TrajectoryError::Mismatch("permutation length".into()));
        }
        let mut seen = vec![false; order.len()];
        for &i in order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(TrajectoryError::Mismatch("not a permutation".into()));
            }
        }
        let samples = order.iter().map(|&i| self.samples[i].clone()).collect();
        Ok(Self { samples, ..self.clone() })
    }

    /// Concatenates trajectories sharing `dt` and basis.
    pub fn concat(parts: &[Trajectory]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TrajectoryError::Mismatch("nothing to concatenate".into()))?;
        let mut samples = Vec::new();
        let mut t_c = first.t_c;
        for p in parts {
            if p.dt != first.dt || p.dim() != first.dim() {
                return Err(TrajectoryError::Mismatch("time step or dimension differs".into()));
            }
            t_c = t_c.max(p.t_c);
            samples.extend(p.samples.iter().cloned());
        }
        Ok(Self {
            dt: first.dt,
            t_c,
            basis_labels: first.basis_labels.clone(),
            samples,
        })
    }
}

pub(crate) fn default_labels(dim: usize) -> Vec<String> {
    (0..dim).map(|i| i.to_string()).collect()
}

/// A contiguous block of samples, `Δt = length_samples * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start_index: usize,
    pub length_samples: usize,
}

impl Window {
    pub fn new(start_index: usize, length_samples: usize) -> Self {
        Self { start_index, length_samples }
    }

    pub fn end_index(&self) -> usize {
        self.start_index + self.length_samples
    }

    pub fn range(&self) -> Range<usize> {
        self.start_index..self.end_index()
    }

    pub fn contains_range(&self, r: &Range<usize>) -> bool {
        r.start >= self.start_index && r.end <= self.end_index()
    }

    /// Window duration `Δt` for a trajectory sampled at `dt`.
    pub fn duration(&self, dt: f64) -> f64 {
        self.length_samples as f64 * dt
    }

    pub fn check_inside(&self, traj: &Trajectory) -> Result<()> {
        if self.length_samples == 0 {
            return Err(TrajectoryError::EmptyWindow);
        }
        if self.end_index() > traj.len() {
            return Err(TrajectoryError::WindowOutOfRange {
                start: self.start_index,
                end: self.end_index(),
                samples: traj.len(),
            });
        }
        Ok(())
    }

    /// False when `Δt < kappa * t_c`, i.e. the window does not comfortably
    /// exceed the characteristic time. Callers treat this as a warning.
    pub fn resolves_scale(&self, traj: &Trajectory, kappa: f64) -> bool {
        self.duration(traj.dt()) >= kappa * traj.t_c()
    }
}

/// Maximal sequence of non-overlapping windows tiling the trajectory from
/// sample 0. Trailing samples that do not fill a window are dropped.
pub fn windows(traj: &Trajectory, length_samples: usize) -> Result<Vec<Window>> {
    if length_samples == 0 {
        return Err(TrajectoryError::EmptyWindow);
    }
    if length_samples > traj.len() {
        return Err(TrajectoryError::WindowTooLong {
            length: length_samples,
            samples: traj.len(),
        });
    }
    Ok((0..traj.len() / length_samples)
        .map(|i| Window::new(i * length_samples, length_samples))
        .collect())
}

/// Sample-wise Kronecker product. Labels combine as `"a_i⊗b_j"` in
/// lexicographic order (index `i * dim(b) + j`).
pub fn tensor(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    if a.dt != b.dt {
        return Err(TrajectoryError::Mismatch(format!(
            "time steps differ ({} vs {})",
            a.dt, b.dt
        )));
    }
    if a.len() != b.len() {
        return Err(TrajectoryError::Mismatch(format!(
            "sample counts differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let basis_labels = a
        .basis_labels
        .iter()
        .flat_map(|x| b.basis_labels.iter().map(move |y| format!("{x}⊗{y}")))
        .collect();
    let samples = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.kron(y))
        .collect();
    Ok(Trajectory {
        dt: a.dt,
        t_c: a.t_c.max(b.t_c),
        basis_labels,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(dim: usize, k: usize, n: usize) -> Trajectory {
        Trajectory::with_default_labels(1.0, 1.0, vec![AmplitudeVector::basis(dim, k); n], 1e-9)
            .unwrap()
    }

    #[test]
    fn windows_drop_remainder() {
        let starts = |n, len| -> Vec<usize> {
            windows(&constant(2, 0, n), len)
                .unwrap()
                .iter()
                .map(|w| w.start_index)
                .collect()
        };
        assert_eq!(starts(10, 3), vec![0, 3, 6]);
        assert_eq!(starts(9, 3), vec![0, 3, 6]);
        assert_eq!(starts(5, 5), vec![0]);
    }

    #[test]
    fn window_errors() {
        let t = constant(2, 0, 5);
        assert_eq!(
            windows(&t, 6),
            Err(TrajectoryError::WindowTooLong { length: 6, samples: 5 })
        );
        assert_eq!(windows(&t, 0), Err(TrajectoryError::EmptyWindow));
        assert!(Window::new(3, 3).check_inside(&t).is_err());
    }

    #[test]
    fn scale_warning() {
        let t = Trajectory::with_default_labels(
            0.1,
            1.0,
            vec![AmplitudeVector::basis(2, 0); 200],
            1e-9,
        )
        .unwrap();
        assert!(Window::new(0, 100).resolves_scale(&t, 10.0));
        assert!(!Window::new(0, 99).resolves_scale(&t, 10.0));
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let t = tensor(&constant(2, 0, 3), &constant(2, 1, 3)).unwrap();
        for s in t.samples() {
            let re: Vec<f64> = s.entries().iter().map(|c| c.re).collect();
            assert_eq!(re, vec![0.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn tensor_labels_are_lexicographic() {
        let a = constant(2, 0, 2);
        let b = constant(3, 0, 2);
        let t = tensor(&a, &b).unwrap();
        assert_eq!(t.dim(), 6);
        assert_eq!(
            t.basis_labels(),
            ["0⊗0", "0⊗1", "0⊗2", "1⊗0", "1⊗1", "1⊗2"]
        );
    }

    #[test]
    fn tensor_mismatch() {
        let a = constant(2, 0, 3);
        let b = constant(2, 0, 4);
        assert!(matches!(tensor(&a, &b), Err(TrajectoryError::Mismatch(_))));
        let c = Trajectory::with_default_labels(2.0, 2.0, vec![AmplitudeVector::basis(2, 0); 3], 1e-9)
            .unwrap();
        assert!(matches!(tensor(&a, &c), Err(TrajectoryError::Mismatch(_))));
    }

    #[test]
    fn construction_invariants() {
        let s = vec![AmplitudeVector::basis(2, 0); 2];
        assert_eq!(
            Trajectory::with_default_labels(0.0, 1.0, s.clone(), 1e-9),
            Err(TrajectoryError::InvalidTimeStep(0.0))
        );
        assert!(matches!(
            Trajectory::with_default_labels(1.0, 0.5, s.clone(), 1e-9),
            Err(TrajectoryError::CharacteristicTimeBelowStep { .. })
        ));
        assert_eq!(
            Trajectory::with_default_labels(1.0, 1.0, s[..1].to_vec(), 1e-9),
            Err(TrajectoryError::TooFewSamples(1))
        );
        let bad = vec![AmplitudeVector::from_real(&[1.0, 1.0]); 2];
        assert!(matches!(
            Trajectory::with_default_labels(1.0, 1.0, bad.clone(), 1e-9),
            Err(TrajectoryError::NotNormalized { index: 0, .. })
        ));
        let flagged = bad
            .into_iter()
            .map(|v| AmplitudeVector::unnormalized(v.entries().to_vec()))
            .collect();
        assert!(Trajectory::with_default_labels(1.0, 1.0, flagged, 1e-9).is_ok());
        let ragged = vec![AmplitudeVector::basis(2, 0), AmplitudeVector::basis(3, 0)];
        assert!(matches!(
            Trajectory::with_default_labels(1.0, 1.0, ragged, 1e-9),
            Err(TrajectoryError::RaggedSample { index: 1, .. })
        ));
    }

    #[test]
    fn swap_rejects_overlap_and_ragged() {
        let t = constant(2, 0, 10);
        assert!(t.with_swapped(0..3, 2..5).is_err());
        assert!(t.with_swapped(0..3, 5..7).is_err());
        assert!(t.with_swapped(0..3, 5..8).is_ok());
        assert!(t.with_swapped(0..3, 8..11).is_err());
    }
}
