//! Einselected measurement chains and Born-rule statistics for pointer
//! quasi-states.
//!
//! A [`JointChain`] holds one amplitude trace per einselected sector
//! (standing for `|s_k>|a_k>|e_k>|o_k>`) and a map from sectors to apparatus
//! pointers, pointer 0 being the null reading. The probability that pointer
//! `i` is reported over a window is the grouped integrated power of its
//! sectors divided by the window duration.

mod counter;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

use crate::projection::{power_spectrum, Block, PowerSpectrum, ProjectionError, QuasiComponent, QuasiState};
use crate::trajectory::{AmplitudeVector, MartingaleWalk, Trajectory, TrajectoryError, Window};

pub use counter::{fine_grain, rationalize, CounterAssignment};

#[derive(Debug, Error, PartialEq)]
pub enum BornError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("prepared coefficients have squared norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("pointer map covers {covered} of {sectors} sectors")]
    UncoveredSector { covered: usize, sectors: usize },
    #[error("sector {sector} maps to pointer {pointer}, but only {count} pointers exist")]
    PointerOutOfRange { sector: usize, pointer: usize, count: usize },
    #[error("invalid swap segments: {0}")]
    Segments(String),
    #[error("counter assignment: {0}")]
    Counter(String),
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, BornError>;

/// `|S> = sum_k xi_k |s_k>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSystem {
    coefficients: Vec<Complex64>,
    labels: Vec<String>,
}

impl PreparedSystem {
    pub fn new(coefficients: Vec<Complex64>, labels: Vec<String>, eps_norm: f64) -> Result<Self> {
        let n: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if coefficients.is_empty() || (n - 1.0).abs() > eps_norm {
            return Err(BornError::NotNormalized(n));
        }
        if labels.len() != coefficients.len() {
            return Err(TrajectoryError::LabelCount {
                expected: coefficients.len(),
                found: labels.len(),
            }
            .into());
        }
        Ok(Self { coefficients, labels })
    }

    /// Real non-negative coefficients `sqrt(p_k)`, labels `s0, s1, ...`.
    pub fn from_powers(powers: &[f64], eps_norm: f64) -> Result<Self> {
        let coefficients = powers.iter().map(|p| Complex64::new(p.max(0.0).sqrt(), 0.0)).collect();
        let labels = (0..powers.len()).map(|k| format!("s{k}")).collect();
        Self::new(coefficients, labels, eps_norm)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn powers(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Sector index to pointer index. Pointer 0 always exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointerMap {
    sector_to_pointer: Vec<usize>,
    pointer_count: usize,
}

impl PointerMap {
    /// `pointer_count` includes the null pointer 0.
    pub fn new(sector_to_pointer: Vec<usize>, pointer_count: usize) -> Result<Self> {
        let pointer_count = pointer_count.max(1);
        for (sector, &pointer) in sector_to_pointer.iter().enumerate() {
            if pointer >= pointer_count {
                return Err(BornError::PointerOutOfRange { sector, pointer, count: pointer_count });
            }
        }
        Ok(Self { sector_to_pointer, pointer_count })
    }

    /// Sector `k` reads out as pointer `k + 1`; pointer 0 stays unused.
    pub fn one_to_one(sectors: usize) -> Self {
        Self {
            sector_to_pointer: (1..=sectors).collect(),
            pointer_count: sectors + 1,
        }
    }

    pub fn pointer(&self, sector: usize) -> usize {
        self.sector_to_pointer[sector]
    }

    pub fn pointer_count(&self) -> usize {
        self.pointer_count
    }

    pub fn sectors(&self) -> usize {
        self.sector_to_pointer.len()
    }

    pub fn group(&self, sector_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pointer_count];
        for (k, v) in sector_values.iter().enumerate() {
            out[self.sector_to_pointer[k]] += v;
        }
        out
    }

    fn check_covers(&self, sectors: usize) -> Result<()> {
        if self.sector_to_pointer.len() != sectors {
            return Err(BornError::UncoveredSector {
                covered: self.sector_to_pointer.len(),
                sectors,
            });
        }
        Ok(())
    }
}

/// How sector amplitudes evolve after preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChainDynamics {
    /// `xi_k(t) = xi_k` throughout.
    Frozen,
    /// Sector powers follow a [`MartingaleWalk`]; phases are kept.
    PowerMartingale { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointChain {
    sectors: Trajectory,
    pointer_map: PointerMap,
}

impl JointChain {
    pub fn new(sectors: Trajectory, pointer_map: PointerMap) -> Result<Self> {
        pointer_map.check_covers(sectors.dim())?;
        Ok(Self { sectors, pointer_map })
    }

    pub fn sectors(&self) -> &Trajectory {
        &self.sectors
    }

    pub fn pointer_map(&self) -> &PointerMap {
        &self.pointer_map
    }

    /// A copy with two sample segments exchanged.
    pub fn with_swapped(&self, a: Range<usize>, b: Range<usize>) -> Result<Self> {
        Ok(Self {
            sectors: self.sectors.with_swapped(a, b)?,
            pointer_map: self.pointer_map.clone(),
        })
    }

    /// Integrated power per pointer over `w`.
    pub fn pointer_spectrum(&self, w: Window) -> Result<PowerSpectrum> {
        let s = power_spectrum(&self.sectors, w)?;
        Ok(PowerSpectrum::from_powers(w, self.pointer_map.group(&s.per_basis_power))?)
    }
}

pub fn build_chain(
    sys: &PreparedSystem,
    pointer_map: &PointerMap,
    dynamics: ChainDynamics,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<JointChain> {
    pointer_map.check_covers(sys.coefficients.len())?;
    if steps < 2 {
        return Err(TrajectoryError::TooFewSamples(steps).into());
    }
    let samples = match dynamics {
        ChainDynamics::Frozen => vec![AmplitudeVector::new(sys.coefficients.clone()); steps],
        ChainDynamics::PowerMartingale { step } => {
            let phases: Vec<Complex64> = sys
                .coefficients
                .iter()
                .map(|c| if c.norm() > 0.0 { c / c.norm() } else { Complex64::new(1.0, 0.0) })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut walk = MartingaleWalk::new(sys.powers(), step)?;
            let mut out = Vec::with_capacity(steps);
            for m in 0..steps {
                if m > 0 {
                    walk.advance(&mut rng);
                }
                let mags = walk.amplitudes();
                out.push(AmplitudeVector::new(
                    mags.entries().iter().zip(&phases).map(|(a, p)| a * p).collect(),
                ));
            }
            out
        }
    };
    let sectors = Trajectory::new(dt, dt, sys.labels.clone(), samples, 1e-9)?;
    JointChain::new(sectors, pointer_map.clone())
}

/// `prob[i] = sum_{k -> i} (integrated power of sector k over w) / Δt`.
pub fn pointer_probability(chain: &JointChain, w: Window) -> Result<Vec<f64>> {
    let s = chain.pointer_spectrum(w)?;
    let duration = w.duration(chain.sectors.dt());
    Ok(s.per_basis_power.iter().map(|p| p / duration).collect())
}

/// The pointer recorded over `w`, as a one-component quasi-state over the
/// pointer basis.
///
/// The pointer values of one apparatus are mutually exclusive readings, so
/// the whole pointer basis forms a single dominance block: pointer `n` is
/// recorded when its grouped power exceeds `alpha_min` times the power of
/// all other pointers combined. Otherwise no pointer is recorded.
pub fn induced_quasi_state(chain: &JointChain, w: Window, alpha_min: f64) -> Result<Option<QuasiState>> {
    let s = chain.pointer_spectrum(w)?;
    if s.total_power <= 0.0 {
        return Ok(None);
    }
    let block = if s.dim() == 1 {
        Block { indices: vec![0], dominant: 0, alpha: f64::INFINITY }
    } else {
        match Block::evaluate((0..s.dim()).collect(), &s.per_basis_power) {
            Some(b) => b,
            None => return Ok(None),
        }
    };
    if !block.admissible(alpha_min) {
        return Ok(None);
    }
    let weight = s.power(block.dominant).sqrt();
    Ok(Some(QuasiState {
        window: w,
        components: vec![QuasiComponent {
            index: block.dominant,
            weight,
            alpha: block.alpha,
            subset: block.indices,
        }],
        beta: weight,
        dispersion: 0.0,
        clamped: false,
        tie: None,
    }))
}

/// Exchanges two equal-length, disjoint sample segments inside `w` and
/// reports whether the induced pointer quasi-state is unchanged.
pub fn swap_test(
    chain: &JointChain,
    w: Window,
    seg_a: Range<usize>,
    seg_b: Range<usize>,
    alpha_min: f64,
) -> Result<bool> {
    if !w.contains_range(&seg_a) || !w.contains_range(&seg_b) {
        return Err(BornError::Segments(format!(
            "segments {seg_a:?} and {seg_b:?} must lie inside window {:?}",
            w.range()
        )));
    }
    swap_test_windows(chain, &[w], seg_a, seg_b, alpha_min)
}

/// Like [`swap_test`] but the segments may lie in different windows; the
/// induced quasi-states of every listed window must be unchanged.
pub fn swap_test_windows(
    chain: &JointChain,
    windows: &[Window],
    seg_a: Range<usize>,
    seg_b: Range<usize>,
    alpha_min: f64,
) -> Result<bool> {
    if seg_a.len() != seg_b.len() {
        return Err(BornError::Segments(format!(
            "segments {seg_a:?} and {seg_b:?} differ in length"
        )));
    }
    if seg_a != seg_b && seg_a.start < seg_b.end && seg_b.start < seg_a.end {
        return Err(BornError::Segments(format!("segments {seg_a:?} and {seg_b:?} overlap")));
    }
    let swapped = chain.with_swapped(seg_a, seg_b)?;
    for &w in windows {
        if induced_quasi_state(chain, w, alpha_min)? != induced_quasi_state(&swapped, w, alpha_min)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// What happens to trials whose readout window records no pointer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullPolicy {
    /// Counted as the null pointer 0.
    TallyToNull,
    /// Left out of the frequency denominator.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    /// Largest power moved per martingale step.
    pub step: f64,
    /// Martingale steps allowed before a trial counts as unfixated.
    pub step_budget: usize,
    /// Samples in the readout window following fixation.
    pub readout_samples: usize,
    pub dt: f64,
    pub alpha_min: f64,
    pub null_policy: NullPolicy,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0,
            step: 0.05,
            step_budget: 10_000,
            readout_samples: 16,
            dt: 1.0,
            alpha_min: 1.0,
            null_policy: NullPolicy::TallyToNull,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub preparation: Vec<f64>,
    pub config: MonteCarloConfig,
    /// Pointer probabilities of the prepared state.
    pub analytic: Vec<f64>,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// `sqrt(p (1 - p) / trials)` with `p` the analytic probability.
    pub standard_errors: Vec<f64>,
    pub null_outcomes: u64,
    pub unfixated: u64,
    pub unfixated_rate: f64,
}

impl MonteCarloReport {
    /// Largest `|frequency - analytic| / standard_error` over pointers with
    /// non-degenerate probability.
    pub fn max_z(&self) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.analytic)
            .zip(&self.standard_errors)
            .map(|((f, p), se)| {
                if *se > 0.0 {
                    (f - p).abs() / se
                } else if (f - p).abs() > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

struct TrialOutcome {
    pointer: Option<usize>,
    fixated: bool,
}

fn run_trial(
    sys: &PreparedSystem,
    map: &PointerMap,
    cfg: &MonteCarloConfig,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let mut walk = MartingaleWalk::new(sys.powers(), cfg.step)?;
    let mut used = 0;
    while walk.vertex().is_none() && used < cfg.step_budget {
        walk.advance(&mut rng);
        used += 1;
    }
    let fixated = walk.vertex().is_some();
    let mut samples = Vec::with_capacity(cfg.readout_samples);
    for _ in 0..cfg.readout_samples {
        samples.push(walk.amplitudes());
        walk.advance(&mut rng);
    }
    let traj = Trajectory::new(cfg.dt, cfg.dt, sys.labels.clone(), samples, 1e-9)?;
    let chain = JointChain::new(traj, map.clone())?;
    let q = induced_quasi_state(&chain, Window::new(0, cfg.readout_samples), cfg.alpha_min)?;
    Ok(TrialOutcome {
        pointer: q.map(|q| q.components[0].index),
        fixated,
    })
}

/// Tallies the recorded pointer over independent martingale trials.
///
/// Trial `i` draws from the ChaCha stream `(seed, i)`, so the result does
/// not depend on how trials are scheduled across threads.
pub fn monte_carlo(
    sys: &PreparedSystem,
    pointer_map: &PointerMap,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloReport> {
    pointer_map.check_covers(sys.coefficients.len())?;
    if cfg.trials == 0 {
        return Err(BornError::Config("trials must be at least 1".into()));
    }
    if cfg.readout_samples < 2 {
        return Err(BornError::Config("readout window needs at least 2 samples".into()));
    }
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(sys, pointer_map, cfg, t))
        .collect::<Result<Vec<_>>>()?;

    let n_ptr = pointer_map.pointer_count();
    let mut counts = vec![0u64; n_ptr];
    let mut nulls = 0u64;
    let mut unfixated = 0u64;
    for o in &outcomes {
        if !o.fixated {
            unfixated += 1;
        }
        match o.pointer {
            Some(p) => counts[p] += 1,
            None => {
                nulls += 1;
                if cfg.null_policy == NullPolicy::TallyToNull {
                    counts[0] += 1;
                }
            }
        }
    }
    let denom = counts.iter().sum::<u64>().max(1) as f64;
    let analytic = pointer_map.group(&sys.powers());
    let standard_errors = analytic
        .iter()
        .map(|p| (p * (1.0 - p) / denom).max(0.0).sqrt())
        .collect();
    Ok(MonteCarloReport {
        preparation: sys.powers(),
        config: *cfg,
        frequencies: counts.iter().map(|&c| c as f64 / denom).collect(),
        analytic,
        counts,
        standard_errors,
        null_outcomes: nulls,
        unfixated,
        unfixated_rate: unfixated as f64 / cfg.trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frozen(powers: &[f64], map: Vec<usize>, n_ptr: usize, steps: usize) -> JointChain {
        let sys = PreparedSystem::from_powers(powers, 1e-9).unwrap();
        build_chain(&sys, &PointerMap::new(map, n_ptr).unwrap(), ChainDynamics::Frozen, steps, 0.1, 0)
            .unwrap()
    }

    #[test]
    fn frozen_chain_is_constant() {
        let c = frozen(&[0.5, 0.5], vec![1, 2], 3, 10);
        let s = c.sectors().samples();
        assert!(s.iter().all(|x| x == &s[0]));
        let spec = power_spectrum(c.sectors(), Window::new(0, 10)).unwrap();
        assert!((spec.power(0) - 0.5).abs() < 1e-12);
        assert!((spec.power(1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_sector_probabilities() {
        let c = frozen(&[0.5, 0.5], vec![1, 2], 3, 10);
        let p = pointer_probability(&c, Window::new(0, 10)).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p[0].abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_sector_probability() {
        let c = frozen(&[1.0], vec![1], 2, 4);
        let p = pointer_probability(&c, Window::new(0, 4)).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grouped_probabilities() {
        let c = frozen(&[0.5, 0.3, 0.2], vec![1, 1, 2], 3, 8);
        let p = pointer_probability(&c, Window::new(0, 8)).unwrap();
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] - 0.8).abs() < 1e-12);
        assert!((p[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn uncovered_sector() {
        let sys = PreparedSystem::from_powers(&[0.5, 0.5], 1e-9).unwrap();
        let map = PointerMap::new(vec![1], 2).unwrap();
        assert_eq!(
            build_chain(&sys, &map, ChainDynamics::Frozen, 4, 1.0, 0),
            Err(BornError::UncoveredSector { covered: 1, sectors: 2 })
        );
        assert!(PointerMap::new(vec![3], 2).is_err());
    }

    #[test]
    fn induced_state_follows_dominant_pointer() {
        let c = frozen(&[1.0, 0.0], vec![1, 2], 3, 6);
        let q = induced_quasi_state(&c, Window::new(0, 6), 1.0).unwrap().unwrap();
        assert_eq!(q.indices(), vec![1]);
        let balanced = frozen(&[0.5, 0.5], vec![1, 2], 3, 6);
        assert!(induced_quasi_state(&balanced, Window::new(0, 6), 1.0).unwrap().is_none());
    }

    #[test]
    fn swap_validation() {
        let c = frozen(&[0.5, 0.5], vec![1, 2], 3, 20);
        let w = Window::new(0, 10);
        assert!(swap_test(&c, w, 0..2, 3..5, 1.0).unwrap());
        assert!(swap_test(&c, w, 2..4, 2..4, 1.0).unwrap());
        assert!(matches!(swap_test(&c, w, 0..2, 3..6, 1.0), Err(BornError::Segments(_))));
        assert!(matches!(swap_test(&c, w, 0..3, 2..5, 1.0), Err(BornError::Segments(_))));
        assert!(matches!(swap_test(&c, w, 0..2, 9..11, 1.0), Err(BornError::Segments(_))));
    }

    #[test]
    fn pure_preparation_is_certain() {
        let sys = PreparedSystem::from_powers(&[1.0, 0.0], 1e-9).unwrap();
        let cfg = MonteCarloConfig { trials: 500, ..Default::default() };
        let r = monte_carlo(&sys, &PointerMap::one_to_one(2), &cfg).unwrap();
        assert_eq!(r.counts, vec![0, 500, 0]);
        assert_eq!(r.unfixated, 0);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let sys = PreparedSystem::from_powers(&[0.6, 0.4], 1e-9).unwrap();
        let cfg = MonteCarloConfig { trials: 2000, seed: 9, ..Default::default() };
        let map = PointerMap::one_to_one(2);
        assert_eq!(monte_carlo(&sys, &map, &cfg).unwrap(), monte_carlo(&sys, &map, &cfg).unwrap());
    }

    #[test]
    fn exhausted_budget_tallies_to_null() {
        let sys = PreparedSystem::from_powers(&[0.5, 0.5], 1e-9).unwrap();
        let cfg = MonteCarloConfig { trials: 200, step: 0.001, step_budget: 1, ..Default::default() };
        let r = monte_carlo(&sys, &PointerMap::one_to_one(2), &cfg).unwrap();
        assert_eq!(r.unfixated, 200);
        assert_eq!(r.counts[0], r.null_outcomes);
        let ex = MonteCarloConfig { null_policy: NullPolicy::Exclude, ..cfg };
        let r = monte_carlo(&sys, &PointerMap::one_to_one(2), &ex).unwrap();
        assert_eq!(r.counts[0], 0);
    }
}
