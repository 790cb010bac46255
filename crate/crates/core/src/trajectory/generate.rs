use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_labels, AmplitudeVector, Result, Trajectory, TrajectoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// One stretch of a piecewise trajectory, running from `start` to the next
/// segment's start (or the end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSegment {
    pub start: usize,
    pub generator: GeneratorSpec,
}

/// The dynamics regimes a trajectory can be generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Basis vector `k` at every sample.
    ConstantPure { k: usize },
    /// Equal magnitudes `1/sqrt(dim)` with the given signs (missing signs are `+`).
    BalancedSuperposition {
        #[serde(default)]
        signs: Vec<Sign>,
    },
    /// Constant state with the given per-basis powers (renormalized), real and non-negative.
    FixedPowers { powers: Vec<f64> },
    /// Haar-random unit vectors resampled every `ceil(t_c / dt)` steps,
    /// linearly interpolated in between and renormalized.
    RandomFast { t_c: f64 },
    /// Concatenation of sub-generators over consecutive sample ranges.
    Piecewise { schedule: Vec<PiecewiseSegment> },
    /// Per-basis powers performing a bounded martingale walk with absorbing
    /// simplex vertices. See [`MartingaleWalk`].
    PowerMartingale {
        initial_powers: Vec<f64>,
        #[serde(default = "default_martingale_step")]
        step: f64,
    },
}

pub(crate) fn default_martingale_step() -> f64 {
    0.05
}

/// Generates a normalized trajectory. The same `(spec, dim, steps, dt, seed)`
/// always yields bit-identical samples.
pub fn generate(
    spec: &GeneratorSpec,
    dim: usize,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    if dim == 0 {
        return Err(TrajectoryError::ZeroDimension);
    }
    if steps < 2 {
        return Err(TrajectoryError::TooFewSamples(steps));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrajectoryError::InvalidTimeStep(dt));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = samples_for(spec, dim, steps, dt, &mut rng)?;
    let t_c = characteristic_time(spec, dt);
    Trajectory::new(dt, t_c, default_labels(dim), samples, 1e-9)
}

fn characteristic_time(spec: &GeneratorSpec, dt: f64) -> f64 {
    match spec {
        GeneratorSpec::RandomFast { t_c } => *t_c,
        GeneratorSpec::Piecewise { schedule } => schedule
            .iter()
            .map(|s| characteristic_time(&s.generator, dt))
            .fold(dt, f64::max),
        _ => dt,
    }
}

fn samples_for(
    spec: &GeneratorSpec,
    dim: usize,
    steps: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AmplitudeVector>> {
    match spec {
        GeneratorSpec::ConstantPure { k } => {
            if *k >= dim {
                return Err(TrajectoryError::Generator(format!(
                    "basis index {k} out of range for dimension {dim}"
                )));
            }
            Ok(vec![AmplitudeVector::basis(dim, *k); steps])
        }
        GeneratorSpec::BalancedSuperposition { signs } => {
            if signs.len() > dim {
                return Err(TrajectoryError::Generator(format!(
                    "{} signs given for dimension {dim}",
                    signs.len()
                )));
            }
            let a = 1.0 / (dim as f64).sqrt();
            let entries = (0..dim)
                .map(|i| match signs.get(i) {
                    Some(Sign::Minus) => Complex64::new(-a, 0.0),
                    _ => Complex64::new(a, 0.0),
                })
                .collect();
            Ok(vec![AmplitudeVector::new(entries); steps])
        }
        GeneratorSpec::FixedPowers { powers } => {
            let p = checked_powers(powers, dim)?;
            let v = AmplitudeVector::from_real(&p.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
            Ok(vec![v.normalized(); steps])
        }
        GeneratorSpec::RandomFast { t_c } => {
            if !(*t_c > 0.0 && t_c.is_finite()) {
                return Err(TrajectoryError::Generator(format!("t_c must be positive, got {t_c}")));
            }
            let every = ((t_c / dt).ceil() as usize).max(1);
            let knots: Vec<AmplitudeVector> = (0..=(steps - 1).div_ceil(every))
                .map(|_| haar_vector(dim, rng))
                .collect();
            Ok((0..steps)
                .map(|m| {
                    let (j, r) = (m / every, m % every);
                    if r == 0 {
                        return knots[j].clone();
                    }
                    let s = r as f64 / every as f64;
                    let mixed: Vec<Complex64> = knots[j]
                        .entries()
                        .iter()
                        .zip(knots[j + 1].entries())
                        .map(|(a, b)| a * (1.0 - s) + b * s)
                        .collect();
                    let v = AmplitudeVector::new(mixed);
                    // Antipodal knots can cancel; keep the earlier knot then.
                    if v.norm_sqr() < 1e-24 {
                        knots[j].clone()
                    } else {
                        v.normalized()
                    }
                })
                .collect())
        }
        GeneratorSpec::Piecewise { schedule } => {
            if schedule.is_empty() || schedule[0].start != 0 {
                return Err(TrajectoryError::Generator(
                    "piecewise schedule must start at sample 0".into(),
                ));
            }
            let mut out = Vec::with_capacity(steps);
            for (i, seg) in schedule.iter().enumerate() {
                let end = schedule.get(i + 1).map_or(steps, |s| s.start);
                if seg.start >= end || end > steps {
                    return Err(TrajectoryError::Generator(format!(
                        "schedule segment {i} spans [{}, {end}), outside 0..{steps} or not increasing",
                        seg.start
                    )));
                }
                out.extend(samples_for(&seg.generator, dim, end - seg.start, dt, rng)?);
            }
            Ok(out)
        }
        GeneratorSpec::PowerMartingale { initial_powers, step } => {
            let mut walk = MartingaleWalk::new(checked_powers(initial_powers, dim)?, *step)?;
            let mut out = Vec::with_capacity(steps);
            out.push(walk.amplitudes());
            for _ in 1..steps {
                walk.advance(rng);
                out.push(walk.amplitudes());
            }
            Ok(out)
        }
    }
}

fn checked_powers(powers: &[f64], dim: usize) -> Result<Vec<f64>> {
    if powers.len() != dim {
        return Err(TrajectoryError::Generator(format!(
            "{} powers given for dimension {dim}",
            powers.len()
        )));
    }
    if powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(TrajectoryError::Generator("powers must be finite and non-negative".into()));
    }
    let total: f64 = powers.iter().sum();
    if total <= 0.0 {
        return Err(TrajectoryError::Generator("powers sum to zero".into()));
    }
    Ok(powers.iter().map(|p| p / total).collect())
}

fn haar_vector<R: Rng>(dim: usize, rng: &mut R) -> AmplitudeVector {
    loop {
        let entries: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let v = AmplitudeVector::new(entries);
        if v.norm_sqr() > 1e-24 {
            return v.normalized();
        }
    }
}

/// Bounded martingale on the probability simplex.
///
/// Each step picks two distinct components with non-zero power and moves
/// `min(step, p_i, p_j)` from one to the other with a fair coin. Every
/// coordinate is a martingale bounded in `[0, 1]`, a component that reaches
/// zero stays there, and the walk stops at a vertex. The probability of
/// being absorbed at vertex `k` therefore equals the initial power `p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleWalk {
    powers: Vec<f64>,
    step: f64,
    live: Vec<usize>,
}

impl MartingaleWalk {
    pub fn new(powers: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(TrajectoryError::Generator(format!(
                "martingale step must lie in (0, 1], got {step}"
            )));
        }
        let live = (0..powers.len()).filter(|&k| powers[k] > 0.0).collect();
        Ok(Self { powers, step, live })
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// The absorbing vertex, once only one component carries power.
    pub fn vertex(&self) -> Option<usize> {
        match self.live.as_slice() {
            [k] => Some(*k),
            _ => None,
        }
    }

    pub fn advance<R: Rng>(&mut self, rng: &mut R) {
        let n = self.live.len();
        if n < 2 {
            return;
        }
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (self.live[a], self.live[b]);
        let delta = self.step.min(self.powers[i]).min(self.powers[j]);
        let (up, down) = if rng.random::<bool>() { (i, j) } else { (j, i) };
        self.powers[up] += delta;
        self.powers[down] -= delta;
        if self.powers[down] <= 0.0 {
            self.powers[down] = 0.0;
            self.live.retain(|&k| k != down);
        }
    }

    /// Real non-negative amplitudes `sqrt(p_k / sum p)`.
    pub fn amplitudes(&self) -> AmplitudeVector {
        let total: f64 = self.powers.iter().sum();
        AmplitudeVector::from_real(&self.powers.iter().map(|p| (p / total).sqrt()).collect::<Vec<_>>())
    }
}
