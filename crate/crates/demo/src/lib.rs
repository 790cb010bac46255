//! Browser bindings. Each operation has a plain Rust form returning a JSON
//! string and a `#[wasm_bindgen]` wrapper that page scripts call.

use quasistate::born::{monte_carlo, MonteCarloConfig, PointerMap, PreparedSystem};
use quasistate::projection::{maximal_from_spectrum, power_spectrum, project_array, q_general};
use quasistate::trajectory::{generate, windows, GeneratorSpec, Trajectory};
use quasistate::Thresholds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Dominance bound used for the spin array; a 0.55 / 0.45 spin stays Null.
pub const SPIN_ALPHA_MIN: f64 = 2.0;

/// Trials the page may request in one call.
pub const MAX_TRIALS: usize = 200_000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(err)
}

#[derive(Serialize)]
struct SpinRow {
    name: String,
    pure: bool,
    up_power: f64,
    /// Dominant basis index per window, `None` for Null.
    windows: Vec<Option<usize>>,
}

#[derive(Serialize)]
struct SpinArrayView {
    spins: Vec<SpinRow>,
    /// Quasi-state dimension of the whole array per window.
    dimension: Vec<usize>,
}

/// `m` two-level spins, `pure` of them constant basis states and the rest
/// constant superpositions whose up power lies within `spread` of 1/2.
/// Projected with `alpha_min = SPIN_ALPHA_MIN`.
pub fn spin_array(m: usize, pure: usize, spread: f64, steps: usize, window_len: usize, seed: u64) -> Result<String, String> {
    if m == 0 || pure > m {
        return Err(format!("need 0 <= pure <= m and m > 0, got pure {pure}, m {m}"));
    }
    if !(0.0..0.5).contains(&spread) {
        return Err(format!("spread {spread} outside [0, 0.5)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let th = Thresholds { alpha_min: SPIN_ALPHA_MIN, ..Thresholds::default() };
    let mut trajs = Vec::with_capacity(m);
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let is_pure = order[..pure].contains(&i);
        let (spec, up) = if is_pure {
            let k = rng.random_range(0..2);
            (GeneratorSpec::ConstantPure { k }, if k == 0 { 1.0 } else { 0.0 })
        } else {
            let up = 0.5 + if spread > 0.0 { rng.random_range(-spread..spread) } else { 0.0 };
            (GeneratorSpec::FixedPowers { powers: vec![up, 1.0 - up] }, up)
        };
        let t = generate(&spec, 2, steps, 1.0, seed.wrapping_add(i as u64)).map_err(err)?;
        let states = q_general(&t, window_len, &th).map_err(err)?;
        rows.push(SpinRow {
            name: format!("spin_{i}"),
            pure: is_pure,
            up_power: up,
            windows: states.iter().map(|q| q.as_ref().map(|q| q.components[0].index)).collect(),
        });
        trajs.push(t);
    }
    let dimension = project_array(&trajs, window_len, &th)
        .map_err(err)?
        .iter()
        .map(|a| a.dimension())
        .collect();
    to_json(&SpinArrayView { spins: rows, dimension })
}

/// Monte Carlo pointer histogram for sector powers read one-to-one.
pub fn born_histogram(powers: &[f64], trials: usize, seed: u64) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let sys = PreparedSystem::from_powers(powers, 1e-9).map_err(err)?;
    let map = PointerMap::one_to_one(powers.len());
    let cfg = MonteCarloConfig { trials, seed, ..MonteCarloConfig::default() };
    let report = monte_carlo(&sys, &map, &cfg).map_err(err)?;
    let mut v = serde_json::to_value(&report).map_err(err)?;
    v["max_z"] = report.max_z().into();
    to_json(&v)
}

#[derive(Serialize)]
struct WindowTrace {
    start: usize,
    fractions: Vec<f64>,
    components: Vec<(usize, f64)>,
}

#[derive(Serialize)]
struct PowerTraceView {
    dim: usize,
    t_c: f64,
    windows: Vec<WindowTrace>,
}

fn trace(t: &Trajectory, window_len: usize) -> Result<PowerTraceView, String> {
    let th = Thresholds::default();
    let mut out = Vec::new();
    for w in windows(t, window_len).map_err(err)? {
        let s = power_spectrum(t, w).map_err(err)?;
        let q = maximal_from_spectrum(&s, &th).map_err(err)?;
        out.push(WindowTrace {
            start: w.start_index,
            fractions: s.fractions(),
            components: q
                .map(|q| q.indices().into_iter().zip(q.normalized_weights()).collect())
                .unwrap_or_default(),
        });
    }
    Ok(PowerTraceView { dim: t.dim(), t_c: t.t_c(), windows: out })
}

/// Per-window power fractions and the maximal quasi-state of a generated
/// trajectory. `generator` is a generator spec in JSON, e.g.
/// `{"kind": "random-fast", "t_c": 4}`.
pub fn power_trace(generator: &str, dim: usize, steps: usize, window_len: usize, seed: u64) -> Result<String, String> {
    let spec: GeneratorSpec = serde_json::from_str(generator).map_err(err)?;
    let t = generate(&spec, dim, steps, 1.0, seed).map_err(err)?;
    to_json(&trace(&t, window_len)?)
}

#[wasm_bindgen(js_name = spinArray)]
pub fn spin_array_js(m: usize, pure: usize, spread: f64, steps: usize, window_len: usize, seed: u32) -> Result<String, JsError> {
    spin_array(m, pure, spread, steps, window_len, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bornHistogram)]
pub fn born_histogram_js(powers: Vec<f64>, trials: usize, seed: u32) -> Result<String, JsError> {
    born_histogram(&powers, trials, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = powerTrace)]
pub fn power_trace_js(generator: &str, dim: usize, steps: usize, window_len: usize, seed: u32) -> Result<String, JsError> {
    power_trace(generator, dim, steps, window_len, seed.into()).map_err(|e| JsError::new(&e))
}
