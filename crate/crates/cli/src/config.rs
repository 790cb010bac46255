//! JSON run configurations, one per subcommand.

use quasistate::born::MonteCarloConfig;
use quasistate::channel::ChannelScenario;
use quasistate::consistency::{DiagramInstance, Measurement, ScenarioConfig};
use quasistate::trajectory::GeneratorSpec;
use quasistate::Thresholds;
use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub seed: u64,
    pub steps: usize,
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default)]
    pub trajectories: Vec<TrajectorySpec>,
    /// Expands into `m` two-level trajectories named `spin_0 ..`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_array: Option<SpinArrayPreset>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub name: String,
    pub dim: usize,
    pub generator: GeneratorSpec,
}

/// `pure` constant basis spins at seeded positions; the others hold fixed
/// powers within `spread` of an even split.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinArrayPreset {
    pub m: usize,
    pub pure: usize,
    pub spread: f64,
}

impl Default for SpinArrayPreset {
    fn default() -> Self {
        Self { m: 8, pure: 3, spread: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    #[default]
    Maximal,
    Single,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// A `trajectories.json` index written by `generate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<String>,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    pub window_len: usize,
    #[serde(default)]
    pub mode: ProjectionMode,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornConfig {
    /// Sector powers; amplitudes are taken real and non-negative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    /// Complex sector amplitudes as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Sector to pointer; defaults to sector k reading as pointer k + 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_map: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_count: Option<usize>,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    /// Rationalize the pointer probabilities to this denominator and report
    /// the counter fine-graining.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_denominator: Option<u64>,
    #[serde(default = "default_eps")]
    pub eps_norm: f64,
}

fn default_eps() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    #[serde(default)]
    pub seed: u64,
    pub channel: ChannelScenario,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ConsistencyConfig {
    /// Build the end-to-end run and check it.
    Scenario {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        scenario: ScenarioConfig,
    },
    /// Check explicit finite maps for both diagrams.
    Measurement { measurement: Measurement },
    /// Check an observer instance against the first diagram only.
    Observer { instance: DiagramInstance },
}
