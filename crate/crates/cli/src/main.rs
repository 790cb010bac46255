//! `quasi`: batch runs over trajectories, projections, Born-rule trials,
//! the measurement channel and consistency checks.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or configuration error,
//! 3 file I/O error, 4 validation error, 5 consistency violations found.

mod config;
mod output;

use std::fmt::Display;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use quasistate::born::{fine_grain, monte_carlo, rationalize, PointerMap, PreparedSystem};
use quasistate::channel::{
    check_alice_rules, decode, histogram, read_transcript, write_records_csv, write_transcript,
};
use quasistate::consistency::{build_scenario, check_diagram1, check_diagram2};
use quasistate::projection::{project_array, q_general, q_single, QuasiState};
use quasistate::trajectory::{generate, read_csv, windows, write_csv, GeneratorSpec, Trajectory};
use rand::{Rng, SeedableRng};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use config::*;
use output::{sha256_hex, OutDir};

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_VIOLATIONS: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(msg: impl Display) -> Self {
        Self { code: EXIT_CONFIG, message: format!("config: {msg}") }
    }

    fn io(path: &Path, e: impl Display) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }

    fn validation(e: impl Display) -> Self {
        Self { code: EXIT_VALIDATION, message: e.to_string() }
    }

    fn internal(msg: impl Display) -> Self {
        Self { code: EXIT_INTERNAL, message: msg.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "quasi", version, about = "Quasi-state projection experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for window and trial parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write trajectories as CSV plus a `trajectories.json` index.
    Generate(Common),
    /// Project trajectories window by window onto quasi-states.
    Project(Common),
    /// Monte Carlo pointer statistics for a prepared system.
    Born(Common),
    /// Run the measurement channel: transcript, records, histogram.
    Comm(Common),
    /// Re-serialize a transcript and decode it with the configured criterion.
    Replay {
        #[command(flatten)]
        common: Common,
        /// JSON-lines transcript written by `comm`.
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Check the commuting diagrams; exits 5 when violations are found.
    Consistency(Common),
}

struct Loaded<T> {
    config: T,
    raw: Vec<u8>,
    base: PathBuf,
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let config = serde_json::from_slice(&raw).map_err(CliError::config)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, raw, base })
}

/// Writes the configuration as given and as resolved, and returns the
/// digest of the resolved form.
fn echo_config<T: Serialize>(
    out: &mut OutDir,
    subcommand: &str,
    raw: &[u8],
    resolved: &T,
) -> Result<String, CliError> {
    out.write("config.input.json", raw)?;
    let value = json!({
        "subcommand": subcommand,
        "config": resolved,
    });
    let mut text = serde_json::to_vec_pretty(&value).map_err(CliError::internal)?;
    text.push(b'\n');
    out.write("config.resolved.json", &text)?;
    Ok(sha256_hex(&text))
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn csv_bytes(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf).map_err(CliError::validation)?;
    Ok(buf)
}

fn expand_spin_array(cfg: &mut GenerateConfig) -> Result<(), CliError> {
    let Some(p) = cfg.spin_array.take() else {
        return Ok(());
    };
    if p.pure > p.m {
        return Err(CliError::validation(format!("{} pure spins in an array of {}", p.pure, p.m)));
    }
    if !(0.0..0.5).contains(&p.spread) {
        return Err(CliError::validation(format!("spread {} outside [0, 0.5)", p.spread)));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..p.m).collect();
    for i in (1..p.m).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let pure: Vec<usize> = order[..p.pure].to_vec();
    for i in 0..p.m {
        let generator = if pure.contains(&i) {
            GeneratorSpec::ConstantPure { k: rng.random_range(0..2) }
        } else {
            let up = 0.5 + if p.spread > 0.0 { rng.random_range(-p.spread..p.spread) } else { 0.0 };
            GeneratorSpec::FixedPowers { powers: vec![up, 1.0 - up] }
        };
        cfg.trajectories.push(TrajectorySpec { name: format!("spin_{i}"), dim: 2, generator });
    }
    Ok(())
}

fn cmd_generate(common: &Common) -> Result<u8, CliError> {
    let Loaded { config: mut cfg, raw, .. } = load::<GenerateConfig>(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    expand_spin_array(&mut cfg)?;
    if cfg.trajectories.is_empty() {
        return Err(CliError::validation("no trajectories requested"));
    }
    let mut names = std::collections::BTreeSet::new();
    for t in &cfg.trajectories {
        if t.name.is_empty() || t.name.contains(['/', '\\']) || !names.insert(t.name.clone()) {
            return Err(CliError::validation(format!("bad or duplicate trajectory name '{}'", t.name)));
        }
    }
    let mut out = OutDir::create(&common.out)?;
    let digest = echo_config(&mut out, "generate", &raw, &cfg)?;
    let mut index = Vec::new();
    for (i, spec) in cfg.trajectories.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let traj = generate(&spec.generator, spec.dim, cfg.steps, cfg.dt, seed).map_err(CliError::validation)?;
        let file = format!("trajectories/{}.csv", spec.name);
        out.write(&file, &csv_bytes(&traj)?)?;
        index.push(json!({
            "name": spec.name,
            "path": file,
            "dim": traj.dim(),
            "steps": traj.len(),
            "dt": traj.dt(),
            "t_c": traj.t_c(),
            "labels": traj.basis_labels(),
            "seed": seed,
            "generator": spec.generator,
        }));
    }
    out.write_json("trajectories.json", &index)?;
    out.finish("generate", digest)?;
    Ok(0)
}

#[derive(serde::Deserialize)]
struct IndexEntry {
    name: String,
    path: String,
    t_c: f64,
    labels: Vec<String>,
}

fn components(q: &QuasiState) -> String {
    q.indices()
        .iter()
        .zip(q.normalized_weights())
        .map(|(i, w)| format!("{i}:{w}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn cmd_project(common: &Common) -> Result<u8, CliError> {
    let Loaded { config: mut cfg, raw, base } = load::<ProjectConfig>(&common.config)?;
    let mut out = OutDir::create(&common.out)?;
    if let Some(index) = cfg.index.take() {
        let path = resolve_path(&base, &index);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        out.record_input(&path, &bytes);
        let entries: Vec<IndexEntry> = serde_json::from_slice(&bytes).map_err(CliError::config)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for e in entries {
            cfg.inputs.push(InputSpec {
                name: e.name,
                path: dir.join(e.path).display().to_string(),
                t_c: Some(e.t_c),
                labels: Some(e.labels),
            });
        }
    }
    if cfg.inputs.is_empty() {
        return Err(CliError::validation("no input trajectories"));
    }
    let mut trajs = Vec::new();
    for input in &cfg.inputs {
        let path = resolve_path(&base, &input.path);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        out.record_input(&path, &bytes);
        let t = read_csv(bytes.as_slice(), input.t_c, input.labels.clone(), cfg.thresholds.eps_norm)
            .map_err(CliError::validation)?;
        trajs.push(t);
    }
    let digest = echo_config(&mut out, "project", &raw, &cfg)?;
    let th = cfg.thresholds;

    let mut rows = csv::Writer::from_writer(Vec::new());
    let header = [
        "trajectory", "window", "start", "length", "null", "dimension", "components", "beta",
        "dispersion", "tied_partitions", "distinct_states", "resolves_scale",
    ];
    rows.write_record(header).map_err(CliError::internal)?;
    let mut warnings = Vec::new();
    for (input, traj) in cfg.inputs.iter().zip(&trajs) {
        let ws = windows(traj, cfg.window_len).map_err(CliError::validation)?;
        let states: Vec<Option<QuasiState>> = match cfg.mode {
            ProjectionMode::Maximal => q_general(traj, cfg.window_len, &th).map_err(CliError::validation)?,
            ProjectionMode::Single => ws
                .iter()
                .map(|&w| q_single(traj, w, th.theta))
                .collect::<Result<_, _>>()
                .map_err(CliError::validation)?,
        };
        for (i, (w, q)) in ws.iter().zip(&states).enumerate() {
            let resolves = w.resolves_scale(traj, th.kappa);
            if !resolves && i == 0 {
                warnings.push(format!("{}: window shorter than kappa * t_c", input.name));
            }
            let tie = q.as_ref().and_then(|q| q.tie.as_ref());
            rows.write_record([
                input.name.clone(),
                i.to_string(),
                w.start_index.to_string(),
                w.length_samples.to_string(),
                q.is_none().to_string(),
                q.as_ref().map_or(0, QuasiState::dimension).to_string(),
                q.as_ref().map(components).unwrap_or_default(),
                q.as_ref().map(|q| q.beta.to_string()).unwrap_or_default(),
                q.as_ref().map(|q| q.dispersion.to_string()).unwrap_or_default(),
                tie.map_or(1, |t| t.tied_partitions).to_string(),
                tie.map_or(1, |t| t.distinct_states).to_string(),
                resolves.to_string(),
            ])
            .map_err(CliError::internal)?;
        }
    }
    let bytes = rows.into_inner().map_err(CliError::internal)?;
    out.write("quasi_states.csv", &bytes)?;

    let same_shape = trajs.iter().all(|t| t.len() == trajs[0].len() && t.dt() == trajs[0].dt());
    if trajs.len() > 1 && same_shape && cfg.mode == ProjectionMode::Maximal {
        let arr = project_array(&trajs, cfg.window_len, &th).map_err(CliError::validation)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["window", "start", "dimension", "contributing"]).map_err(CliError::internal)?;
        for (i, a) in arr.iter().enumerate() {
            let names: Vec<&str> = a.contributing().iter().map(|&k| cfg.inputs[k].name.as_str()).collect();
            w.write_record([
                i.to_string(),
                a.window.start_index.to_string(),
                a.dimension().to_string(),
                names.join(";"),
            ])
            .map_err(CliError::internal)?;
        }
        out.write("array.csv", &w.into_inner().map_err(CliError::internal)?)?;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    out.finish("project", digest)?;
    Ok(0)
}

fn cmd_born(common: &Common) -> Result<u8, CliError> {
    let Loaded { config: mut cfg, raw, .. } = load::<BornConfig>(&common.config)?;
    if let Some(s) = common.seed {
        cfg.monte_carlo.seed = s;
    }
    let sys = match (&cfg.powers, &cfg.coefficients) {
        (Some(p), None) => PreparedSystem::from_powers(p, cfg.eps_norm),
        (None, Some(c)) => {
            let labels = cfg.labels.clone().unwrap_or_else(|| (0..c.len()).map(|k| format!("s{k}")).collect());
            PreparedSystem::new(c.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(), labels, cfg.eps_norm)
        }
        _ => return Err(CliError::config("give exactly one of `powers` or `coefficients`")),
    }
    .map_err(CliError::validation)?;
    let sectors = sys.coefficients().len();
    let map = match &cfg.pointer_map {
        None => PointerMap::one_to_one(sectors),
        Some(m) => {
            let count = cfg.pointer_count.unwrap_or(m.iter().max().map_or(1, |x| x + 1));
            PointerMap::new(m.clone(), count).map_err(CliError::validation)?
        }
    };
    let mut out = OutDir::create(&common.out)?;
    let digest = echo_config(&mut out, "born", &raw, &cfg)?;

    let report = monte_carlo(&sys, &map, &cfg.monte_carlo).map_err(CliError::validation)?;
    let counter = match cfg.counter_denominator {
        Some(d) => {
            let p = rationalize(&report.analytic, d).map_err(CliError::validation)?;
            Some(fine_grain(&p).map_err(CliError::validation)?)
        }
        None => None,
    };
    let trials = cfg.monte_carlo.trials as f64;
    let within: Vec<bool> = report
        .frequencies
        .iter()
        .zip(&report.analytic)
        .map(|(f, p)| (f - p).abs() <= 3.0 * (p * (1.0 - p) / trials).sqrt() + 1e-15)
        .collect();
    out.write_json(
        "born_report.json",
        &json!({
            "preparation": report.preparation,
            "pointer_map": (0..sectors).map(|k| map.pointer(k)).collect::<Vec<_>>(),
            "config": report.config,
            "analytic": report.analytic,
            "frequencies": report.frequencies,
            "counts": report.counts,
            "standard_errors": report.standard_errors,
            "within_three_sigma": within,
            "max_z": report.max_z(),
            "null_outcomes": report.null_outcomes,
            "unfixated": report.unfixated,
            "unfixated_rate": report.unfixated_rate,
            "counter": counter,
        }),
    )?;
    out.finish("born", digest)?;
    Ok(0)
}

fn write_channel_outputs(
    out: &mut OutDir,
    stream: &[quasistate::channel::Message],
    records: &[quasistate::channel::Record],
    pointer_count: usize,
) -> Result<(), CliError> {
    let mut t = Vec::new();
    write_transcript(stream, &mut t).map_err(CliError::internal)?;
    out.write("transcript.jsonl", &t)?;
    let mut r = Vec::new();
    write_records_csv(records, &mut r).map_err(CliError::internal)?;
    out.write("records.csv", &r)?;
    let h = histogram(records, pointer_count).map_err(CliError::validation)?;
    let bins: Vec<_> = h
        .arrivals
        .iter()
        .enumerate()
        .map(|(v, times)| json!({ "pointer": v, "count": times.len(), "arrivals": times }))
        .collect();
    out.write_json("histogram.json", &json!({ "pointer_count": pointer_count, "bins": bins }))
}

fn cmd_comm(common: &Common) -> Result<u8, CliError> {
    let Loaded { config: mut cfg, raw, .. } = load::<CommConfig>(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let mut out = OutDir::create(&common.out)?;
    let digest = echo_config(&mut out, "comm", &raw, &cfg)?;
    let run = cfg.channel.run(cfg.seed).map_err(CliError::validation)?;
    write_channel_outputs(&mut out, &run.stream, &run.records, cfg.channel.pointer_count)?;
    let problems = check_alice_rules(&run.stream, &cfg.channel.schedule, cfg.channel.ticks);
    let alice = run.stream.iter().filter(|m| m.sender_tag == quasistate::channel::ALICE_SENDER_TAG).count();
    out.write_json(
        "comm_report.json",
        &json!({
            "messages": run.stream.len(),
            "alice_messages": alice,
            "noise_messages": run.stream.len() - alice,
            "records": run.records.len(),
            "alice_rule_violations": problems,
        }),
    )?;
    out.finish("comm", digest)?;
    Ok(0)
}

fn cmd_replay(common: &Common, transcript: &Path) -> Result<u8, CliError> {
    let Loaded { config: cfg, raw, .. } = load::<CommConfig>(&common.config)?;
    let bytes = fs::read(transcript).map_err(|e| CliError::io(transcript, e))?;
    let stream = read_transcript(BufReader::new(bytes.as_slice())).map_err(CliError::validation)?;
    let mut out = OutDir::create(&common.out)?;
    out.record_input(transcript, &bytes);
    let digest = echo_config(&mut out, "replay", &raw, &cfg)?;
    let records = decode(&stream, &cfg.channel.criterion).map_err(CliError::validation)?;
    write_channel_outputs(&mut out, &stream, &records, cfg.channel.pointer_count)?;
    out.finish("replay", digest)?;
    Ok(0)
}

fn cmd_consistency(common: &Common) -> Result<u8, CliError> {
    let Loaded { config: mut cfg, raw, .. } = load::<ConsistencyConfig>(&common.config)?;
    if let (Some(s), ConsistencyConfig::Scenario { seed, .. }) = (common.seed, &mut cfg) {
        *seed = s;
    }
    let mut out = OutDir::create(&common.out)?;
    let digest = echo_config(&mut out, "consistency", &raw, &cfg)?;
    let consistent = match &cfg {
        ConsistencyConfig::Scenario { seed, scenario } => {
            let s = build_scenario(scenario, *seed).map_err(CliError::validation)?;
            out.write_json("measurement.json", &s.measurement)?;
            let mut r = Vec::new();
            write_records_csv(&s.channel.records, &mut r).map_err(CliError::internal)?;
            out.write("records.csv", &r)?;
            let report = check_diagram2(&s.measurement).map_err(CliError::validation)?;
            out.write_json("consistency_report.json", &report)?;
            report.consistent()
        }
        ConsistencyConfig::Measurement { measurement } => {
            let report = check_diagram2(measurement).map_err(CliError::validation)?;
            out.write_json("consistency_report.json", &report)?;
            report.consistent()
        }
        ConsistencyConfig::Observer { instance } => {
            let report = check_diagram1(instance).map_err(CliError::validation)?;
            out.write_json("consistency_report.json", &report)?;
            report.consistent()
        }
    };
    out.finish("consistency", digest)?;
    Ok(if consistent { 0 } else { EXIT_VIOLATIONS })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let common = match &cli.command {
        Command::Generate(c) | Command::Project(c) | Command::Born(c) | Command::Comm(c) | Command::Consistency(c) => c,
        Command::Replay { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::internal)?;
    }
    output::set_threads(rayon::current_num_threads());
    match &cli.command {
        Command::Generate(c) => cmd_generate(c),
        Command::Project(c) => cmd_project(c),
        Command::Born(c) => cmd_born(c),
        Command::Comm(c) => cmd_comm(c),
        Command::Replay { common, transcript } => cmd_replay(common, transcript),
        Command::Consistency(c) => cmd_consistency(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
