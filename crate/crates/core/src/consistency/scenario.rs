//! End-to-end measurement run: apparatus chain, Alice's reports through a
//! noisy channel, Bob's decoded records and the observer trajectory they
//! drive.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ConsistencyError, DiagramInstance, InfoDynamics, InfoLabel, InterpretationTable, Measurement,
    QuasiStateId, Result,
};
use crate::born::{induced_quasi_state, JointChain, PointerMap};
use crate::channel::{AliceEvent, ChannelRun, ChannelScenario, Criterion, NoiseDrive, NoiseSpec, Word};
use crate::projection::{q_general, QuasiState};
use crate::trajectory::{windows, AmplitudeVector, MartingaleWalk, Trajectory};
use crate::Thresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Initial sector powers of the measured system.
    pub powers: Vec<f64>,
    /// Sector to pointer; defaults to sector k reading as pointer k + 1.
    pub pointer_map: Option<Vec<usize>>,
    pub pointer_count: Option<usize>,
    /// Each cycle is one ready window followed by one measurement window.
    pub cycles: usize,
    pub ticks_per_window: u64,
    pub step: f64,
    pub step_budget: usize,
    pub noise_sources: usize,
    pub alice_tag: Word,
    pub sender: String,
    /// Power the observer keeps outside the basis state of its record.
    pub leakage: f64,
    pub thresholds: Thresholds,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            powers: vec![0.5, 0.3, 0.2],
            pointer_map: None,
            pointer_count: None,
            cycles: 12,
            ticks_per_window: 20,
            step: 0.05,
            step_budget: 10_000,
            noise_sources: 3,
            alice_tag: Word::new(vec![0xa, 0x1, 0xc, 0xe]).expect("valid symbols"),
            sender: "A".into(),
            leakage: 0.02,
            thresholds: Thresholds::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn map(&self) -> Result<PointerMap> {
        let bad = |e: crate::born::BornError| ConsistencyError::Scenario(e.to_string());
        match &self.pointer_map {
            None => Ok(PointerMap::one_to_one(self.powers.len())),
            Some(m) => {
                let count = self.pointer_count.unwrap_or(m.iter().max().map_or(1, |x| x + 1));
                PointerMap::new(m.clone(), count).map_err(bad)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub chain: JointChain,
    pub apparatus_states: Vec<Option<QuasiState>>,
    pub channel: ChannelRun,
    pub observer: Trajectory,
    pub observer_states: Vec<Option<QuasiState>>,
    pub measurement: Measurement,
}

/// Sector powers that give every used pointer the same share, so no
/// pointer is recorded while the apparatus waits.
fn waiting_powers(map: &PointerMap) -> Result<Vec<f64>> {
    let mut per_pointer: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..map.sectors() {
        *per_pointer.entry(map.pointer(k)).or_default() += 1;
    }
    if per_pointer.len() < 2 {
        return Err(ConsistencyError::Scenario("sectors must map to at least two pointers".into()));
    }
    let share = 1.0 / per_pointer.len() as f64;
    Ok((0..map.sectors())
        .map(|k| share / per_pointer[&map.pointer(k)] as f64)
        .collect())
}

fn amplitudes(powers: &[f64]) -> AmplitudeVector {
    AmplitudeVector::new(powers.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect())
}

pub fn build_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let cfg = config;
    let fail = |e: &dyn std::fmt::Display| ConsistencyError::Scenario(e.to_string());
    if cfg.cycles == 0 || cfg.ticks_per_window < 2 {
        return Err(ConsistencyError::Scenario("need at least one cycle of windows with 2 ticks".into()));
    }
    if !(0.0..0.5).contains(&cfg.leakage) {
        return Err(ConsistencyError::Scenario(format!("leakage {} outside [0, 0.5)", cfg.leakage)));
    }
    let map = cfg.map()?;
    let waiting = amplitudes(&waiting_powers(&map)?);
    let len = cfg.ticks_per_window as usize;

    let mut samples = Vec::with_capacity(2 * cfg.cycles * len);
    for c in 0..cfg.cycles {
        samples.extend(std::iter::repeat_n(waiting.clone(), len));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut walk = MartingaleWalk::new(cfg.powers.clone(), cfg.step).map_err(|e| fail(&e))?;
        for _ in 0..cfg.step_budget {
            if walk.vertex().is_some() {
                break;
            }
            walk.advance(&mut rng);
        }
        for _ in 0..len {
            samples.push(walk.amplitudes());
            walk.advance(&mut rng);
        }
    }
    let labels = (0..map.sectors()).map(|k| format!("s{k}")).collect();
    let sectors = Trajectory::new(1.0, 1.0, labels, samples, cfg.thresholds.eps_norm).map_err(|e| fail(&e))?;
    let chain = JointChain::new(sectors, map.clone()).map_err(|e| fail(&e))?;
    let apparatus_states = windows(chain.sectors(), len)
        .map_err(|e| fail(&e))?
        .into_iter()
        .map(|w| induced_quasi_state(&chain, w, cfg.thresholds.alpha_min))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| fail(&e))?;
    let apparatus = Measurement::apparatus_pointers(&apparatus_states);

    // Alice announces readiness at the start of each waiting window and
    // reports the recorded pointer at the start of each measurement window.
    let mut schedule = BTreeMap::new();
    for (w, p) in apparatus.iter().enumerate() {
        let tick = w as u64 * cfg.ticks_per_window + 1;
        if w % 2 == 0 {
            schedule.insert(tick, AliceEvent::Ready);
        } else if let Some(p) = p {
            schedule.insert(tick, AliceEvent::Outcome(*p));
        }
    }
    let noise = (0..cfg.noise_sources)
        .map(|i| NoiseSpec {
            name: format!("noise-{i}"),
            tag: Word::new(vec![0xb, (i % 16) as u8, (i / 16 % 16) as u8]).expect("valid symbols"),
            drive: if i % 2 == 0 { NoiseDrive::Random } else { NoiseDrive::Mirror },
            states: 3 + i,
            machine_seed: seed ^ (i as u64 + 1),
        })
        .collect();
    let channel = ChannelScenario {
        pointer_count: map.pointer_count(),
        ticks: apparatus.len() as u64 * cfg.ticks_per_window,
        alice_tag: cfg.alice_tag.clone(),
        schedule,
        noise,
        criterion: Criterion::new(&cfg.sender, cfg.alice_tag.clone()),
    }
    .run(seed)
    .map_err(|e| fail(&e))?;

    let mut measurement = Measurement {
        ticks_per_window: cfg.ticks_per_window,
        apparatus,
        records: channel.records.clone(),
        observer: DiagramInstance {
            quantization: cfg.thresholds.quantization,
            sequence: vec![],
            interpretation: InterpretationTable::default(),
            info_dynamics: InfoDynamics::default(),
        },
    };
    let in_force = measurement.record_labels()?;

    // Observer basis: index 0 holds "ready", index 1 + n holds pointer n.
    let dim = 1 + map.pointer_count();
    let label_of = |i: usize| {
        if i == 0 {
            InfoLabel::ready(&cfg.sender)
        } else {
            InfoLabel::pointer(&cfg.sender, i - 1)
        }
    };
    let mut obs_samples = Vec::with_capacity(in_force.len() * len);
    for l in &in_force {
        let held = l.as_ref().and_then(InfoLabel::pointer_value).map_or(0, |n| n + 1);
        let rest = cfg.leakage / (dim - 1) as f64;
        let powers: Vec<f64> = (0..dim).map(|i| if i == held { 1.0 - cfg.leakage } else { rest }).collect();
        obs_samples.extend(std::iter::repeat_n(amplitudes(&powers), len));
    }
    let obs_labels = (0..dim).map(|i| label_of(i).to_string()).collect();
    let observer = Trajectory::new(1.0, 1.0, obs_labels, obs_samples, cfg.thresholds.eps_norm).map_err(|e| fail(&e))?;
    let observer_states = q_general(&observer, len, &cfg.thresholds).map_err(|e| fail(&e))?;

    let digits = cfg.thresholds.quantization as usize;
    let interpretation = InterpretationTable {
        entries: (0..dim)
            .map(|i| (QuasiStateId(format!("{i}:{:.digits$}", 1.0)), label_of(i)))
            .collect(),
    };
    let ready = InfoLabel::ready(&cfg.sender);
    let mut allowed: BTreeMap<InfoLabel, BTreeSet<InfoLabel>> = BTreeMap::new();
    allowed.insert(ready.clone(), (0..dim).map(label_of).collect());
    for i in 1..dim {
        allowed.insert(label_of(i), BTreeSet::from([ready.clone()]));
    }
    measurement.observer = DiagramInstance::from_quasi_states(
        &observer_states,
        cfg.thresholds.quantization,
        interpretation,
        InfoDynamics { allowed },
    );

    Ok(Scenario {
        config: cfg.clone(),
        chain,
        apparatus_states,
        channel,
        observer,
        observer_states,
        measurement,
    })
}
