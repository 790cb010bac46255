//! Measurement as communication: Alice reports pointer values over a shared
//! environment that other agents also write to, and Bob keeps only what his
//! criterion recognizes.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod language;
mod moore;

pub use language::{decode_body, encode, Content, Word, ALPHABET, MAX_VALUE_SYMBOLS};
pub use moore::{identification_experiment, indistinguishable_pair, MooreMachine};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid machine: {0}")]
    Machine(String),
    #[error("invalid word: {0}")]
    Word(String),
    #[error("malformed message at t={time}: {reason}")]
    Malformed { time: u64, reason: String },
    #[error("pointer value {value} at t={time} outside 0..{count}")]
    PointerOutOfRange { value: usize, count: usize, time: u64 },
    #[error("invalid channel configuration: {0}")]
    Config(String),
    #[error("transcript line {line}: {reason}")]
    Transcript { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Status,
    Pointer(usize),
    Noise,
}

/// One emission into the environment. `sender_tag` and `kind` are ground
/// truth kept by the simulator; Bob only sees `body` and `emit_time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub sender_tag: String,
    pub body: Vec<Word>,
    pub kind: MessageKind,
    pub emit_time: u64,
}

/// `[X, Y, t]`: Bob's name for the sender, the decoded content, receipt tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub sender: String,
    pub content: Content,
    pub time: u64,
}

/// What Alice is prompted to do at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AliceEvent {
    /// Announce readiness.
    Ready,
    /// Interaction with S produced this pointer value.
    Outcome(usize),
}

/// Input 0 is silence, 1 is [`AliceEvent::Ready`], `2 + v` is outcome `v`.
pub fn event_input(event: Option<AliceEvent>) -> usize {
    match event {
        None => 0,
        Some(AliceEvent::Ready) => 1,
        Some(AliceEvent::Outcome(v)) => 2 + v,
    }
}

/// The reporting machine: its state is the last input, and it outputs the
/// content belonging to that input. It therefore speaks only at ticks with a
/// scheduled event and says exactly what the event was.
pub fn reporting_machine(pointer_count: usize) -> MooreMachine<Option<Content>> {
    let inputs = pointer_count + 2;
    let transition = (0..inputs).map(|_| (0..inputs).collect()).collect();
    let mut output = vec![None, Some(Content::Ready)];
    output.extend((0..pointer_count).map(|v| Some(Content::Pointer(v))));
    MooreMachine::new(inputs, transition, output, 0).expect("total by construction")
}

/// Alice: a machine in her language driven by the S-interaction schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alice {
    pub tag: Word,
    pub machine: MooreMachine<Option<Content>>,
    pub schedule: BTreeMap<u64, AliceEvent>,
}

impl Alice {
    pub fn new(tag: Word, pointer_count: usize, schedule: BTreeMap<u64, AliceEvent>) -> Result<Self> {
        if let Some((t, v)) = schedule.iter().find_map(|(t, e)| match e {
            AliceEvent::Outcome(v) if *v >= pointer_count => Some((*t, *v)),
            _ => None,
        }) {
            return Err(ChannelError::PointerOutOfRange { value: v, count: pointer_count, time: t });
        }
        Ok(Self { tag, machine: reporting_machine(pointer_count), schedule })
    }
}

/// How a noise source chooses its input each tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDrive {
    /// Uniform over the machine's input alphabet.
    Random,
    /// Alice's input, so the source repeats her contents in its own language.
    Mirror,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub name: String,
    pub tag: Word,
    pub machine: MooreMachine<Option<Content>>,
    pub drive: NoiseDrive,
}

impl NoiseSource {
    /// Random machine emitting silence, readiness or any pointer value.
    pub fn random(name: &str, tag: Word, pointer_count: usize, states: usize, seed: u64) -> Result<Self> {
        let mut outputs = vec![None, Some(Content::Ready)];
        outputs.extend((0..pointer_count).map(|v| Some(Content::Pointer(v))));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let machine = MooreMachine::random(states.max(1), 4, &outputs, &mut rng)?;
        Ok(Self { name: name.to_string(), tag, machine, drive: NoiseDrive::Random })
    }

    /// Repeats Alice's contents, wrapped in `tag`.
    pub fn mirror(name: &str, tag: Word, alice: &Alice) -> Self {
        Self { name: name.to_string(), tag, machine: alice.machine.clone(), drive: NoiseDrive::Mirror }
    }
}

pub const ALICE_SENDER_TAG: &str = "alice";

/// Runs every machine for `ticks` ticks (`1..=ticks`). Per tick the
/// emissions are ordered round-robin, starting from a source picked by the
/// seeded generator.
pub fn run_channel(alice: &Alice, noise: &[NoiseSource], ticks: u64, seed: u64) -> Result<Vec<Message>> {
    if ticks == 0 {
        return Err(ChannelError::Config("ticks must be at least 1".into()));
    }
    for n in noise {
        if n.drive == NoiseDrive::Mirror && n.machine.inputs() != alice.machine.inputs() {
            return Err(ChannelError::Config(format!("mirror source '{}' has the wrong input alphabet", n.name)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alice_state = alice.machine.initial();
    let mut noise_state: Vec<usize> = noise.iter().map(|n| n.machine.initial()).collect();
    let mut out = Vec::new();
    let sources = noise.len() + 1;
    for t in 1..=ticks {
        let input = event_input(alice.schedule.get(&t).copied());
        alice_state = alice.machine.next(alice_state, input);
        let mut emitted: Vec<Option<Message>> = Vec::with_capacity(sources);
        emitted.push(alice.machine.output(alice_state).map(|c| Message {
            sender_tag: ALICE_SENDER_TAG.to_string(),
            body: encode(&alice.tag, c),
            kind: match c {
                Content::Ready => MessageKind::Status,
                Content::Pointer(v) => MessageKind::Pointer(v),
            },
            emit_time: t,
        }));
        for (n, s) in noise.iter().zip(noise_state.iter_mut()) {
            let i = match n.drive {
                NoiseDrive::Random => rng.random_range(0..n.machine.inputs()),
                NoiseDrive::Mirror => input,
            };
            *s = n.machine.next(*s, i);
            emitted.push(n.machine.output(*s).map(|c| Message {
                sender_tag: n.name.clone(),
                body: encode(&n.tag, c),
                kind: MessageKind::Noise,
                emit_time: t,
            }));
        }
        let start = rng.random_range(0..sources);
        out.extend((0..sources).filter_map(|k| emitted[(start + k) % sources].take()));
    }
    Ok(out)
}

/// Alice's reporting rules against her schedule: every scheduled event is
/// reported at its own tick with its own content, and nothing else is
/// reported. Returns one line per violation.
pub fn check_alice_rules(stream: &[Message], schedule: &BTreeMap<u64, AliceEvent>, ticks: u64) -> Vec<String> {
    let mut problems = Vec::new();
    let mut reported = BTreeMap::new();
    for m in stream.iter().filter(|m| m.sender_tag == ALICE_SENDER_TAG) {
        let claimed = match (m.kind, decode_body(&m.body)) {
            (MessageKind::Status, Ok(Content::Ready)) => AliceEvent::Ready,
            (MessageKind::Pointer(v), Ok(Content::Pointer(w))) if v == w => AliceEvent::Outcome(v),
            _ => {
                problems.push(format!("t={}: body disagrees with kind", m.emit_time));
                continue;
            }
        };
        if reported.insert(m.emit_time, claimed).is_some() {
            problems.push(format!("t={}: more than one report", m.emit_time));
        }
    }
    for (t, e) in schedule.range(1..=ticks) {
        match reported.remove(t) {
            Some(c) if c == *e => {}
            Some(c) => problems.push(format!("t={t}: reported {c:?}, event was {e:?}")),
            None => problems.push(format!("t={t}: event {e:?} not reported")),
        }
    }
    for (t, c) in reported {
        problems.push(format!("t={t}: reported {c:?} without an event"));
    }
    problems
}

/// Bob's a-priori means of recognizing Alice's language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    /// Bob's name for the sender.
    pub sender: String,
    pub tag: Word,
}

impl Criterion {
    pub fn new(sender: &str, tag: Word) -> Self {
        Self { sender: sender.to_string(), tag }
    }

    pub fn recognizes(&self, body: &[Word]) -> bool {
        body.first() == Some(&self.tag)
    }
}

/// Keeps the recognized messages as records, in stream order.
pub fn decode(stream: &[Message], crit: &Criterion) -> Result<Vec<Record>> {
    stream
        .iter()
        .filter(|m| crit.recognizes(&m.body))
        .map(|m| {
            decode_body(&m.body)
                .map(|content| Record { sender: crit.sender.clone(), content, time: m.emit_time })
                .map_err(|reason| ChannelError::Malformed { time: m.emit_time, reason })
        })
        .collect()
}

/// Per pointer value, the arrival ticks of its records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub arrivals: Vec<Vec<u64>>,
}

impl Histogram {
    pub fn counts(&self) -> Vec<usize> {
        self.arrivals.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.arrivals.iter().map(Vec::len).sum()
    }
}

/// Status records are skipped.
pub fn histogram(records: &[Record], pointer_count: usize) -> Result<Histogram> {
    let mut arrivals = vec![Vec::new(); pointer_count];
    for r in records {
        if let Content::Pointer(v) = r.content {
            arrivals
                .get_mut(v)
                .ok_or(ChannelError::PointerOutOfRange { value: v, count: pointer_count, time: r.time })?
                .push(r.time);
        }
    }
    Ok(Histogram { arrivals })
}

pub fn write_transcript<W: Write>(stream: &[Message], mut w: W) -> Result<()> {
    for m in stream {
        let line = serde_json::to_string(m).map_err(|e| ChannelError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| ChannelError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_transcript<R: BufRead>(r: R) -> Result<Vec<Message>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ChannelError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: Message = serde_json::from_str(&line)
            .map_err(|e| ChannelError::Transcript { line: i + 1, reason: e.to_string() })?;
        out.push(m);
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(records: &[Record], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| ChannelError::Io(e.to_string());
    wr.write_record(["sender", "content", "time"]).map_err(io)?;
    for r in records {
        wr.write_record([r.sender.as_str(), &r.content.to_string(), &r.time.to_string()])
            .map_err(io)?;
    }
    wr.flush().map_err(|e| ChannelError::Io(e.to_string()))
}

/// Serializable description of a whole channel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelScenario {
    pub pointer_count: usize,
    pub ticks: u64,
    pub alice_tag: Word,
    pub schedule: BTreeMap<u64, AliceEvent>,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub name: String,
    pub tag: Word,
    pub drive: NoiseDrive,
    /// Size of the random machine; unused when mirroring.
    #[serde(default = "default_noise_states")]
    pub states: usize,
    #[serde(default)]
    pub machine_seed: u64,
}

fn default_noise_states() -> usize {
    4
}

/// Everything a channel run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRun {
    pub stream: Vec<Message>,
    pub records: Vec<Record>,
    pub histogram: Histogram,
}

impl ChannelScenario {
    pub fn alice(&self) -> Result<Alice> {
        Alice::new(self.alice_tag.clone(), self.pointer_count, self.schedule.clone())
    }

    pub fn noise_sources(&self, alice: &Alice) -> Result<Vec<NoiseSource>> {
        self.noise
            .iter()
            .map(|n| {
                if n.tag == self.alice_tag {
                    return Err(ChannelError::Config(format!("noise source '{}' uses Alice's tag", n.name)));
                }
                match n.drive {
                    NoiseDrive::Random => {
                        NoiseSource::random(&n.name, n.tag.clone(), self.pointer_count, n.states, n.machine_seed)
                    }
                    NoiseDrive::Mirror => Ok(NoiseSource::mirror(&n.name, n.tag.clone(), alice)),
                }
            })
            .collect()
    }

    pub fn run(&self, seed: u64) -> Result<ChannelRun> {
        let alice = self.alice()?;
        let noise = self.noise_sources(&alice)?;
        let stream = run_channel(&alice, &noise, self.ticks, seed)?;
        let records = decode(&stream, &self.criterion)?;
        let histogram = histogram(&records, self.pointer_count)?;
        Ok(ChannelRun { stream, records, histogram })
    }
}
