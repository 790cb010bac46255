//! Quasi-processes and interpretation maps as finite tables, and the
//! commutation checks between physical and informational dynamics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{Content, Record};
use crate::projection::QuasiState;

mod scenario;

pub use scenario::{build_scenario, Scenario, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("a quasi-process needs at least 2 windows, got {0}")]
    TooShort(usize),
    #[error("window {window}: quasi-state {id} has no interpretation")]
    Unresolved { window: usize, id: QuasiStateId },
    #[error("windows misaligned: {0}")]
    Misaligned(String),
    #[error("invalid label '{0}'")]
    Label(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, ConsistencyError>;

/// Canonical key of a quasi-state: `index:weight` pairs sorted by index,
/// weights normalized and printed with a fixed number of decimals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuasiStateId(pub String);

impl QuasiStateId {
    pub fn of(q: &QuasiState, quantization: u32) -> Self {
        let digits = quantization as usize;
        let parts: Vec<String> = q
            .indices()
            .iter()
            .zip(q.normalized_weights())
            .map(|(i, w)| format!("{i}:{w:.digits$}"))
            .collect();
        Self(parts.join(","))
    }
}

impl fmt::Display for QuasiStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn identify(seq: &[Option<QuasiState>], quantization: u32) -> Vec<Option<QuasiStateId>> {
    seq.iter()
        .map(|q| q.as_ref().map(|q| QuasiStateId::of(q, quantization)))
        .collect()
}

/// A source seen with more than one successor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nondeterminism {
    pub source: QuasiStateId,
    pub targets: BTreeSet<QuasiStateId>,
    /// Source windows of every transition out of `source`.
    pub windows: Vec<usize>,
}

/// Transitions between quasi-states of adjacent non-Null windows.
///
/// `transition` keeps the first successor seen for each source; any source
/// with a second, different successor is listed in `conflicts`. Identifiers
/// that never have a non-Null successor appear in `terminal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiProcess {
    pub transition: BTreeMap<QuasiStateId, QuasiStateId>,
    pub conflicts: Vec<Nondeterminism>,
    pub terminal: BTreeSet<QuasiStateId>,
    /// The per-window identifiers the map was read from.
    pub derived_from: Vec<Option<QuasiStateId>>,
}

impl QuasiProcess {
    pub fn is_deterministic(&self) -> bool {
        self.conflicts.is_empty()
    }
}

pub fn induce_process(seq: &[Option<QuasiState>], quantization: u32) -> Result<QuasiProcess> {
    induce_process_ids(identify(seq, quantization))
}

pub fn induce_process_ids(ids: Vec<Option<QuasiStateId>>) -> Result<QuasiProcess> {
    if ids.len() < 2 {
        return Err(ConsistencyError::TooShort(ids.len()));
    }
    let mut seen: BTreeMap<QuasiStateId, (BTreeSet<QuasiStateId>, Vec<usize>)> = BTreeMap::new();
    let mut transition = BTreeMap::new();
    for (w, pair) in ids.windows(2).enumerate() {
        if let [Some(a), Some(b)] = pair {
            transition.entry(a.clone()).or_insert_with(|| b.clone());
            let e = seen.entry(a.clone()).or_default();
            e.0.insert(b.clone());
            e.1.push(w);
        }
    }
    let conflicts = seen
        .into_iter()
        .filter(|(_, (t, _))| t.len() > 1)
        .map(|(source, (targets, windows))| Nondeterminism { source, targets, windows })
        .collect();
    let terminal = ids
        .iter()
        .flatten()
        .filter(|id| !transition.contains_key(*id))
        .cloned()
        .collect();
    Ok(QuasiProcess { transition, conflicts, terminal, derived_from: ids })
}

/// Information content an observer state stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InfoLabel {
    /// `[X,ready]`
    Ready { sender: String },
    /// `[X,Pn]`
    Pointer { sender: String, value: usize },
    /// Any other content, kept verbatim.
    Named(String),
}

impl InfoLabel {
    pub fn ready(sender: &str) -> Self {
        InfoLabel::Ready { sender: sender.to_string() }
    }

    pub fn pointer(sender: &str, value: usize) -> Self {
        InfoLabel::Pointer { sender: sender.to_string(), value }
    }

    pub fn of_record(r: &Record) -> Self {
        match r.content {
            Content::Ready => Self::ready(&r.sender),
            Content::Pointer(v) => Self::pointer(&r.sender, v),
        }
    }

    pub fn pointer_value(&self) -> Option<usize> {
        match self {
            InfoLabel::Pointer { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl fmt::Display for InfoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfoLabel::Ready { sender } => write!(f, "[{sender},ready]"),
            InfoLabel::Pointer { sender, value } => write!(f, "[{sender},P{value}]"),
            InfoLabel::Named(s) => f.write_str(s),
        }
    }
}

impl FromStr for InfoLabel {
    type Err = ConsistencyError;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(ConsistencyError::Label(s.to_string()));
        }
        let inner = s.strip_prefix('[').and_then(|x| x.strip_suffix(']'));
        if let Some((sender, content)) = inner.and_then(|x| x.split_once(',')) {
            if !sender.is_empty() && !sender.contains(',') {
                if let Ok(c) = content.parse::<Content>() {
                    return Ok(match c {
                        Content::Ready => Self::ready(sender),
                        Content::Pointer(v) => Self::pointer(sender, v),
                    });
                }
            }
        }
        Ok(InfoLabel::Named(s.to_string()))
    }
}

impl Serialize for InfoLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InfoLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Quasi-state identifier to information label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterpretationTable {
    pub entries: BTreeMap<QuasiStateId, InfoLabel>,
}

impl InterpretationTable {
    pub fn interpret(&self, id: &QuasiStateId) -> Option<&InfoLabel> {
        self.entries.get(id)
    }
}

/// Which label may follow which. A relation rather than a function: from
/// `[A,ready]` the next label depends on what A reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InfoDynamics {
    pub allowed: BTreeMap<InfoLabel, BTreeSet<InfoLabel>>,
}

impl InfoDynamics {
    pub fn allows(&self, from: &InfoLabel, to: &InfoLabel) -> bool {
        self.allowed.get(from).is_some_and(|s| s.contains(to))
    }

    pub fn successors(&self, from: &InfoLabel) -> Vec<InfoLabel> {
        self.allowed.get(from).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }
}

/// An observer's quasi-state sequence with its interpretation and the
/// dynamics its information content is supposed to follow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramInstance {
    pub quantization: u32,
    pub sequence: Vec<Option<QuasiStateId>>,
    pub interpretation: InterpretationTable,
    pub info_dynamics: InfoDynamics,
}

impl DiagramInstance {
    pub fn from_quasi_states(
        seq: &[Option<QuasiState>],
        quantization: u32,
        interpretation: InterpretationTable,
        info_dynamics: InfoDynamics,
    ) -> Self {
        Self { quantization, sequence: identify(seq, quantization), interpretation, info_dynamics }
    }

    /// Interpreted label per window; Null windows give `None`.
    pub fn labels(&self) -> Result<Vec<Option<InfoLabel>>> {
        self.sequence
            .iter()
            .enumerate()
            .map(|(window, id)| match id {
                None => Ok(None),
                Some(id) => self
                    .interpretation
                    .interpret(id)
                    .cloned()
                    .map(Some)
                    .ok_or_else(|| ConsistencyError::Unresolved { window, id: id.clone() }),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    /// Observer labels against the info dynamics.
    Observer,
    /// Decoded records against the observer and the info dynamics.
    Record,
    /// Observer pointer against the apparatus pointer.
    Pointer,
}

/// `windows` are the window indices involved; `expected` lists the labels
/// that would have been consistent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub leg: Leg,
    pub windows: Vec<usize>,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagram1Report {
    pub digest: String,
    pub quantization: u32,
    pub pairs_checked: usize,
    pub vacuous: bool,
    pub violations: Vec<Violation>,
}

impl Diagram1Report {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

fn digest_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("plain data serializes");
    hex::encode(Sha256::digest(bytes))
}

fn label_transitions(labels: &[Option<InfoLabel>], dynamics: &InfoDynamics, leg: Leg) -> (usize, Vec<Violation>) {
    let mut pairs = 0;
    let mut out = Vec::new();
    for (w, pair) in labels.windows(2).enumerate() {
        if let [Some(a), Some(b)] = pair {
            pairs += 1;
            if !dynamics.allows(a, b) {
                out.push(Violation {
                    leg,
                    windows: vec![w, w + 1],
                    expected: dynamics.successors(a).iter().map(ToString::to_string).collect(),
                    found: b.to_string(),
                });
            }
        }
    }
    (pairs, out)
}

/// Checks every adjacent pair of non-Null windows: the label of the second
/// must be a successor of the label of the first.
pub fn check_diagram1(d: &DiagramInstance) -> Result<Diagram1Report> {
    let labels = d.labels()?;
    let (pairs, violations) = label_transitions(&labels, &d.info_dynamics, Leg::Observer);
    Ok(Diagram1Report {
        digest: digest_of(d),
        quantization: d.quantization,
        pairs_checked: pairs,
        vacuous: pairs == 0,
        violations,
    })
}

/// A measurement run cut into windows of `ticks_per_window` ticks; window
/// `w` covers ticks `w * ticks_per_window + 1 ..= (w + 1) * ticks_per_window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    pub ticks_per_window: u64,
    /// Pointer recorded by the apparatus in each window, if any.
    pub apparatus: Vec<Option<usize>>,
    pub records: Vec<Record>,
    pub observer: DiagramInstance,
}

impl Measurement {
    /// Apparatus pointers from O-induced quasi-states over the pointer basis.
    pub fn apparatus_pointers(induced: &[Option<QuasiState>]) -> Vec<Option<usize>> {
        induced.iter().map(|q| q.as_ref().map(|q| q.components[0].index)).collect()
    }

    /// Record label in force during each window: the last record received
    /// in the window, else the one in force before it.
    pub fn record_labels(&self) -> Result<Vec<Option<InfoLabel>>> {
        let windows = self.apparatus.len();
        if self.ticks_per_window == 0 {
            return Err(ConsistencyError::Misaligned("zero ticks per window".into()));
        }
        let mut last: Vec<Option<InfoLabel>> = vec![None; windows];
        for r in &self.records {
            let w = (r.time.max(1) - 1) / self.ticks_per_window;
            let slot = last.get_mut(w as usize).ok_or_else(|| {
                ConsistencyError::Misaligned(format!("record at t={} lies beyond window {}", r.time, windows))
            })?;
            *slot = Some(InfoLabel::of_record(r));
        }
        let mut current = None;
        Ok(last
            .into_iter()
            .map(|l| {
                if l.is_some() {
                    current = l;
                }
                current.clone()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagram2Report {
    pub digest: String,
    pub quantization: u32,
    pub windows: usize,
    pub diagram1: Diagram1Report,
    pub violations: Vec<Violation>,
    /// Arrows of the diagram that cannot be observed from inside the run.
    pub unchecked: Vec<String>,
}

impl Diagram2Report {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty() && self.diagram1.consistent()
    }

    pub fn all_violations(&self) -> impl Iterator<Item = &Violation> {
        self.diagram1.violations.iter().chain(&self.violations)
    }
}

/// Record leg: the observer's label equals the record in force, and record
/// changes follow the info dynamics. Pointer leg: an observer holding
/// `[A,Pn]` needs the apparatus to record pointer n, and an apparatus
/// recording a pointer needs the observer to hold it. A Null apparatus
/// window with the observer in a non-pointer state asserts nothing.
pub fn check_diagram2(m: &Measurement) -> Result<Diagram2Report> {
    let windows = m.apparatus.len();
    if m.observer.sequence.len() != windows {
        return Err(ConsistencyError::Misaligned(format!(
            "{windows} apparatus windows, {} observer windows",
            m.observer.sequence.len()
        )));
    }
    let observer = m.observer.labels()?;
    let records = m.record_labels()?;
    let mut violations = Vec::new();

    for (w, (o, r)) in observer.iter().zip(&records).enumerate() {
        if let (Some(o), Some(r)) = (o, r) {
            if o != r {
                violations.push(Violation {
                    leg: Leg::Record,
                    windows: vec![w],
                    expected: vec![r.to_string()],
                    found: o.to_string(),
                });
            }
        }
    }
    let (_, record_steps) = label_transitions(&records, &m.observer.info_dynamics, Leg::Record);
    violations.extend(record_steps);

    for (w, (o, a)) in observer.iter().zip(&m.apparatus).enumerate() {
        let held = o.as_ref().and_then(InfoLabel::pointer_value);
        match (held, a) {
            (Some(n), Some(p)) if n == *p => {}
            (None, None) => {}
            (Some(n), _) => violations.push(Violation {
                leg: Leg::Pointer,
                windows: vec![w],
                expected: vec![a.map_or("Null".to_string(), |p| format!("P{p}"))],
                found: format!("P{n}"),
            }),
            (None, Some(p)) => violations.push(Violation {
                leg: Leg::Pointer,
                windows: vec![w],
                expected: vec![format!("P{p}")],
                found: o.as_ref().map_or("Null".to_string(), ToString::to_string),
            }),
        }
    }

    let diagram1 = check_diagram1(&m.observer)?;
    Ok(Diagram2Report {
        digest: digest_of(m),
        quantization: m.observer.quantization,
        windows,
        diagram1,
        violations,
        unchecked: vec!["induced apparatus-observer entanglement map (not represented by the observer)".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> Option<QuasiStateId> {
        Some(QuasiStateId(s.into()))
    }

    #[test]
    fn alternating_sequence() {
        let p = induce_process_ids(vec![id("a"), id("b"), id("a"), id("b")]).unwrap();
        assert_eq!(p.transition.len(), 2);
        assert_eq!(p.transition[&QuasiStateId("a".into())], QuasiStateId("b".into()));
        assert_eq!(p.transition[&QuasiStateId("b".into())], QuasiStateId("a".into()));
        assert!(p.is_deterministic());
        assert!(p.terminal.is_empty());
    }

    #[test]
    fn null_breaks_adjacency() {
        let p = induce_process_ids(vec![id("a"), None, id("b")]).unwrap();
        assert!(p.transition.is_empty());
        assert_eq!(p.terminal.len(), 2);
        assert!(induce_process_ids(vec![id("a")]).is_err());
    }

    #[test]
    fn conflicts_are_reported() {
        let p = induce_process_ids(vec![id("a"), id("b"), id("a"), id("c")]).unwrap();
        assert_eq!(p.conflicts.len(), 1);
        assert_eq!(p.conflicts[0].windows, vec![0, 2]);
        assert_eq!(p.conflicts[0].targets.len(), 2);
    }

    #[test]
    fn label_text_round_trip() {
        for s in ["[A,ready]", "[A,P3]", "[Bob's A,P0]", "free text", "[A,P]"] {
            assert_eq!(s.parse::<InfoLabel>().unwrap().to_string(), s);
        }
        assert_eq!("[A,P3]".parse::<InfoLabel>().unwrap(), InfoLabel::pointer("A", 3));
        assert!(matches!("[A,P]".parse::<InfoLabel>().unwrap(), InfoLabel::Named(_)));
    }

    #[test]
    fn empty_instance_is_vacuous() {
        let d = DiagramInstance {
            quantization: 6,
            sequence: vec![],
            interpretation: InterpretationTable::default(),
            info_dynamics: InfoDynamics::default(),
        };
        let r = check_diagram1(&d).unwrap();
        assert!(r.vacuous && r.consistent());
        assert_eq!(r.digest.len(), 64);
    }

    #[test]
    fn unresolved_identifier_is_an_error() {
        let d = DiagramInstance {
            quantization: 6,
            sequence: vec![id("x"), id("y")],
            interpretation: InterpretationTable::default(),
            info_dynamics: InfoDynamics::default(),
        };
        assert!(matches!(check_diagram1(&d), Err(ConsistencyError::Unresolved { window: 0, .. })));
    }
}
