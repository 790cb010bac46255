//! Single-entry corruptions of a consistent measurement, each with the set
//! of windows a violation may legitimately touch.

#![allow(dead_code)]

use std::collections::BTreeSet;

use quasistate::consistency::{InfoLabel, Measurement, QuasiStateId};

pub struct Fault {
    pub description: String,
    pub measurement: Measurement,
    pub reachable: BTreeSet<usize>,
}

fn around(ws: impl IntoIterator<Item = usize>, n: usize) -> BTreeSet<usize> {
    ws.into_iter()
        .flat_map(|w| [w.saturating_sub(1), w, (w + 1).min(n - 1)])
        .collect()
}

pub fn inject(m: &Measurement, count: usize, pointer_count: usize) -> Vec<Fault> {
    let n = m.apparatus.len();
    let seq = &m.observer.sequence;
    let labels = m.observer.labels().unwrap();
    let ids: Vec<QuasiStateId> = seq.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let pairs: Vec<(InfoLabel, InfoLabel)> = labels
        .windows(2)
        .filter_map(|p| match p {
            [Some(a), Some(b)] => Some((a.clone(), b.clone())),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    assert!(ids.len() >= 2 && !pairs.is_empty());

    (0..count)
        .map(|i| {
            let j = i / 4;
            let mut c = m.clone();
            match i % 4 {
                0 => {
                    let id = &ids[j % ids.len()];
                    let bogus = InfoLabel::pointer("A", 1000 + i);
                    c.observer.interpretation.entries.insert(id.clone(), bogus.clone());
                    let hit = (0..n).filter(|&w| seq[w].as_ref() == Some(id));
                    Fault {
                        description: format!("interpretation {id} -> {bogus}"),
                        reachable: around(hit, n),
                        measurement: c,
                    }
                }
                1 => {
                    let (s, t) = &pairs[j % pairs.len()];
                    c.observer.info_dynamics.allowed.get_mut(s).unwrap().remove(t);
                    let hit = (0..n - 1)
                        .filter(|&w| labels[w].as_ref() == Some(s) && labels[w + 1].as_ref() == Some(t))
                        .flat_map(|w| [w, w + 1]);
                    Fault {
                        description: format!("dynamics drops {s} -> {t}"),
                        reachable: hit.collect(),
                        measurement: c,
                    }
                }
                2 => {
                    let w = (j * 7 + 3) % n;
                    c.apparatus[w] = match c.apparatus[w] {
                        Some(p) => Some((p + 1) % pointer_count),
                        None => Some(1),
                    };
                    Fault {
                        description: format!("apparatus window {w} -> {:?}", c.apparatus[w]),
                        reachable: BTreeSet::from([w]),
                        measurement: c,
                    }
                }
                _ => {
                    let w = (j * 5 + 1) % n;
                    let current = seq[w].clone();
                    let other = ids.iter().find(|id| Some(*id) != current.as_ref()).unwrap().clone();
                    c.observer.sequence[w] = Some(other.clone());
                    Fault {
                        description: format!("observer window {w} -> {other}"),
                        reachable: around([w], n),
                        measurement: c,
                    }
                }
            }
        })
        .collect()
}
