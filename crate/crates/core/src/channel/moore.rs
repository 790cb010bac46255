use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelError, Result};

/// Deterministic finite-state machine whose output depends on the state only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MooreMachine<O> {
    inputs: usize,
    /// `transition[state][input]`.
    transition: Vec<Vec<usize>>,
    output: Vec<O>,
    initial: usize,
}

impl<O: Clone + Eq> MooreMachine<O> {
    /// Checks that the transition table is total over `0..inputs` and that
    /// every target state exists.
    pub fn new(inputs: usize, transition: Vec<Vec<usize>>, output: Vec<O>, initial: usize) -> Result<Self> {
        let states = transition.len();
        if states == 0 || output.len() != states || initial >= states {
            return Err(ChannelError::Machine(format!(
                "{states} transition rows, {} outputs, initial state {initial}",
                output.len()
            )));
        }
        for (s, row) in transition.iter().enumerate() {
            if row.len() != inputs {
                return Err(ChannelError::Machine(format!(
                    "state {s} defines {} of {inputs} inputs",
                    row.len()
                )));
            }
            if let Some(t) = row.iter().find(|&&t| t >= states) {
                return Err(ChannelError::Machine(format!("state {s} moves to missing state {t}")));
            }
        }
        Ok(Self { inputs, transition, output, initial })
    }

    /// A machine with uniformly random transitions and outputs drawn from
    /// `outputs`.
    pub fn random<R: Rng>(states: usize, inputs: usize, outputs: &[O], rng: &mut R) -> Result<Self> {
        if outputs.is_empty() {
            return Err(ChannelError::Machine("empty output alphabet".into()));
        }
        let transition = (0..states)
            .map(|_| (0..inputs).map(|_| rng.random_range(0..states)).collect())
            .collect();
        let output = (0..states)
            .map(|_| outputs[rng.random_range(0..outputs.len())].clone())
            .collect();
        Self::new(inputs, transition, output, 0)
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn next(&self, state: usize, input: usize) -> usize {
        self.transition[state][input]
    }

    pub fn output(&self, state: usize) -> &O {
        &self.output[state]
    }

    /// Output after reading `input` from the initial state.
    pub fn output_after(&self, input: &[usize]) -> &O {
        let s = input.iter().fold(self.initial, |s, &i| self.next(s, i));
        self.output(s)
    }

    /// Output sequence of length `input.len() + 1`, starting with the
    /// initial state's output.
    pub fn trace(&self, input: &[usize]) -> Vec<O> {
        let mut s = self.initial;
        let mut out = vec![self.output[s].clone()];
        for &i in input {
            s = self.next(s, i);
            out.push(self.output[s].clone());
        }
        out
    }
}

/// Breadth-first search for the shortest input of length at most `depth` on
/// which the two machines produce different outputs. The empty input
/// compares the initial outputs.
pub fn identification_experiment<O: Clone + Eq>(
    a: &MooreMachine<O>,
    b: &MooreMachine<O>,
    depth: usize,
) -> Result<Option<Vec<usize>>> {
    if a.inputs != b.inputs {
        return Err(ChannelError::Machine(format!(
            "input alphabets differ ({} vs {})",
            a.inputs, b.inputs
        )));
    }
    let start = (a.initial, b.initial);
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, Vec::new())]);
    while let Some(((sa, sb), word)) = queue.pop_front() {
        if a.output(sa) != b.output(sb) {
            return Ok(Some(word));
        }
        if word.len() == depth {
            continue;
        }
        for i in 0..a.inputs {
            let next = (a.next(sa, i), b.next(sb, i));
            if seen.insert(next) {
                let mut w = word.clone();
                w.push(i);
                queue.push_back((next, w));
            }
        }
    }
    Ok(None)
}

/// Two binary-input machines that agree on every input of length up to
/// `depth` and differ on every input of length `depth + 1`.
///
/// Both count input symbols up to `depth + 1` and then stay put; only the
/// second outputs 1 in its final state.
pub fn indistinguishable_pair(depth: usize) -> (MooreMachine<u8>, MooreMachine<u8>) {
    let n = depth + 2;
    let transition: Vec<Vec<usize>> = (0..n).map(|s| vec![(s + 1).min(n - 1); 2]).collect();
    let quiet = vec![0u8; n];
    let mut loud = quiet.clone();
    loud[n - 1] = 1;
    (
        MooreMachine::new(2, transition.clone(), quiet, 0).expect("valid machine"),
        MooreMachine::new(2, transition, loud, 0).expect("valid machine"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_machines_never_differ() {
        let (a, _) = indistinguishable_pair(3);
        for d in 0..6 {
            assert_eq!(identification_experiment(&a, &a, d).unwrap(), None);
        }
    }

    #[test]
    fn depth_three_pair() {
        let (a, b) = indistinguishable_pair(3);
        assert_eq!(identification_experiment(&a, &b, 3).unwrap(), None);
        let w = identification_experiment(&a, &b, 4).unwrap().unwrap();
        assert_eq!(w, vec![0, 0, 0, 0]);
    }

    #[test]
    fn initial_outputs_differ() {
        let a = MooreMachine::new(1, vec![vec![0]], vec![0u8], 0).unwrap();
        let b = MooreMachine::new(1, vec![vec![0]], vec![1u8], 0).unwrap();
        assert_eq!(identification_experiment(&a, &b, 0).unwrap(), Some(vec![]));
    }

    #[test]
    fn partial_tables_are_rejected() {
        assert!(MooreMachine::new(2, vec![vec![0]], vec![0u8], 0).is_err());
        assert!(MooreMachine::new(1, vec![vec![1]], vec![0u8], 0).is_err());
        assert!(MooreMachine::new(1, vec![vec![0]], vec![0u8], 1).is_err());
        let a = MooreMachine::new(1, vec![vec![0]], vec![0u8], 0).unwrap();
        let b = MooreMachine::new(2, vec![vec![0, 0]], vec![0u8], 0).unwrap();
        assert!(identification_experiment(&a, &b, 2).is_err());
    }

    #[test]
    fn trace_includes_initial_output() {
        let (_, b) = indistinguishable_pair(1);
        assert_eq!(b.trace(&[1, 0, 1]), vec![0, 0, 1, 1]);
        assert_eq!(*b.output_after(&[0, 0]), 1);
    }
}
