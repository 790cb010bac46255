//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the search or projection code it is compared
//! against.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TIE_RTOL: f64 = 1e-12;
pub const ALPHA_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBlock {
    pub members: Vec<usize>,
    pub dominant: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleChoice {
    pub subsets: Vec<Vec<usize>>,
    pub dominants: Vec<usize>,
    pub dispersion: f64,
    /// Number of partitions sharing max N and min dispersion.
    pub tied: usize,
    pub distinct_states: usize,
}

/// Every labelling of `0..dim` with labels `0..=dim` as a restricted growth
/// string, label 0 meaning "unused". Blocks of size one are discarded by
/// the caller, so this over-generates and filters.
fn for_each_labelling(dim: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(i: usize, dim: usize, max_label: usize, lab: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == dim {
            f(lab);
            return;
        }
        for l in 0..=max_label + 1 {
            lab.push(l);
            rec(i + 1, dim, max_label.max(l), lab, f);
            lab.pop();
        }
    }
    rec(0, dim, 0, &mut Vec::new(), f);
}

fn block_of(members: Vec<usize>, p: &[f64]) -> Option<OracleBlock> {
    let top = members.iter().map(|&i| p[i]).fold(f64::NEG_INFINITY, f64::max);
    let dominant = *members.iter().find(|&&i| p[i] == top).unwrap();
    let mut rest = 0.0;
    for &i in &members {
        if i != dominant {
            rest += p[i];
        }
    }
    let alpha = match (rest > 0.0, top > 0.0) {
        (true, _) => top / rest,
        (false, true) => f64::INFINITY,
        (false, false) => return None,
    };
    Some(OracleBlock { members, dominant, alpha })
}

/// All admissible partitions as lists of blocks, canonical order inside.
pub fn oracle_partitions(p: &[f64], alpha_min: f64) -> Vec<Vec<OracleBlock>> {
    let dim = p.len();
    let mut out: Vec<Vec<OracleBlock>> = Vec::new();
    for_each_labelling(dim, &mut |lab| {
        let max_label = lab.iter().copied().max().unwrap_or(0);
        let mut blocks = Vec::new();
        for l in 1..=max_label {
            let members: Vec<usize> = (0..dim).filter(|&i| lab[i] == l).collect();
            if members.len() < 2 {
                return;
            }
            match block_of(members, p) {
                Some(b) if b.alpha > alpha_min * (1.0 + ALPHA_RTOL) => blocks.push(b),
                _ => return,
            }
        }
        if blocks.is_empty() {
            return;
        }
        blocks.sort_by(|a, b| a.members.cmp(&b.members));
        out.push(blocks);
    });
    out
}

pub fn oracle_dispersion(blocks: &[OracleBlock], cap: f64) -> f64 {
    let a: Vec<f64> = blocks.iter().map(|b| if b.alpha > cap { cap } else { b.alpha }).collect();
    let n = a.len() as f64;
    let m = a.iter().sum::<f64>() / n;
    (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// argmax N, then argmin dispersion, then lexicographically smallest subsets.
pub fn oracle_maximal(p: &[f64], alpha_min: f64, cap: f64) -> Option<OracleChoice> {
    if p.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    let all = oracle_partitions(p, alpha_min);
    let n = all.iter().map(Vec::len).max()?;
    let top: Vec<&Vec<OracleBlock>> = all.iter().filter(|b| b.len() == n).collect();
    let dmin = top.iter().map(|b| oracle_dispersion(b, cap)).fold(f64::INFINITY, f64::min);
    let bound = dmin + TIE_RTOL * dmin.max(1.0);
    let mut tied: Vec<&Vec<OracleBlock>> = top
        .into_iter()
        .filter(|b| oracle_dispersion(b, cap) <= bound)
        .collect();
    tied.sort_by_key(|b| b.iter().map(|x| x.members.clone()).collect::<Vec<_>>());
    let mut states: Vec<Vec<usize>> = tied
        .iter()
        .map(|b| {
            let mut d: Vec<usize> = b.iter().map(|x| x.dominant).collect();
            d.sort();
            d
        })
        .collect();
    states.sort();
    states.dedup();
    let best = tied[0];
    let mut dominants: Vec<usize> = best.iter().map(|b| b.dominant).collect();
    dominants.sort();
    Some(OracleChoice {
        subsets: best.iter().map(|b| b.members.clone()).collect(),
        dominants,
        dispersion: oracle_dispersion(best, cap),
        tied: tied.len(),
        distinct_states: states.len(),
    })
}

/// Random spectrum with roughly one index in eight set to exactly zero, so
/// infinite ratios are exercised.
pub fn random_spectrum(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| if rng.random_bool(0.125) { 0.0 } else { rng.random::<f64>() })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Left-rectangle power integral computed sample by sample in time order.
pub fn naive_power(samples: &[Vec<(f64, f64)>], k: usize, dt: f64) -> f64 {
    samples.iter().map(|s| (s[k].0 * s[k].0 + s[k].1 * s[k].1) * dt).sum()
}

/// Three-sigma binomial band.
pub fn within_three_sigma(freq: f64, p: f64, trials: usize) -> bool {
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    (freq - p).abs() <= 3.0 * sigma + 1e-15
}
