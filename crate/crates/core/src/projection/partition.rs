//! Partial partitions of the basis into dominance blocks.
//!
//! A block `K` is a set of at least two basis indices. Its dominant index is
//! the one with the largest integrated power (lowest index on ties) and its
//! ratio is `alpha = p_k / sum_{j in K, j != k} p_j`, infinite when the other
//! members carry no power. A block made only of zero-power indices has no
//! maximum and is never admissible.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::{PowerSpectrum, ProjectionError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Sorted ascending.
    pub indices: Vec<usize>,
    pub dominant: usize,
    pub alpha: f64,
}

impl Block {
    /// Evaluates the dominance ratio of `indices` (sorted, at least two).
    /// Returns `None` for an all-zero block.
    pub fn evaluate(indices: Vec<usize>, powers: &[f64]) -> Option<Self> {
        debug_assert!(indices.len() >= 2 && indices.windows(2).all(|w| w[0] < w[1]));
        let mut dominant = indices[0];
        for &i in &indices[1..] {
            if powers[i] > powers[dominant] {
                dominant = i;
            }
        }
        let rest: f64 = indices
            .iter()
            .filter(|&&i| i != dominant)
            .map(|&i| powers[i])
            .sum();
        let top = powers[dominant];
        let alpha = if rest > 0.0 {
            top / rest
        } else if top > 0.0 {
            f64::INFINITY
        } else {
            return None;
        };
        Some(Self { indices, dominant, alpha })
    }

    /// `alpha` must clear `alpha_min` by the relative margin
    /// [`ALPHA_RTOL`], so blocks balanced up to summation roundoff never
    /// count as dominated.
    pub fn admissible(&self, alpha_min: f64) -> bool {
        self.alpha > alpha_min * (1.0 + ALPHA_RTOL)
    }
}

/// Relative margin by which a block's ratio must exceed `alpha_min`.
pub const ALPHA_RTOL: f64 = 1e-9;

/// Disjoint blocks, each admissible, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Block>,
}

impl Partition {
    /// Number of quasi-components `N`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Population standard deviation of the ratios, infinite (or larger)
    /// values clamped to `alpha_cap`. The flag reports whether any clamping
    /// happened.
    pub fn dispersion(&self, alpha_cap: f64) -> (f64, bool) {
        if self.blocks.is_empty() {
            return (0.0, false);
        }
        dispersion_of(&self.blocks, alpha_cap)
    }

    /// The canonical key used for tie-breaking.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.indices.clone()).collect()
    }

    /// Sorted dominant indices, which determine the resulting quasi-state.
    pub fn dominants(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.blocks.iter().map(|b| b.dominant).collect();
        d.sort_unstable();
        d
    }
}

/// Walks every admissible partition exactly once.
///
/// The smallest unassigned index is either left out, or starts a block
/// together with a non-empty subset of the larger unassigned indices. A
/// block is checked as soon as it is formed, so inadmissible branches are
/// cut immediately. `reachable(n)` receives the largest block count still
/// attainable on the current branch; returning false prunes it.
pub(crate) fn for_each_partition<F, B>(powers: &[f64], alpha_min: f64, reachable: B, mut visit: F)
where
    F: FnMut(&[Block]),
    B: Fn(usize) -> bool,
{
    let mut stack = Vec::new();
    let free: Vec<usize> = (0..powers.len()).collect();
    walk(powers, alpha_min, &free, &mut stack, &reachable, &mut visit);
}

fn walk<F, B>(
    powers: &[f64],
    alpha_min: f64,
    free: &[usize],
    stack: &mut Vec<Block>,
    reachable: &B,
    visit: &mut F,
) where
    F: FnMut(&[Block]),
    B: Fn(usize) -> bool,
{
    if !reachable(stack.len() + free.len() / 2) {
        return;
    }
    let Some((&head, rest)) = free.split_first() else {
        if !stack.is_empty() {
            visit(stack);
        }
        return;
    };
    walk(powers, alpha_min, rest, stack, reachable, visit);
    if rest.is_empty() {
        return;
    }
    // Every non-empty subset of `rest` joins `head`.
    let n = rest.len();
    let mut remaining = Vec::with_capacity(n);
    for mask in 1u64..(1u64 << n) {
        let mut dominant = head;
        let mut sum = powers[head];
        for (bit, &i) in rest.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                sum += powers[i];
                if powers[i] > powers[dominant] {
                    dominant = i;
                }
            }
        }
        // Cheap, conservative rejection; the exact test is Block::admissible.
        let top = powers[dominant];
        if top < alpha_min * (sum - top) * (1.0 - 1e-9) {
            continue;
        }
        let mut members = Vec::with_capacity(mask.count_ones() as usize + 1);
        members.push(head);
        remaining.clear();
        for (bit, &i) in rest.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                members.push(i);
            } else {
                remaining.push(i);
            }
        }
        let Some(block) = Block::evaluate(members, powers) else {
            continue;
        };
        if !block.admissible(alpha_min) {
            continue;
        }
        stack.push(block);
        let next = remaining.clone();
        walk(powers, alpha_min, &next, stack, reachable, visit);
        stack.pop();
    }
}

fn check_limit(dim: usize, limit: usize) -> Result<()> {
    if dim > limit {
        Err(ProjectionError::DimensionAboveLimit { dim, limit })
    } else {
        Ok(())
    }
}

/// Every admissible partial partition with at least one block, each block of
/// size two or more with ratio strictly above `alpha_min`.
pub fn enumerate_partitions(
    spectrum: &PowerSpectrum,
    alpha_min: f64,
    brute_force_limit: usize,
) -> Result<Vec<Partition>> {
    check_limit(spectrum.dim(), brute_force_limit)?;
    let mut out = Vec::new();
    for_each_partition(&spectrum.per_basis_power, alpha_min, |_| true, |blocks| {
        out.push(Partition { blocks: blocks.to_vec() })
    });
    Ok(out)
}

/// Several partitions share the maximal dimension and minimal dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieReport {
    /// Partitions in the tied set, including the one chosen.
    pub tied_partitions: usize,
    /// Distinct quasi-states (dominant index sets) among them.
    pub distinct_states: usize,
}

impl TieReport {
    /// True when the tie changes which quasi-state is produced.
    pub fn is_degenerate(&self) -> bool {
        self.distinct_states > 1
    }
}

/// Outcome of the maximal-partition search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub partition: Partition,
    pub dispersion: f64,
    pub clamped: bool,
    pub tie: Option<TieReport>,
}

/// Relative tolerance under which two dispersions count as tied.
pub const DISPERSION_TIE_RTOL: f64 = 1e-12;

/// Maximum `N`, then minimum dispersion; remaining ties go to the
/// lexicographically smallest list of subsets and are reported.
pub fn select_maximal(
    spectrum: &PowerSpectrum,
    alpha_min: f64,
    alpha_cap: f64,
    brute_force_limit: usize,
) -> Result<Option<Selection>> {
    check_limit(spectrum.dim(), brute_force_limit)?;
    if spectrum.total_power <= 0.0 {
        return Ok(None);
    }
    let powers = &spectrum.per_basis_power;

    // Pass 1: maximal N and the smallest dispersion at that N.
    let best_n = Cell::new(0usize);
    let mut best_disp = f64::INFINITY;
    for_each_partition(
        powers,
        alpha_min,
        |reach| reach >= best_n.get(),
        |blocks| {
            let (d, _) = dispersion_of(blocks, alpha_cap);
            let n = blocks.len();
            if n > best_n.get() || (n == best_n.get() && d < best_disp) {
                best_n.set(n);
                best_disp = d;
            }
        },
    );
    let best_n = best_n.get();
    if best_n == 0 {
        return Ok(None);
    }

    // Pass 2: the tied set and its lexicographic minimum.
    let bound = best_disp + DISPERSION_TIE_RTOL * best_disp.max(1.0);
    let mut chosen: Option<(Vec<Block>, f64, bool)> = None;
    let mut tied = 0usize;
    let mut states: Vec<Vec<usize>> = Vec::new();
    for_each_partition(
        powers,
        alpha_min,
        |reach| reach >= best_n,
        |blocks| {
            if blocks.len() != best_n {
                return;
            }
            let (d, clamped) = dispersion_of(blocks, alpha_cap);
            if d > bound {
                return;
            }
            tied += 1;
            let mut dom: Vec<usize> = blocks.iter().map(|b| b.dominant).collect();
            dom.sort_unstable();
            if !states.contains(&dom) {
                states.push(dom);
            }
            let better = chosen.as_ref().is_none_or(|(c, _, _)| {
                blocks.iter().map(|b| &b.indices).lt(c.iter().map(|b| &b.indices))
            });
            if better {
                chosen = Some((blocks.to_vec(), d, clamped));
            }
        },
    );
    let (blocks, dispersion, clamped) = chosen.expect("tied set contains the optimum");
    let tie = (tied > 1).then_some(TieReport {
        tied_partitions: tied,
        distinct_states: states.len(),
    });
    Ok(Some(Selection { partition: Partition { blocks }, dispersion, clamped, tie }))
}

fn dispersion_of(blocks: &[Block], alpha_cap: f64) -> (f64, bool) {
    let clamp = |a: f64| if a > alpha_cap { alpha_cap } else { a };
    let n = blocks.len() as f64;
    let mean = blocks.iter().map(|b| clamp(b.alpha)).sum::<f64>() / n;
    let var = blocks.iter().map(|b| (clamp(b.alpha) - mean).powi(2)).sum::<f64>() / n;
    (var.sqrt(), blocks.iter().any(|b| b.alpha > alpha_cap))
}

/// Heuristic for dimensions past the brute-force limit.
///
/// Indices are visited by descending power; each unused one is paired with
/// the lowest-power unused index and the pair is kept when its ratio exceeds
/// `alpha_min`. No optimality claim is made.
pub fn greedy_partition(spectrum: &PowerSpectrum, alpha_min: f64) -> Option<Partition> {
    let powers = &spectrum.per_basis_power;
    let dim = powers.len();
    if dim < 2 {
        return None;
    }
    let mut by_power: Vec<usize> = (0..dim).collect();
    by_power.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]).then(a.cmp(&b)));
    let mut used = vec![false; dim];
    let mut blocks = Vec::new();
    for (pos, &k) in by_power.iter().enumerate() {
        if used[k] {
            continue;
        }
        // Lowest-power unused index other than k: scan from the tail.
        let Some(&partner) = by_power[pos + 1..].iter().rev().find(|&&j| !used[j]) else {
            break;
        };
        let mut members = vec![k, partner];
        members.sort_unstable();
        match Block::evaluate(members, powers) {
            Some(b) if b.admissible(alpha_min) => {
                used[k] = true;
                used[partner] = true;
                blocks.push(b);
            }
            _ => {}
        }
    }
    if blocks.is_empty() {
        return None;
    }
    blocks.sort_by(|a, b| a.indices.cmp(&b.indices));
    Some(Partition { blocks })
}
