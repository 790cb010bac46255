//! Exact fine-graining of rational pointer probabilities into equal-weight
//! counter slots.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{BornError, Result};

/// `counts[i]` equal-probability slots for pointer `i`, each worth `unit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterAssignment {
    pub counts: Vec<u64>,
    pub unit: Ratio<u64>,
}

impl CounterAssignment {
    /// `M_i * u`, the probability carried by pointer `i`.
    pub fn partial_sum(&self, i: usize) -> Ratio<u64> {
        self.unit * self.counts[i]
    }

    pub fn probabilities(&self) -> Vec<Ratio<u64>> {
        (0..self.counts.len()).map(|i| self.partial_sum(i)).collect()
    }

    /// `sum_i M_i * u`, exactly one for any valid assignment.
    pub fn total(&self) -> Ratio<u64> {
        self.unit * self.counts.iter().sum::<u64>()
    }

    /// Every counter slot as `(pointer, slot)` in canonical order.
    pub fn slots(&self) -> Vec<(usize, u64)> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &m)| (0..m).map(move |j| (i, j)))
            .collect()
    }

    /// Sums the slot units per pointer for an arbitrary slot ordering.
    pub fn partial_sums_of(&self, slots: &[(usize, u64)]) -> Vec<Ratio<u64>> {
        let mut out = vec![Ratio::from_integer(0); self.counts.len()];
        for &(i, _) in slots {
            out[i] += self.unit;
        }
        out
    }
}

/// With `D` the least common denominator, `M_i = p_i * D` and `u = 1 / D`.
pub fn fine_grain(probabilities: &[Ratio<u64>]) -> Result<CounterAssignment> {
    if probabilities.is_empty() {
        return Err(BornError::Counter("no probabilities given".into()));
    }
    let mut lcd = 1u64;
    for p in probabilities {
        let d = *p.denom();
        lcd = lcd
            .checked_div(lcd.gcd(&d))
            .and_then(|x| x.checked_mul(d))
            .ok_or_else(|| BornError::Counter("common denominator overflows u64".into()))?;
    }
    let counts = probabilities
        .iter()
        .map(|p| {
            (lcd / p.denom())
                .checked_mul(*p.numer())
                .ok_or_else(|| BornError::Counter("counter size overflows u64".into()))
        })
        .collect::<Result<Vec<u64>>>()?;
    let total: u64 = counts.iter().sum();
    if total != lcd {
        return Err(BornError::Counter(format!(
            "probabilities sum to {}/{lcd}, not 1",
            total
        )));
    }
    Ok(CounterAssignment { counts, unit: Ratio::new(1, lcd) })
}

/// Rounds floating-point probabilities to multiples of `1 / denominator`
/// that sum to exactly one (largest-remainder apportionment).
pub fn rationalize(probabilities: &[f64], denominator: u64) -> Result<Vec<Ratio<u64>>> {
    if denominator == 0 || probabilities.is_empty() {
        return Err(BornError::Counter("empty distribution or zero denominator".into()));
    }
    let total: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|p| !(*p >= 0.0)) || !(total > 0.0) {
        return Err(BornError::Counter("probabilities must be non-negative".into()));
    }
    let scaled: Vec<f64> = probabilities
        .iter()
        .map(|p| p / total * denominator as f64)
        .collect();
    let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let short = denominator.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(short as usize) {
        counts[i] += 1;
    }
    Ok(counts.into_iter().map(|m| Ratio::new(m, denominator)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn halves() {
        let c = fine_grain(&[r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(c.counts, vec![1, 1]);
        assert_eq!(c.unit, r(1, 2));
    }

    #[test]
    fn tenths() {
        let c = fine_grain(&[r(7, 10), r(2, 10), r(1, 10)]).unwrap();
        assert_eq!(c.counts, vec![7, 2, 1]);
        assert_eq!(c.unit, r(1, 10));
        assert_eq!(c.partial_sum(0), r(7, 10));
        assert_eq!(c.total(), r(1, 1));
    }

    #[test]
    fn mixed_denominators() {
        let c = fine_grain(&[r(1, 3), r(1, 4), r(5, 12)]).unwrap();
        assert_eq!(c.counts, vec![4, 3, 5]);
        assert_eq!(c.unit, r(1, 12));
    }

    #[test]
    fn rejects_non_unit_sum() {
        assert!(fine_grain(&[r(1, 2), r(1, 3)]).is_err());
        assert!(fine_grain(&[]).is_err());
    }

    #[test]
    fn rationalize_sums_to_one() {
        let p = rationalize(&[0.7, 0.2, 0.1], 10).unwrap();
        assert_eq!(p, vec![r(7, 10), r(2, 10), r(1, 10)]);
        let p = rationalize(&[1.0 / 3.0; 3], 100).unwrap();
        assert_eq!(p.iter().copied().sum::<Ratio<u64>>(), r(1, 1));
    }
}
