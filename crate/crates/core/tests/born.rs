mod common;

use common::*;
use num_rational::Ratio;
use quasistate::born::{
    build_chain, fine_grain, induced_quasi_state, monte_carlo, pointer_probability, rationalize,
    swap_test, swap_test_windows, ChainDynamics, JointChain, MonteCarloConfig, NullPolicy,
    PointerMap, PreparedSystem,
};
use quasistate::trajectory::{AmplitudeVector, Trajectory, Window};
use rand::Rng;

fn martingale_chain(powers: &[f64], map: &PointerMap, steps: usize, seed: u64) -> JointChain {
    let sys = PreparedSystem::from_powers(powers, 1e-9).unwrap();
    build_chain(&sys, map, ChainDynamics::PowerMartingale { step: 0.05 }, steps, 0.5, seed).unwrap()
}

fn random_powers(r: &mut impl Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| r.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

#[test]
fn grouped_probability_matches_hand_value() {
    let sys = PreparedSystem::from_powers(&[0.5, 0.3, 0.2], 1e-9).unwrap();
    let map = PointerMap::new(vec![1, 1, 2], 3).unwrap();
    let c = build_chain(&sys, &map, ChainDynamics::Frozen, 20, 0.1, 0).unwrap();
    let p = pointer_probability(&c, Window::new(0, 20)).unwrap();
    let want = [0.0, 0.8, 0.2];
    for (a, b) in p.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn probability_matches_naive_integral_and_sums_to_one() {
    let mut r = rng(31);
    for seed in 0..60 {
        let dim = 2 + seed as usize % 4;
        let n_ptr = 1 + dim;
        let map_v: Vec<usize> = (0..dim).map(|_| r.random_range(0..n_ptr)).collect();
        let map = PointerMap::new(map_v.clone(), n_ptr).unwrap();
        let c = martingale_chain(&random_powers(&mut r, dim), &map, 200, seed);
        let raw: Vec<Vec<(f64, f64)>> = c
            .sectors()
            .samples()
            .iter()
            .map(|s| s.entries().iter().map(|z| (z.re, z.im)).collect())
            .collect();
        for w in quasistate::trajectory::windows(c.sectors(), 40).unwrap() {
            let p = pointer_probability(&c, w).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let seg = &raw[w.range()];
            let mut want = vec![0.0; n_ptr];
            for k in 0..dim {
                want[map_v[k]] += naive_power(seg, k, 0.5) / (40.0 * 0.5);
            }
            for (a, b) in p.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn martingale_conserves_normalization() {
    let mut r = rng(2);
    for seed in 0..120 {
        let dim = 2 + seed as usize % 5;
        let c = martingale_chain(&random_powers(&mut r, dim), &PointerMap::one_to_one(dim), 500, seed);
        for s in c.sectors().samples() {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn balanced_einselected_chain_records_nothing() {
    for dim in 2..=5 {
        let c = martingale_chain(&vec![1.0 / dim as f64; dim], &PointerMap::one_to_one(dim), 10, 0);
        let frozen = build_chain(
            &PreparedSystem::from_powers(&vec![1.0 / dim as f64; dim], 1e-9).unwrap(),
            &PointerMap::one_to_one(dim),
            ChainDynamics::Frozen,
            10,
            1.0,
            0,
        )
        .unwrap();
        assert_eq!(induced_quasi_state(&frozen, Window::new(0, 10), 1.0).unwrap(), None);
        // a few martingale steps cannot create a majority from a 1/dim split at dim >= 3
        if dim >= 3 {
            assert_eq!(induced_quasi_state(&c, Window::new(0, 10), 1.0).unwrap(), None);
        }
    }
}

#[test]
fn within_window_swaps_never_change_the_record() {
    let mut r = rng(77);
    for i in 0..1000 {
        let dim = 2 + i % 4;
        let steps = 60 + r.random_range(0..60);
        let c = martingale_chain(&random_powers(&mut r, dim), &PointerMap::one_to_one(dim), steps, i as u64);
        let len = r.random_range(4..=steps);
        let start = r.random_range(0..=steps - len);
        let seg = r.random_range(1..=len / 2);
        let a = start + r.random_range(0..=len - 2 * seg);
        let b = r.random_range(a + seg..=start + len - seg);
        let alpha = [0.5, 1.0, 2.0][i % 3];
        assert!(swap_test(&c, Window::new(start, len), a..a + seg, b..b + seg, alpha).unwrap());
    }
}

#[test]
fn cross_window_swap_can_change_the_record() {
    let up = AmplitudeVector::basis(2, 0);
    let down = AmplitudeVector::basis(2, 1);
    let samples = [vec![up; 5], vec![down; 5]].concat();
    let c = JointChain::new(
        Trajectory::with_default_labels(1.0, 1.0, samples, 1e-9).unwrap(),
        PointerMap::one_to_one(2),
    )
    .unwrap();
    let ws = [Window::new(0, 5), Window::new(5, 5)];
    assert_eq!(induced_quasi_state(&c, ws[0], 1.0).unwrap().unwrap().components[0].index, 1);
    assert_eq!(induced_quasi_state(&c, ws[1], 1.0).unwrap().unwrap().components[0].index, 2);
    assert!(!swap_test_windows(&c, &ws, 0..3, 5..8, 1.0).unwrap());
    // the same exchange inside one window spanning both halves changes nothing
    assert!(swap_test(&c, Window::new(0, 10), 0..3, 5..8, 1.0).unwrap());
}

fn check_born(powers: &[f64], trials: usize) {
    let sys = PreparedSystem::from_powers(powers, 1e-9).unwrap();
    let map = PointerMap::one_to_one(powers.len());
    let cfg = MonteCarloConfig { trials, ..Default::default() };
    let rep = monte_carlo(&sys, &map, &cfg).unwrap();
    let frozen = build_chain(&sys, &map, ChainDynamics::Frozen, 2, 1.0, 0).unwrap();
    let p0 = pointer_probability(&frozen, Window::new(0, 1)).unwrap();
    for i in 0..p0.len() {
        assert!(
            within_three_sigma(rep.frequencies[i], p0[i], trials),
            "{powers:?}: pointer {i} {} vs {}",
            rep.frequencies[i],
            p0[i]
        );
    }
    assert!(rep.unfixated_rate < 0.01);
}

#[test]
fn born_frequencies_small_runs() {
    // the full 10^5-trial runs live in the acceptance suite
    check_born(&[0.5, 0.5], 20_000);
    check_born(&[0.6, 0.25, 0.15], 20_000);
}

#[test]
fn pure_preparation_is_exact() {
    let sys = PreparedSystem::from_powers(&[1.0, 0.0], 1e-9).unwrap();
    let rep = monte_carlo(&sys, &PointerMap::one_to_one(2), &MonteCarloConfig { trials: 2000, ..Default::default() })
        .unwrap();
    assert_eq!(rep.counts, vec![0, 2000, 0]);
    assert_eq!(rep.frequencies, vec![0.0, 1.0, 0.0]);
}

#[test]
fn null_policy_exclude_drops_unrecorded_trials() {
    let sys = PreparedSystem::from_powers(&[0.5, 0.5], 1e-9).unwrap();
    let cfg = MonteCarloConfig {
        trials: 500,
        step_budget: 0,
        null_policy: NullPolicy::Exclude,
        ..Default::default()
    };
    let rep = monte_carlo(&sys, &PointerMap::one_to_one(2), &cfg).unwrap();
    assert_eq!(rep.counts[0], 0);
    assert!(rep.null_outcomes > 0);
    assert_eq!(rep.counts.iter().sum::<u64>() + rep.null_outcomes, 500);
}

#[test]
fn counter_slots_reproduce_probabilities_exactly() {
    let mut r = rng(9);
    for _ in 0..500 {
        let n = r.random_range(1..6);
        let denom: u64 = r.random_range(1..200);
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let p = rationalize(&raw, denom).unwrap();
        assert_eq!(p.iter().copied().sum::<Ratio<u64>>(), Ratio::from_integer(1));
        let c = fine_grain(&p).unwrap();
        assert_eq!(c.probabilities(), p);
        assert_eq!(c.total(), Ratio::from_integer(1));
        let mut slots = c.slots();
        for i in (1..slots.len()).rev() {
            slots.swap(i, r.random_range(0..=i));
        }
        assert_eq!(c.partial_sums_of(&slots), p);
    }
}
