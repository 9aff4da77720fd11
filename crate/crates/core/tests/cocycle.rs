use std::collections::BTreeMap;

use approx::assert_relative_eq;
use ifs_decay::cocycle::{
    birkhoff_sum, cocycle_value, gamma_cdf, lyapunov_chi, partition_cell, tau_k, tilde_tau_h,
    trajectory_length, variance_r0, GammaLaw, PartitionCell, Trajectory,
};
use ifs_decay::examples::{lebesgue, nonlinear, two_ratio};
use ifs_decay::mc;
use ifs_decay::Word;
use proptest::prelude::*;

fn ln(x: f64) -> f64 {
    x.ln()
}

#[test]
fn cocycle_examples() {
    let any = Word::from_one_based(&[2, 1, 1, 2]);
    assert_relative_eq!(cocycle_value(&lebesgue(), 0, &any), ln(2.0), max_relative = 1e-15);
    assert_relative_eq!(cocycle_value(&two_ratio(), 1, &any), ln(3.0), max_relative = 1e-15);
    let nl = nonlinear();
    let a = cocycle_value(&nl, 0, &Word::repeat(0, 30));
    let b = cocycle_value(&nl, 0, &Word::repeat(1, 30));
    assert!((a - b).abs() > 0.1);
    for v in [a, b] {
        assert!(v >= nl.d_min() - 1e-12 && v <= nl.d_max() + 1e-12);
    }
}

#[test]
fn birkhoff_sum_examples() {
    let tail = Word::repeat(1, 10);
    let w = Word::from_one_based(&[1, 2, 2, 1, 2, 2, 2]);
    assert_relative_eq!(birkhoff_sum(&lebesgue(), &w, &tail), 7.0 * ln(2.0), max_relative = 1e-14);
    assert_relative_eq!(
        birkhoff_sum(&two_ratio(), &w, &tail),
        2.0 * ln(2.0) + 5.0 * ln(3.0),
        max_relative = 1e-14
    );
    let nl = nonlinear();
    let s = birkhoff_sum(&nl, &w, &tail);
    assert!(s >= 7.0 * nl.d_min() && s <= 7.0 * nl.d_max());
}

#[test]
fn lyapunov_examples() {
    assert_eq!(lyapunov_chi(&lebesgue(), 10, 50, 1).unwrap().value, ln(2.0));
    assert_relative_eq!(
        lyapunov_chi(&two_ratio(), 10, 50, 1).unwrap().value,
        0.5 * (ln(2.0) + ln(3.0)),
        max_relative = 1e-15
    );
    let nl = nonlinear();
    let n = 50_000;
    let chi = lyapunov_chi(&nl, n, 100, 1).unwrap();
    assert!(chi.value > nl.d_min() && chi.value < nl.d_max());
    assert!(chi.stderr <= nl.d_max() / (n as f64).sqrt());
}

#[test]
fn variance_examples() {
    let v = variance_r0(&lebesgue(), 10, 100, 1).unwrap();
    assert!(v.degenerate);
    assert!(v.r0_sq.abs() < 1e-15);
    let v = variance_r0(&two_ratio(), 10, 100, 1).unwrap();
    assert_relative_eq!(v.r0_sq, ln(1.5).powi(2) / 4.0, max_relative = 1e-12);
    assert!((v.r0_sq - 0.04110).abs() < 1e-5);
    let nl = nonlinear();
    let a = variance_r0(&nl, 100_000, 200, 1).unwrap();
    let b = variance_r0(&nl, 100_000, 200, 2).unwrap();
    assert!(a.r0_sq > 0.0 && !a.degenerate);
    let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.r0_sq - b.r0_sq).abs() <= 2.0 * combined);
}

#[test]
fn tau_examples() {
    let hom = lebesgue();
    let w = Word::repeat(0, 40);
    assert_eq!(tau_k(&hom, &w, 10.0, ln(2.0)).unwrap(), 10);
    assert_eq!(tau_k(&hom, &w, 0.0, ln(2.0)).unwrap(), 1);
    let tr = two_ratio();
    let chi = 0.5 * (ln(2.0) + ln(3.0));
    assert_eq!(tau_k(&tr, &Word::repeat(1, 20), 2.0, chi).unwrap(), 2);
    assert_eq!(tau_k(&tr, &Word::repeat(0, 20), 0.0, chi).unwrap(), 1);
}

#[test]
fn tilde_tau_examples() {
    let hom = lebesgue();
    assert_eq!(tilde_tau_h(&hom, &Word::repeat(0, 20), 5.0, ln(2.0)).unwrap(), 5);
    assert_eq!(tilde_tau_h(&hom, &Word::repeat(0, 20), 0.0, ln(2.0)).unwrap(), 1);
    let chi = 0.5 * (ln(2.0) + ln(3.0));
    assert_eq!(tilde_tau_h(&two_ratio(), &Word::repeat(0, 20), 1.0, chi).unwrap(), 2);
}

#[test]
fn partition_cell_examples() {
    let hom = lebesgue();
    let w = Word::from_one_based(&[1, 2, 2, 1, 1, 2, 1, 2, 2, 2]);
    let c = partition_cell(&hom, &w, 3.0, 2.0, ln(2.0)).unwrap();
    assert_eq!((c.tau_k, c.tilde_tau), (3, 2));
    assert_eq!(c.label, Word::from_one_based(&[2, 1]));

    let chi = 0.5 * (ln(2.0) + ln(3.0));
    let c = partition_cell(&two_ratio(), &Word::repeat(1, 20), 2.0, 1.0, chi).unwrap();
    assert_eq!((c.tau_k, c.tilde_tau), (2, 1));
    assert_eq!(c.label, Word::from_one_based(&[2]));
}

#[test]
fn partition_counts_cover_the_sample() {
    let nl = nonlinear();
    let chi = lyapunov_chi(&nl, 20_000, 100, 1).unwrap().value;
    let (k, h) = (10.0, 3.0);
    let len = trajectory_length(&nl, k, h, chi);
    let words = mc::sample_vec(10_000, 4, 99, |rng| nl.sampler().word(rng, len));
    let mut counts: BTreeMap<Word, usize> = BTreeMap::new();
    for w in &words {
        let c = partition_cell(&nl, w, k, h, chi).unwrap();
        let s = Trajectory::new(&nl, w.clone()).sum(c.tau_k);
        assert!(s >= k * chi - 1e-9 && s <= k * chi + nl.d_max() + 1e-9);
        *counts.entry(c.label).or_default() += 1;
    }
    assert_eq!(counts.values().sum::<usize>(), 10_000);
    // labels are prefix-free: no label extends another
    let labels: Vec<&Word> = counts.keys().collect();
    for a in &labels {
        for b in &labels {
            if a != b {
                assert!(!(b.len() > a.len() && b.symbols()[..a.len()] == *a.symbols()));
            }
        }
    }
}

#[test]
fn gamma_examples() {
    // X1 is log 2 on the cylinder of symbol 1 for the two-ratio system
    let tr = two_ratio();
    let chi = 0.5 * (ln(2.0) + ln(3.0));
    let k = 4.0;
    let cell = PartitionCell {
        k,
        h_prime: 1.0,
        label: Word::from_one_based(&[1]),
        tau_k: 4,
        tilde_tau: 1,
    };
    let cdf = |t: f64| gamma_cdf(&tr, &cell, t, chi, 1000, 1).unwrap();
    assert_relative_eq!(cdf(k * chi + ln(2.0)), 1.0, max_relative = 1e-14);
    assert_relative_eq!(cdf(k * chi + 0.5 * ln(2.0)), 0.5, max_relative = 1e-14);
    for j in 0..=10 {
        let s = ln(2.0) * j as f64 / 10.0;
        assert_relative_eq!(cdf(k * chi + s), j as f64 / 10.0, epsilon = 1e-14);
    }
    assert_eq!(cdf(k * chi - 1.0), 0.0);
    assert_eq!(cdf(k * chi + 10.0), 1.0);
}

#[test]
fn gamma_law_properties() {
    let nl = nonlinear();
    let chi = 0.76;
    let k = 5.0;
    let g = GammaLaw::sample(&nl, &Word::from_one_based(&[1, 2]), k, chi, 20_000, 3).unwrap();
    let lo = k * chi;
    let hi = lo + nl.d_max();
    assert_eq!(g.cdf(lo), 0.0);
    assert_relative_eq!(g.cdf(hi), 1.0, max_relative = 1e-12);
    let mut prev = 0.0;
    let step = nl.d_max() / 200.0;
    for i in 1..=200 {
        let v = g.cdf(lo + step * i as f64);
        assert!(v >= prev);
        assert!(v - prev <= step / nl.d_min() + 1e-12);
        prev = v;
    }
    assert!(GammaLaw::sample(&nl, &Word::empty(), k, chi, 10, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn birkhoff_chain_rule(
        u in prop::collection::vec(0u8..2, 1..15),
        v in prop::collection::vec(0u8..2, 1..15),
        tail in prop::collection::vec(0u8..2, 0..30),
    ) {
        let nl = nonlinear();
        let (u, v, tail) = (Word(u), Word(v), Word(tail));
        let whole = birkhoff_sum(&nl, &u.concat(&v), &tail);
        let split = birkhoff_sum(&nl, &u, &v.concat(&tail)) + birkhoff_sum(&nl, &v, &tail);
        prop_assert!((whole - split).abs() <= 1e-12 * whole.abs());
    }

    #[test]
    fn tau_monotone_in_k(w in prop::collection::vec(0u8..2, 80), k in 0.0f64..20.0, dk in 0.0f64..5.0) {
        let nl = nonlinear();
        let traj = Trajectory::new(&nl, Word(w));
        let chi = 0.76;
        prop_assert!(traj.tau(k, chi).unwrap() <= traj.tau(k + dk, chi).unwrap());
    }
}
