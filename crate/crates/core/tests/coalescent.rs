#![allow(clippy::excessive_precision)] // reference values carry all 17 printed digits

use bipcover::coalescent::{
    convolve, evolve, expected_lineages_bound, g, g_stable, g_tavare, kingman_rate, transition_row, LineageDistribution,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// High-precision reference values of the alternating series (1500-digit arithmetic).
const REFERENCE: &[(usize, usize, f64, f64)] = &[
    (3, 1, 1.0, 0.47307437242676849),
    (5, 3, 0.4, 0.44621292234937385),
    (40, 1, 0.01, 1.1052654355961267e-43),
    (30, 1, 0.05, 9.9575782870828245e-18),
    (18, 1, 0.05, 2.9202378115440939e-13),
    (20, 1, 0.05, 3.8854616083626132e-14),
    (100, 1, 0.1, 4.9646570408632301e-16),
    (200, 50, 0.02, 7.8015247957838808e-5),
    (512, 1, 0.5, 0.0026182597201876658),
    (512, 256, 0.001, 2.886185488872272e-66),
    (60, 30, 0.05, 0.017291322021555818),
    (400, 1, 1.0, 0.13064236835766703),
    (300, 120, 0.01, 0.06511887339985575),
    (512, 2, 3.0, 0.14694994458064797),
];

#[test]
fn matches_high_precision_reference() {
    for &(i, j, t, want) in REFERENCE {
        let got = g(i, j, t).unwrap();
        let rel = ((got - want) / want).abs();
        assert!(rel < 1e-9, "g({i},{j},{t}) = {got:e}, want {want:e} (rel {rel:e})");
    }
}

#[test]
fn stable_path_matches_reference_everywhere() {
    for &(i, j, t, want) in REFERENCE {
        let got = g_stable(i, j, t).unwrap();
        let rel = ((got - want) / want).abs();
        assert!(rel < 1e-9, "g_stable({i},{j},{t}) = {got:e}, want {want:e}");
    }
}

#[test]
fn closed_forms() {
    for &t in &[0.01, 0.1, 0.5, 1.0, 3.0, 10.0] {
        let two = g(2, 1, t).unwrap();
        assert!((two - (1.0 - (-t).exp())).abs() < 1e-12);
        assert!((two + g(2, 2, t).unwrap() - 1.0).abs() < 1e-12);
    }
    let want = 1.0 - 1.5 * (-1.0f64).exp() + 0.5 * (-3.0f64).exp();
    assert!((g_tavare(3, 1, 1.0).unwrap() - want).abs() < 1e-12);
    for i in 1..=30 {
        for j in 1..=i {
            assert_eq!(g(i, j, 0.0).unwrap(), if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn rows_are_stochastic() {
    for &t in &[0.01, 0.1, 0.5, 1.0, 5.0] {
        for i in 1..=60 {
            let total: f64 = transition_row(i, t).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "i={i} t={t} total={total}");
        }
    }
}

#[test]
fn absorption_monotone_and_convex_in_lineages() {
    let ts = [0.02, 0.05, 0.1, 0.3, 1.0, 2.0, 5.0];
    for &t in &ts {
        let col: Vec<f64> = (1..=80).map(|i| g(i, 1, t).unwrap()).collect();
        for w in col.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "t={t}");
        }
        for w in col.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12, "t={t}");
        }
    }
    for i in 2..=40 {
        let vals: Vec<f64> = ts.iter().map(|&t| g(i, 1, t).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "i={i}");
        }
    }
}

#[test]
fn log_concave_in_time() {
    let h = 0.05;
    for n in 2..=15 {
        for k in 1..=n {
            let logs: Vec<f64> = (1..=80).map(|s| g(n, k, s as f64 * h).unwrap().ln()).collect();
            for w in logs.windows(3) {
                if w.iter().all(|x| x.is_finite()) {
                    assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-10, "n={n} k={k}");
                }
            }
        }
    }
}

#[test]
fn likelihood_ratio_order() {
    for &t in &[0.1, 0.5, 1.0] {
        let rows: Vec<Vec<f64>> = (1..=20).map(|i| transition_row(i, t).unwrap()).collect();
        let at = |i: usize, m: usize| rows[i - 1].get(m - 1).copied().unwrap_or(0.0);
        for i in 1..=20 {
            for j in i..=20 {
                for m in 1..=20 {
                    for n in m..=20 {
                        assert!(at(i, m) * at(j, n) >= at(i, n) * at(j, m) - 1e-14);
                    }
                }
            }
        }
    }
}

#[test]
fn convolution_by_enumeration() {
    let t = 0.7;
    let z2 = evolve(&LineageDistribution::point(2).unwrap(), t).unwrap();
    let (a, b) = (g(2, 1, t).unwrap(), g(2, 2, t).unwrap());
    let c = convolve(&z2, &z2);
    assert_eq!(c.min_support(), 2);
    assert!((c.pmf(2) - a * a).abs() < 1e-15);
    assert!((c.pmf(3) - 2.0 * a * b).abs() < 1e-15);
    assert!((c.pmf(4) - b * b).abs() < 1e-15);
    assert!((c.mean() - 2.0 * z2.mean()).abs() < 1e-12);
}

#[test]
fn expected_lineage_bound_dominates_mean() {
    for &t in &[0.05, 0.2, 0.5, 1.0, 3.0] {
        let cap = 1.0 / (1.0 - (-t / 2.0f64).exp());
        for i in 1..=100 {
            let bound = expected_lineages_bound(i, t).unwrap();
            assert!(bound <= cap + 1e-12);
            let mean = evolve(&LineageDistribution::point(i).unwrap(), t).unwrap().mean();
            assert!(mean <= bound + 1e-12, "i={i} t={t}");
        }
    }
}

fn simulate_kingman(i: usize, t: f64, rng: &mut impl Rng) -> usize {
    let mut m = i;
    let mut elapsed = 0.0;
    while m > 1 {
        elapsed += Exp::new(kingman_rate(m)).unwrap().sample(rng);
        if elapsed > t {
            break;
        }
        m -= 1;
    }
    m
}

/// Every bin with expected count >= 10 within 4 binomial standard errors.
fn assert_frequencies(counts: &[u64], n: u64, dist: &LineageDistribution, what: &str) {
    for (j, &c) in counts.iter().enumerate() {
        let p = dist.pmf(j);
        let expected = n as f64 * p;
        if expected < 10.0 {
            continue;
        }
        let se = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - expected).abs() <= 4.0 * se, "{what}: bin {j} got {c}, expected {expected:.1}");
    }
}

#[test]
fn monte_carlo_agreement() {
    let n = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(i, t) in &[(5usize, 0.3), (10, 1.0), (20, 0.1)] {
        let mut counts = vec![0u64; i + 1];
        for _ in 0..n {
            counts[simulate_kingman(i, t, &mut rng)] += 1;
        }
        let dist = evolve(&LineageDistribution::point(i).unwrap(), t).unwrap();
        assert_frequencies(&counts, n, &dist, &format!("Z_{i}^{t}"));
    }
}

#[test]
fn monte_carlo_single_entry() {
    let n = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hits = (0..n).filter(|_| simulate_kingman(5, 0.4, &mut rng) == 3).count() as f64;
    let p = g(5, 3, 0.4).unwrap();
    let se = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((hits - n as f64 * p).abs() <= 4.0 * se);
}

#[test]
fn semigroup_against_monte_carlo() {
    let (n, t) = (1_000_000u64, 0.35);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut counts = vec![0u64; 5];
    for _ in 0..n {
        counts[simulate_kingman(4, 2.0 * t, &mut rng)] += 1;
    }
    let four = LineageDistribution::point(4).unwrap();
    let twice = evolve(&evolve(&four, t).unwrap(), t).unwrap();
    assert_frequencies(&counts, n, &twice, "semigroup");
    let once = evolve(&four, 2.0 * t).unwrap();
    for j in 1..=4 {
        assert!((twice.pmf(j) - once.pmf(j)).abs() < 1e-12);
    }
}

#[test]
fn deep_tail_is_rare_in_simulation() {
    // g(40, 1, 0.01) ~ 1e-43: ten million runs must never reach one lineage
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!((0..10_000_000).all(|_| simulate_kingman(40, 0.01, &mut rng) > 1));
    let p = g(40, 1, 0.01).unwrap();
    assert!(p > 0.0 && p < 1e-20);
}

proptest! {
    #[test]
    fn dispatcher_stays_in_unit_interval(i in 1usize..=200, frac in 0.0f64..=1.0, t in 0.0f64..20.0) {
        let j = 1 + ((i - 1) as f64 * frac) as usize;
        let p = g(i, j, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn evolve_preserves_mass(probs in prop::collection::vec(0.0f64..1.0, 1..30), t in 0.001f64..5.0) {
        let total: f64 = probs.iter().sum();
        prop_assume!(total > 1e-3);
        let normalized: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let dist = LineageDistribution::new(1, normalized).unwrap();
        let out = evolve(&dist, t).unwrap();
        prop_assert!((out.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(out.mean() <= dist.mean() + 1e-12);
    }

    #[test]
    fn convolution_adds_means(a in prop::collection::vec(0.01f64..1.0, 1..12), b in prop::collection::vec(0.01f64..1.0, 1..12), sa in 1usize..5, sb in 1usize..5) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
        let da = LineageDistribution::new(sa, norm(a)).unwrap();
        let db = LineageDistribution::new(sb, norm(b)).unwrap();
        let c = convolve(&da, &db);
        prop_assert_eq!(c.min_support(), sa + sb);
        prop_assert!((c.mean() - da.mean() - db.mean()).abs() < 1e-12);
    }
}
