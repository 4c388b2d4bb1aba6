use bipcover::bounds::{
    balanced_bound, balanced_envelope, balanced_lineage_distributions, caterpillar_bound, caterpillar_successes,
    invert_sum_bound, one_step_bound, one_step_success, one_step_successes, original_bound, BoundReport, BoundSpec,
};
use bipcover::coalescent::{convolve, evolve, g, LineageDistribution};
use proptest::prelude::*;

const KS: std::ops::RangeInclusive<usize> = 4..=20;
const TS: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
const QS: [f64; 3] = [0.5, 0.9, 0.99];

/// Independent oracle: linear scan over n with direct powers.
fn scan(h: &[f64], q: f64) -> u64 {
    (1..).find(|&n| h.iter().map(|p| (1.0 - p).powi(n as i32)).sum::<f64>() <= 1.0 - q).unwrap()
}

#[test]
fn inversion_matches_scan() {
    assert_eq!(invert_sum_bound(&[0.5, 0.5], 0.9).unwrap(), 5);
    let spec = BoundSpec::new(6, 0.5, 0.9).unwrap();
    let h: Vec<f64> = (2..=4).map(|l| g(l, 1, 0.5).unwrap()).collect();
    assert_eq!(caterpillar_bound(&spec).unwrap(), scan(&h, 0.9));
    let spec = BoundSpec::new(8, 0.2, 0.9).unwrap();
    let h: Vec<f64> = (2..=6).map(|l| one_step_success(l, 0.2).unwrap()).collect();
    assert_eq!(one_step_bound(&spec).unwrap(), scan(&h, 0.9));
}

#[test]
fn single_edge_matches_closed_form() {
    for &t in &TS {
        for &q in &QS {
            let p = 1.0 - (-t).exp();
            let want = ((1.0 - q).ln() / (1.0 - p).ln()).ceil().max(1.0) as u64;
            let got = invert_sum_bound(&[p], q).unwrap();
            assert!(got.abs_diff(want) <= 1, "t={t} q={q}");
            let spec = BoundSpec::new(4, t, q).unwrap();
            let o = original_bound(&spec).unwrap();
            assert_eq!(o, got);
            assert_eq!(caterpillar_bound(&spec).unwrap(), o);
            assert_eq!(one_step_bound(&spec).unwrap(), o);
            assert_eq!(balanced_bound(&spec).unwrap(), o);
        }
    }
    assert_eq!(original_bound(&BoundSpec::new(4, 1.0, 0.9).unwrap()).unwrap(), 3);
}

#[test]
fn bound_chain_and_monotonicity_on_grid() {
    let mut grid = std::collections::HashMap::new();
    for k in KS {
        for &t in &TS {
            for &q in &QS {
                let r = BoundReport::compute(&BoundSpec::new(k, t, q).unwrap()).unwrap();
                assert!(r.m_b <= r.m_s && r.m_s <= r.m_c && r.m_c <= r.m_o, "{r:?}");
                grid.insert((k, t.to_bits(), q.to_bits()), [r.m_o, r.m_c, r.m_s, r.m_b]);
            }
        }
    }
    let at = |k: usize, t: f64, q: f64| grid[&(k, t.to_bits(), q.to_bits())];
    for k in KS {
        for (ti, &t) in TS.iter().enumerate() {
            for (qi, &q) in QS.iter().enumerate() {
                let here = at(k, t, q);
                let below = |lo: [u64; 4], hi: [u64; 4]| lo.iter().zip(hi).all(|(a, b)| *a <= b);
                assert!(k == 4 || below(at(k - 1, t, q), here), "k={k} t={t} q={q}");
                assert!(ti == 0 || below(here, at(k, TS[ti - 1], q)), "k={k} t={t} q={q}");
                assert!(qi == 0 || below(at(k, t, QS[qi - 1]), here), "k={k} t={t} q={q}");
            }
        }
    }
}

#[test]
fn one_step_small_cases() {
    for &t in &TS {
        let e = (-t).exp();
        assert!((one_step_success(2, t).unwrap() - (1.0 - e)).abs() < 1e-15);
        let want = (1.0 - e) * g(2, 1, t).unwrap() + e * g(3, 1, t).unwrap();
        assert!((one_step_success(3, t).unwrap() - want).abs() < 1e-14);
    }
}

#[test]
fn refinements_raise_success_probabilities() {
    for &t in &TS {
        let spec = BoundSpec::new(66, t, 0.9).unwrap();
        let cat = caterpillar_successes(&spec).unwrap();
        let one = one_step_successes(&spec).unwrap();
        let table = balanced_lineage_distributions(64, t).unwrap();
        let bal: Vec<f64> = (2..=64).map(|l| table.success(l)).collect();
        for i in 0..cat.len() {
            assert!(one[i] >= cat[i] * (1.0 - 1e-12), "t={t} l={}", i + 2);
            assert!(bal[i] >= one[i] * (1.0 - 1e-12), "t={t} l={}", i + 2);
        }
        for w in bal.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn balanced_table_structure() {
    for &t in &[0.1, 0.4, 1.0] {
        let table = balanced_lineage_distributions(64, t).unwrap();
        assert!((table.leaving(2).pmf(1) - (1.0 - (-t).exp())).abs() < 1e-15);
        let u = (2.0 - (-t / 2.0f64).exp()) / (1.0 - (-t / 2.0f64).exp());
        for l in 2..=64 {
            let x = table.entering(l);
            let w = table.leaving(l);
            assert!(x.min_support() >= 2 && x.max_support() <= l);
            assert!(w.min_support() >= 1 && w.max_support() <= l);
            assert!(x.mean() <= u + 1e-12);
            // both recursion steps agree with the generic operations
            let again = evolve(x, t).unwrap();
            for j in 1..=l {
                assert!((again.pmf(j) - w.pmf(j)).abs() < 1e-14);
            }
            let x_again = convolve(table.leaving(l.div_ceil(2)), table.leaving(l / 2));
            assert_eq!(&x_again, x);
        }
    }
}

fn assert_ulc(d: &LineageDistribution, what: &str) {
    for j in d.min_support()..=d.max_support() {
        let (p, lo, hi) = (d.pmf(j), d.pmf(j - 1), d.pmf(j + 1));
        let lhs = j as f64 * p * p;
        let rhs = (j + 1) as f64 * lo * hi;
        assert!(lhs >= rhs - 1e-14, "{what}: j={j} {lhs:e} < {rhs:e}");
    }
}

#[test]
fn balanced_distributions_are_ultra_log_concave() {
    for &t in &[0.05, 0.2, 1.0, 3.0] {
        let table = balanced_lineage_distributions(64, t).unwrap();
        for l in 1..=64 {
            assert_ulc(table.entering(l), &format!("X_{l} t={t}"));
            assert_ulc(table.leaving(l), &format!("W_{l} t={t}"));
        }
    }
}

#[test]
fn deterministic_balancing_dominance() {
    for &t in &[0.1, 0.5, 1.0, 2.0] {
        for k in 2..=16usize {
            let sums: Vec<LineageDistribution> = (1..=k / 2)
                .map(|i| {
                    let a = evolve(&LineageDistribution::point(i).unwrap(), t).unwrap();
                    let b = evolve(&LineageDistribution::point(k - i).unwrap(), t).unwrap();
                    convolve(&a, &b)
                })
                .collect();
            for i in 0..sums.len() {
                for j in i..sums.len() {
                    for x in 1..=k {
                        assert!(sums[i].cdf(x) >= sums[j].cdf(x) - 1e-12, "k={k} i={} j={} x={x}", i + 1, j + 1);
                    }
                }
            }
        }
    }
}

#[test]
fn envelope_bounds_balanced() {
    for k in KS {
        for &t in &TS {
            for &q in &QS {
                let spec = BoundSpec::new(k, t, q).unwrap();
                let env = balanced_envelope(&spec).unwrap();
                assert!(balanced_bound(&spec).unwrap() as f64 <= env.ceil().max(1.0), "{spec:?}");
            }
        }
    }
}

#[test]
fn large_grid_values_stay_below_cap() {
    let spec = BoundSpec::new(20, 0.05, 0.99).unwrap();
    let r = BoundReport::compute(&spec).unwrap();
    assert!(r.m_o > 1 << 40);
    assert!(r.improvement_ratios().iter().all(|&x| x >= 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inversion_is_least_solution(h in prop::collection::vec(0.01f64..=1.0, 1..20), q in 0.01f64..0.999) {
        let n = invert_sum_bound(&h, q).unwrap();
        let miss = |n: u64| h.iter().map(|p| (1.0 - p).powf(n as f64)).sum::<f64>();
        prop_assert!(miss(n) <= (1.0 - q) * (1.0 + 1e-12));
        if n > 1 {
            prop_assert!(miss(n - 1) > (1.0 - q) * (1.0 - 1e-12));
        }
    }
}
