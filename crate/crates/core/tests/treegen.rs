use bipcover::treegen::{
    all_edge_counts, balanced, caterpillar, descendant_counts, enumerate_topologies, is_balanced,
    nontrivial_bipartitions, rebalance_step, rebalance_to_fixpoint, yule, SpeciesTree,
};
use bipcover::Error;
use proptest::prelude::*;

type Named = (&'static str, fn(usize) -> f64);

fn increasing_functions() -> Vec<Named> {
    vec![
        ("x", |x| x as f64),
        ("x^2", |x| (x * x) as f64),
        ("2^x min(x,20)", |x| 2f64.powi(x as i32) * x.min(20) as f64),
    ]
}

#[test]
fn caterpillar_maximizes_increasing_sums() {
    for k in 5..=7 {
        let cat = descendant_counts(&caterpillar(k, 1.0).unwrap()).unwrap();
        for (name, f) in increasing_functions() {
            let best = cat.sum_by(f);
            for tree in enumerate_topologies(k).unwrap() {
                let s = descendant_counts(&tree).unwrap().sum_by(f);
                assert!(s <= best + 1e-9, "k={k} f={name}: {s} > caterpillar {best}");
            }
        }
    }
}

#[test]
fn balanced_minimizes_convex_sums_over_all_edges() {
    let convex: Vec<Named> = vec![("x", |x| x as f64), ("x^2", |x| (x * x) as f64), ("2^x", |x| 2f64.powi(x as i32))];
    for k in 5..=7 {
        let bal = all_edge_counts(&balanced(k, 1.0).unwrap());
        for (name, f) in &convex {
            let best: f64 = bal.iter().map(|&a| f(a)).sum();
            for tree in enumerate_topologies(k).unwrap() {
                let s: f64 = all_edge_counts(&tree).iter().map(|&a| f(a)).sum();
                assert!(s >= best - 1e-9, "k={k} f={name}");
            }
        }
    }
}

#[test]
fn descendant_count_shapes() {
    for k in 4..=30 {
        for tree in [caterpillar(k, 0.3).unwrap(), balanced(k, 0.3).unwrap(), yule(k, 0.3, k as u64).unwrap()] {
            let counts = descendant_counts(&tree).unwrap();
            assert_eq!(counts.len(), k - 3);
            assert!(counts.alphas().iter().all(|&a| (2..=k - 2).contains(&a)));
            let bips = nontrivial_bipartitions(&tree).unwrap();
            assert_eq!(bips.len(), k - 3);
            assert!(bips.iter().all(|b| !b.contains(0) && b.is_nontrivial(k)));
            assert_eq!(all_edge_counts(&tree).len(), 2 * k - 2);
        }
    }
    assert_eq!(descendant_counts(&caterpillar(7, 1.0).unwrap()).unwrap().alphas(), &[2, 3, 4, 5]);
    assert_eq!(nontrivial_bipartitions(&caterpillar(10, 1.0).unwrap()).unwrap().len(), 7);
    assert!(matches!(nontrivial_bipartitions(&caterpillar(3, 1.0).unwrap()), Err(Error::Domain(_))));
}

#[test]
fn balanced_sixteen_is_balanced_everywhere() {
    let t = balanced(16, 1.0).unwrap();
    let sizes = t.subtree_sizes();
    for node in t.nodes() {
        if let Some([a, b]) = node.children {
            assert!(sizes[a].abs_diff(sizes[b]) <= 1);
        }
    }
}

#[test]
fn yule_contract() {
    for seed in 0..50 {
        let t = yule(16, 0.5, seed).unwrap();
        assert_eq!(t.leaf_count(), 16);
        assert!((t.internal_min_branch().unwrap() - 0.5).abs() < 1e-12);
        for node in t.nodes().iter().filter(|n| n.length.is_some()) {
            let l = node.length.unwrap();
            assert!(l > 0.0);
            if !node.is_leaf() {
                assert!(l >= 0.5);
            }
        }
    }
}

#[test]
fn rebalancing_never_increases_convex_sums() {
    for k in 5..=8 {
        for tree in enumerate_topologies(k).unwrap().step_by(7) {
            let Ok(next) = rebalance_step(&tree) else { continue };
            let sq = |t: &SpeciesTree| all_edge_counts(t).iter().map(|a| a * a).sum::<usize>();
            assert!(sq(&next) <= sq(&tree));
            assert_eq!(next.leaf_count(), k);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rebalancing_terminates_balanced(k in 4usize..=64, seed in any::<u64>()) {
        let start = yule(k, 1.0, seed).unwrap();
        let (end, steps) = rebalance_to_fixpoint(&start).unwrap();
        prop_assert!(is_balanced(&end));
        prop_assert!(steps <= k * k);
        prop_assert_eq!(end.leaf_count(), k);
        let shape = |t: &SpeciesTree| all_edge_counts(t);
        prop_assert_eq!(shape(&end), shape(&balanced(k, 1.0).unwrap()));
    }

    #[test]
    fn newick_round_trip(k in 4usize..=40, seed in any::<u64>(), t in 0.001f64..10.0) {
        let tree = yule(k, t, seed).unwrap();
        let text = tree.to_newick();
        let back = SpeciesTree::from_newick(&text).unwrap();
        prop_assert_eq!(back.labels(), tree.labels());
        prop_assert_eq!(back.cluster_set().unwrap(), tree.cluster_set().unwrap());
        prop_assert_eq!(back.to_newick(), text);
        let lengths = |x: &SpeciesTree| {
            let c = x.clusters().unwrap();
            let mut v: Vec<(u128, f64)> = x.nodes().iter().enumerate().filter_map(|(i, n)| n.length.map(|l| (c[i], l))).collect();
            v.sort_by_key(|a| a.0);
            v
        };
        for ((ca, la), (cb, lb)) in lengths(&tree).into_iter().zip(lengths(&back)) {
            prop_assert_eq!(ca, cb);
            prop_assert!((la - lb).abs() <= 1e-12 * la.max(1.0));
        }
    }
}
