//! Multispecies-coalescent gene-tree simulation and empirical cover
//! experiments.
//!
//! One lineage is sampled per species. Within each species-tree edge the
//! lineages present coalesce pairwise at rate 1; above the root they
//! coalesce until one remains. Bipartitions are read from the merges in the
//! unrooted sense.
//!
//! Trial `i` of an experiment with master seed `s` always draws from
//! [`trial_rng(s, i)`](crate::rng::trial_rng), so results are identical
//! whether trials run serially or in parallel.

pub mod exact;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{balanced_bound, original_bound, BoundSpec};
use crate::coalescent::kingman_rate;
use crate::rng::trial_rng;
use crate::treegen::{nontrivial_bipartitions, Bipartition, SpeciesTree, MAX_BIPARTITION_TAXA};
use crate::{Error, Result};

/// Default cap on gene trees per cover attempt.
pub const DEFAULT_GENE_CAP: u64 = 10_000_000;
/// Smallest accepted trial count for quantiles and cover probabilities.
pub const MIN_TRIALS: usize = 100;

/// Nontrivial bipartitions of one simulated gene tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneTreeBipartitions {
    pub bips: BTreeSet<Bipartition>,
}

/// One simulated gene tree with per-node lineage counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneTreeSample {
    pub bipartitions: GeneTreeBipartitions,
    /// Lineages at the bottom of the edge above each node (node id order).
    pub entering: Vec<usize>,
    /// Lineages at the top of that edge; 1 at the root.
    pub leaving: Vec<usize>,
}

/// Reusable buffers for repeated simulation on one species tree.
struct Simulator<'a> {
    tree: &'a SpeciesTree,
    k: usize,
    /// Lineage clusters leaving each node.
    out: Vec<Vec<u128>>,
}

impl<'a> Simulator<'a> {
    fn new(tree: &'a SpeciesTree) -> Result<Self> {
        let k = tree.leaf_count();
        if k < 4 {
            return Err(Error::domain(format!("gene-tree simulation needs k >= 4, got {k}")));
        }
        if k > MAX_BIPARTITION_TAXA {
            return Err(Error::domain(format!("gene-tree simulation supports at most {MAX_BIPARTITION_TAXA} taxa")));
        }
        Ok(Self { tree, k, out: vec![Vec::new(); tree.nodes().len()] })
    }

    /// Runs one gene tree, calling `on_merge` with every merged cluster and
    /// `on_edge(node, entering, leaving)` once per node.
    fn run<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        mut on_merge: impl FnMut(u128),
        mut on_edge: impl FnMut(usize, usize, usize),
    ) {
        let root = self.tree.root();
        for &id in self.tree.postorder() {
            let node = self.tree.node(id);
            let mut lineages = std::mem::take(&mut self.out[id]);
            lineages.clear();
            match (node.children, node.taxon) {
                (Some([a, b]), _) => {
                    lineages.extend_from_slice(&self.out[a]);
                    lineages.extend_from_slice(&self.out[b]);
                }
                (None, Some(t)) => lineages.push(1u128 << t),
                (None, None) => unreachable!("validated tree"),
            }
            let entering = lineages.len();
            let span = if id == root { f64::INFINITY } else { node.length.expect("non-root edge") };
            let mut elapsed = 0.0;
            while lineages.len() > 1 {
                let m = lineages.len();
                let wait: f64 = rng.sample(Exp1);
                elapsed += wait / kingman_rate(m);
                if elapsed > span {
                    break;
                }
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                let merged = lineages[i] | lineages[j];
                on_merge(merged);
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                lineages[lo] = merged;
                lineages.swap_remove(hi);
            }
            on_edge(id, entering, lineages.len());
            self.out[id] = lineages;
        }
    }
}

/// Simulates one gene tree and returns its nontrivial bipartitions.
pub fn simulate_gene_tree<R: Rng + ?Sized>(tree: &SpeciesTree, rng: &mut R) -> Result<GeneTreeBipartitions> {
    Ok(simulate_gene_tree_with_counts(tree, rng)?.bipartitions)
}

/// Simulates one gene tree, also recording lineage counts on every edge.
pub fn simulate_gene_tree_with_counts<R: Rng + ?Sized>(tree: &SpeciesTree, rng: &mut R) -> Result<GeneTreeSample> {
    let mut sim = Simulator::new(tree)?;
    let k = sim.k;
    let n = tree.nodes().len();
    let mut bips = BTreeSet::new();
    let (mut entering, mut leaving) = (vec![0; n], vec![0; n]);
    sim.run(
        rng,
        |c| {
            let b = Bipartition::from_cluster(c, k);
            if b.is_nontrivial(k) {
                bips.insert(b);
            }
        },
        |id, e, l| {
            entering[id] = e;
            leaving[id] = l;
        },
    );
    Ok(GeneTreeSample { bipartitions: GeneTreeBipartitions { bips }, entering, leaving })
}

/// `species_bips ⊆ seen`.
pub fn is_cover(species_bips: &BTreeSet<Bipartition>, seen: &BTreeSet<Bipartition>) -> bool {
    species_bips.is_subset(seen)
}

/// Tracks which species bipartitions have appeared so far.
#[derive(Clone)]
struct CoverTracker {
    index: HashMap<Bipartition, usize>,
    seen: Vec<bool>,
    covered: usize,
    k: usize,
}

impl CoverTracker {
    fn new(tree: &SpeciesTree) -> Result<Self> {
        let bips = nontrivial_bipartitions(tree)?;
        let index: HashMap<_, _> = bips.into_iter().enumerate().map(|(i, b)| (b, i)).collect();
        Ok(Self { seen: vec![false; index.len()], index, covered: 0, k: tree.leaf_count() })
    }

    fn reset(&mut self) {
        self.seen.iter_mut().for_each(|s| *s = false);
        self.covered = 0;
    }

    fn observe(&mut self, cluster: u128) {
        if let Some(&i) = self.index.get(&Bipartition::from_cluster(cluster, self.k)) {
            if !std::mem::replace(&mut self.seen[i], true) {
                self.covered += 1;
            }
        }
    }

    fn total(&self) -> usize {
        self.seen.len()
    }

    fn done(&self) -> bool {
        self.covered == self.seen.len()
    }
}

/// Number of gene trees drawn until their bipartitions cover the species
/// tree; [`Error::CapExceeded`] after `cap` trees without a cover.
pub fn genes_to_cover<R: Rng + ?Sized>(tree: &SpeciesTree, cap: u64, rng: &mut R) -> Result<u64> {
    if cap == 0 {
        return Err(Error::domain("gene cap must be >= 1"));
    }
    let mut sim = Simulator::new(tree)?;
    let mut tracker = CoverTracker::new(tree)?;
    run_until_cover(&mut sim, &mut tracker, cap, rng)
}

fn run_until_cover<R: Rng + ?Sized>(
    sim: &mut Simulator<'_>,
    tracker: &mut CoverTracker,
    cap: u64,
    rng: &mut R,
) -> Result<u64> {
    tracker.reset();
    for n in 1..=cap {
        sim.run(rng, |c| tracker.observe(c), |_, _, _| {});
        if tracker.done() {
            return Ok(n);
        }
    }
    Err(Error::CapExceeded { cap, covered: tracker.covered, total: tracker.total() })
}

/// Outcome of independent cover runs, in trial order; `None` marks a run
/// that hit the cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverSample {
    pub seed: u64,
    pub cap: u64,
    pub counts: Vec<Option<u64>>,
}

impl CoverSample {
    pub fn trials(&self) -> usize {
        self.counts.len()
    }

    pub fn capped(&self) -> usize {
        self.counts.iter().filter(|c| c.is_none()).count()
    }

    /// The `⌈q N⌉`-th order statistic, capped runs counting as `+∞`.
    pub fn quantile(&self, q: f64) -> Result<u64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
        }
        let n = self.counts.len();
        if n == 0 {
            return Err(Error::domain("no trials"));
        }
        // tolerate representation error in q so 0.9 * 2000 ranks as 1800
        let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut sorted: Vec<u64> = self.counts.iter().map(|c| c.unwrap_or(u64::MAX)).collect();
        sorted.sort_unstable();
        match sorted[rank - 1] {
            u64::MAX => Err(Error::QuantileUndefined { capped: self.capped(), trials: n }),
            v => Ok(v),
        }
    }

    /// Fraction of runs covered within `n` genes.
    pub fn covered_within(&self, n: u64) -> f64 {
        let hits = self.counts.iter().filter(|c| c.is_some_and(|v| v <= n)).count();
        hits as f64 / self.counts.len() as f64
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

/// Runs `trials` independent cover experiments in parallel.
pub fn cover_sample(tree: &SpeciesTree, trials: usize, seed: u64, cap: u64) -> Result<CoverSample> {
    if cap == 0 {
        return Err(Error::domain("gene cap must be >= 1"));
    }
    Simulator::new(tree)?;
    let tracker = CoverTracker::new(tree)?;
    let counts = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || (Simulator::new(tree).expect("validated"), tracker.clone()),
            |(sim, tr), i| {
                let mut rng = trial_rng(seed, i);
                match run_until_cover(sim, tr, cap, &mut rng) {
                    Ok(n) => Ok(Some(n)),
                    Err(Error::CapExceeded { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverSample { seed, cap, counts })
}

/// Empirical `q`-quantile of the genes-to-cover distribution.
pub fn empirical_quantile(tree: &SpeciesTree, q: f64, trials: usize, seed: u64, cap: u64) -> Result<u64> {
    check_trials(trials)?;
    cover_sample(tree, trials, seed, cap)?.quantile(q)
}

/// Binomial estimate of a cover probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Fraction of trials in which `n` gene trees form a cover.
pub fn cover_probability(tree: &SpeciesTree, n: u64, trials: usize, seed: u64) -> Result<CoverEstimate> {
    if n == 0 {
        return Err(Error::domain("gene count must be >= 1"));
    }
    check_trials(trials)?;
    let p = cover_sample(tree, trials, seed, n)?.covered_within(n);
    Ok(CoverEstimate { probability: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

/// Empirical quantile next to the original and balanced bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverExperimentResult {
    pub spec: BoundSpec,
    pub n_e: u64,
    pub m_o: u64,
    pub m_b: u64,
    pub ratio_o: f64,
    pub ratio_b: f64,
    pub trials: usize,
    pub seed: u64,
    pub capped: usize,
}

/// Bound-to-quantile overestimation ratios for one tree.
pub fn overestimation_experiment(
    tree: &SpeciesTree,
    spec: &BoundSpec,
    trials: usize,
    seed: u64,
    cap: u64,
) -> Result<CoverExperimentResult> {
    spec.validate()?;
    check_trials(trials)?;
    if spec.k != tree.leaf_count() {
        return Err(Error::domain(format!("spec has k={} but the tree has {} leaves", spec.k, tree.leaf_count())));
    }
    let tree_min = tree.internal_min_branch().unwrap_or(f64::NAN);
    if tree_min.is_nan() || (tree_min - spec.t_min).abs() > 1e-9 * spec.t_min {
        return Err(Error::domain(format!(
            "spec t_min={} but the tree's shortest internal branch is {tree_min}",
            spec.t_min
        )));
    }
    let m_o = original_bound(spec)?;
    let m_b = balanced_bound(spec)?;
    let sample = cover_sample(tree, trials, seed, cap)?;
    let n_e = sample.quantile(spec.q)?;
    Ok(CoverExperimentResult {
        spec: *spec,
        n_e,
        m_o,
        m_b,
        ratio_o: m_o as f64 / n_e as f64,
        ratio_b: m_b as f64 / n_e as f64,
        trials,
        seed,
        capped: sample.capped(),
    })
}
