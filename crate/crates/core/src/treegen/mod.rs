//! Rooted binary species trees: construction, descendant counts,
//! bipartitions, exhaustive topology enumeration and greedy rebalancing.

mod bipartition;
mod enumerate;
mod newick;
mod rebalance;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub use bipartition::{taxon_mask, Bipartition, MAX_BIPARTITION_TAXA};
pub use enumerate::{enumerate_topologies, TopologyIter};
pub use rebalance::{is_balanced, rebalance_step, rebalance_to_fixpoint};

use crate::{Error, Result};

/// One vertex of a [`SpeciesTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    /// Length of the edge above this node; `None` only at the root.
    pub length: Option<f64>,
    /// Taxon index for leaves.
    pub taxon: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Rooted binary tree with labeled leaves and branch lengths in
/// coalescent units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTree {
    nodes: Vec<Node>,
    root: usize,
    labels: Vec<String>,
    postorder: Vec<usize>,
}

/// Arena builder; `finish` validates the result.
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub(crate) fn leaf(&mut self, taxon: usize, length: Option<f64>) -> usize {
        self.nodes.push(Node { parent: None, children: None, length, taxon: Some(taxon) });
        self.nodes.len() - 1
    }

    pub(crate) fn join(&mut self, a: usize, b: usize, length: Option<f64>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { parent: None, children: Some([a, b]), length, taxon: None });
        self.nodes[a].parent = Some(id);
        self.nodes[b].parent = Some(id);
        id
    }

    pub(crate) fn set_length(&mut self, id: usize, length: Option<f64>) {
        self.nodes[id].length = length;
    }

    pub(crate) fn finish(self, root: usize, labels: Vec<String>) -> Result<SpeciesTree> {
        SpeciesTree::from_nodes(self.nodes, root, labels)
    }
}

impl SpeciesTree {
    fn from_nodes(mut nodes: Vec<Node>, root: usize, labels: Vec<String>) -> Result<Self> {
        let k = labels.len();
        if k < 2 {
            return Err(Error::domain(format!("a species tree needs at least 2 leaves, got {k}")));
        }
        if root >= nodes.len() || nodes[root].parent.is_some() {
            return Err(Error::domain("root must be a parentless node"));
        }
        nodes[root].length = None;

        let mut postorder = Vec::with_capacity(nodes.len());
        let mut seen_taxa = vec![false; k];
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            let node = &nodes[id];
            if id != root {
                match node.length {
                    Some(l) if l > 0.0 && l.is_finite() => {}
                    other => return Err(Error::domain(format!("branch length must be positive, got {other:?}"))),
                }
            }
            match (node.children, expanded) {
                (Some([a, b]), false) => {
                    stack.push((id, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                (Some(_), true) => postorder.push(id),
                (None, _) => {
                    let taxon = node.taxon.ok_or_else(|| Error::domain("leaf without taxon"))?;
                    if taxon >= k || std::mem::replace(&mut seen_taxa[taxon], true) {
                        return Err(Error::domain(format!("taxon {taxon} is out of range or repeated")));
                    }
                    postorder.push(id);
                }
            }
        }
        if postorder.len() != nodes.len() || postorder.len() != 2 * k - 1 {
            return Err(Error::domain("tree must be binary with every node reachable from the root"));
        }
        Ok(Self { nodes, root, labels, postorder })
    }

    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Node ids with every child before its parent; the root is last.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    /// Leaf label of each taxon index.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Leaf count below each node, indexed by node id.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.nodes.len()];
        for &id in &self.postorder {
            sizes[id] = match self.nodes[id].children {
                Some([a, b]) => sizes[a] + sizes[b],
                None => 1,
            };
        }
        sizes
    }

    /// Taxon bitmask below each node, indexed by node id.
    pub fn clusters(&self) -> Result<Vec<u128>> {
        bipartition::check_taxa(self.leaf_count())?;
        let mut clusters = vec![0u128; self.nodes.len()];
        for &id in &self.postorder {
            let node = &self.nodes[id];
            clusters[id] = match (node.children, node.taxon) {
                (Some([a, b]), _) => clusters[a] | clusters[b],
                (None, Some(t)) => 1u128 << t,
                (None, None) => unreachable!("validated at construction"),
            };
        }
        Ok(clusters)
    }

    /// Shortest edge whose child is internal (the root has no edge).
    /// `None` when there is no such edge.
    pub fn internal_min_branch(&self) -> Option<f64> {
        self.nodes.iter().filter(|n| !n.is_leaf()).filter_map(|n| n.length).min_by(f64::total_cmp)
    }

    /// Copy with every branch length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::domain(format!("scale factor must be positive, got {factor}")));
        }
        let mut out = self.clone();
        for node in &mut out.nodes {
            node.length = node.length.map(|l| l * factor);
        }
        Ok(out)
    }

    /// Copy with every branch length set to `length`.
    pub fn with_uniform_lengths(&self, length: f64) -> Result<Self> {
        check_length(length)?;
        let mut out = self.clone();
        let root = out.root;
        for (id, node) in out.nodes.iter_mut().enumerate() {
            node.length = (id != root).then_some(length);
        }
        Ok(out)
    }

    /// Set of rooted clusters; two trees on the same taxa have the same
    /// topology iff these agree.
    pub fn cluster_set(&self) -> Result<BTreeSet<u128>> {
        Ok(self.clusters()?.into_iter().collect())
    }

    pub fn to_newick(&self) -> String {
        newick::write(self)
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        newick::parse(text)
    }
}

fn check_length(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("branch length must be positive and finite, got {t}")));
    }
    Ok(())
}

pub(crate) fn default_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("t{i}")).collect()
}

/// Caterpillar `(((t0,t1),t2),...)` with every branch of length `t`.
pub fn caterpillar(k: usize, t: f64) -> Result<SpeciesTree> {
    if k < 3 {
        return Err(Error::domain(format!("caterpillar needs k >= 3, got {k}")));
    }
    check_length(t)?;
    let mut b = TreeBuilder::default();
    let first = b.leaf(0, Some(t));
    let second = b.leaf(1, Some(t));
    let mut top = b.join(first, second, Some(t));
    for taxon in 2..k {
        let leaf = b.leaf(taxon, Some(t));
        top = b.join(top, leaf, Some(t));
    }
    b.finish(top, default_labels(k))
}

/// Balanced tree splitting `n` leaves into `ceil(n/2)` and `floor(n/2)` at
/// every vertex, every branch of length `t`.
pub fn balanced(k: usize, t: f64) -> Result<SpeciesTree> {
    if k < 2 {
        return Err(Error::domain(format!("balanced tree needs k >= 2, got {k}")));
    }
    check_length(t)?;
    fn build(b: &mut TreeBuilder, first: usize, n: usize, t: f64) -> usize {
        if n == 1 {
            return b.leaf(first, Some(t));
        }
        let left = n.div_ceil(2);
        let l = build(b, first, left, t);
        let r = build(b, first + left, n - left, t);
        b.join(l, r, Some(t))
    }
    let mut b = TreeBuilder::default();
    let root = build(&mut b, 0, k, t);
    b.finish(root, default_labels(k))
}

/// Yule tree on `k` leaves, rescaled so its shortest internal branch is
/// exactly `t_min`.
///
/// Starts from two lineages; each lineage splits at rate 1. After the
/// `k`-th leaf appears, one further waiting time at rate `k` sets the
/// pendant lengths.
pub fn yule(k: usize, t_min: f64, seed: u64) -> Result<SpeciesTree> {
    if k < 4 {
        return Err(Error::domain(format!("yule tree needs k >= 4, got {k}")));
    }
    check_length(t_min)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // node arena built top-down: (parent, birth time, death time, children)
    struct Proto {
        birth: f64,
        death: f64,
        children: Option<[usize; 2]>,
    }
    let mut protos = vec![Proto { birth: 0.0, death: 0.0, children: None }];
    let mut active: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..2 {
        protos.push(Proto { birth: 0.0, death: f64::NAN, children: None });
        active.push(protos.len() - 1);
    }
    protos[0].children = Some([1, 2]);

    let mut now = 0.0;
    let draw_wait = |n: usize, rng: &mut ChaCha8Rng| Exp::new(n as f64).expect("positive rate").sample(rng);
    while active.len() < k {
        now += draw_wait(active.len(), &mut rng);
        let slot = rng.random_range(0..active.len());
        let splitting = active[slot];
        protos[splitting].death = now;
        let a = protos.len();
        protos.push(Proto { birth: now, death: f64::NAN, children: None });
        protos.push(Proto { birth: now, death: f64::NAN, children: None });
        protos[splitting].children = Some([a, a + 1]);
        active.swap_remove(slot);
        active.push(a);
        active.push(a + 1);
    }
    let end = now + draw_wait(k, &mut rng);
    for &id in &active {
        protos[id].death = end;
    }

    let mut b = TreeBuilder::default();
    let mut next_taxon = 0;
    fn emit(id: usize, protos: &[Proto], b: &mut TreeBuilder, next_taxon: &mut usize) -> usize {
        let p = &protos[id];
        let length = (id != 0).then_some(p.death - p.birth);
        match p.children {
            Some([x, y]) => {
                let l = emit(x, protos, b, next_taxon);
                let r = emit(y, protos, b, next_taxon);
                b.join(l, r, length)
            }
            None => {
                *next_taxon += 1;
                b.leaf(*next_taxon - 1, length)
            }
        }
    }
    let root = emit(0, &protos, &mut b, &mut next_taxon);
    let raw = b.finish(root, default_labels(k))?;
    let current = raw.internal_min_branch().expect("k >= 4 has internal edges");
    let mut tree = raw.scaled(t_min / current)?;
    // pin the minimum exactly despite rounding in the product
    let root = tree.root;
    for (id, node) in tree.nodes.iter_mut().enumerate() {
        if id != root && !node.is_leaf() && node.length.is_some_and(|l| (l - t_min).abs() <= 1e-12 * t_min) {
            node.length = Some(t_min);
        }
    }
    Ok(tree)
}

/// Multiset of descendant counts, one per nontrivial bipartition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescendantCounts {
    alphas: Vec<usize>,
}

impl DescendantCounts {
    /// Counts in ascending order.
    pub fn alphas(&self) -> &[usize] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn sum_by(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.alphas.iter().map(|&a| f(a)).sum()
    }
}

/// Descendant count for each nontrivial bipartition.
///
/// An edge below a non-root internal node contributes its leaf count. The
/// two root edges induce one bipartition; it contributes the smaller root
/// subtree's leaf count when that split is nontrivial.
pub fn descendant_counts(tree: &SpeciesTree) -> Result<DescendantCounts> {
    let k = tree.leaf_count();
    if k < 4 {
        return Err(Error::domain(format!("descendant counts need k >= 4, got {k}")));
    }
    let sizes = tree.subtree_sizes();
    let mut alphas = Vec::with_capacity(k - 3);
    for (id, node) in tree.nodes.iter().enumerate() {
        let below_root = node.parent == Some(tree.root);
        if !node.is_leaf() && node.parent.is_some() && !below_root {
            alphas.push(sizes[id]);
        }
    }
    let [a, b] = tree.nodes[tree.root].children.expect("root is internal");
    let root_alpha = sizes[a].min(sizes[b]);
    if root_alpha >= 2 {
        alphas.push(root_alpha);
    }
    alphas.sort_unstable();
    Ok(DescendantCounts { alphas })
}

/// Leaf count below every non-root node (all `2k - 2` edges), ascending.
pub fn all_edge_counts(tree: &SpeciesTree) -> Vec<usize> {
    let sizes = tree.subtree_sizes();
    let mut counts: Vec<usize> = (0..tree.nodes.len()).filter(|&id| id != tree.root).map(|id| sizes[id]).collect();
    counts.sort_unstable();
    counts
}

/// The `k - 3` nontrivial bipartitions of the unrooted tree.
pub fn nontrivial_bipartitions(tree: &SpeciesTree) -> Result<BTreeSet<Bipartition>> {
    let k = tree.leaf_count();
    if k < 4 {
        return Err(Error::domain(format!("nontrivial bipartitions need k >= 4, got {k}")));
    }
    let clusters = tree.clusters()?;
    Ok(clusters
        .iter()
        .enumerate()
        .filter(|&(id, _)| id != tree.root)
        .map(|(_, &c)| Bipartition::from_cluster(c, k))
        .filter(|b| b.is_nontrivial(k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caterpillar_counts() {
        let t = caterpillar(8, 0.2).unwrap();
        assert_eq!(descendant_counts(&t).unwrap().alphas(), &[2, 3, 4, 5, 6]);
        assert_eq!(t.internal_min_branch(), Some(0.2));
        assert!(descendant_counts(&caterpillar(3, 1.0).unwrap()).is_err());
        assert_eq!(nontrivial_bipartitions(&caterpillar(4, 1.0).unwrap()).unwrap().len(), 1);
    }

    #[test]
    fn balanced_root_splits() {
        let sizes_at_root = |k| {
            let t = balanced(k, 1.0).unwrap();
            let s = t.subtree_sizes();
            let [a, b] = t.node(t.root()).children.unwrap();
            (s[a], s[b])
        };
        assert_eq!(sizes_at_root(4), (2, 2));
        assert_eq!(sizes_at_root(7), (4, 3));
        assert_eq!(descendant_counts(&balanced(4, 1.0).unwrap()).unwrap().alphas(), &[2]);
        let bips = nontrivial_bipartitions(&balanced(4, 1.0).unwrap()).unwrap();
        assert_eq!(bips.into_iter().map(|b| b.taxa()).collect::<Vec<_>>(), vec![vec![2, 3]]);
    }

    #[test]
    fn root_edge_pair_counted_once() {
        // root split 4/3 with cherries below
        let t = SpeciesTree::from_newick("(((a:1,b:1):1,(c:1,d:1):1):1,((e:1,f:1):1,g:1):1);").unwrap();
        assert_eq!(descendant_counts(&t).unwrap().alphas(), &[2, 2, 2, 3]);
        assert_eq!(all_edge_counts(&t).len(), 12);
    }

    #[test]
    fn yule_normalized_and_reproducible() {
        let t = yule(10, 0.2, 7).unwrap();
        assert_eq!(t.leaf_count(), 10);
        assert!((t.internal_min_branch().unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(t, yule(10, 0.2, 7).unwrap());
        assert_ne!(t, yule(10, 0.2, 8).unwrap());
        assert!(yule(3, 0.2, 1).is_err());
    }

    #[test]
    fn rejects_invalid_lengths() {
        assert!(caterpillar(5, 0.0).is_err());
        assert!(balanced(5, f64::NAN).is_err());
        assert!(balanced(1, 1.0).is_err());
    }
}
