use super::{default_labels, SpeciesTree, TreeBuilder};
use crate::{Error, Result};

/// Every rooted binary tree on `k` labeled leaves, unit branch lengths.
///
/// Trees are generated by inserting leaf `i` above any of the `2i - 1`
/// nodes of a tree on leaves `0..i`, which yields each labeled topology
/// exactly once: `(2k - 3)!!` in total.
pub fn enumerate_topologies(k: usize) -> Result<TopologyIter> {
    if !(3..=9).contains(&k) {
        return Err(Error::domain(format!("topology enumeration supports 3 <= k <= 9, got {k}")));
    }
    Ok(TopologyIter { k, choices: vec![0; k], done: false })
}

#[derive(Debug, Clone)]
pub struct TopologyIter {
    k: usize,
    /// `choices[i]` is where leaf `i` was inserted (entries 0 and 1 unused).
    choices: Vec<usize>,
    done: bool,
}

impl TopologyIter {
    fn build(&self) -> SpeciesTree {
        // (parent, children) per node, creation order
        let mut parent: Vec<Option<usize>> = vec![Some(2), Some(2), None];
        let mut children: Vec<Option<[usize; 2]>> = vec![None, None, Some([0, 1])];
        let mut taxon: Vec<Option<usize>> = vec![Some(0), Some(1), None];
        let mut root = 2;
        for leaf in 2..self.k {
            let target = self.choices[leaf];
            let (joint, tip) = (parent.len(), parent.len() + 1);
            parent.extend([parent[target], Some(joint)]);
            children.extend([Some([target, tip]), None]);
            taxon.extend([None, Some(leaf)]);
            match parent[target] {
                Some(p) => {
                    let kids = children[p].as_mut().unwrap();
                    let slot = kids.iter().position(|&c| c == target).unwrap();
                    kids[slot] = joint;
                }
                None => root = joint,
            }
            parent[target] = Some(joint);
        }

        let mut b = TreeBuilder::default();
        fn emit(
            id: usize,
            root: usize,
            children: &[Option<[usize; 2]>],
            taxon: &[Option<usize>],
            b: &mut TreeBuilder,
        ) -> usize {
            let length = (id != root).then_some(1.0);
            match children[id] {
                Some([x, y]) => {
                    let l = emit(x, root, children, taxon, b);
                    let r = emit(y, root, children, taxon, b);
                    b.join(l, r, length)
                }
                None => b.leaf(taxon[id].unwrap(), length),
            }
        }
        let r = emit(root, root, &children, &taxon, &mut b);
        b.finish(r, default_labels(self.k)).expect("enumerated trees are valid")
    }

    fn advance(&mut self) {
        for leaf in (2..self.k).rev() {
            self.choices[leaf] += 1;
            if self.choices[leaf] < 2 * leaf - 1 {
                return;
            }
            self.choices[leaf] = 0;
        }
        self.done = true;
    }
}

impl Iterator for TopologyIter {
    type Item = SpeciesTree;

    fn next(&mut self) -> Option<SpeciesTree> {
        if self.done {
            return None;
        }
        let tree = self.build();
        self.advance();
        Some(tree)
    }
}
