use std::collections::VecDeque;

use super::SpeciesTree;
use crate::{Error, Result};

/// First vertex in breadth-first order whose subtrees differ by more than
/// one leaf.
fn topmost_unbalanced(tree: &SpeciesTree, sizes: &[usize]) -> Option<usize> {
    let mut queue = VecDeque::from([tree.root()]);
    while let Some(id) = queue.pop_front() {
        if let Some([a, b]) = tree.node(id).children {
            if sizes[a].abs_diff(sizes[b]) > 1 {
                return Some(id);
            }
            queue.extend([a, b]);
        }
    }
    None
}

/// Every vertex has subtrees differing by at most one leaf.
pub fn is_balanced(tree: &SpeciesTree) -> bool {
    topmost_unbalanced(tree, &tree.subtree_sizes()).is_none()
}

/// Follows larger (or smaller) children down to a leaf; ties go left.
fn descend(tree: &SpeciesTree, sizes: &[usize], mut id: usize, larger: bool) -> usize {
    while let Some([a, b]) = tree.node(id).children {
        let take_b = if larger { sizes[b] > sizes[a] } else { sizes[b] < sizes[a] };
        id = if take_b { b } else { a };
    }
    id
}

/// One greedy balancing move at the topmost unbalanced vertex `v`.
///
/// Walking from `v` toward larger subtrees ends in a cherry; that cherry
/// collapses to one of its leaves, and its other leaf is grafted next to the
/// leaf reached by walking from `v` toward smaller subtrees. The imbalance
/// at `v` drops by two. Branch lengths of the new edges copy the old ones.
pub fn rebalance_step(tree: &SpeciesTree) -> Result<SpeciesTree> {
    let sizes = tree.subtree_sizes();
    let v = topmost_unbalanced(tree, &sizes).ok_or(Error::AlreadyBalanced)?;
    let [a, b] = tree.node(v).children.unwrap();
    let (big, small) = if sizes[a] >= sizes[b] { (a, b) } else { (b, a) };
    let kept = descend(tree, &sizes, big, true);
    let cherry = tree.node(kept).parent.unwrap();
    let [x, y] = tree.node(cherry).children.unwrap();
    let moved = if x == kept { y } else { x };
    let anchor = descend(tree, &sizes, small, false);

    let mut nodes = tree.nodes().to_vec();
    // `kept` takes the cherry's place; the cherry node is reused as the graft joint
    nodes[kept].parent = nodes[cherry].parent;
    nodes[kept].length = nodes[cherry].length;
    let grandparent = nodes[cherry].parent.expect("cherry lies strictly below v");
    let slots = nodes[grandparent].children.as_mut().unwrap();
    *slots.iter_mut().find(|c| **c == cherry).unwrap() = kept;

    let anchor_parent = nodes[anchor].parent.expect("anchor lies strictly below v");
    let slots = nodes[anchor_parent].children.as_mut().unwrap();
    *slots.iter_mut().find(|c| **c == anchor).unwrap() = cherry;
    nodes[cherry].parent = Some(anchor_parent);
    nodes[cherry].length = nodes[anchor].length;
    nodes[cherry].children = Some([anchor, moved]);
    nodes[anchor].parent = Some(cherry);
    nodes[anchor].length = nodes[moved].length;
    nodes[moved].parent = Some(cherry);

    SpeciesTree::from_nodes(nodes, tree.root(), tree.labels().to_vec())
}

/// Applies [`rebalance_step`] until the tree is balanced; returns the final
/// tree and the number of steps taken.
pub fn rebalance_to_fixpoint(tree: &SpeciesTree) -> Result<(SpeciesTree, usize)> {
    let mut current = tree.clone();
    let mut steps = 0;
    loop {
        match rebalance_step(&current) {
            Ok(next) => {
                current = next;
                steps += 1;
            }
            Err(Error::AlreadyBalanced) => return Ok((current, steps)),
            Err(e) => return Err(e),
        }
    }
}
