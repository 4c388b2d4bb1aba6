//! Exact lineage-count distributions through an arbitrary species tree.

use std::collections::HashMap;

use crate::coalescent::{convolve, LineageDistribution, TransitionKernel};
use crate::treegen::SpeciesTree;
use crate::Result;

/// Lineage counts at the bottom (`entering`) and top (`leaving`) of the edge
/// above a node. At the root both are the count entering the root population.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFlow {
    pub entering: LineageDistribution,
    pub leaving: LineageDistribution,
}

/// Propagates one lineage per leaf up the tree, indexed by node id.
pub fn lineage_flow(tree: &SpeciesTree) -> Result<Vec<NodeFlow>> {
    let k = tree.leaf_count();
    let mut kernels: HashMap<u64, TransitionKernel> = HashMap::new();
    let mut flow: Vec<Option<NodeFlow>> = vec![None; tree.nodes().len()];
    for &id in tree.postorder() {
        let node = tree.node(id);
        let entering = match node.children {
            Some([a, b]) => {
                let left = &flow[a].as_ref().expect("children first").leaving;
                let right = &flow[b].as_ref().expect("children first").leaving;
                convolve(left, right)
            }
            None => LineageDistribution::point(1)?,
        };
        let leaving = match node.length {
            Some(len) if entering.max_support() > 1 => {
                let kernel = match kernels.entry(len.to_bits()) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => e.insert(TransitionKernel::new(k, len)?),
                };
                kernel.apply(&entering)?
            }
            _ => entering.clone(),
        };
        flow[id] = Some(NodeFlow { entering, leaving });
    }
    Ok(flow.into_iter().map(|f| f.expect("every node visited")).collect())
}

/// Distribution of the number of lineages entering the root population.
pub fn root_lineages(tree: &SpeciesTree) -> Result<LineageDistribution> {
    let root = tree.root();
    Ok(lineage_flow(tree)?.swap_remove(root).entering)
}
