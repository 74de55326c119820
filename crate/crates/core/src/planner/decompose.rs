use crate::model::{ServiceGraph, VnfId};

/// A root-to-leaf chain of the service graph. The first `anchor` VNFs were already placed by
/// an earlier chain and are not placed again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub vnfs: Vec<VnfId>,
    pub anchor: usize,
}

impl Chain {
    pub fn to_place(&self) -> &[VnfId] {
        &self.vnfs[self.anchor..]
    }
}

/// Splits a tree-shaped service graph into chains, in depth-first order, so that each shared
/// VNF is placed by the first chain containing it.
pub fn decompose(graph: &ServiceGraph) -> Vec<Chain> {
    let paths = graph.root_to_leaf_paths();
    let mut chains: Vec<Chain> = Vec::with_capacity(paths.len());
    for p in paths {
        let anchor = chains
            .iter()
            .map(|c| c.vnfs.iter().zip(&p).take_while(|(a, b)| a == b).count())
            .max()
            .unwrap_or(0);
        chains.push(Chain { vnfs: p, anchor });
    }
    chains
}
