use std::collections::BTreeSet;

use super::features::const_referenced;
use super::Aig;

/// Undirected graph with self-loops, stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageGraph {
    neighbors: Vec<Vec<usize>>,
}

impl MessageGraph {
    /// Symmetrizes `edges`, adds one self-loop per node and drops duplicates.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut sets: Vec<BTreeSet<usize>> = (0..num_nodes).map(|i| BTreeSet::from([i])).collect();
        for &(a, b) in edges {
            assert!(a < num_nodes && b < num_nodes, "edge ({a},{b}) out of range");
            sets[a].insert(b);
            sets[b].insert(a);
        }
        MessageGraph {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighbors of `node`, itself included.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Degree counting the self-loop.
    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// Every undirected edge once as `(i, j)` with `i <= j`, self-loops included.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j >= i).map(move |&j| (i, j)))
            .collect()
    }

    /// Subgraph induced by `kept` (ascending), renumbered 0..kept.len().
    pub fn induced(&self, kept: &[usize]) -> MessageGraph {
        let mut new_index = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in kept.iter().enumerate() {
            new_index[old] = new;
        }
        let neighbors = kept
            .iter()
            .map(|&old| {
                self.neighbors[old]
                    .iter()
                    .filter_map(|&n| (new_index[n] != usize::MAX).then_some(new_index[n]))
                    .collect()
            })
            .collect();
        MessageGraph { neighbors }
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors
            .iter()
            .enumerate()
            .all(|(i, ns)| ns.iter().all(|&j| self.neighbors[j].binary_search(&i).is_ok()))
    }
}

/// Fanin edges between AIG nodes, numbered like [`super::node_features`].
pub fn to_message_graph(aig: &Aig) -> MessageGraph {
    let offset = if const_referenced(aig) { 0 } else { 1 };
    let n = aig.node_count() - offset;
    let mut edges = Vec::with_capacity(2 * aig.ands().len());
    for (i, and) in aig.ands().iter().enumerate() {
        let node = aig.first_and() + i - offset;
        for lit in and.fanins() {
            edges.push((lit.node() - offset, node));
        }
    }
    MessageGraph::from_edges(n, &edges)
}
