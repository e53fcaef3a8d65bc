//! Structural And-Inverter Graphs.
//!
//! Node 0 is the constant-false node, nodes `1..=num_inputs` are primary
//! inputs and every following node is a two-input AND. Fanins always point
//! to strictly smaller node indices, so ascending index order is a
//! topological order.

mod aiger;
mod features;
mod graph;
mod sim;

pub use aiger::{parse_aag, write_aag};
pub use features::{node_features, FeatureMatrix, NodeKind, FEATURE_DIM};
pub use graph::{to_message_graph, MessageGraph};
pub use sim::simulate;

use crate::{Error, Result};

/// An edge reference: node index plus an inversion bit, packed AIGER-style
/// as `2 * node + inverted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal(u32);

impl Literal {
    pub const FALSE: Literal = Literal(0);
    pub const TRUE: Literal = Literal(1);

    pub fn new(node: usize, inverted: bool) -> Self {
        Literal((node as u32) << 1 | inverted as u32)
    }

    pub fn from_code(code: u32) -> Self {
        Literal(code)
    }

    pub fn code(self) -> u32 {
        self.0
    }

    pub fn node(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_inverted(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_const(self) -> bool {
        self.node() == 0
    }

    /// Flips the inversion bit when `flip` is set.
    pub fn xor(self, flip: bool) -> Self {
        Literal(self.0 ^ flip as u32)
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AndNode {
    pub fanin0: Literal,
    pub fanin1: Literal,
}

impl AndNode {
    pub fn new(fanin0: Literal, fanin1: Literal) -> Self {
        AndNode { fanin0, fanin1 }
    }

    pub fn fanins(&self) -> [Literal; 2] {
        [self.fanin0, self.fanin1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Aig {
    num_inputs: usize,
    ands: Vec<AndNode>,
    outputs: Vec<Literal>,
}

impl Aig {
    /// Builds a graph, checking the topological-index and dangling-reference
    /// invariants.
    pub fn new(num_inputs: usize, ands: Vec<AndNode>, outputs: Vec<Literal>) -> Result<Self> {
        let first_and = num_inputs + 1;
        for (i, and) in ands.iter().enumerate() {
            let own = first_and + i;
            for lit in and.fanins() {
                if lit.node() >= own {
                    return Err(Error::InvalidArgument(format!(
                        "AND node {own} references node {} which is not earlier",
                        lit.node()
                    )));
                }
            }
        }
        let node_count = first_and + ands.len();
        if let Some(bad) = outputs.iter().find(|l| l.node() >= node_count) {
            return Err(Error::InvalidArgument(format!(
                "output references missing node {}",
                bad.node()
            )));
        }
        Ok(Aig {
            num_inputs,
            ands,
            outputs,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn ands(&self) -> &[AndNode] {
        &self.ands
    }

    pub fn outputs(&self) -> &[Literal] {
        &self.outputs
    }

    /// Constant node + inputs + AND nodes.
    pub fn node_count(&self) -> usize {
        1 + self.num_inputs + self.ands.len()
    }

    pub fn first_and(&self) -> usize {
        self.num_inputs + 1
    }

    pub fn is_input(&self, node: usize) -> bool {
        (1..=self.num_inputs).contains(&node)
    }

    pub fn is_and(&self, node: usize) -> bool {
        node >= self.first_and() && node < self.node_count()
    }

    /// The AND definition of `node`, if it is an AND node.
    pub fn and_of(&self, node: usize) -> Option<&AndNode> {
        node.checked_sub(self.first_and())
            .and_then(|i| self.ands.get(i))
    }

    pub fn input_literal(&self, i: usize) -> Literal {
        debug_assert!(i < self.num_inputs);
        Literal::new(1 + i, false)
    }

    /// Per-node count of references from AND fanins and outputs.
    pub fn fanout_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.node_count()];
        for and in &self.ands {
            counts[and.fanin0.node()] += 1;
            counts[and.fanin1.node()] += 1;
        }
        for out in &self.outputs {
            counts[out.node()] += 1;
        }
        counts
    }
}

pub fn and_count(aig: &Aig) -> usize {
    aig.ands.len()
}

/// Ascending node indices; fanins are always earlier, so this is topological.
pub fn topological_order(aig: &Aig) -> Vec<usize> {
    (0..aig.node_count()).collect()
}

/// AND level of every node: constant and inputs sit at level 0.
pub fn levels(aig: &Aig) -> Vec<usize> {
    let mut level = vec![0usize; aig.node_count()];
    let first = aig.first_and();
    for (i, and) in aig.ands.iter().enumerate() {
        level[first + i] = 1 + level[and.fanin0.node()].max(level[and.fanin1.node()]);
    }
    level
}

/// Longest AND path feeding any output.
pub fn depth(aig: &Aig) -> usize {
    let level = levels(aig);
    aig.outputs
        .iter()
        .map(|o| level[o.node()])
        .max()
        .unwrap_or(0)
}

/// Incremental constructor that hands out literals for new nodes.
#[derive(Debug, Clone)]
pub struct AigBuilder {
    num_inputs: usize,
    ands: Vec<AndNode>,
    outputs: Vec<Literal>,
}

impl AigBuilder {
    pub fn new(num_inputs: usize) -> Self {
        AigBuilder {
            num_inputs,
            ands: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&self, i: usize) -> Literal {
        assert!(i < self.num_inputs, "input {i} out of range");
        Literal::new(1 + i, false)
    }

    pub fn and(&mut self, a: Literal, b: Literal) -> Literal {
        let node = self.num_inputs + 1 + self.ands.len();
        assert!(a.node() < node && b.node() < node, "fanin must exist");
        self.ands.push(AndNode::new(a, b));
        Literal::new(node, false)
    }

    pub fn output(&mut self, lit: Literal) {
        self.outputs.push(lit);
    }

    pub fn and_count(&self) -> usize {
        self.ands.len()
    }

    pub fn build(self) -> Aig {
        Aig {
            num_inputs: self.num_inputs,
            ands: self.ands,
            outputs: self.outputs,
        }
    }
}
