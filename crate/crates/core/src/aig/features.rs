use ndarray::Array2;

use super::Aig;
use crate::Scalar;

/// 4 kind columns followed by 3 inverted-fanin-count columns.
pub const FEATURE_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Const = 0,
    Input = 1,
    And = 2,
    OutputDriver = 3,
}

/// Per-node one-hot features of the nodes that appear in the message graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    rows: Vec<[u8; FEATURE_DIM]>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> &[[u8; FEATURE_DIM]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_matrix<T: Scalar>(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows.len(), FEATURE_DIM), |(r, c)| {
            if self.rows[r][c] == 1 {
                T::one()
            } else {
                T::zero()
            }
        })
    }
}

/// Whether the constant node is referenced by any fanin or output.
pub(crate) fn const_referenced(aig: &Aig) -> bool {
    aig.outputs().iter().any(|l| l.is_const())
        || aig
            .ands()
            .iter()
            .any(|a| a.fanin0.is_const() || a.fanin1.is_const())
}

/// Rows follow the message-graph numbering: the constant node first (only
/// if referenced), then inputs, then AND nodes. A node referenced by an
/// output is typed as an output driver regardless of its structural kind.
pub fn node_features(aig: &Aig) -> FeatureMatrix {
    let mut drives_output = vec![false; aig.node_count()];
    for o in aig.outputs() {
        drives_output[o.node()] = true;
    }
    let start = if const_referenced(aig) { 0 } else { 1 };
    let rows = (start..aig.node_count())
        .map(|node| {
            let mut row = [0u8; FEATURE_DIM];
            let (kind, inverted) = match aig.and_of(node) {
                Some(and) => (
                    NodeKind::And,
                    and.fanin0.is_inverted() as usize + and.fanin1.is_inverted() as usize,
                ),
                None if node == 0 => (NodeKind::Const, 0),
                None => (NodeKind::Input, 0),
            };
            let kind = if drives_output[node] {
                NodeKind::OutputDriver
            } else {
                kind
            };
            row[kind as usize] = 1;
            row[4 + inverted] = 1;
            row
        })
        .collect();
    FeatureMatrix { rows }
}
