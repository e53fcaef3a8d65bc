use ndarray::Array2;

use crate::aig::MessageGraph;
use crate::Scalar;

/// Row-compressed constant matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp<T> {
    rows: Vec<Vec<(usize, T)>>,
    cols: usize,
}

impl<T: Scalar> SparseOp<T> {
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>, cols: usize) -> Self {
        SparseOp { rows, cols }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows.len(), self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map(|&(_, w)| w)
            .unwrap_or_else(T::zero)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut d = Array2::zeros((self.rows.len(), self.cols));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                d[[i, j]] += w;
            }
        }
        d
    }

    pub fn apply(&self, x: &Array2<T>) -> Array2<T> {
        assert_eq!(x.nrows(), self.cols, "sparse operand rows");
        let mut out = Array2::zeros((self.rows.len(), x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut dst = out.row_mut(i);
            for &(j, w) in row {
                dst.scaled_add(w, &x.row(j));
            }
        }
        out
    }

    pub fn apply_transpose(&self, g: &Array2<T>) -> Array2<T> {
        assert_eq!(g.nrows(), self.rows.len(), "sparse gradient rows");
        let mut out = Array2::zeros((self.cols, g.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let mut dst = out.row_mut(j);
                dst.scaled_add(w, &g.row(i));
            }
        }
        out
    }
}

/// `D^-1/2 (A + I) D^-1/2`; the message graph already carries the self-loops.
pub fn normalize_adjacency<T: Scalar>(graph: &MessageGraph) -> SparseOp<T> {
    let inv_sqrt: Vec<T> = (0..graph.num_nodes())
        .map(|i| T::one() / T::from_usize(graph.degree(i)).expect("degree").sqrt())
        .collect();
    let rows = (0..graph.num_nodes())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(|&j| (j, inv_sqrt[i] * inv_sqrt[j]))
                .collect()
        })
        .collect();
    SparseOp::from_rows(rows, graph.num_nodes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        let op = normalize_adjacency::<f64>(&MessageGraph::from_edges(1, &[]));
        assert_eq!(op.to_dense(), ndarray::array![[1.0]]);
    }

    #[test]
    fn two_nodes_one_edge() {
        let op = normalize_adjacency::<f64>(&MessageGraph::from_edges(2, &[(0, 1)]));
        assert!(op.to_dense().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn symmetric_on_random_graphs() {
        for seed in 0..20 {
            let aig = crate::synth::random_aig(seed, 4, 25, 3).unwrap();
            let g = crate::aig::to_message_graph(&aig);
            let d = normalize_adjacency::<f64>(&g).to_dense();
            assert_eq!(d, d.t());
            for i in 0..g.num_nodes() {
                for &j in g.neighbors(i) {
                    let expect = 1.0 / ((g.degree(i) * g.degree(j)) as f64).sqrt();
                    assert!((d[[i, j]] - expect).abs() < 1e-15);
                }
            }
        }
    }
}
