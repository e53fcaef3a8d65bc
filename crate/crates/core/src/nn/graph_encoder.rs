//! Hierarchical graph encoder: `L` blocks of (2-layer GCN, TopK
//! downsampling) followed by a mean||max readout.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::params::{uniform, Linear, ParamId, ParamStore};
use super::sparse::{normalize_adjacency, SparseOp};
use super::tape::{Tape, Var};
use crate::aig::MessageGraph;
use crate::util::ceil_ratio;
use crate::{Error, Result, Scalar};

/// Width of every GCN layer.
pub const GCN_HIDDEN: usize = 64;

/// The two GCN layers of one encoding block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnParams {
    pub layers: [Linear; 2],
}

impl GcnParams {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, name: &str, in_dim: usize, hidden: usize) -> Self {
        GcnParams {
            layers: [
                Linear::new(store, rng, &format!("{name}.gcn0"), in_dim, hidden),
                Linear::new(store, rng, &format!("{name}.gcn1"), hidden, hidden),
            ],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn out_dim(&self) -> usize {
        self.layers[1].fan_out
    }
}

/// Learnable score direction plus the retainment ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownsampleParams {
    /// `F x 1` column.
    pub projection: ParamId,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderBlock {
    pub gcn: GcnParams,
    pub downsample: Option<DownsampleParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoder {
    pub blocks: Vec<EncoderBlock>,
}

/// Pooled graph vector `h_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRepresentation<T>(pub Array1<T>);

/// `H = ReLU(A relu(A X W1 + b1) W2 + b2)` with the normalized operator `A`.
pub fn gcn_forward_on<T: Scalar>(tape: &mut Tape<T>, store: &ParamStore<T>, gcn: &GcnParams, x: Var, op: &SparseOp<T>) -> Var {
    let mut h = x;
    for layer in &gcn.layers {
        let w = tape.param(store, layer.weight);
        let xw = tape.matmul(h, w);
        let agg = tape.sparse(op, xw);
        let b = tape.param(store, layer.bias);
        let pre = tape.add_row(agg, b);
        h = tape.relu(pre);
    }
    h
}

/// Indices of the `k` highest scores (ties prefer the lower index),
/// returned in ascending index order.
pub fn select_top_k<T: Scalar>(scores: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(k).collect();
    kept.sort_unstable();
    kept
}

/// Output of one downsampling step.
pub struct DownsampleOutput {
    pub graph: MessageGraph,
    /// Gated features of the kept nodes.
    pub x: Var,
    /// Kept original node indices, ascending.
    pub kept: Vec<usize>,
}

/// TopK pooling: scores `s = H v / |v|`, keep the `ceil(alpha N)` best
/// nodes, gate their rows by `tanh(s)` and take the induced subgraph.
pub fn downsample_on<T: Scalar>(
    tape: &mut Tape<T>,
    graph: &MessageGraph,
    h: Var,
    projection: Var,
    alpha: f64,
) -> Result<DownsampleOutput> {
    let n = tape.value(h).nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot downsample an empty graph".into()));
    }
    if tape.value(projection).nrows() != tape.value(h).ncols() {
        return Err(Error::Dimension(format!(
            "projection has {} entries, node features have {}",
            tape.value(projection).nrows(),
            tape.value(h).ncols()
        )));
    }
    let norm = tape.norm(projection);
    if tape.scalar(norm) == T::zero() {
        return Err(Error::InvalidArgument("downsampling projection vector is zero".into()));
    }
    let raw = tape.matmul(h, projection);
    let scores = tape.div_scalar(raw, norm);
    let score_values: Vec<T> = tape.value(scores).column(0).to_vec();
    let kept = select_top_k(&score_values, ceil_ratio(alpha, n));
    let kept_h = tape.gather_rows(h, &kept);
    let kept_s = tape.gather_rows(scores, &kept);
    let gate = tape.tanh(kept_s);
    let x = tape.mul_col(kept_h, gate);
    Ok(DownsampleOutput {
        graph: graph.induced(&kept),
        x,
        kept,
    })
}

/// Column means followed by column maxima.
pub fn graph_pool_on<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    if tape.value(x).nrows() == 0 {
        return Err(Error::InvalidArgument("cannot pool an empty node set".into()));
    }
    let mean = tape.col_mean(x);
    let max = tape.col_max(x);
    Ok(tape.concat_cols(&[mean, max]))
}

impl GraphEncoder {
    /// `layers` blocks, each a 2-layer GCN followed by TopK downsampling.
    pub fn hierarchical<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        in_dim: usize,
        layers: usize,
        alpha: f64,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidArgument("graph encoder needs at least one block".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1], got {alpha}")));
        }
        let mut blocks = Vec::with_capacity(layers);
        for l in 0..layers {
            let name = format!("graph.block{l}");
            let dim = if l == 0 { in_dim } else { GCN_HIDDEN };
            let gcn = GcnParams::new(store, rng, &name, dim, GCN_HIDDEN);
            let bound = 1.0 / (GCN_HIDDEN as f64).sqrt();
            let projection = store.add(format!("{name}.projection"), uniform(rng, GCN_HIDDEN, 1, bound));
            blocks.push(EncoderBlock {
                gcn,
                downsample: Some(DownsampleParams { projection, alpha }),
            });
        }
        Ok(GraphEncoder { blocks })
    }

    /// One 2-layer GCN without downsampling.
    pub fn plain<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, in_dim: usize) -> Self {
        let gcn = GcnParams::new(store, rng, "graph.block0", in_dim, GCN_HIDDEN);
        GraphEncoder {
            blocks: vec![EncoderBlock { gcn, downsample: None }],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.blocks[0].gcn.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.blocks.last().expect("at least one block").gcn.out_dim()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let mut ids: Vec<ParamId> = b.gcn.layers.iter().flat_map(|l| l.params()).collect();
                ids.extend(b.downsample.map(|d| d.projection));
                ids
            })
            .collect()
    }

    /// Runs every block and the readout; returns a `1 x output_dim` node.
    pub fn encode_on<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x0: Var, graph: &MessageGraph) -> Result<Var> {
        let (rows, cols) = tape.value(x0).dim();
        if rows != graph.num_nodes() {
            return Err(Error::Dimension(format!(
                "feature matrix has {rows} rows, graph has {} nodes",
                graph.num_nodes()
            )));
        }
        if cols != self.in_dim() {
            return Err(Error::Dimension(format!(
                "feature matrix has {cols} columns, encoder expects {}",
                self.in_dim()
            )));
        }
        let mut x = x0;
        let mut current = graph.clone();
        for block in &self.blocks {
            let op = normalize_adjacency::<T>(&current);
            let h = gcn_forward_on(tape, store, &block.gcn, x, &op);
            match block.downsample {
                Some(ds) => {
                    let projection = tape.param(store, ds.projection);
                    let out = downsample_on(tape, &current, h, projection, ds.alpha)?;
                    x = out.x;
                    current = out.graph;
                }
                None => x = h,
            }
        }
        graph_pool_on(tape, x)
    }
}

/// Inference-only GCN block.
pub fn gcn_forward<T: Scalar>(store: &ParamStore<T>, gcn: &GcnParams, x: &Array2<T>, op: &SparseOp<T>) -> Result<Array2<T>> {
    if x.nrows() != op.dim().0 {
        return Err(Error::Dimension(format!("X has {} rows, operator is {:?}", x.nrows(), op.dim())));
    }
    if x.ncols() != gcn.in_dim() {
        return Err(Error::Dimension(format!("X has {} columns, GCN expects {}", x.ncols(), gcn.in_dim())));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let h = gcn_forward_on(&mut tape, store, gcn, xv, op);
    Ok(tape.value(h).clone())
}

/// Inference-only downsampling of node matrix `h`; `projection` is `F x 1`.
pub fn downsample<T: Scalar>(
    graph: &MessageGraph,
    h: &Array2<T>,
    projection: &Array2<T>,
    alpha: f64,
) -> Result<(MessageGraph, Array2<T>, Vec<usize>)> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let pv = tape.constant(projection.clone());
    let out = downsample_on(&mut tape, graph, hv, pv, alpha)?;
    Ok((out.graph, tape.value(out.x).clone(), out.kept))
}

pub fn graph_pool<T: Scalar>(x: &Array2<T>) -> Result<GraphRepresentation<T>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let pooled = graph_pool_on(&mut tape, xv)?;
    Ok(GraphRepresentation(tape.value(pooled).row(0).to_owned()))
}

pub fn encode_graph<T: Scalar>(
    store: &ParamStore<T>,
    encoder: &GraphEncoder,
    x0: &Array2<T>,
    graph: &MessageGraph,
) -> Result<GraphRepresentation<T>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x0.clone());
    let h = encoder.encode_on(&mut tape, store, xv, graph)?;
    Ok(GraphRepresentation(tape.value(h).row(0).to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_gcn(store: &mut ParamStore<f64>, dim: usize) -> GcnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gcn = GcnParams::new(store, &mut rng, "t", dim, dim);
        for layer in &gcn.layers {
            *store.value_mut(layer.weight) = Array2::eye(dim);
        }
        gcn
    }

    #[test]
    fn gcn_single_node_identity() {
        let mut store = ParamStore::new();
        let gcn = identity_gcn(&mut store, 4);
        let op = normalize_adjacency(&MessageGraph::from_edges(1, &[]));
        let h = gcn_forward(&store, &gcn, &array![[2.0, -1.0, 0.0, 0.5]], &op).unwrap();
        assert_eq!(h, array![[2.0, 0.0, 0.0, 0.5]]);
    }

    #[test]
    fn gcn_zero_input() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gcn = GcnParams::new(&mut store, &mut rng, "t", 7, 64);
        let op = normalize_adjacency(&MessageGraph::from_edges(3, &[(0, 1), (1, 2)]));
        let h = gcn_forward(&store, &gcn, &Array2::zeros((3, 7)), &op).unwrap();
        assert_eq!(h.dim(), (3, 64));
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gcn_first_layer_two_nodes() {
        let mut store = ParamStore::new();
        let gcn = identity_gcn(&mut store, 2);
        let op = normalize_adjacency(&MessageGraph::from_edges(2, &[(0, 1)]));
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let w = tape.param(&store, gcn.layers[0].weight);
        let xw = tape.matmul(x, w);
        let agg = tape.sparse(&op, xw);
        assert!(tape.value(agg).iter().all(|v| (v - 0.5).abs() < 1e-12));
        let full = gcn_forward(&store, &gcn, &array![[1.0, 0.0], [0.0, 1.0]], &op).unwrap();
        assert!(full.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn gcn_dimension_errors() {
        let mut store = ParamStore::new();
        let gcn = identity_gcn(&mut store, 2);
        let op = normalize_adjacency::<f64>(&MessageGraph::from_edges(2, &[(0, 1)]));
        assert!(gcn_forward(&store, &gcn, &Array2::zeros((3, 2)), &op).is_err());
        assert!(gcn_forward(&store, &gcn, &Array2::zeros((2, 3)), &op).is_err());
    }

    #[test]
    fn downsample_worked_example() {
        let g = MessageGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let h = array![[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]];
        let (sub, x, kept) = downsample(&g, &h, &array![[1.0], [1.0]], 0.5).unwrap();
        assert_eq!(kept, vec![1, 2]);
        let r2 = 2f64.sqrt();
        let expect = array![[0.0, 2.0 * (2.0 / r2).tanh()], [3.0 * (3.0 / r2).tanh(), 0.0]];
        for (a, b) in x.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((x[[0, 1]] - 1.7768).abs() < 1e-4);
        assert!((x[[1, 0]] - 2.9150).abs() < 1e-4);
        assert_eq!(sub.neighbors(0), &[0, 1]);
    }

    #[test]
    fn downsample_keep_all_and_single() {
        let g = MessageGraph::from_edges(3, &[(0, 2)]);
        let h = array![[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]];
        let (sub, _, kept) = downsample(&g, &h, &array![[1.0], [-1.0]], 1.0).unwrap();
        assert_eq!(kept, vec![0, 1, 2]);
        assert_eq!(sub, g);

        let one = MessageGraph::from_edges(1, &[]);
        for alpha in [0.1, 0.5, 1.0] {
            let (_, _, kept) = downsample(&one, &array![[0.3, 0.1]], &array![[1.0], [1.0]], alpha).unwrap();
            assert_eq!(kept, vec![0]);
        }
    }

    #[test]
    fn downsample_zero_projection_fails() {
        let g = MessageGraph::from_edges(1, &[]);
        assert!(downsample(&g, &array![[1.0]], &array![[0.0]], 0.5).is_err());
    }

    #[test]
    fn top_k_ties_prefer_low_index() {
        assert_eq!(select_top_k(&[1.0, 2.0, 2.0, 2.0], 2), vec![1, 2]);
        assert_eq!(select_top_k(&[0.0; 5], 3), vec![0, 1, 2]);
    }

    #[test]
    fn pool_examples() {
        let p = graph_pool(&array![[1.0, 2.0], [3.0, 0.0]]).unwrap();
        assert_eq!(p.0.to_vec(), vec![2.0, 1.0, 3.0, 2.0]);
        let p = graph_pool(&array![[1.5, -2.0]]).unwrap();
        assert_eq!(p.0.to_vec(), vec![1.5, -2.0, 1.5, -2.0]);
        let p = graph_pool(&array![[3.0, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(p.0.to_vec(), vec![2.0, 1.0, 3.0, 2.0]);
        assert!(graph_pool::<f64>(&Array2::zeros((0, 2))).is_err());
    }

    #[test]
    fn encode_single_node_alpha_one() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = GraphEncoder::hierarchical(&mut store, &mut rng, 7, 1, 1.0).unwrap();
        let g = MessageGraph::from_edges(1, &[]);
        let x = Array2::from_shape_fn((1, 7), |(_, j)| j as f64 * 0.2 + 0.1);
        let h = encode_graph(&store, &enc, &x, &g).unwrap();
        assert_eq!(h.0.len(), 128);
        assert_eq!(h.0.slice(ndarray::s![..64]), h.0.slice(ndarray::s![64..]));
    }
}
