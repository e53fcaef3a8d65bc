//! Multi-label recipe classifier, QoR decoder and the three losses.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::params::{Linear, ParamId, ParamStore};
use super::tape::{bce_value, rse_value, Tape, Var};
use crate::{Error, Result, Scalar};

pub const CLASSIFIER_HIDDEN: usize = 64;
pub const DECODER_HIDDEN: [usize; 2] = [128, 64];

/// `sigmoid(relu(h W1 + b1) W2 + b2)`, one probability per recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classifier {
    pub hidden: Linear,
    pub out: Linear,
}

impl Classifier {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, in_dim: usize, k: usize) -> Self {
        Classifier {
            hidden: Linear::new(store, rng, "classifier.0", in_dim, CLASSIFIER_HIDDEN),
            out: Linear::new(store, rng, "classifier.1", CLASSIFIER_HIDDEN, k),
        }
    }

    pub fn k(&self) -> usize {
        self.out.fan_out
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.hidden.params(), self.out.params()].concat()
    }

    /// Row-wise, so every graph's probabilities depend only on its own row.
    pub fn forward_on<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Var {
        let z = self.hidden.forward(tape, store, h);
        let z = tape.relu(z);
        let logits = self.out.forward(tape, store, z);
        tape.sigmoid(logits)
    }
}

/// 3-layer MLP over `concat(h_G, lambda_i, P)` with a linear output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoder {
    pub layers: [Linear; 3],
}

impl Decoder {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, in_dim: usize) -> Self {
        let [h0, h1] = DECODER_HIDDEN;
        Decoder {
            layers: [
                Linear::new(store, rng, "decoder.0", in_dim, h0),
                Linear::new(store, rng, "decoder.1", h0, h1),
                Linear::new(store, rng, "decoder.2", h1, 1),
            ],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// `graph`, `recipe`, `probs` must have one row per prediction.
    pub fn forward_on<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, graph: Var, recipe: Var, probs: Var) -> Var {
        let x = tape.concat_cols(&[graph, recipe, probs]);
        let z = self.layers[0].forward(tape, store, x);
        let z = tape.relu(z);
        let z = self.layers[1].forward(tape, store, z);
        let z = tape.relu(z);
        self.layers[2].forward(tape, store, z)
    }
}

fn row<T: Scalar>(v: &[T]) -> Array2<T> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector")
}

pub fn classify<T: Scalar>(store: &ParamStore<T>, classifier: &Classifier, h_g: &Array1<T>) -> Result<Array1<T>> {
    if h_g.len() != classifier.hidden.fan_in {
        return Err(Error::Dimension(format!(
            "h_G has {} entries, classifier expects {}",
            h_g.len(),
            classifier.hidden.fan_in
        )));
    }
    let mut tape = Tape::new();
    let h = tape.constant(row(h_g.as_slice().expect("contiguous")));
    let p = classifier.forward_on(&mut tape, store, h);
    Ok(tape.value(p).row(0).to_owned())
}

pub fn decode_qor<T: Scalar>(
    store: &ParamStore<T>,
    decoder: &Decoder,
    h_g: &Array1<T>,
    lambda: &Array1<T>,
    probs: &Array1<T>,
) -> Result<T> {
    let width = h_g.len() + lambda.len() + probs.len();
    if width != decoder.in_dim() {
        return Err(Error::Dimension(format!(
            "decoder expects {} inputs, got {width}",
            decoder.in_dim()
        )));
    }
    let mut tape = Tape::new();
    let g = tape.constant(row(&h_g.to_vec()));
    let r = tape.constant(row(&lambda.to_vec()));
    let p = tape.constant(row(&probs.to_vec()));
    let y = decoder.forward_on(&mut tape, store, g, r, p);
    Ok(tape.scalar(y))
}

/// Mean clamped binary cross-entropy over the label slots.
pub fn bce_loss<T: Scalar>(probs: &[T], labels: &[bool]) -> Result<T> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Dimension(format!(
            "bce over {} probabilities and {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let c: Vec<T> = labels.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    Ok(bce_value(&row(probs), &row(&c)))
}

/// Squared error normalized by the spread of the targets around their mean.
pub fn rse_loss<T: Scalar>(predictions: &[T], targets: &[T]) -> Result<T> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "rse over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    Ok(rse_value(&row(predictions), &row(targets)))
}

pub fn total_loss<T: Scalar>(classification: T, regression: T, gamma: T) -> T {
    classification + gamma * regression
}
