//! The full QoR predictor: graph encoder, recipe encoder, optional
//! classifier and decoder sharing one parameter store.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::aig::{node_features, to_message_graph, Aig, MessageGraph, FEATURE_DIM};
use crate::nn::graph_encoder::GraphEncoder;
use crate::nn::head::{Classifier, Decoder};
use crate::nn::recipe_encoder::RecipeEncoder;
use crate::nn::{ParamId, ParamStore, Tape, Var};
use crate::util::rng;
use crate::{Error, Result, Scalar};

/// Model variants compared in the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    /// Hierarchical encoder, trained with the auxiliary classifier.
    #[default]
    #[serde(rename = "MTLSO")]
    Mtlso,
    /// Hierarchical encoder, regression only.
    #[serde(rename = "STL")]
    Stl,
    /// Single GCN block without downsampling, trained with the classifier.
    #[serde(rename = "PGRL")]
    Pgrl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Mtlso, Variant::Stl, Variant::Pgrl];

    pub fn has_classifier(self) -> bool {
        !matches!(self, Variant::Stl)
    }

    pub fn is_hierarchical(self) -> bool {
        !matches!(self, Variant::Pgrl)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mtlso => "MTLSO",
            Variant::Stl => "STL",
            Variant::Pgrl => "PGRL",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MTLSO" => Ok(Variant::Mtlso),
            "STL" => Ok(Variant::Stl),
            "PGRL" => Ok(Variant::Pgrl),
            _ => Err(Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

/// Everything needed to rebuild the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub variant: Variant,
    /// Encoding/downsampling blocks (ignored by PGRL).
    pub layers: usize,
    pub alpha: f64,
    /// Recipes per graph.
    pub k: usize,
}

/// Affine map from the regression space to raw QoR units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl Default for TargetScaler {
    fn default() -> Self {
        TargetScaler { mean: 0.0, std: 1.0 }
    }
}

impl TargetScaler {
    /// Mean and population standard deviation; a degenerate spread maps to 1.
    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        TargetScaler { mean, std }
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Node features and message graph of one AIG, converted once.
#[derive(Debug, Clone)]
pub struct PreparedGraph<T> {
    pub features: Array2<T>,
    pub graph: MessageGraph,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(aig: &Aig) -> Self {
        PreparedGraph {
            features: node_features(aig).to_matrix(),
            graph: to_message_graph(aig),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Feed the decoder a detached copy of P.
    pub stop_gradient_probs: bool,
    /// Feed the decoder zeros instead of P and skip the classifier.
    pub zero_probs: bool,
}

pub struct ForwardOutput {
    /// `graphs x K` probabilities, when the classifier ran.
    pub probs: Option<Var>,
    /// `pairs x 1` predictions in normalized target units.
    pub y: Var,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub arch: Architecture,
    pub store: ParamStore<T>,
    pub graph_encoder: GraphEncoder,
    pub recipe_encoder: RecipeEncoder,
    pub classifier: Option<Classifier>,
    pub decoder: Decoder,
    pub scaler: TargetScaler,
}

impl<T: Scalar> Model<T> {
    /// Each component draws from its own seeded stream, so components shared
    /// between variants start from identical weights.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        if arch.k == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let mut store = ParamStore::new();
        let graph_encoder = if arch.variant.is_hierarchical() {
            GraphEncoder::hierarchical(&mut store, &mut rng(seed, 1), FEATURE_DIM, arch.layers, arch.alpha)?
        } else {
            GraphEncoder::plain(&mut store, &mut rng(seed, 1), FEATURE_DIM)
        };
        let recipe_encoder = RecipeEncoder::new(&mut store, &mut rng(seed, 2));
        let graph_dim = graph_encoder.output_dim();
        let decoder = Decoder::new(&mut store, &mut rng(seed, 4), graph_dim + recipe_encoder.output_dim() + arch.k);
        let classifier = arch
            .variant
            .has_classifier()
            .then(|| Classifier::new(&mut store, &mut rng(seed, 3), graph_dim, arch.k));
        Ok(Model {
            arch,
            store,
            graph_encoder,
            recipe_encoder,
            classifier,
            decoder,
            scaler: TargetScaler::default(),
        })
    }

    pub fn k(&self) -> usize {
        self.arch.k
    }

    pub fn classifier_params(&self) -> Vec<ParamId> {
        self.classifier.map(|c| c.params()).unwrap_or_default()
    }

    /// Forward pass over `pairs = (graph slot, recipe slot)`.
    pub fn forward_on(
        &self,
        tape: &mut Tape<T>,
        graphs: &[&PreparedGraph<T>],
        recipes: &[&[usize]],
        pairs: &[(usize, usize)],
        opts: ForwardOptions,
    ) -> Result<ForwardOutput> {
        if graphs.is_empty() || recipes.is_empty() || pairs.is_empty() {
            return Err(Error::InvalidArgument("forward pass needs graphs, recipes and pairs".into()));
        }
        let mut graph_rows = Vec::with_capacity(graphs.len());
        for g in graphs {
            let x = tape.constant(g.features.clone());
            graph_rows.push(self.graph_encoder.encode_on(tape, &self.store, x, &g.graph)?);
        }
        let h = tape.concat_rows(&graph_rows);

        let mut recipe_rows = Vec::with_capacity(recipes.len());
        for ids in recipes {
            recipe_rows.push(self.recipe_encoder.encode_on(tape, &self.store, ids)?);
        }
        let lambda = tape.concat_rows(&recipe_rows);

        let probs = match self.classifier {
            Some(c) if !opts.zero_probs => Some(c.forward_on(tape, &self.store, h)),
            _ => None,
        };
        let probs_in = match probs {
            Some(p) if opts.stop_gradient_probs => tape.detach(p),
            Some(p) => p,
            None => tape.constant(Array2::zeros((graphs.len(), self.arch.k))),
        };

        let g_idx: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let r_idx: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let hg = tape.gather_rows(h, &g_idx);
        let lr = tape.gather_rows(lambda, &r_idx);
        let pg = tape.gather_rows(probs_in, &g_idx);
        let y = self.decoder.forward_on(tape, &self.store, hg, lr, pg);
        Ok(ForwardOutput { probs, y })
    }

    /// Raw-unit predictions for one graph under each recipe, plus the
    /// classifier probabilities when the variant has one.
    pub fn predict_graph(&self, graph: &PreparedGraph<T>, recipes: &[Vec<usize>]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let mut tape = Tape::new();
        let refs: Vec<&[usize]> = recipes.iter().map(|r| r.as_slice()).collect();
        let pairs: Vec<(usize, usize)> = (0..recipes.len()).map(|r| (0, r)).collect();
        let out = self.forward_on(&mut tape, &[graph], &refs, &pairs, ForwardOptions::default())?;
        let y = tape
            .value(out.y)
            .column(0)
            .iter()
            .map(|v| self.scaler.denormalize(v.as_f64()))
            .collect();
        let probs = out.probs.map(|p| tape.value(p).row(0).iter().map(|v| v.as_f64()).collect());
        Ok((y, probs))
    }

    /// Classifier output for one graph, when the variant has a classifier.
    pub fn graph_probabilities(&self, graph: &PreparedGraph<T>) -> Result<Option<Vec<f64>>> {
        let Some(c) = self.classifier else {
            return Ok(None);
        };
        let mut tape = Tape::new();
        let x = tape.constant(graph.features.clone());
        let h = self.graph_encoder.encode_on(&mut tape, &self.store, x, &graph.graph)?;
        let p = c.forward_on(&mut tape, &self.store, h);
        Ok(Some(tape.value(p).row(0).iter().map(|v| v.as_f64()).collect()))
    }
}
