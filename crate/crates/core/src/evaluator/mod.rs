//! Test-set metrics, recipe ranking and the ablation harness.

mod ablation;

pub use ablation::{ablation_run, write_results_csv, AblationSpec, RESULTS_HEADER};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aig::Aig;
use crate::checkpoint::Checkpoint;
use crate::dataset::{construct_labels, encode_recipe_tokens, DatasetIndex, Target};
use crate::model::{Model, PreparedGraph, Variant};
use crate::trainer::{predict_part, train, TrainConfig};
use crate::{Error, Precision, Result, Scalar};

/// Mean absolute percentage error, in percent.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!("mape: {} targets vs {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("mape of an empty set".into()));
    }
    let mut sum = 0.0;
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t == 0.0 {
            return Err(Error::InvalidArgument(format!("mape: true value at position {i} is zero")));
        }
        sum += ((t - p) / t).abs();
    }
    Ok(100.0 * sum / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl Confusion {
    /// Rates with 0/0 mapped to 0.
    pub fn metrics(&self) -> ClassificationMetrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let total = self.tp + self.fp + self.tn + self.fn_;
        ClassificationMetrics {
            precision,
            recall,
            f1,
            accuracy: ratio(self.tp + self.tn, total),
        }
    }
}

/// Micro-averaged metrics over every label slot; a slot is predicted
/// positive when its probability is at least `threshold`.
pub fn multilabel_metrics(probs: &[Vec<f64>], labels: &[Vec<bool>], threshold: f64) -> Result<ClassificationMetrics> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension(format!("{} probability rows vs {} label rows", probs.len(), labels.len())));
    }
    let mut c = Confusion::default();
    for (p, l) in probs.iter().zip(labels) {
        if p.len() != l.len() {
            return Err(Error::Dimension(format!("row of {} probabilities vs {} labels", p.len(), l.len())));
        }
        for (&p, &l) in p.iter().zip(l) {
            match (p >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    Ok(c.metrics())
}

/// Which graphs of a run to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPart {
    Train,
    Validation,
    #[default]
    Test,
}

impl FromStr for SplitPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "validation" | "val" => Ok(SplitPart::Validation),
            "test" => Ok(SplitPart::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (train, validation, test)"))),
        }
    }
}

impl fmt::Display for SplitPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitPart::Train => "train",
            SplitPart::Validation => "validation",
            SplitPart::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub target: Target,
    pub variant: Variant,
    pub layers: usize,
    pub alpha: f64,
    pub seed: u64,
    pub test_mape: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl MetricsReport {
    pub fn is_finite(&self) -> bool {
        [self.test_mape, self.precision, self.recall, self.f1, self.accuracy]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.target,
            self.variant,
            self.layers,
            self.alpha,
            self.seed,
            self.test_mape,
            self.precision,
            self.recall,
            self.f1,
            self.accuracy
        )
    }
}

/// MAPE over all `(graph, recipe)` pairs of `part` on the raw QoR scale and
/// classification metrics over its graphs. Variants without a classifier
/// are scored as predicting all zeros.
pub fn evaluate_model<T: Scalar>(
    model: &Model<T>,
    index: &DatasetIndex,
    part: &[usize],
    rho: f64,
) -> Result<(f64, ClassificationMetrics)> {
    if model.k() != index.k() {
        return Err(Error::Dataset(format!("model has K = {}, dataset has K = {}", model.k(), index.k())));
    }
    if part.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let recipes: Vec<Vec<usize>> = index.recipes.iter().map(|r| encode_recipe_tokens(&r.recipe)).collect();
    let labels = construct_labels(index, rho)?;
    let prepared: Vec<PreparedGraph<T>> = part.iter().map(|&g| PreparedGraph::new(&index.graphs[g].aig)).collect();
    let slots: Vec<usize> = (0..part.len()).collect();
    let pred = predict_part(model, &prepared, &recipes, &slots)?;
    let truth: Vec<f64> = part.iter().flat_map(|&g| index.target_row(g)).collect();
    let mut probs = Vec::with_capacity(part.len());
    for p in &prepared {
        probs.push(model.graph_probabilities(p)?.unwrap_or_else(|| vec![0.0; index.k()]));
    }
    let rows: Vec<Vec<bool>> = part.iter().map(|&g| labels.row(g).to_vec()).collect();
    Ok((mape(&truth, &pred)?, multilabel_metrics(&probs, &rows, 0.5)?))
}

fn report(config: &TrainConfig, dataset: &str, mape: f64, m: ClassificationMetrics) -> MetricsReport {
    MetricsReport {
        dataset: dataset.to_string(),
        target: config.target,
        variant: config.variant,
        layers: config.layers,
        alpha: config.alpha,
        seed: config.seed,
        test_mape: mape,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        accuracy: m.accuracy,
    }
}

/// Evaluates a saved run on one part of its own graph partition.
pub fn evaluate(ckpt: &Checkpoint, index: &DatasetIndex, part: SplitPart) -> Result<MetricsReport> {
    ckpt.check_dataset(index)?;
    let index = index.clone().with_target(ckpt.config.target);
    let graphs = ckpt.resolve_part(&index, part)?;
    let (mape, m) = match ckpt.precision {
        Precision::F32 => evaluate_model(&ckpt.to_model::<f32>()?, &index, &graphs, ckpt.config.rho)?,
        Precision::F64 => evaluate_model(&ckpt.to_model::<f64>()?, &index, &graphs, ckpt.config.rho)?,
    };
    Ok(report(&ckpt.config, &index.name, mape, m))
}

/// Trains with `config` and evaluates on the resulting test split.
pub fn train_and_evaluate(config: &TrainConfig, index: &DatasetIndex) -> Result<MetricsReport> {
    fn run<T: Scalar>(config: &TrainConfig, index: &DatasetIndex) -> Result<(f64, ClassificationMetrics)> {
        let out = train::<T>(config, index)?;
        let index = index.clone().with_target(config.target);
        evaluate_model(&out.model, &index, &out.partition.test, config.rho)
    }
    let (mape, m) = match config.precision {
        Precision::F32 => run::<f32>(config, index)?,
        Precision::F64 => run::<f64>(config, index)?,
    };
    Ok(report(config, &index.name, mape, m))
}

/// MAPE on `test` of always predicting the mean target over `train`.
pub fn mean_predictor_mape(index: &DatasetIndex, train: &[usize], test: &[usize]) -> Result<f64> {
    let values: Vec<f64> = train.iter().flat_map(|&g| index.target_row(g)).collect();
    if values.is_empty() {
        return Err(Error::InvalidArgument("mean predictor needs training graphs".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let truth: Vec<f64> = test.iter().flat_map(|&g| index.target_row(g)).collect();
    mape(&truth, &vec![mean; truth.len()])
}

/// Sorts `ids` by ascending prediction; ties keep the lower id first.
pub fn rank_by_predictions(predictions: &[f64], ids: &[u32]) -> Result<Vec<u32>> {
    if predictions.len() != ids.len() {
        return Err(Error::Dimension(format!("{} predictions for {} recipe ids", predictions.len(), ids.len())));
    }
    let mut order: Vec<(f64, u32)> = predictions.iter().copied().zip(ids.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().map(|(_, id)| id).collect())
}

/// Predicted raw QoR of `aig` under each checkpoint recipe, in recipe order.
pub fn predict_recipes(ckpt: &Checkpoint, aig: &Aig) -> Result<Vec<(u32, f64)>> {
    if ckpt.recipes.len() != ckpt.config.k {
        return Err(Error::Checkpoint(format!(
            "checkpoint lists {} recipes but K = {}",
            ckpt.recipes.len(),
            ckpt.config.k
        )));
    }
    let tokens = ckpt.recipe_tokens()?;
    let preds = match ckpt.precision {
        Precision::F32 => ckpt.to_model::<f32>()?.predict_graph(&PreparedGraph::new(aig), &tokens)?.0,
        Precision::F64 => ckpt.to_model::<f64>()?.predict_graph(&PreparedGraph::new(aig), &tokens)?.0,
    };
    Ok(ckpt.recipes.iter().map(|r| r.id).zip(preds).collect())
}

/// Recipe ids of the checkpoint, best predicted QoR first.
pub fn rank_recipes(ckpt: &Checkpoint, aig: &Aig) -> Result<Vec<u32>> {
    let (ids, preds): (Vec<u32>, Vec<f64>) = predict_recipes(ckpt, aig)?.into_iter().unzip();
    rank_by_predictions(&preds, &ids)
}
