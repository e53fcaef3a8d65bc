//! Training loop, per-epoch metrics and finite-difference gradient checks.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aig::MessageGraph;
use crate::dataset::{construct_labels, encode_recipe_tokens, make_batches, split_graphs, split_off, Batch, ClassLabels, DatasetIndex, Target};
use crate::evaluator::mape;
use crate::model::{Architecture, ForwardOptions, Model, PreparedGraph, TargetScaler, Variant};
use crate::nn::graph_encoder::GraphEncoder;
use crate::nn::head::{bce_loss, rse_loss, Classifier, Decoder};
use crate::nn::recipe_encoder::RecipeEncoder;
use crate::nn::{Adam, ParamId, ParamStore, Tape, Var};
use crate::util::{mix_seed, rng};
use crate::{Error, Precision, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub target: Target,
    pub layers: usize,
    pub alpha: f64,
    pub rho: f64,
    pub gamma: f64,
    pub k: usize,
    pub n: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub variant: Variant,
    pub stop_gradient_p: bool,
    /// Fraction of training graphs held out for validation; 0 disables it.
    pub validation_fraction: f64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            target: Target::default(),
            layers: 2,
            alpha: 0.5,
            rho: 0.5,
            gamma: 1.0,
            k: 20,
            n: 20,
            batch_size: 32,
            epochs: 300,
            learning_rate: 1e-3,
            seed: 0,
            variant: Variant::Mtlso,
            stop_gradient_p: false,
            validation_fraction: 0.0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad("gamma must be finite and non-negative");
        }
        if self.k == 0 || self.n == 0 {
            return bad("k and n must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            variant: self.variant,
            layers: self.layers,
            alpha: self.alpha,
            k: self.k,
        }
    }

    /// Checks K and recipe length against a loaded dataset.
    pub fn check_dataset(&self, index: &DatasetIndex) -> Result<()> {
        if index.k() != self.k {
            return Err(Error::Dataset(format!("dataset has K = {}, config expects {}", index.k(), self.k)));
        }
        if let Some(r) = index.recipes.iter().find(|r| r.recipe.len() != self.n) {
            return Err(Error::Dataset(format!(
                "recipe {} has length {}, config expects n = {}",
                r.id,
                r.recipe.len(),
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_cls: f64,
    pub loss_reg: f64,
    pub train_mape: f64,
    /// Full-training-set objective after the epoch's updates.
    pub fit_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_mape: Option<f64>,
}

/// Graph positions used for fitting, holdout and testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    pub fn new(num_graphs: usize, seed: u64, validation_fraction: f64) -> Result<Self> {
        let split = split_graphs(num_graphs, seed)?;
        let (train, validation) = if validation_fraction > 0.0 {
            split_off(&split.train, validation_fraction, seed)?
        } else {
            (split.train, Vec::new())
        };
        Ok(Partition {
            train,
            validation,
            test: split.test,
        })
    }
}

/// Dataset tensors shared by every step of a run.
pub struct TrainContext<T> {
    pub graphs: Vec<PreparedGraph<T>>,
    pub recipes: Vec<Vec<usize>>,
    pub labels: ClassLabels,
    pub scaler: TargetScaler,
    pub gamma: f64,
    pub stop_gradient_p: bool,
}

impl<T: Scalar> TrainContext<T> {
    pub fn new(index: &DatasetIndex, config: &TrainConfig, train: &[usize]) -> Result<Self> {
        let values: Vec<f64> = train.iter().flat_map(|&g| index.target_row(g)).collect();
        Ok(TrainContext {
            graphs: index.graphs.iter().map(|g| PreparedGraph::new(&g.aig)).collect(),
            recipes: index.recipes.iter().map(|r| encode_recipe_tokens(&r.recipe)).collect(),
            labels: construct_labels(index, config.rho)?,
            scaler: TargetScaler::fit(&values),
            gamma: config.gamma,
            stop_gradient_p: config.stop_gradient_p,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOptions {
    /// Drop P from the decoder input and the classification term from the loss.
    pub zero_classification: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub total: f64,
    pub cls: f64,
    pub reg: f64,
}

fn batch_loss<T: Scalar>(
    model: &Model<T>,
    tape: &mut Tape<T>,
    ctx: &TrainContext<T>,
    batch: &Batch,
    opts: StepOptions,
) -> Result<(Var, StepLosses)> {
    let graphs: Vec<&PreparedGraph<T>> = batch.graphs.iter().map(|&g| &ctx.graphs[g]).collect();
    let mut recipe_slots: Vec<usize> = Vec::new();
    let mut pairs = Vec::with_capacity(batch.len());
    for s in &batch.samples {
        let gslot = batch.graphs.iter().position(|&g| g == s.graph).expect("batch lists its graphs");
        let rslot = match recipe_slots.iter().position(|&r| r == s.recipe) {
            Some(p) => p,
            None => {
                recipe_slots.push(s.recipe);
                recipe_slots.len() - 1
            }
        };
        pairs.push((gslot, rslot));
    }
    let recipes: Vec<&[usize]> = recipe_slots.iter().map(|&r| ctx.recipes[r].as_slice()).collect();
    let fwd = ForwardOptions {
        stop_gradient_probs: ctx.stop_gradient_p,
        zero_probs: opts.zero_classification,
    };
    let out = model.forward_on(tape, &graphs, &recipes, &pairs, fwd)?;

    let targets = Array2::from_shape_fn((batch.len(), 1), |(i, _)| T::lit(ctx.scaler.normalize(batch.samples[i].target)));
    let reg = tape.rse(out.y, targets);
    let weighted = tape.scale(reg, T::lit(ctx.gamma));
    let (total, cls) = match out.probs {
        Some(p) => {
            let k = model.k();
            let labels = Array2::from_shape_fn((batch.graphs.len(), k), |(i, j)| {
                if ctx.labels.row(batch.graphs[i])[j] { T::one() } else { T::zero() }
            });
            let cls = tape.bce(p, labels);
            (tape.add(cls, weighted), tape.scalar(cls).as_f64())
        }
        None => (weighted, 0.0),
    };
    let losses = StepLosses {
        total: tape.scalar(total).as_f64(),
        cls,
        reg: tape.scalar(reg).as_f64(),
    };
    Ok((total, losses))
}

/// One optimizer update on `batch`.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    adam: &mut Adam<T>,
    ctx: &TrainContext<T>,
    batch: &Batch,
    opts: StepOptions,
) -> Result<StepLosses> {
    let mut tape = Tape::new();
    let (loss, losses) = batch_loss(model, &mut tape, ctx, batch, opts)?;
    if !losses.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss is {} (cls {}, reg {}) on a batch of {} pairs",
            losses.total,
            losses.cls,
            losses.reg,
            batch.len()
        )));
    }
    let grads = tape.backward(loss);
    adam.step(&mut model.store, &grads);
    Ok(losses)
}

/// Raw-unit predictions for every (graph, recipe) pair of `part`, graph-major.
pub fn predict_part<T: Scalar>(model: &Model<T>, graphs: &[PreparedGraph<T>], recipes: &[Vec<usize>], part: &[usize]) -> Result<Vec<f64>> {
    const CHUNK: usize = 8;
    let refs: Vec<&[usize]> = recipes.iter().map(|r| r.as_slice()).collect();
    let mut out = Vec::with_capacity(part.len() * recipes.len());
    for chunk in part.chunks(CHUNK) {
        let gs: Vec<&PreparedGraph<T>> = chunk.iter().map(|&g| &graphs[g]).collect();
        let pairs: Vec<(usize, usize)> = (0..gs.len()).flat_map(|g| (0..refs.len()).map(move |r| (g, r))).collect();
        let mut tape = Tape::new();
        let fwd = model.forward_on(&mut tape, &gs, &refs, &pairs, ForwardOptions::default())?;
        out.extend(tape.value(fwd.y).column(0).iter().map(|v| model.scaler.denormalize(v.as_f64())));
    }
    Ok(out)
}

/// Train MAPE and the objective over every training pair, from one pass.
fn fit_metrics<T: Scalar>(model: &Model<T>, ctx: &TrainContext<T>, index: &DatasetIndex, part: &[usize]) -> Result<(f64, f64)> {
    let truth: Vec<f64> = part.iter().flat_map(|&g| index.target_row(g)).collect();
    let pred = predict_part(model, &ctx.graphs, &ctx.recipes, part)?;
    let z_true: Vec<f64> = truth.iter().map(|&v| ctx.scaler.normalize(v)).collect();
    let z_pred: Vec<f64> = pred.iter().map(|&v| ctx.scaler.normalize(v)).collect();
    let mut loss = ctx.gamma * rse_loss(&z_pred, &z_true)?;
    if model.classifier.is_some() {
        let (mut probs, mut labels) = (Vec::new(), Vec::new());
        for &g in part {
            probs.extend(model.graph_probabilities(&ctx.graphs[g])?.unwrap_or_default());
            labels.extend_from_slice(ctx.labels.row(g));
        }
        loss += bce_loss(&probs, &labels)?;
    }
    Ok((mape(&truth, &pred)?, loss))
}

pub struct TrainOutput<T> {
    pub model: Model<T>,
    pub history: Vec<EpochMetrics>,
    pub partition: Partition,
}

/// Fits a model on the training graphs of `index`. The dataset's target is
/// taken from `config`.
pub fn train<T: Scalar>(config: &TrainConfig, index: &DatasetIndex) -> Result<TrainOutput<T>> {
    config.validate()?;
    config.check_dataset(index)?;
    let index = index.clone().with_target(config.target);
    let partition = Partition::new(index.num_graphs(), config.seed, config.validation_fraction)?;
    let ctx = TrainContext::<T>::new(&index, config, &partition.train)?;
    let mut model = Model::<T>::new(config.architecture(), config.seed)?;
    model.scaler = ctx.scaler;
    let mut adam = Adam::new(&model.store, config.learning_rate);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let batches = make_batches(&index, &partition.train, config.batch_size, mix_seed(config.seed, epoch as u64))?;
        let (mut total, mut cls, mut reg) = (0.0, 0.0, 0.0);
        for batch in &batches {
            let l = train_step(&mut model, &mut adam, &ctx, batch, StepOptions::default())
                .map_err(|e| match e {
                    Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch}: {msg}")),
                    other => other,
                })?;
            total += l.total;
            cls += l.cls;
            reg += l.reg;
        }
        let nb = batches.len() as f64;
        let (train_mape, fit_loss) = fit_metrics(&model, &ctx, &index, &partition.train)?;
        let validation_mape = if partition.validation.is_empty() {
            None
        } else {
            Some(fit_metrics(&model, &ctx, &index, &partition.validation)?.0)
        };
        history.push(EpochMetrics {
            epoch,
            loss_total: total / nb,
            loss_cls: cls / nb,
            loss_reg: reg / nb,
            train_mape,
            fit_loss,
            validation_mape,
        });
    }
    Ok(TrainOutput { model, history, partition })
}

pub const METRICS_HEADER: &str = "epoch,loss_total,loss_cls,loss_reg,train_mape";

pub fn write_metrics_log(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for m in history {
        text.push_str(&format!("{},{},{},{},{}\n", m.epoch, m.loss_total, m.loss_cls, m.loss_reg, m.train_mape));
    }
    let mut f = std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| crate::Error::io(path, e))
}

/// Parts of the network covered by [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    GraphEncoder,
    RecipeEncoder,
    MultitaskHead,
}

/// Entries where both gradients fall below this are treated as agreeing.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;

fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < GRAD_CHECK_FLOOR {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Maximum relative error between analytic and central-difference gradients
/// over every parameter of `component`, on a small seeded instance in f64.
pub fn gradient_check(component: Component, seed: u64, eps: f64) -> Result<f64> {
    let mut r = rng(seed, 0x6C4);
    let mut store = ParamStore::<f64>::new();
    type LossFn = Box<dyn Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>>;
    let (params, loss): (Vec<ParamId>, LossFn) = match component {
        Component::GraphEncoder => {
            let enc = GraphEncoder::hierarchical(&mut store, &mut r, 7, 2, 0.5)?;
            let graph = MessageGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3), (1, 4)]);
            let x = random_matrix(&mut r, 6, 7);
            let w = random_matrix(&mut r, enc.output_dim(), 1);
            let params = enc.params();
            let f: LossFn = Box::new(move |tape, store| {
                let x = tape.constant(x.clone());
                let h = enc.encode_on(tape, store, x, &graph)?;
                let w = tape.constant(w.clone());
                Ok(tape.matmul(h, w))
            });
            (params, f)
        }
        Component::RecipeEncoder => {
            let enc = RecipeEncoder::new(&mut store, &mut r);
            let ids: Vec<usize> = (0..8).map(|_| r.gen_range(0..7)).collect();
            let w = random_matrix(&mut r, enc.output_dim(), 1);
            let params = enc.params();
            let f: LossFn = Box::new(move |tape, store| {
                let h = enc.encode_on(tape, store, &ids)?;
                let w = tape.constant(w.clone());
                Ok(tape.matmul(h, w))
            });
            (params, f)
        }
        Component::MultitaskHead => {
            let k = 4;
            let classifier = Classifier::new(&mut store, &mut r, 128, k);
            let decoder = Decoder::new(&mut store, &mut r, 128 + 128 + k);
            let hg = random_matrix(&mut r, 2, 128);
            let lambda = random_matrix(&mut r, 3, 128);
            let labels = Array2::from_shape_fn((2, k), |_| if r.gen_bool(0.5) { 1.0 } else { 0.0 });
            let pairs: Vec<(usize, usize)> = (0..2).flat_map(|g| (0..3).map(move |q| (g, q))).collect();
            let targets = random_matrix(&mut r, pairs.len(), 1);
            let mut params = classifier.params();
            params.extend(decoder.params());
            let f: LossFn = Box::new(move |tape, store| {
                let h = tape.constant(hg.clone());
                let l = tape.constant(lambda.clone());
                let p = classifier.forward_on(tape, store, h);
                let gi: Vec<usize> = pairs.iter().map(|x| x.0).collect();
                let ri: Vec<usize> = pairs.iter().map(|x| x.1).collect();
                let (hp, lp, pp) = (tape.gather_rows(h, &gi), tape.gather_rows(l, &ri), tape.gather_rows(p, &gi));
                let y = decoder.forward_on(tape, store, hp, lp, pp);
                let cls = tape.bce(p, labels.clone());
                let reg = tape.rse(y, targets.clone());
                Ok(tape.add(cls, reg))
            });
            (params, f)
        }
    };

    // Zero-initialized biases put ReLU inputs exactly on the kink wherever a
    // row is zero, where central differences see half a slope. Move them to
    // a generic point first.
    for id in params.clone() {
        if store.name(id).ends_with(".bias") {
            let jitter = random_matrix(&mut r, 1, store.value(id).ncols()).mapv(|v| 0.1 * v);
            *store.value_mut(id) = jitter;
        }
    }
    let mut tape = Tape::new();
    let out = loss(&mut tape, &store)?;
    let grads = tape.backward(out);
    let mut worst = 0.0f64;
    for id in params {
        let analytic = grads.param(id).cloned().unwrap_or_else(|| Array2::zeros(store.value(id).raw_dim()));
        let (rows, cols) = analytic.dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = store.value(id)[[i, j]];
                store.value_mut(id)[[i, j]] = orig + eps;
                let mut t = Tape::new();
                let v = loss(&mut t, &store)?;
                let up = t.scalar(v);
                store.value_mut(id)[[i, j]] = orig - eps;
                let mut t = Tape::new();
                let v = loss(&mut t, &store)?;
                let down = t.scalar(v);
                store.value_mut(id)[[i, j]] = orig;
                let numeric = (up - down) / (2.0 * eps);
                worst = worst.max(relative_error(analytic[[i, j]], numeric));
            }
        }
    }
    Ok(worst)
}
