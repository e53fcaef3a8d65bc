//! Self-describing JSON checkpoints. Values are stored as f64, which holds
//! both precisions exactly, and printed with round-trip formatting.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{encode_recipe_tokens, DatasetIndex};
use crate::evaluator::SplitPart;
use crate::model::{Model, TargetScaler};
use crate::synth::Recipe;
use crate::trainer::{EpochMetrics, Partition, TrainConfig, TrainOutput};
use crate::{Error, Precision, Result, Scalar};

pub const CHECKPOINT_FORMAT: &str = "mtlso-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedParam {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedRecipe {
    pub id: u32,
    pub tokens: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedPartition {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub precision: Precision,
    pub epoch: usize,
    pub dataset: String,
    pub history: Vec<EpochMetrics>,
    pub scaler: TargetScaler,
    pub partition: SavedPartition,
    pub recipes: Vec<SavedRecipe>,
    pub params: Vec<SavedParam>,
}

impl Checkpoint {
    pub fn from_training<T: Scalar>(config: &TrainConfig, index: &DatasetIndex, out: &TrainOutput<T>) -> Self {
        let ids = |part: &[usize]| part.iter().map(|&g| index.graphs[g].id.clone()).collect();
        let Partition { train, validation, test } = &out.partition;
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            precision: Precision::of::<T>(),
            epoch: out.history.len(),
            dataset: index.name.clone(),
            history: out.history.clone(),
            scaler: out.model.scaler,
            partition: SavedPartition {
                train: ids(train),
                validation: ids(validation),
                test: ids(test),
            },
            recipes: index
                .recipes
                .iter()
                .map(|r| SavedRecipe {
                    id: r.id,
                    tokens: r.recipe.to_string(),
                })
                .collect(),
            params: save_params(&out.model),
        }
    }

    /// Rebuilds the model in precision `T`, which must match the saved one.
    pub fn to_model<T: Scalar>(&self) -> Result<Model<T>> {
        if Precision::of::<T>() != self.precision {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, requested {}",
                self.precision,
                Precision::of::<T>()
            )));
        }
        let mut model = Model::<T>::new(self.config.architecture(), self.config.seed)?;
        if model.store.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                model.store.len(),
                self.params.len()
            )));
        }
        for p in &self.params {
            let id = model
                .store
                .find(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{}`", p.name)))?;
            let dst = model.store.value_mut(id);
            if dst.dim() != (p.shape[0], p.shape[1]) || p.values.len() != p.shape[0] * p.shape[1] {
                return Err(Error::Checkpoint(format!("parameter `{}` has the wrong shape", p.name)));
            }
            *dst = Array2::from_shape_vec((p.shape[0], p.shape[1]), p.values.iter().map(|&v| T::lit(v)).collect())
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        model.scaler = self.scaler;
        Ok(model)
    }

    pub fn recipe_tokens(&self) -> Result<Vec<Vec<usize>>> {
        self.recipes
            .iter()
            .map(|r| Ok(encode_recipe_tokens(&r.tokens.parse::<Recipe>()?)))
            .collect()
    }

    /// The dataset must carry the same recipes the model was trained with.
    pub fn check_dataset(&self, index: &DatasetIndex) -> Result<()> {
        if index.k() != self.config.k {
            return Err(Error::Dataset(format!(
                "checkpoint expects K = {}, dataset has K = {}",
                self.config.k,
                index.k()
            )));
        }
        for (saved, r) in self.recipes.iter().zip(&index.recipes) {
            if saved.id != r.id || saved.tokens != r.recipe.to_string() {
                return Err(Error::Dataset(format!("recipe {} differs from the one used in training", r.id)));
            }
        }
        Ok(())
    }

    pub fn resolve_part(&self, index: &DatasetIndex, part: SplitPart) -> Result<Vec<usize>> {
        let ids = match part {
            SplitPart::Train => &self.partition.train,
            SplitPart::Validation => &self.partition.validation,
            SplitPart::Test => &self.partition.test,
        };
        ids.iter()
            .map(|id| {
                index
                    .graph_position(id)
                    .ok_or_else(|| Error::Dataset(format!("graph `{id}` from the checkpoint is not in the dataset")))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        if raw.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "unsupported checkpoint version {other:?}, expected {CHECKPOINT_VERSION}"
                )))
            }
        }
        serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))
    }
}

fn save_params<T: Scalar>(model: &Model<T>) -> Vec<SavedParam> {
    model
        .store
        .iter()
        .map(|p| SavedParam {
            name: p.name.clone(),
            shape: [p.value.nrows(), p.value.ncols()],
            values: p.value.iter().map(|v| v.as_f64()).collect(),
        })
        .collect()
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_json()?).map_err(|e| crate::Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    Checkpoint::from_json(&text)
}
