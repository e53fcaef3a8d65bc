use std::path::Path;

use super::{train_and_evaluate, MetricsReport};
use crate::dataset::DatasetIndex;
use crate::model::Variant;
use crate::trainer::TrainConfig;
use crate::util::par_map;
use crate::{Error, Result};

pub const RESULTS_HEADER: &str = "dataset,target,variant,L,alpha,seed,test_mape,precision,recall,f1,accuracy";

/// Grid of runs; every combination is trained once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub variants: Vec<Variant>,
    pub layers: Vec<usize>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            variants: Variant::ALL.to_vec(),
            layers: vec![1, 2, 3],
            alphas: vec![0.1, 0.5, 0.9],
            seeds: vec![0, 1, 2],
        }
    }
}

impl AblationSpec {
    pub fn configs(&self, base: &TrainConfig) -> Result<Vec<TrainConfig>> {
        if self.variants.is_empty() || self.layers.is_empty() || self.alphas.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("ablation sweep has an empty axis".into()));
        }
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &layers in &self.layers {
                for &alpha in &self.alphas {
                    for &seed in &self.seeds {
                        let c = TrainConfig {
                            variant,
                            layers,
                            alpha,
                            seed,
                            ..base.clone()
                        };
                        c.validate()?;
                        out.push(c);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Trains and evaluates every configuration of the sweep. Runs are
/// independent, so they may execute in parallel without changing results.
pub fn ablation_run(base: &TrainConfig, spec: &AblationSpec, index: &DatasetIndex) -> Result<Vec<MetricsReport>> {
    let configs = spec.configs(base)?;
    par_map(configs, |c| train_and_evaluate(&c, index)).into_iter().collect()
}

pub fn write_results_csv(path: &Path, rows: &[MetricsReport]) -> Result<()> {
    let mut text = String::from(RESULTS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| crate::Error::io(path, e))
}
