use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::{apply_recipe, qor_of, random_aig, Recipe, TransformToken, QoR};
use crate::aig::write_aag;
use crate::util::{mix_seed, par_map, rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatagenConfig {
    pub seed: u64,
    pub num_graphs: usize,
    /// Inclusive AND-count range of generated graphs.
    pub min_ands: usize,
    pub max_ands: usize,
    pub num_inputs: usize,
    /// Recipes per graph (shared by all graphs).
    pub k: usize,
    /// Tokens per recipe.
    pub n: usize,
    /// Tokens recipes are drawn from.
    pub alphabet: Vec<TransformToken>,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            seed: 0,
            num_graphs: 8,
            min_ands: 40,
            max_ands: 120,
            num_inputs: 8,
            k: 20,
            n: 20,
            alphabet: TransformToken::ALL.to_vec(),
        }
    }
}

impl DatagenConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_graphs == 0 {
            return bad("num_graphs must be at least 1");
        }
        if self.min_ands == 0 || self.min_ands > self.max_ands {
            return bad("AND range must satisfy 1 <= min <= max");
        }
        if self.num_inputs < 2 {
            return bad("num_inputs must be at least 2");
        }
        if self.k == 0 || self.n == 0 {
            return bad("k and n must be at least 1");
        }
        if self.alphabet.is_empty() {
            return bad("alphabet must not be empty");
        }
        Ok(())
    }

    pub fn graph_id(&self, index: usize) -> String {
        let width = (self.num_graphs.saturating_sub(1)).to_string().len().max(3);
        format!("g{index:0width$}")
    }

    /// The shared recipe set, a pure function of the seed.
    pub fn recipes(&self) -> Vec<Recipe> {
        let mut rng = rng(self.seed, 0x5EC1);
        (0..self.k)
            .map(|_| {
                let tokens = (0..self.n)
                    .map(|_| self.alphabet[rng.gen_range(0..self.alphabet.len())])
                    .collect();
                Recipe::new(tokens).expect("n >= 1")
            })
            .collect()
    }
}

/// Outputs per generated graph.
fn output_count(num_ands: usize) -> usize {
    (num_ands / 10).max(2)
}

/// Writes `graphs/*.aag`, `recipes.csv` and `qor.csv` under `out_dir`.
/// Output is byte-identical for a fixed configuration regardless of
/// `MTLSO_THREADS`, since every graph derives its own seed from its index.
pub fn generate_dataset(config: &DatagenConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let recipes = config.recipes();

    let per_graph = par_map((0..config.num_graphs).collect(), |g| -> Result<(String, String, Vec<QoR>)> {
        let seed = mix_seed(config.seed, g as u64 + 1);
        let mut size_rng = rng(seed, 0x512E);
        let num_ands = size_rng.gen_range(config.min_ands..=config.max_ands);
        let aig = random_aig(seed, config.num_inputs, num_ands, output_count(num_ands))?;
        let qors = recipes.iter().map(|r| qor_of(&apply_recipe(&aig, r))).collect();
        Ok((config.graph_id(g), write_aag(&aig), qors))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let graphs_dir = out_dir.join("graphs");
    fs::create_dir_all(&graphs_dir).map_err(|e| Error::io(&graphs_dir, e))?;
    // stale graphs from an earlier, larger run would otherwise be picked up
    for entry in fs::read_dir(&graphs_dir).map_err(|e| Error::io(&graphs_dir, e))? {
        let path = entry.map_err(|e| Error::io(&graphs_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "aag") {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }

    let mut recipes_csv = String::from("recipe_id,tokens\n");
    for (i, r) in recipes.iter().enumerate() {
        let _ = writeln!(recipes_csv, "{i},{r}");
    }
    let mut qor_csv = String::from("graph_id,recipe_id,area,delay\n");
    for (id, text, qors) in &per_graph {
        let path = graphs_dir.join(format!("{id}.aag"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        for (r, q) in qors.iter().enumerate() {
            let _ = writeln!(qor_csv, "{id},{r},{},{}", q.area, q.delay);
        }
    }
    let path = out_dir.join("recipes.csv");
    fs::write(&path, recipes_csv).map_err(|e| Error::io(&path, e))?;
    let path = out_dir.join("qor.csv");
    fs::write(&path, qor_csv).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
