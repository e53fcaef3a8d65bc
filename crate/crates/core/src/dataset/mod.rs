//! On-disk dataset layout, label construction, graph-level splits and
//! batch assembly.
//!
//! ```text
//! <dir>/graphs/<graph_id>.aag
//! <dir>/recipes.csv   recipe_id,tokens        (tokens joined by `;`)
//! <dir>/qor.csv       graph_id,recipe_id,area,delay
//! ```

mod batch;
mod labels;
mod split;

pub use batch::{make_batches, Batch, Sample};
pub use labels::{construct_labels, labels_for, ClassLabels};
pub use split::{split_graphs, split_off, Split};

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aig::{parse_aag, Aig};
use crate::synth::{Recipe, TransformToken, QoR};
use crate::{Error, Result};

/// Which QoR column a run regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Area,
    Delay,
}

impl Target {
    pub fn select(self, q: &QoR) -> f64 {
        match self {
            Target::Area => q.area,
            Target::Delay => q.delay,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Area => "area",
            Target::Delay => "delay",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area" => Ok(Target::Area),
            "delay" => Ok(Target::Delay),
            other => Err(Error::Config(format!("unknown target `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphEntry {
    pub id: String,
    pub path: PathBuf,
    pub aig: Aig,
}

#[derive(Debug, Clone)]
pub struct RecipeEntry {
    pub id: u32,
    pub recipe: Recipe,
}

/// A validated dataset. Graphs are ordered by id, recipes by numeric id, and
/// `qor[g][r]` holds the QoR of graph `g` under recipe `r` (positions, not ids).
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub name: String,
    pub graphs: Vec<GraphEntry>,
    pub recipes: Vec<RecipeEntry>,
    pub qor: Vec<Vec<QoR>>,
    pub target: Target,
}

impl DatasetIndex {
    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    /// Recipes per graph.
    pub fn k(&self) -> usize {
        self.recipes.len()
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn target_value(&self, graph: usize, recipe: usize) -> f64 {
        self.target.select(&self.qor[graph][recipe])
    }

    /// Target values of one graph in recipe order.
    pub fn target_row(&self, graph: usize) -> Vec<f64> {
        self.qor[graph].iter().map(|q| self.target.select(q)).collect()
    }

    pub fn graph_position(&self, id: &str) -> Option<usize> {
        self.graphs.iter().position(|g| g.id == id)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn ds_err(msg: impl Into<String>) -> Error {
    Error::Dataset(msg.into())
}

fn check_header(text: &str, file: &str, expected: &str) -> Result<()> {
    let header = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if header != expected {
        return Err(ds_err(format!(
            "{file}: expected header `{expected}`, found `{header}`"
        )));
    }
    Ok(())
}

fn parse_recipes(text: &str) -> Result<Vec<RecipeEntry>> {
    check_header(text, "recipes.csv", "recipe_id,tokens")?;
    let mut recipes: Vec<RecipeEntry> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim_end_matches('\r');
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, tokens) = line
            .split_once(',')
            .ok_or_else(|| ds_err(format!("recipes.csv line {ln}: expected 2 fields")))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| ds_err(format!("recipes.csv line {ln}: bad recipe id `{id}`")))?;
        let tokens = tokens
            .split(';')
            .map(|t| {
                t.trim().parse::<TransformToken>().map_err(|_| Error::UnknownToken {
                    token: t.trim().to_string(),
                    line: Some(ln),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let recipe = Recipe::new(tokens)
            .map_err(|_| ds_err(format!("recipes.csv line {ln}: empty recipe")))?;
        if recipes.iter().any(|r| r.id == id) {
            return Err(ds_err(format!("recipes.csv line {ln}: duplicate recipe id {id}")));
        }
        recipes.push(RecipeEntry { id, recipe });
    }
    if recipes.is_empty() {
        return Err(ds_err("recipes.csv has no recipes"));
    }
    recipes.sort_by_key(|r| r.id);
    Ok(recipes)
}

fn parse_qor_value(ln: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| ds_err(format!("qor.csv line {ln}: non-numeric {what} `{field}`")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(ds_err(format!("qor.csv line {ln}: {what} must be finite and >= 0")));
    }
    Ok(v)
}

/// Loads and cross-validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<DatasetIndex> {
    let graphs_dir = dir.join("graphs");
    let entries = fs::read_dir(&graphs_dir).map_err(|e| Error::io(&graphs_dir, e))?;
    let mut graphs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&graphs_dir, e))?.path();
        if path.extension().is_none_or(|e| e != "aag") {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| ds_err(format!("{}: graph file name is not UTF-8", path.display())))?
            .to_string();
        let aig = parse_aag(&read(&path)?)
            .map_err(|e| ds_err(format!("{}: {e}", path.display())))?;
        graphs.push(GraphEntry { id, path, aig });
    }
    if graphs.is_empty() {
        return Err(ds_err(format!("no .aag files in {}", graphs_dir.display())));
    }
    graphs.sort_by(|a, b| a.id.cmp(&b.id));

    let recipes = parse_recipes(&read(&dir.join("recipes.csv"))?)?;

    let graph_pos: HashMap<&str, usize> =
        graphs.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect();
    let recipe_pos: HashMap<u32, usize> =
        recipes.iter().enumerate().map(|(i, r)| (r.id, i)).collect();

    let qor_text = read(&dir.join("qor.csv"))?;
    check_header(&qor_text, "qor.csv", "graph_id,recipe_id,area,delay")?;
    let mut table: Vec<Vec<Option<QoR>>> = vec![vec![None; recipes.len()]; graphs.len()];
    for (i, line) in qor_text.lines().enumerate().skip(1) {
        let line = line.trim_end_matches('\r');
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ds_err(format!("qor.csv line {ln}: expected 4 fields")));
        }
        let g = *graph_pos
            .get(fields[0].trim())
            .ok_or_else(|| ds_err(format!("qor.csv line {ln}: unknown graph id `{}`", fields[0])))?;
        let rid: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| ds_err(format!("qor.csv line {ln}: bad recipe id `{}`", fields[1])))?;
        let r = *recipe_pos
            .get(&rid)
            .ok_or_else(|| ds_err(format!("qor.csv line {ln}: unknown recipe id {rid}")))?;
        let q = QoR {
            area: parse_qor_value(ln, fields[2], "area")?,
            delay: parse_qor_value(ln, fields[3], "delay")?,
        };
        if table[g][r].replace(q).is_some() {
            return Err(ds_err(format!(
                "qor.csv line {ln}: duplicate row for ({}, {rid})",
                fields[0].trim()
            )));
        }
    }

    let mut qor = Vec::with_capacity(graphs.len());
    for (g, row) in table.into_iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (r, q) in row.into_iter().enumerate() {
            out.push(q.ok_or_else(|| {
                ds_err(format!(
                    "qor.csv is missing the pair ({}, {})",
                    graphs[g].id, recipes[r].id
                ))
            })?);
        }
        qor.push(out);
    }

    let name = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string());

    Ok(DatasetIndex {
        name,
        graphs,
        recipes,
        qor,
        target: Target::default(),
    })
}

/// Embedding ids of a recipe's tokens.
pub fn encode_recipe_tokens(recipe: &Recipe) -> Vec<usize> {
    recipe.tokens().iter().map(|t| t.id()).collect()
}

/// Inverse of [`encode_recipe_tokens`].
pub fn decode_recipe_tokens(ids: &[usize]) -> Result<Recipe> {
    let tokens = ids
        .iter()
        .map(|&id| {
            TransformToken::from_id(id).ok_or_else(|| Error::UnknownToken {
                token: id.to_string(),
                line: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Recipe::new(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_ids() {
        let r: Recipe = "b;rw".parse().unwrap();
        assert_eq!(encode_recipe_tokens(&r), vec![0, 1]);
        let r: Recipe = ["rsz"; 5].join(";").parse().unwrap();
        assert_eq!(encode_recipe_tokens(&r), vec![6; 5]);
        assert!(decode_recipe_tokens(&[7]).is_err());
    }

    #[test]
    fn unknown_token_names_line() {
        let e = parse_recipes("recipe_id,tokens\n0,b;rw\n1,b;dch\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("dch") && msg.contains("line 3"), "{msg}");
    }
}
