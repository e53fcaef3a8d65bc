use rand::seq::SliceRandom;

use super::DatasetIndex;
use crate::util::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Graph position in the index.
    pub graph: usize,
    /// Recipe position in the index.
    pub recipe: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub samples: Vec<Sample>,
    /// Distinct graphs in order of first appearance.
    pub graphs: Vec<usize>,
}

impl Batch {
    fn new(samples: Vec<Sample>) -> Self {
        let mut graphs = Vec::new();
        for s in &samples {
            if !graphs.contains(&s.graph) {
                graphs.push(s.graph);
            }
        }
        Batch { samples, graphs }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Shuffles every (graph, recipe) pair of `part` and cuts it into batches;
/// the last batch may be short.
pub fn make_batches(index: &DatasetIndex, part: &[usize], batch_size: usize, epoch_seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    if part.is_empty() {
        return Err(Error::InvalidArgument("cannot batch an empty split".into()));
    }
    let mut samples: Vec<Sample> = part
        .iter()
        .flat_map(|&g| {
            (0..index.k()).map(move |r| Sample {
                graph: g,
                recipe: r,
                target: index.target_value(g, r),
            })
        })
        .collect();
    samples.shuffle(&mut rng(epoch_seed, 0xBA7C));
    Ok(samples.chunks(batch_size).map(|c| Batch::new(c.to_vec())).collect())
}
