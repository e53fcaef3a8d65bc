use rand::seq::SliceRandom;

use crate::util::rng;
use crate::{Error, Result};

/// Graph-level partition; both sides hold ascending graph positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle of `0..num_graphs`; the first `round(2/3 * total)` go to
/// training, keeping at least one graph on each side.
pub fn split_graphs(num_graphs: usize, seed: u64) -> Result<Split> {
    if num_graphs < 2 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 2 graphs, got {num_graphs}"
        )));
    }
    // 2n/3 never has a fractional part of exactly one half
    let train_len = ((2 * num_graphs + 1) / 3).clamp(1, num_graphs - 1);
    let (train, test) = shuffle_partition((0..num_graphs).collect(), train_len, seed, 0x5911);
    Ok(Split { train, test, seed })
}

/// Moves `round(fraction * len)` graphs (at least one, leaving at least
/// one) out of `graphs`; returns `(kept, held_out)`.
pub fn split_off(graphs: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if graphs.len() < 2 {
        return Err(Error::InvalidArgument("holdout needs at least 2 training graphs".into()));
    }
    let held = ((fraction * graphs.len() as f64).round() as usize).clamp(1, graphs.len() - 1);
    Ok(shuffle_partition(graphs.to_vec(), graphs.len() - held, seed, 0x7A1D))
}

fn shuffle_partition(mut items: Vec<usize>, first_len: usize, seed: u64, stream: u64) -> (Vec<usize>, Vec<usize>) {
    items.shuffle(&mut rng(seed, stream));
    let mut second = items.split_off(first_len);
    items.sort_unstable();
    second.sort_unstable();
    (items, second)
}
