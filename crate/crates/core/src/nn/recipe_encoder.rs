//! Recipe encoder: token embedding, four parallel 1-D convolutions with
//! distinct kernel widths, ReLU, global max over positions, concatenation.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::params::{uniform, Linear, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::synth::TransformToken;
use crate::{Error, Result, Scalar};

pub const EMBED_DIM: usize = 60;
pub const KERNEL_SIZES: [usize; 4] = [2, 3, 4, 5];
pub const CHANNELS: usize = 32;

/// One branch: a valid convolution of width `kernel` stored as a
/// `(kernel * p) x channels` matrix over unrolled windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvBranch {
    pub kernel: usize,
    pub linear: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecipeEncoder {
    /// `7 x p` embedding table.
    pub embedding: ParamId,
    pub embed_dim: usize,
    pub branches: Vec<ConvBranch>,
}

/// Concatenated branch maxima `lambda_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeRepresentation<T>(pub Array1<T>);

impl RecipeEncoder {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R) -> Self {
        Self::with_shape(store, rng, EMBED_DIM, &KERNEL_SIZES, CHANNELS)
    }

    pub fn with_shape<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        embed_dim: usize,
        kernels: &[usize],
        channels: usize,
    ) -> Self {
        let embedding = store.add("recipe.embedding", uniform(rng, TransformToken::COUNT, embed_dim, 1.0));
        let branches = kernels
            .iter()
            .map(|&k| ConvBranch {
                kernel: k,
                linear: Linear::new(store, rng, &format!("recipe.conv{k}"), k * embed_dim, channels),
            })
            .collect();
        RecipeEncoder {
            embedding,
            embed_dim,
            branches,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.branches.iter().map(|b| b.linear.fan_out).sum()
    }

    pub fn max_kernel(&self) -> usize {
        self.branches.iter().map(|b| b.kernel).max().unwrap_or(1)
    }

    pub fn params(&self) -> Vec<ParamId> {
        std::iter::once(self.embedding)
            .chain(self.branches.iter().flat_map(|b| b.linear.params()))
            .collect()
    }

    /// `n x p` embedding rows of the token ids.
    pub fn embed_on<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, ids: &[usize]) -> Result<Var> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= TransformToken::COUNT) {
            return Err(Error::InvalidArgument(format!("token id {bad} out of range")));
        }
        let table = tape.param(store, self.embedding);
        Ok(tape.gather_rows(table, ids))
    }

    /// Valid convolution, ReLU and global max; returns `1 x channels`.
    pub fn branch_on<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        embedded: Var,
        branch: &ConvBranch,
    ) -> Result<Var> {
        let n = tape.value(embedded).nrows();
        if n < branch.kernel {
            return Err(Error::InvalidArgument(format!(
                "recipe of length {n} is shorter than kernel {}",
                branch.kernel
            )));
        }
        let positions = n - branch.kernel + 1;
        let shifted: Vec<Var> = (0..branch.kernel)
            .map(|offset| {
                let rows: Vec<usize> = (offset..offset + positions).collect();
                tape.gather_rows(embedded, &rows)
            })
            .collect();
        let windows = tape.concat_cols(&shifted);
        let response = branch.linear.forward(tape, store, windows);
        let act = tape.relu(response);
        Ok(tape.col_max(act))
    }

    /// `1 x output_dim` representation of a recipe given as token ids.
    pub fn encode_on<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, ids: &[usize]) -> Result<Var> {
        let embedded = self.embed_on(tape, store, ids)?;
        let parts = self
            .branches
            .iter()
            .map(|b| self.branch_on(tape, store, embedded, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(tape.concat_cols(&parts))
    }
}

pub fn embed_recipe<T: Scalar>(store: &ParamStore<T>, encoder: &RecipeEncoder, ids: &[usize]) -> Result<Array2<T>> {
    let mut tape = Tape::new();
    let e = encoder.embed_on(&mut tape, store, ids)?;
    Ok(tape.value(e).clone())
}

/// One branch applied to an explicit `n x p` embedding.
pub fn conv_branch<T: Scalar>(
    store: &ParamStore<T>,
    encoder: &RecipeEncoder,
    embedded: &Array2<T>,
    branch: usize,
) -> Result<Array1<T>> {
    let b = encoder
        .branches
        .get(branch)
        .ok_or_else(|| Error::InvalidArgument(format!("no branch {branch}")))?;
    let mut tape = Tape::new();
    let e = tape.constant(embedded.clone());
    let out = encoder.branch_on(&mut tape, store, e, b)?;
    Ok(tape.value(out).row(0).to_owned())
}

pub fn encode_recipe<T: Scalar>(store: &ParamStore<T>, encoder: &RecipeEncoder, ids: &[usize]) -> Result<RecipeRepresentation<T>> {
    let mut tape = Tape::new();
    let out = encoder.encode_on(&mut tape, store, ids)?;
    Ok(RecipeRepresentation(tape.value(out).row(0).to_owned()))
}
