//! Neural building blocks, all generic over [`crate::Scalar`].

pub mod graph_encoder;
pub mod head;
pub mod params;
pub mod recipe_encoder;
pub mod sparse;
pub mod tape;

pub use params::{Adam, Linear, ParamId, ParamStore};
pub use sparse::{normalize_adjacency, SparseOp};
pub use tape::{Gradients, Tape, Var};
