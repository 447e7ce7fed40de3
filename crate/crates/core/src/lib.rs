//! Distance sensitivity oracle built on absorbing Markov chains with
//! evaporation.
//!
//! Preprocessing inverts `I - P(alpha)` once; a query for a target `t` and a
//! failure set `F` then only factors the `|F| x |F|` block of that inverse and
//! reads the shortest-path tree off the resulting edge probabilities.

pub mod bench;
pub mod error;
pub mod evaporation;
pub mod generate;
pub mod graph;
pub mod linalg;
pub mod markov;
#[cfg(feature = "mp")]
pub mod mp;
pub mod oracle;
pub mod reference;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Graph, TransitionMatrix, TransitionPolicy};
pub use scalar::Scalar;
