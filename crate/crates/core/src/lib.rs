//! Exact mapping of restricted Boltzmann machines to higher-order interaction models.
//!
//! The hidden layer of an RBM is marginalized through the cumulant generating function of its
//! activation. Expanding the resulting log-probability over subsets of visible units yields an
//! interaction model whose coefficients can be computed, sampled from, and compared.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod exact;
pub mod mapping;
pub mod model;
pub mod potentials;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod training;

pub use data::BinaryDataset;
pub use error::{Error, ErrorClass, Result};
pub use model::{InteractionModel, RbmModel, Subset};
pub use exact::{enumerate, moebius_invert, ExactSummary};
pub use potentials::ActivationKind;
