//! Picture-naming multinomial processing tree with IRT-linked branch
//! probabilities: forward model, observational-equivalence transforms and
//! identifiability diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod category;
pub mod cli;
pub mod diagnostics;
pub mod equivalence;
pub mod error;
pub mod exec;
pub mod forward;
pub mod graph;
pub mod io;
pub mod params;

pub use category::{CategoryDistribution, PsiCell, ResponseCategory};
pub use error::{Error, Result};
pub use exec::Execution;
