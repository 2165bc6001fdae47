//! Main-effect and two-factor interaction analysis of factorial experiment logs.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod design;
pub mod effects;
pub mod error;
pub mod objective;
pub mod optimizer;
pub mod pci;
pub mod planner;
pub mod rng;
pub mod shapley;
pub mod simulation;

pub use error::{Error, Result};
