//! Fitzpatrick functions and near-convexity checks for monotone operators on `R^n`.
//!
//! Operators are described declaratively by [`OperatorSpec`], sampled through
//! their resolvents, and examined by checks that return witness-carrying
//! [`Certificate`]s.

pub mod certificate;
pub mod criteria;
pub mod error;
pub mod fitzpatrick;
pub mod harness;
mod linalg;
pub mod operators;
pub mod vecspace;

pub use certificate::{Certificate, QuotientTrace, Verdict, Witness};
pub use error::{FitzError, Result};
pub use fitzpatrick::{fitz_finite, fitz_linear, fitz_sampled, FitzSampler, FitzValue};
pub use operators::{FiniteGraph, FunSpec, Matrix, OperatorSpec};
pub use vecspace::{Grid, PairPoint, Polytope, ToleranceConfig, Vector};
