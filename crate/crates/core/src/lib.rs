//! Monte Carlo for the two-matrix models
//! `e^{−N S(A,B)}`, `S = ½Tr(A²+B²) − (g/4)Tr(A⁴+B⁴) − (h/2)Tr(A{B,A}_q B)`,
//! and the tools that trace their critical curves in the `(g, h)` plane.
//!
//! The numerics are generic over [`scalar::Real`]; the aliases below fix
//! the common precisions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod checkpoint;
pub mod coeff;
pub mod error;
pub mod hmc;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod search;
pub mod stats;
pub mod word;

pub use error::{AnalysisError, ChainError, MatrixError, ModelError, SearchError, WordError};
pub use hmc::{mc_run, ChainConfig, RunOutcome};
pub use model::ModelParams;
pub use word::Word;

pub type Matrix64 = matrix::HermitianMatrix<f64>;
pub type Matrix32 = matrix::HermitianMatrix<f32>;
pub type Pair64 = matrix::MatrixPair<f64>;
pub type Pair32 = matrix::MatrixPair<f32>;
pub type Params64 = model::ModelParams<f64>;
pub type Params32 = model::ModelParams<f32>;
pub type Chain64 = hmc::Chain<f64>;
pub type Chain32 = hmc::Chain<f32>;
