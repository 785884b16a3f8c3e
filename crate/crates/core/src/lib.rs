//! Sparse representation toolkit: greedy, proximal, interior-point and
//! homotopy solvers for l0/l1/l½ problems, dictionary learning, sparse
//! classifiers and a patch-based denoiser.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod constrained;
pub mod denoise;
pub mod dictionary;
pub mod error;
pub mod greedy;
pub mod homotopy;
pub mod linalg;
mod par;
pub mod pgm;
pub mod problem;
pub mod proximal;
pub mod rng;

pub use error::{Result, SparseError};
pub use linalg::{Matrix, Vector};
pub use problem::{Constraint, Dictionary, SolverConfig, SparseProblem, SparseSolution};
