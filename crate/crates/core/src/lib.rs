//! Rectangular kernel ridge / Gaussian process regression with multi-zeta
//! Gaussian-like kernels, and diagnostics for how kernel locality degrades
//! as the input dimension grows.
//!
//! The pipeline is: load or synthesize a [`Dataset`], draw a seeded
//! [`SplitIndices`], standardize on the training rows, build the
//! `M x (Z*N)` design matrix from [`KernelSpec`], and solve for the
//! coefficients with an SVD pseudoinverse. [`experiment`] wires this into
//! length-parameter scans, locality reports and correlation data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod linalg;
pub mod regression;

pub use dataset::{Dataset, Normalizer, SplitIndices};
pub use diagnostics::LocalityReport;
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use linalg::SolveReport;
pub use regression::{FitModel, Metrics};
