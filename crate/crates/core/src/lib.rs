//! Bayesian spatial transformation models for voxel-wise imaging regression.
//!
//! Each voxel's responses are Box-Cox transformed with their own unknown
//! exponent and regressed on subject covariates; the coefficient images get
//! Gaussian Markov random field priors built from a radius neighborhood on
//! the voxel lattice. Posterior sampling is a single-site Gibbs sampler with
//! Metropolis-Hastings steps for the exponents.

pub mod baselines;
pub mod boxcox;
pub mod cli;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod lattice;
pub mod model;
pub mod rng;
pub mod simgen;
pub mod summary;

pub use error::{Result, StmError};
