//! Gaussian-process regression for functions of mixed continuous and categorical inputs.
//!
//! Categorical inputs with many levels are handled with group kernels: block covariance
//! matrices with constant covariance between groups, generated from a small covariance of
//! group means and one reduced covariance per group so that every parameter vector yields
//! a valid (positive semidefinite) matrix.
//!
//! Modules:
//! - [`covariance`]: CS/GCS matrices, Helmert contrasts, validation and decomposition.
//! - [`kernels`]: 1-D continuous kernels, categorical kernels and their combinations.
//! - [`gp`]: likelihood, multi-start maximum-likelihood fitting, prediction and Q².
//! - [`design`]: sliced/plain Latin hypercubes, stratified and grid designs.
//! - [`experiments`]: test functions, configuration files and the benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod design;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub mod linalg;

pub use error::{Error, Result};
