//! Spatial risk measures for cost fields built from max-stable random fields.
//!
//! The crate covers the analytic side (moments and covariances of powered
//! Brown-Resnick fields, the variance of the normalized spatial loss over a
//! disk or square, large-region normal approximations) and a Monte-Carlo
//! side (exact and truncated simulation of several max-stable models on a
//! grid, empirical losses and risk measures).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dependence;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod risk;
pub mod simulate;
pub mod variogram;

pub use error::{Error, Result};
