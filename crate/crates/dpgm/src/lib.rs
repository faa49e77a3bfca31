//! Differentially private geometric-median estimation.
//!
//! The geometric median of points `x_1, ..., x_n` minimizes the sum of
//! Euclidean distances `F(theta) = sum_i ||theta - x_i||`. This crate provides
//! private estimators whose error scales with the radius containing the
//! majority of the data rather than the a-priori bound `R`:
//!
//! - [`radius`]: private quantile-radius estimation over a geometric grid,
//! - [`dpgd`]: projected DP gradient descent, warm-up localization with
//!   geometrically shrinking feasible balls, and localized fine-tuning,
//! - [`cutting_plane`]: a noisy cutting-plane fine-tuner with analytic-centre
//!   steps and a private iterate selector,
//! - [`inverse_sensitivity`]: a pure-DP sampler over a discretized ball,
//!   weighted by the number of data modifications needed to make a point
//!   optimal,
//! - [`bench`]: synthetic-data benchmark harness with CSV/JSON reports.
//!
//! Non-private building blocks (objective, subgradients, Weiszfeld oracle,
//! ball projections) live in [`geometry`]; budgets, calibrated noise and the
//! sparse-vector scan live in [`privacy`].

pub mod bench;
pub mod cutting_plane;
pub mod dpgd;
pub mod geometry;
pub mod inverse_sensitivity;
pub mod linalg;
pub mod privacy;
pub mod radius;

mod error;

pub use error::{Error, Result};
