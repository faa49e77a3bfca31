//! Private quantile-radius estimation over a doubling grid.
//!
//! Counts, for each candidate radius `nu`, how many points have at least
//! `m = ceil(gamma * n)` neighbors within `nu` on average (over the `m`
//! best-connected points), then runs the sparse-vector scan over the grid
//! `{r, 2r, 4r, ...}` to privately pick the first radius whose averaged count
//! clears a noisy threshold.

use rayon::prelude::*;

use crate::geometry::Dataset;
use crate::linalg::dist;
use crate::privacy::{above_threshold, NoiseRng, ZcdpBudget};
use crate::{Error, Result};

/// Configuration for [`radius_finder`].
#[derive(Debug, Clone, Copy)]
pub struct RadiusFinderConfig {
    pub gamma: f64,
    pub rho: ZcdpBudget,
    pub beta: f64,
    /// Grid floor: the smallest candidate radius.
    pub r: f64,
    /// A-priori bound on the data: all points lie in `B_d(0, R)`.
    pub big_r: f64,
}

impl RadiusFinderConfig {
    pub fn new(gamma: f64, rho: ZcdpBudget, beta: f64, r: f64, big_r: f64) -> Result<Self> {
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must be in (1/2, 1], got {gamma}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidArgument(format!("beta must be in (0, 1], got {beta}")));
        }
        if !(r > 0.0 && r < big_r) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r < R, got r={r}, R={big_r}"
            )));
        }
        Ok(Self { gamma, rho, beta, r, big_r })
    }

    /// Number of doublings: the grid is `{2^0 r, ..., 2^K r}` with
    /// `K = ceil(log2(2R/r))`.
    pub fn grid_len_exponent(&self) -> usize {
        (2.0 * self.big_r / self.r).log2().ceil().max(0.0) as usize
    }
}

/// Result of the private scan: the chosen grid radius, or `Fail` when no grid
/// value cleared the noisy threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusEstimate {
    Found { value: f64, grid_index: usize },
    Fail,
}

impl RadiusEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Found { value, .. } => Some(*value),
            Self::Fail => None,
        }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Self::Fail)
    }
}

/// `N_i(nu)`: for each point, the number of data points (itself included)
/// within distance `nu`.
pub fn neighbor_counts(data: &Dataset, nu: f64) -> Result<Vec<usize>> {
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be >= 0, got {nu}")));
    }
    let pts = data.points();
    Ok(pts
        .par_iter()
        .map(|xi| pts.iter().filter(|xj| dist(xi, xj) <= nu).count())
        .collect())
}

/// Mean of the `m` largest counts.
pub fn top_m_average(counts: &[usize], m: usize) -> Result<f64> {
    if m == 0 || m > counts.len() {
        return Err(Error::InvalidArgument(format!(
            "m must be in [1, {}], got {m}",
            counts.len()
        )));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    Ok(sorted[..m].iter().sum::<usize>() as f64 / m as f64)
}

/// Sorted distance rows, computed once and shared across all grid values.
struct DistanceRows(Vec<Vec<f64>>);

impl DistanceRows {
    fn build(data: &Dataset) -> Self {
        let pts = data.points();
        let rows = pts
            .par_iter()
            .map(|xi| {
                let mut row: Vec<f64> = pts.iter().map(|xj| dist(xi, xj)).collect();
                row.sort_by(|a, b| a.partial_cmp(b).unwrap());
                row
            })
            .collect();
        Self(rows)
    }

    /// `N_i(nu)` for every i via binary search in the sorted rows.
    fn counts_at(&self, nu: f64) -> Vec<usize> {
        self.0
            .iter()
            .map(|row| row.partition_point(|&d| d <= nu))
            .collect()
    }
}

/// Private quantile-radius estimation.
///
/// Feeds the averaged neighbor counts over the doubling grid, in increasing
/// radius order, to the sparse-vector scan with threshold
/// `m + (18/sqrt(2 rho)) * ln((2/beta) * K)` where `K` is the number of
/// doublings. Returns the grid radius at the first noisy exceedance.
pub fn radius_finder(
    data: &Dataset,
    cfg: &RadiusFinderConfig,
    rng: &mut NoiseRng,
) -> Result<RadiusEstimate> {
    let n = data.n();
    let m = (cfg.gamma * n as f64).ceil() as usize;
    let m = m.clamp(1, n);
    let k = cfg.grid_len_exponent();

    let rows = DistanceRows::build(data);
    let queries: Vec<f64> = (0..=k)
        .map(|i| {
            let nu = 2f64.powi(i as i32) * cfg.r;
            top_m_average(&rows.counts_at(nu), m)
        })
        .collect::<Result<_>>()?;

    let offset = 18.0 / (2.0 * cfg.rho.rho()).sqrt() * ((2.0 / cfg.beta) * k.max(1) as f64).ln();
    let threshold = m as f64 + offset;

    match above_threshold(&queries, cfg.rho, threshold, rng)? {
        Some(i) => Ok(RadiusEstimate::Found {
            value: 2f64.powi(i as i32) * cfg.r,
            grid_index: i,
        }),
        None => Ok(RadiusEstimate::Fail),
    }
}
