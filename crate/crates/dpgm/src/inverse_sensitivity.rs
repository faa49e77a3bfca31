//! Pure-DP inverse-sensitivity sampler over a discretized ball, plus the
//! k-stability bound on how far the geometric median can move when k points
//! are replaced.
//!
//! The score `len(X, theta)` is the minimum number of data points that must
//! be modified for `theta` to become a geometric median. Moving a point onto
//! `theta` contributes a full unit subgradient ball, so `len` equals the
//! smallest k for which some kept subset S with |S| = n - k satisfies
//! `||sum_{i in S, x_i != theta} u_i|| <= k + #{i in S: x_i = theta}` with
//! `u_i = (theta - x_i)/||theta - x_i||`. Dropping a coincident point never
//! helps (it only shrinks the slack), so only non-coincident points are
//! candidates for modification.

use std::io::Write;

use rayon::prelude::*;

use crate::geometry::{gm_objective, weiszfeld_gm, Dataset};
use crate::linalg::{axpy, norm, sub, zeros};
use crate::privacy::NoiseRng;
use crate::{Error, Result};

/// Axis-aligned lattice of spacing `spacing` intersected with `B_d(0, R)`,
/// for d in {1, 2}.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub big_r: f64,
    pub spacing: f64,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(big_r: f64, spacing: f64, dim: usize) -> Result<Self> {
        if !(big_r > 0.0) {
            return Err(Error::InvalidArgument(format!("R must be > 0, got {big_r}")));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing must be > 0, got {spacing}")));
        }
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidArgument(format!(
                "grid supports dimensions 1 and 2, got {dim}"
            )));
        }
        Ok(Self { big_r, spacing, dim })
    }

    /// All lattice nodes inside the ball; always contains the origin.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let k = (self.big_r / self.spacing).floor() as i64;
        let axis: Vec<f64> = (-k..=k).map(|i| i as f64 * self.spacing).collect();
        match self.dim {
            1 => axis.into_iter().map(|x| vec![x]).collect(),
            _ => {
                let mut out = Vec::new();
                for &x in &axis {
                    for &y in &axis {
                        if x * x + y * y <= self.big_r * self.big_r {
                            out.push(vec![x, y]);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Search strategy for [`len_at`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LenMode {
    /// Exhaustive subset search; limited to n <= 14.
    Exact,
    /// Iteratively drop the point whose removal most shrinks the residual.
    /// Upper-bounds the exact value.
    Greedy,
}

/// Maximum meaningful score: past `ceil(n/2)` modified points any target is
/// reachable, so scores are capped there.
pub fn len_cap(n: usize) -> usize {
    n.div_ceil(2)
}

/// Minimum number of modified points needed to make `theta` a geometric
/// median of the data.
pub fn len_at(data: &Dataset, theta: &[f64], mode: LenMode) -> Result<usize> {
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: theta.len(),
        });
    }
    let n = data.n();
    let cap = len_cap(n);

    // Unit subgradient directions of the non-coincident points.
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut coincident = 0usize;
    let scale = data
        .points()
        .iter()
        .map(|p| norm(p))
        .fold(norm(theta), f64::max)
        .max(1.0);
    for x in data.points() {
        let diff = sub(theta, x);
        let d = norm(&diff);
        if d <= 1e-13 * scale {
            coincident += 1;
        } else {
            units.push(diff.iter().map(|v| v / d).collect());
        }
    }
    let m = units.len();
    let mut total = zeros(data.dim());
    for u in &units {
        axpy(&mut total, 1.0, u);
    }
    if norm(&total) <= coincident as f64 {
        return Ok(0);
    }

    match mode {
        LenMode::Exact => {
            if n > 14 {
                return Err(Error::SizeLimit(format!(
                    "exact subset search requires n <= 14, got {n}"
                )));
            }
            // Subset-sum table over drop masks, built by lowest-bit recursion.
            let d = data.dim();
            let masks = 1usize << m;
            let mut sums = vec![0.0f64; masks * d];
            let mut best = cap;
            for mask in 1..masks {
                let low = mask.trailing_zeros() as usize;
                let prev = mask & (mask - 1);
                for j in 0..d {
                    sums[mask * d + j] = sums[prev * d + j] + units[low][j];
                }
                let k = mask.count_ones() as usize;
                if k >= best {
                    continue;
                }
                let residual: f64 = (0..d)
                    .map(|j| {
                        let r = total[j] - sums[mask * d + j];
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt();
                if residual <= (k + coincident) as f64 {
                    best = k;
                }
            }
            Ok(best)
        }
        LenMode::Greedy => {
            let mut residual = total;
            let mut alive: Vec<bool> = vec![true; m];
            for k in 1..=cap {
                // Drop the unit vector whose removal minimizes the residual.
                let mut pick = None;
                let mut pick_norm = f64::INFINITY;
                for (i, u) in units.iter().enumerate() {
                    if !alive[i] {
                        continue;
                    }
                    let cand: f64 = residual
                        .iter()
                        .zip(u)
                        .map(|(r, v)| (r - v) * (r - v))
                        .sum::<f64>()
                        .sqrt();
                    if cand < pick_norm {
                        pick_norm = cand;
                        pick = Some(i);
                    }
                }
                let Some(i) = pick else { return Ok(k.min(cap)) };
                alive[i] = false;
                for (r, v) in residual.iter_mut().zip(&units[i]) {
                    *r -= v;
                }
                if norm(&residual) <= (k + coincident) as f64 {
                    return Ok(k);
                }
            }
            Ok(cap)
        }
    }
}

/// Inverse-sensitivity sampler: scores every grid node by `len`, weights it
/// by `exp(-epsilon * len / 2)`, and samples a node. Exact scores are used
/// up to n = 14, the greedy upper bound beyond.
#[derive(Debug, Clone)]
pub struct SinvsSampler {
    nodes: Vec<Vec<f64>>,
    lens: Vec<usize>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl SinvsSampler {
    pub fn build(data: &Dataset, epsilon: f64, grid: &GridSpec) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        if grid.dim != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: grid.dim,
            });
        }
        let nodes = grid.nodes();
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("grid has no nodes".into()));
        }
        let mode = if data.n() <= 14 { LenMode::Exact } else { LenMode::Greedy };
        let lens: Vec<usize> = nodes
            .par_iter()
            .map(|node| len_at(data, node, mode))
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = lens
            .iter()
            .map(|&l| (-epsilon * l as f64 / 2.0).exp())
            .collect();
        let total_weight = weights.iter().sum();
        Ok(Self { nodes, lens, weights, total_weight })
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn lens(&self) -> &[usize] {
        &self.lens
    }

    /// Normalized node probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.total_weight).collect()
    }

    /// Draws one node. With noise disabled this returns the highest-weight
    /// (lowest-score) node, ties to the first.
    pub fn sample(&self, rng: &mut NoiseRng) -> Vec<f64> {
        if rng.noise_disabled() {
            let mut best = 0;
            for (i, w) in self.weights.iter().enumerate() {
                if *w > self.weights[best] {
                    best = i;
                }
            }
            return self.nodes[best].clone();
        }
        let mut u = rng.uniform() * self.total_weight;
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            u -= w;
            if u <= 0.0 {
                return node.clone();
            }
        }
        self.nodes.last().unwrap().clone()
    }

    /// Dumps the `(node, len, probability)` table as CSV for inspection.
    pub fn write_table_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let d = self.nodes[0].len();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.push("len".into());
        header.push("probability".into());
        wtr.write_record(&header)?;
        let probs = self.probabilities();
        for ((node, len), p) in self.nodes.iter().zip(&self.lens).zip(&probs) {
            let mut rec: Vec<String> = node.iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{len}"));
            rec.push(format!("{p}"));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One-shot convenience wrapper around [`SinvsSampler`].
pub fn sinvs_sample(
    data: &Dataset,
    epsilon: f64,
    grid: &GridSpec,
    rng: &mut NoiseRng,
) -> Result<Vec<f64>> {
    Ok(SinvsSampler::build(data, epsilon, grid)?.sample(rng))
}

/// Bound on the distance the geometric median can move when `k` of `n` points
/// are replaced arbitrarily: `2 F(theta_0) / (n - 2k)` with `theta_0` the
/// unmodified geometric median.
pub fn k_stability_bound(data: &Dataset, k: usize) -> Result<f64> {
    let n = data.n();
    if 2 * k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy k < n/2, got k={k}, n={n}"
        )));
    }
    let theta0 = weiszfeld_gm(data, 1e-10, 200_000)?;
    Ok(2.0 * gm_objective(&theta0, data)? / (n - 2 * k) as f64)
}
