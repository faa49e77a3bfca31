//! Geometric-median objective, subgradients, quantile radii, the non-private
//! Weiszfeld oracle, and projection onto intersections of balls.

use std::io::Read;
use std::path::Path;

use crate::linalg::{axpy, dist, norm, scale, sub, zeros};
use crate::{Error, Result};

/// An ordered list of `n` points in `R^d`, the private input.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset from row vectors; all rows must share one dimension
    /// and the list must be nonempty.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset must contain at least one point".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("points must be finite".into()));
            }
        }
        Ok(Self { points, dim })
    }

    /// Convenience constructor for one-dimensional data.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Loads a dataset from CSV: one point per row, `d` comma-separated
    /// decimal fields, no header. Ragged rows are rejected.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_reader(reader);
        let mut points = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::InvalidArgument(format!("bad CSV field: {e}")))?;
            points.push(row);
        }
        Self::new(points)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        Ok(())
    }
}

/// Euclidean ball `{x: ||x - center|| <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius must be >= 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        dist(point, &self.center) <= self.radius + tol
    }

    /// Closed-form Euclidean projection onto the ball.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        let d = dist(point, &self.center);
        if d <= self.radius {
            point.to_vec()
        } else {
            let dir = sub(point, &self.center);
            let mut out = self.center.clone();
            axpy(&mut out, self.radius / d, &dir);
            out
        }
    }
}

/// Fraction spec for quantile radii; the interesting regime is `gamma > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSpec {
    gamma: f64,
}

impl QuantileSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must be in (1/2, 1], got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Sum of Euclidean distances from `theta` to every data point.
pub fn gm_objective(theta: &[f64], data: &Dataset) -> Result<f64> {
    data.check_dim(theta)?;
    Ok(data.points().iter().map(|x| dist(theta, x)).sum())
}

/// Subgradient of [`gm_objective`]: the sum of unit vectors `(theta - x_i) /
/// ||theta - x_i||`, with coincident points contributing zero.
pub fn gm_subgradient(theta: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    data.check_dim(theta)?;
    let mut g = zeros(data.dim());
    for x in data.points() {
        let diff = sub(theta, x);
        let n = norm(&diff);
        if n > 0.0 {
            axpy(&mut g, 1.0 / n, &diff);
        }
    }
    Ok(g)
}

/// The `ceil(gamma * n)`-th smallest distance from `theta` to the data, i.e.
/// the smallest radius whose ball around `theta` holds at least `gamma * n`
/// points.
pub fn quantile_radius(data: &Dataset, theta: &[f64], gamma: f64) -> Result<f64> {
    data.check_dim(theta)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must be in (0, 1], got {gamma}")));
    }
    let mut dists: Vec<f64> = data.points().iter().map(|x| dist(theta, x)).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (gamma * data.n() as f64).ceil() as usize;
    let k = k.clamp(1, data.n());
    Ok(dists[k - 1])
}

/// Weiszfeld fixed-point iteration for the geometric median.
///
/// Terminates when the subgradient norm drops below `tol * n`. When an
/// iterate lands exactly on a data point the subgradient-ball optimality test
/// decides between stopping and a small step along the negative residual.
pub fn weiszfeld_gm(data: &Dataset, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    let n = data.n();
    let d = data.dim();
    if n == 1 {
        return Ok(data.points()[0].clone());
    }

    // Coincidence threshold relative to the data scale.
    let data_scale = data
        .points()
        .iter()
        .map(|p| norm(p))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let coincide_eps = 1e-13 * data_scale;

    // Centroid start.
    let mut theta = zeros(d);
    for p in data.points() {
        axpy(&mut theta, 1.0 / n as f64, p);
    }

    let target = tol * n as f64;
    let mut best = theta.clone();
    let mut best_res = f64::INFINITY;

    for _ in 0..max_iter {
        // Residual of non-coincident points and the coincident count.
        let mut residual = zeros(d);
        let mut coincident = 0usize;
        for x in data.points() {
            let diff = sub(&theta, x);
            let nd = norm(&diff);
            if nd <= coincide_eps {
                coincident += 1;
            } else {
                axpy(&mut residual, 1.0 / nd, &diff);
            }
        }
        let res_norm = norm(&residual);
        // Full subgradient norm: coincident points contribute nothing, but the
        // optimality condition at a data point is res_norm <= coincident.
        let effective = if coincident > 0 {
            (res_norm - coincident as f64).max(0.0)
        } else {
            res_norm
        };
        if effective < best_res {
            best_res = effective;
            best = theta.clone();
        }
        if effective <= target {
            return Ok(theta);
        }

        if coincident > 0 {
            // Stuck on a data point but not optimal: nudge along the negative
            // residual with step tol.
            axpy(&mut theta, -tol / res_norm, &residual);
            continue;
        }

        // Standard reweighted average.
        let mut num = zeros(d);
        let mut denom = 0.0;
        for x in data.points() {
            let w = 1.0 / dist(&theta, x);
            axpy(&mut num, w, x);
            denom += w;
        }
        theta = scale(&num, 1.0 / denom);
    }

    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: best_res,
        best,
    })
}

/// Euclidean projection onto the intersection of two balls via Dykstra's
/// alternating projections (capped at 1000 sweeps).
pub fn project_ball_intersection(
    point: &[f64],
    outer: &Ball,
    inner: &Ball,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let d = point.len();
    if outer.center.len() != d || inner.center.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: outer.center.len().max(inner.center.len()),
        });
    }
    let centers_gap = dist(&outer.center, &inner.center);
    if centers_gap > outer.radius + inner.radius + tol {
        return Err(Error::InvalidArgument(
            "balls do not intersect; projection target is empty".into(),
        ));
    }
    if outer.contains(point, 0.0) && inner.contains(point, 0.0) {
        return Ok(point.to_vec());
    }

    const MAX_SWEEPS: usize = 1000;
    let mut x = point.to_vec();
    let mut p = zeros(d);
    let mut q = zeros(d);
    for _ in 0..MAX_SWEEPS {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = outer.project(&xp);
        p = sub(&xp, &y);
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let x_next = inner.project(&yq);
        q = sub(&yq, &x_next);
        let step = dist(&x, &x_next);
        x = x_next;
        if step <= tol && outer.contains(&x, tol) && inner.contains(&x, tol) {
            break;
        }
    }
    Ok(x)
}

/// Diameter of the dataset's point cloud (max pairwise distance).
pub fn diameter(data: &Dataset) -> f64 {
    let pts = data.points();
    let mut best = 0.0_f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            best = best.max(dist(&pts[i], &pts[j]));
        }
    }
    best
}
