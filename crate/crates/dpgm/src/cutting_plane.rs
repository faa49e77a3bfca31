//! Noisy cutting-plane fine-tuning over the localized ball.
//!
//! Each round cuts the current region with the halfspace
//! `{theta: <g, theta - theta_t> < 0}` where `g` is the noisy subgradient at
//! the region's analytic centre; a bespoke exponential mechanism then picks
//! one of the collected centres. The centring subroutine is a log-barrier
//! analytic centre computed by damped Newton, which empirically removes a
//! constant fraction `tau` of the region's volume per cut.

use crate::dpgd::{localization, LocalizationConfig};
use crate::geometry::{gm_objective, gm_subgradient, Ball, Dataset};
use crate::linalg::{axpy, dot, norm, solve_spd_neg, sub, zeros};
use crate::privacy::{gaussian_vector, ApproxDpBudget, NoiseRng, ZcdpBudget};
use crate::{Error, Result};

/// Open halfspace `{theta: <normal, theta> < offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Signed slack; positive strictly inside the halfspace.
    pub fn slack(&self, point: &[f64]) -> f64 {
        self.offset - dot(&self.normal, point)
    }
}

/// Ball intersected with an ordered list of halfspace cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRegion {
    pub base: Ball,
    pub cuts: Vec<Halfspace>,
}

impl CutRegion {
    pub fn new(base: Ball) -> Self {
        Self { base, cuts: Vec::new() }
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        self.base.contains(point, tol) && self.cuts.iter().all(|c| c.slack(point) > -tol)
    }

    /// Distance-normalized slack: minimum over the cut slacks (scaled by the
    /// normal's length) and the distance to the base sphere. Concave along
    /// any line, which the phase-I search exploits.
    fn min_slack(&self, point: &[f64]) -> f64 {
        let mut s = self.base.radius - crate::linalg::dist(point, &self.base.center);
        for c in &self.cuts {
            s = s.min(c.slack(point) / norm(&c.normal));
        }
        s
    }
}

/// Log-barrier value; `None` outside the strict interior.
fn barrier(region: &CutRegion, theta: &[f64]) -> Option<f64> {
    let diff = sub(theta, &region.base.center);
    let sb = region.base.radius * region.base.radius - dot(&diff, &diff);
    if sb <= 0.0 {
        return None;
    }
    let mut b = -sb.ln();
    for c in &region.cuts {
        let s = c.slack(theta);
        if s <= 0.0 {
            return None;
        }
        b -= s.ln();
    }
    Some(b)
}

/// Barrier gradient and Hessian (row-major d*d) at a strictly interior point.
fn barrier_derivatives(region: &CutRegion, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = theta.len();
    let mut g = zeros(d);
    let mut h = vec![0.0; d * d];
    for c in &region.cuts {
        let s = c.slack(theta);
        let inv = 1.0 / s;
        axpy(&mut g, inv, &c.normal);
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] += c.normal[i] * c.normal[j] * inv * inv;
            }
        }
    }
    let diff = sub(theta, &region.base.center);
    let sb = region.base.radius * region.base.radius - dot(&diff, &diff);
    axpy(&mut g, 2.0 / sb, &diff);
    for i in 0..d {
        h[i * d + i] += 2.0 / sb;
        for j in 0..d {
            h[i * d + j] += 4.0 * diff[i] * diff[j] / (sb * sb);
        }
    }
    (g, h)
}

/// Finds a strictly interior point: start at the ball center and repeatedly
/// step along the average inward normal of violated cuts, maximizing the
/// concave min-slack along the line by ternary search.
fn interior_point(region: &CutRegion) -> Result<Vec<f64>> {
    let mut theta = region.base.center.clone();
    let margin = 1e-9 * region.base.radius.max(1.0);
    for _ in 0..200 {
        let current = region.min_slack(&theta);
        if current > margin {
            return Ok(theta);
        }
        let d = theta.len();
        let mut dir = zeros(d);
        for c in &region.cuts {
            if c.slack(&theta) / norm(&c.normal) <= margin {
                axpy(&mut dir, -1.0 / norm(&c.normal), &c.normal);
            }
        }
        let dn = norm(&dir);
        if dn == 0.0 {
            break;
        }
        for x in dir.iter_mut() {
            *x /= dn;
        }
        // Ternary search for argmax of the concave min-slack along theta + t dir.
        let mut lo = 0.0;
        let mut hi = 2.0 * region.base.radius;
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            let p1: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + m1 * b).collect();
            let p2: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + m2 * b).collect();
            if region.min_slack(&p1) < region.min_slack(&p2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let t = 0.5 * (lo + hi);
        let next: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
        if region.min_slack(&next) <= current + 1e-15 {
            break;
        }
        theta = next;
    }
    if region.min_slack(&theta) > 0.0 {
        Ok(theta)
    } else {
        Err(Error::RegionEmpty)
    }
}

/// Minimizer of the log barrier over the region, via damped Newton with
/// backtracking (at most 100 Newton steps). Errors with `RegionEmpty` when no
/// strictly interior point can be found.
pub fn analytic_centre(region: &CutRegion, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if !(region.base.radius > 0.0) {
        return Err(Error::RegionEmpty);
    }
    let mut theta = interior_point(region)?;
    let mut value = barrier(region, &theta).ok_or(Error::RegionEmpty)?;
    for _ in 0..100 {
        let (g, h) = barrier_derivatives(region, &theta);
        if norm(&g) <= tol {
            break;
        }
        let step = match solve_spd_neg(&h, &g) {
            Some(s) => s,
            // Fall back to a plain gradient step if the Hessian is numerically
            // degenerate.
            None => g.iter().map(|x| -x).collect(),
        };
        // Newton decrement stopping rule.
        let decrement = -dot(&g, &step);
        if decrement.abs() <= tol {
            break;
        }
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            if let Some(v) = barrier(region, &cand) {
                if v < value {
                    theta = cand;
                    value = v;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(theta)
}

/// Monte Carlo estimate of `vol(region AND cut) / vol(region)` by rejection
/// sampling from the base ball. Supported up to dimension 6.
pub fn estimate_volume_fraction(
    region: &CutRegion,
    cut: &Halfspace,
    samples: usize,
    rng: &mut NoiseRng,
) -> Result<f64> {
    let d = region.base.center.len();
    if d > 6 {
        return Err(Error::InvalidArgument(format!(
            "rejection sampling supported up to dimension 6, got {d}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let mut accepted = 0usize;
    let mut inside = 0usize;
    for _ in 0..samples {
        // Uniform in the ball: gaussian direction, radius law rad * U^(1/d).
        let mut dir: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let dn = norm(&dir);
        if dn == 0.0 {
            continue;
        }
        let radius = region.base.radius * rng.uniform().powf(1.0 / d as f64);
        for x in dir.iter_mut() {
            *x *= radius / dn;
        }
        let point: Vec<f64> = region.base.center.iter().zip(&dir).map(|(c, v)| c + v).collect();
        if region.cuts.iter().all(|c| c.slack(&point) > 0.0) {
            accepted += 1;
            if cut.slack(&point) > 0.0 {
                inside += 1;
            }
        }
    }
    if accepted == 0 {
        return Err(Error::EstimationFailure);
    }
    Ok(inside as f64 / accepted as f64)
}

/// Exponential-mechanism selection among candidate iterates with
/// `pi(t) ~ exp(-epsilon F(theta_t) / (448 scale_delta))`. With noise
/// disabled this returns the first objective minimizer.
pub fn exp_mech_select(
    candidates: &[Vec<f64>],
    data: &Dataset,
    epsilon: f64,
    scale_delta: f64,
    rng: &mut NoiseRng,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate list is empty".into()));
    }
    if !(epsilon > 0.0) || !(scale_delta > 0.0) {
        return Err(Error::InvalidArgument(
            "epsilon and scale_delta must be > 0".into(),
        ));
    }
    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| gm_objective(c, data))
        .collect::<Result<_>>()?;
    if rng.noise_disabled() {
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s < scores[best] {
                best = i;
            }
        }
        return Ok(best);
    }
    let exponents: Vec<f64> = scores
        .iter()
        .map(|s| -epsilon * s / (448.0 * scale_delta))
        .collect();
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Configuration for [`loc_dp_cutting_plane`].
#[derive(Debug, Clone, Copy)]
pub struct CuttingPlaneConfig {
    pub budget: ApproxDpBudget,
    /// Assumed per-cut volume-reduction factor.
    pub tau: f64,
    /// Hidden constant in the cut-count formula.
    pub c_kft: f64,
    /// Explicit cut count; `None` derives it from `(d, tau, n, rho)`.
    pub k_ft: Option<usize>,
    /// Warm-up step count handed to localization.
    pub t_wu: usize,
}

impl CuttingPlaneConfig {
    pub fn new(budget: ApproxDpBudget) -> Self {
        Self {
            budget,
            tau: 0.25,
            c_kft: 4.0,
            k_ft: None,
            t_wu: 500,
        }
    }

    /// zCDP budget spent by the cut stages:
    /// `rho = epsilon^2 / (16 ln(2/delta) + 8 epsilon)`.
    pub fn rho(&self) -> f64 {
        let eps = self.budget.epsilon;
        eps * eps / (16.0 * (2.0 / self.budget.delta).ln() + 8.0 * eps)
    }

    /// `k_ft = max(1, ceil(c (d/tau) ln(n sqrt(tau rho)/sqrt(d) + sqrt(d))))`.
    pub fn cut_count(&self, n: usize, d: usize) -> usize {
        if let Some(k) = self.k_ft {
            return k.max(1);
        }
        let rho = self.rho();
        let sd = (d as f64).sqrt();
        let kappa = n as f64 * (self.tau * rho).sqrt() / sd + sd;
        let k = self.c_kft * (d as f64 / self.tau) * kappa.ln();
        (k.ceil() as usize).max(1)
    }
}

/// Output of [`loc_dp_cutting_plane`].
#[derive(Debug, Clone)]
pub struct CuttingPlaneOutcome {
    /// Selected iterate; `None` when localization failed.
    pub theta: Option<Vec<f64>>,
    pub delta_hat: f64,
    pub failed: bool,
    /// Number of centres actually collected (the cut loop may stop early).
    pub iterates: usize,
    /// zCDP allocated per stage (the final selection is accounted in pure
    /// epsilon-DP and listed with value 0).
    pub trace: Vec<(String, f64)>,
}

const CENTRE_TOL: f64 = 1e-8;
/// Cuts with a shorter noisy gradient than this are degenerate; the loop
/// stops and selects among the centres collected so far.
const MIN_NORMAL: f64 = 1e-12;

/// Localized cutting-plane fine-tuning under an `(epsilon, delta)`-DP target.
pub fn loc_dp_cutting_plane(
    data: &Dataset,
    cfg: &CuttingPlaneConfig,
    r: f64,
    beta: f64,
    big_r: f64,
    rng: &mut NoiseRng,
) -> Result<CuttingPlaneOutcome> {
    let rho = cfg.rho();
    let loc_beta = (beta / 3.0).min(cfg.budget.delta / 2.0);
    let loc_cfg = LocalizationConfig::new(ZcdpBudget::new(rho / 2.0)?, r, loc_beta, big_r)?
        .with_t_wu(cfg.t_wu);
    let loc = localization(data, &loc_cfg, rng)?;
    let mut trace: Vec<(String, f64)> = loc
        .trace
        .iter()
        .map(|(s, v)| (format!("localization/{s}"), *v))
        .collect();
    if loc.failed {
        return Ok(CuttingPlaneOutcome {
            theta: None,
            delta_hat: 0.0,
            failed: true,
            iterates: 0,
            trace,
        });
    }

    let d = data.dim();
    let k_ft = cfg.cut_count(data.n(), d);
    let sigma = (k_ft as f64 / rho).sqrt();
    let mut region = CutRegion::new(loc.localized_ball().unwrap());
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k_ft);
    for _ in 0..k_ft {
        let centre = match analytic_centre(&region, CENTRE_TOL) {
            Ok(c) => c,
            Err(Error::RegionEmpty) => break,
            Err(e) => return Err(e),
        };
        centres.push(centre.clone());
        let mut normal = gm_subgradient(&centre, data)?;
        let xi = gaussian_vector(sigma, d, rng)?;
        axpy(&mut normal, 1.0, &xi);
        if norm(&normal) < MIN_NORMAL {
            break;
        }
        let offset = dot(&normal, &centre);
        region.cuts.push(Halfspace { normal, offset });
    }
    trace.push(("cuts".to_string(), rho));
    trace.push(("selection".to_string(), 0.0));

    let idx = exp_mech_select(&centres, data, cfg.budget.epsilon, loc.delta_hat, rng)?;
    Ok(CuttingPlaneOutcome {
        theta: Some(centres[idx].clone()),
        delta_hat: loc.delta_hat,
        failed: false,
        iterates: centres.len(),
        trace,
    })
}
