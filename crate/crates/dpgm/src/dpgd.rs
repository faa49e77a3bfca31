//! Projected DP gradient descent, the warm-up localization loop with
//! geometrically shrinking feasible balls, and localized fine-tuning.
//!
//! All gradient steps run on the mean objective `F/n`, whose per-sample
//! Lipschitz constant is 1; noise is calibrated as `sigma^2 = T/(2 rho n^2)`
//! per coordinate. A conservative mode doubling `sigma` is available for the
//! stricter replacement-neighbor calibration.

use crate::geometry::{
    gm_subgradient, project_ball_intersection, quantile_radius, Ball, Dataset,
};
use crate::linalg::{axpy, zeros};
use crate::privacy::{gaussian_vector, NoiseRng, ZcdpBudget};
use crate::radius::{radius_finder, RadiusEstimate, RadiusFinderConfig};
use crate::{Error, Result};

/// Feasible region for projected steps: intersection of two balls.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPair {
    pub outer: Ball,
    pub inner: Ball,
}

impl BallPair {
    pub fn project(&self, point: &[f64], tol: f64) -> Result<Vec<f64>> {
        project_ball_intersection(point, &self.outer, &self.inner, tol)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        self.outer.contains(point, tol) && self.inner.contains(point, tol)
    }
}

const PROJECTION_TOL: f64 = 1e-10;

/// Projected noisy gradient descent on the mean objective.
///
/// Runs `t_steps` updates `theta <- proj(theta - eta (grad + xi))` with
/// `xi ~ N(0, sigma^2 I)`, `sigma^2 = T/(2 rho n^2)` (doubled in conservative
/// mode), and returns the average of the T updated iterates.
pub fn dpgd(
    init: &[f64],
    data: &Dataset,
    rho: ZcdpBudget,
    feasible: &BallPair,
    eta: f64,
    t_steps: usize,
    conservative: bool,
    rng: &mut NoiseRng,
) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
    }
    if t_steps == 0 {
        return Err(Error::InvalidArgument("t_steps must be >= 1".into()));
    }
    if !feasible.contains(init, PROJECTION_TOL.max(1e-6)) {
        return Err(Error::InvalidArgument("init lies outside the feasible region".into()));
    }
    let n = data.n() as f64;
    let d = data.dim();
    let mut sigma = (t_steps as f64 / (2.0 * rho.rho() * n * n)).sqrt();
    if conservative {
        sigma *= 2.0;
    }

    let mut theta = init.to_vec();
    let mut avg = zeros(d);
    for _ in 0..t_steps {
        let mut step = gm_subgradient(&theta, data)?;
        for g in step.iter_mut() {
            *g /= n;
        }
        let xi = gaussian_vector(sigma, d, rng)?;
        axpy(&mut step, 1.0, &xi);
        let mut next = theta;
        axpy(&mut next, -eta, &step);
        theta = feasible.project(&next, PROJECTION_TOL)?;
        axpy(&mut avg, 1.0 / t_steps as f64, &theta);
    }
    Ok(avg)
}

/// Configuration shared by [`localization`] and [`loc_dpgd`].
#[derive(Debug, Clone, Copy)]
pub struct LocalizationConfig {
    pub rho: ZcdpBudget,
    /// Discretization floor for the radius grid.
    pub r: f64,
    pub beta: f64,
    /// A-priori data radius: all points lie in `B_d(0, R)`.
    pub big_r: f64,
    /// Warm-up step count per round.
    pub t_wu: usize,
    pub conservative_noise: bool,
}

impl LocalizationConfig {
    pub fn new(rho: ZcdpBudget, r: f64, beta: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0 && r < big_r) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r < R, got r={r}, R={big_r}"
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidArgument(format!("beta must be in (0, 1], got {beta}")));
        }
        Ok(Self {
            rho,
            r,
            beta,
            big_r,
            t_wu: 500,
            conservative_noise: false,
        })
    }

    pub fn with_t_wu(mut self, t_wu: usize) -> Self {
        self.t_wu = t_wu;
        self
    }
}

/// Output of the warm-up localization loop.
#[derive(Debug, Clone)]
pub struct LocalizationOutcome {
    /// Final warm-up iterate (the center of the localized ball).
    pub theta: Vec<f64>,
    /// Private quantile-radius estimate; 0 when failed.
    pub delta_hat: f64,
    pub failed: bool,
    /// Budget allocated per stage; sums to the input rho on success.
    pub trace: Vec<(String, f64)>,
}

impl LocalizationOutcome {
    /// `{theta: ||theta - center|| <= 25 delta_hat}`, the inner ball of the
    /// localized region. `None` when the run failed.
    pub fn localized_ball(&self) -> Option<Ball> {
        if self.failed {
            None
        } else {
            Some(Ball::new(self.theta.clone(), 25.0 * self.delta_hat).unwrap())
        }
    }
}

/// Warm-up radius schedule `rad_{t+1} = rad_t/2 + 12 delta_hat` starting from
/// `rad_0 = R`; after `ceil(log2(R/delta_hat))` rounds the radius is at most
/// `25 delta_hat`.
pub fn rad_schedule(big_r: f64, delta_hat: f64, rounds: usize) -> Vec<f64> {
    let mut rads = Vec::with_capacity(rounds + 1);
    let mut rad = big_r;
    rads.push(rad);
    for _ in 0..rounds {
        rad = 0.5 * rad + 12.0 * delta_hat;
        rads.push(rad);
    }
    rads
}

/// Number of warm-up rounds: `ceil(log2(R/delta_hat))`, clamped at zero.
pub fn warmup_rounds(big_r: f64, delta_hat: f64) -> usize {
    (big_r / delta_hat).log2().ceil().max(0.0) as usize
}

/// Localization: private radius estimate with half the budget, then
/// `k_wu` rounds of projected DP-GD over geometrically shrinking ball
/// intersections, each round with budget `rho/(2 k_wu)`.
pub fn localization(
    data: &Dataset,
    cfg: &LocalizationConfig,
    rng: &mut NoiseRng,
) -> Result<LocalizationOutcome> {
    let rho = cfg.rho.rho();
    let rf_cfg = RadiusFinderConfig::new(
        0.75,
        ZcdpBudget::new(rho / 2.0)?,
        cfg.beta / 2.0,
        cfg.r,
        cfg.big_r,
    )?;
    let mut trace = vec![("radius_finder".to_string(), rho / 2.0)];
    let delta_hat = match radius_finder(data, &rf_cfg, rng)? {
        RadiusEstimate::Found { value, .. } => value,
        RadiusEstimate::Fail => {
            return Ok(LocalizationOutcome {
                theta: zeros(data.dim()),
                delta_hat: 0.0,
                failed: true,
                trace,
            });
        }
    };

    let k_wu = warmup_rounds(cfg.big_r, delta_hat);
    trace.push(("warmup".to_string(), rho / 2.0));
    let d = data.dim();
    let n = data.n() as f64;
    let mut theta = zeros(d);
    if k_wu == 0 {
        return Ok(LocalizationOutcome { theta, delta_hat, failed: false, trace });
    }

    let outer = Ball::new(zeros(d), cfg.big_r)?;
    let round_rho = ZcdpBudget::new(rho / (2.0 * k_wu as f64))?;
    let mut rad = cfg.big_r;
    for _ in 0..k_wu {
        let feasible = BallPair {
            outer: outer.clone(),
            inner: Ball::new(theta.clone(), rad)?,
        };
        let eta = rad * (2.0 * d as f64 * k_wu as f64 / (3.0 * rho * n * n)).sqrt();
        theta = dpgd(
            &theta.clone(),
            data,
            round_rho,
            &feasible,
            eta,
            cfg.t_wu,
            cfg.conservative_noise,
            rng,
        )?;
        rad = 0.5 * rad + 12.0 * delta_hat;
    }
    Ok(LocalizationOutcome { theta, delta_hat, failed: false, trace })
}

/// Output of [`loc_dpgd`].
#[derive(Debug, Clone)]
pub struct LocDpgdOutcome {
    /// Fine-tuned estimate; `None` when localization failed.
    pub theta: Option<Vec<f64>>,
    pub delta_hat: f64,
    pub failed: bool,
    /// Budget allocated per stage; sums to the input rho on success.
    pub trace: Vec<(String, f64)>,
}

/// Localized DP-GD: localization with half the budget, then a final DP-GD
/// pass over `{theta in B_d(R): ||theta - theta_0|| <= 25 delta_hat}` with the
/// other half. Step size `50 delta_hat sqrt(d/(6 rho n^2))` and step count
/// `max(1, floor(n^2 rho / (256 d)))` use the full input budget in their
/// formulas.
pub fn loc_dpgd(
    data: &Dataset,
    cfg: &LocalizationConfig,
    rng: &mut NoiseRng,
) -> Result<LocDpgdOutcome> {
    let rho = cfg.rho.rho();
    let loc_cfg = LocalizationConfig {
        rho: ZcdpBudget::new(rho / 2.0)?,
        beta: cfg.beta / 2.0,
        ..*cfg
    };
    let loc = localization(data, &loc_cfg, rng)?;
    let mut trace: Vec<(String, f64)> = loc
        .trace
        .iter()
        .map(|(s, v)| (format!("localization/{s}"), *v))
        .collect();
    if loc.failed {
        return Ok(LocDpgdOutcome {
            theta: None,
            delta_hat: 0.0,
            failed: true,
            trace,
        });
    }

    let n = data.n() as f64;
    let d = data.dim() as f64;
    let eta_ft = 50.0 * loc.delta_hat * (d / (6.0 * rho * n * n)).sqrt();
    let t_ft = ((n * n * rho / (256.0 * d)).floor() as usize).max(1);
    let feasible = BallPair {
        outer: Ball::new(zeros(data.dim()), cfg.big_r)?,
        inner: loc.localized_ball().unwrap(),
    };
    trace.push(("finetune".to_string(), rho / 2.0));
    let theta = dpgd(
        &loc.theta,
        data,
        ZcdpBudget::new(rho / 2.0)?,
        &feasible,
        eta_ft,
        t_ft,
        cfg.conservative_noise,
        rng,
    )?;
    Ok(LocDpgdOutcome {
        theta: Some(theta),
        delta_hat: loc.delta_hat,
        failed: false,
        trace,
    })
}

/// Regularity check used by the utility statements: no single point has 3n/4
/// of the data within distance `r` of it... inverted: returns true when the
/// densest `r`-ball around a data point holds fewer than `3n/4` points.
pub fn spread_regularity(data: &Dataset, r: f64) -> Result<bool> {
    let counts = crate::radius::neighbor_counts(data, r)?;
    let max = counts.into_iter().max().unwrap_or(0);
    Ok((max as f64) < 0.75 * data.n() as f64)
}

/// Quantile-radius helper re-exported for utility assertions.
pub fn data_quantile_radius(data: &Dataset, theta: &[f64], gamma: f64) -> Result<f64> {
    quantile_radius(data, theta, gamma)
}
