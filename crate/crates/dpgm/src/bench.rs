//! Synthetic-data benchmark harness: dataset generation, an R-sweep
//! experiment runner comparing the private estimators against the Weiszfeld
//! oracle, and CSV/JSON reporting.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutting_plane::{loc_dp_cutting_plane, CuttingPlaneConfig};
use crate::dpgd::{dpgd, loc_dpgd, BallPair, LocalizationConfig};
use crate::geometry::{gm_objective, weiszfeld_gm, Ball, Dataset};
use crate::inverse_sensitivity::{sinvs_sample, GridSpec};
use crate::linalg::{norm, zeros};
use crate::privacy::{zcdp_from_approx_dp, ApproxDpBudget, NoiseRng, RngSeed, ZcdpBudget};
use crate::{Error, Result};

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "dpgd-baseline")]
    DpgdBaseline,
    #[serde(rename = "loc-dpgd")]
    LocDpgd,
    #[serde(rename = "loc-cutting-plane")]
    LocCuttingPlane,
    #[serde(rename = "sinvs")]
    Sinvs,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DpgdBaseline => "dpgd-baseline",
            Self::LocDpgd => "loc-dpgd",
            Self::LocCuttingPlane => "loc-cutting-plane",
            Self::Sinvs => "sinvs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "dpgd-baseline" => Ok(Self::DpgdBaseline),
            "loc-dpgd" => Ok(Self::LocDpgd),
            "loc-cutting-plane" => Ok(Self::LocCuttingPlane),
            "sinvs" => Ok(Self::Sinvs),
            other => Err(Error::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Output format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

fn default_true() -> bool {
    true
}

/// Full experiment description; also the schema of the optional JSON config
/// file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    /// A-priori radii to sweep.
    pub sweep_r: Vec<f64>,
    /// Discretization / grid-floor parameter.
    pub r: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub beta: f64,
    pub reps: usize,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    /// When false, wall_ms is reported as 0 so that reports are
    /// byte-identical under a fixed seed.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!("n must be >= 10, got {}", self.n)));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        if self.sweep_r.is_empty() {
            return Err(Error::InvalidArgument("sweep_r must be nonempty".into()));
        }
        let min_r = self.sweep_r.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.r > 0.0 && self.r < min_r) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r < min(sweep_r); r={}, min R={min_r}",
                self.r
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("algorithm list is empty".into()));
        }
        self.rho_budget()?;
        if self.algorithms.contains(&Algorithm::LocCuttingPlane) {
            self.approx_budget()?;
        }
        if self.algorithms.contains(&Algorithm::Sinvs) {
            self.epsilon_value()?;
            if self.d > 2 {
                return Err(Error::InvalidArgument(
                    "sinvs supports d <= 2 (grid discretization)".into(),
                ));
            }
        }
        Ok(())
    }

    /// zCDP budget: `rho` directly, or converted from `(epsilon, delta)`.
    pub fn rho_budget(&self) -> Result<ZcdpBudget> {
        if let Some(rho) = self.rho {
            return ZcdpBudget::new(rho);
        }
        match (self.epsilon, self.delta) {
            (Some(e), Some(d)) => Ok(zcdp_from_approx_dp(ApproxDpBudget::new(e, d)?)),
            _ => Err(Error::InvalidArgument(
                "need either rho or both epsilon and delta".into(),
            )),
        }
    }

    /// `(epsilon, delta)` budget, required by the cutting-plane algorithm.
    pub fn approx_budget(&self) -> Result<ApproxDpBudget> {
        match (self.epsilon, self.delta) {
            (Some(e), Some(d)) => ApproxDpBudget::new(e, d),
            _ => Err(Error::InvalidArgument(
                "this algorithm needs epsilon and delta".into(),
            )),
        }
    }

    /// Pure-DP epsilon, required by the inverse-sensitivity sampler.
    pub fn epsilon_value(&self) -> Result<f64> {
        self.epsilon
            .filter(|e| *e > 0.0)
            .ok_or_else(|| Error::InvalidArgument("this algorithm needs epsilon > 0".into()))
    }
}

/// One `(algorithm, R, rep)` execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: String,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub rep: usize,
    pub objective: f64,
    pub oracle_objective: f64,
    pub ratio: f64,
    pub wall_ms: f64,
    pub failed: bool,
    pub seed: u64,
    /// zCDP allocated per stage.
    pub trace: Vec<(String, f64)>,
}

/// Mean/median ratio per `(algorithm, R)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: String,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub mean_ratio: f64,
    pub median_ratio: f64,
}

/// Full experiment output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Synthetic benchmark data: `floor(0.9 n)` points from
/// `N(mu, (0.01)^2 I_d)` with `mu` uniform on the radius-50 sphere, the rest
/// uniform in `B_d(0, 100)`.
pub fn generate_synthetic(n: usize, d: usize, rng: &mut NoiseRng) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("n must be >= 10, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be >= 1".into()));
    }
    let mut mu: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let mn = norm(&mu);
    for x in mu.iter_mut() {
        *x *= 50.0 / mn;
    }
    let cluster = (9 * n) / 10;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..cluster {
        pts.push(mu.iter().map(|m| m + 0.01 * rng.standard_normal()).collect());
    }
    for _ in cluster..n {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let dn = norm(&dir);
        let radius = 100.0 * rng.uniform().powf(1.0 / d as f64);
        pts.push(dir.iter_mut().map(|x| *x * radius / dn).collect());
    }
    Dataset::new(pts)
}

/// DPGD baseline hyperparameters over the full ball: `T` solves
/// `sqrt(2)/sqrt(T) = 16 sqrt(d)/(n sqrt(rho))` and
/// `eta = 2R sqrt(d/(12 rho n^2))`.
pub fn dpgd_baseline_params(n: usize, d: usize, rho: f64, big_r: f64) -> (f64, usize) {
    let t = ((n * n) as f64 * rho / (128.0 * d as f64)).floor() as usize;
    let eta = 2.0 * big_r * (d as f64 / (12.0 * rho * (n * n) as f64)).sqrt();
    (eta, t.max(1))
}

fn run_single(
    algo: Algorithm,
    data: &Dataset,
    big_r: f64,
    cfg: &ExperimentConfig,
    rng: &mut NoiseRng,
) -> Result<(Vec<f64>, bool, Vec<(String, f64)>)> {
    let d = cfg.d;
    match algo {
        Algorithm::DpgdBaseline => {
            let rho = cfg.rho_budget()?;
            let (eta, t) = dpgd_baseline_params(cfg.n, d, rho.rho(), big_r);
            let ball = Ball::new(zeros(d), big_r)?;
            let feasible = BallPair { outer: ball.clone(), inner: ball };
            let theta = dpgd(&zeros(d), data, rho, &feasible, eta, t, false, rng)?;
            Ok((theta, false, vec![("dpgd".to_string(), rho.rho())]))
        }
        Algorithm::LocDpgd => {
            let loc_cfg =
                LocalizationConfig::new(cfg.rho_budget()?, cfg.r, cfg.beta, big_r)?;
            let out = loc_dpgd(data, &loc_cfg, rng)?;
            match out.theta {
                Some(theta) => Ok((theta, false, out.trace)),
                None => Ok((zeros(d), true, out.trace)),
            }
        }
        Algorithm::LocCuttingPlane => {
            let cp_cfg = CuttingPlaneConfig::new(cfg.approx_budget()?);
            let out = loc_dp_cutting_plane(data, &cp_cfg, cfg.r, cfg.beta, big_r, rng)?;
            match out.theta {
                Some(theta) => Ok((theta, false, out.trace)),
                None => Ok((zeros(d), true, out.trace)),
            }
        }
        Algorithm::Sinvs => {
            let eps = cfg.epsilon_value()?;
            let grid = GridSpec::new(big_r, cfg.r, d)?;
            let theta = sinvs_sample(data, eps, &grid, rng)?;
            Ok((theta, false, vec![("sinvs(pure-dp)".to_string(), 0.0)]))
        }
    }
}

/// Runs the full sweep. One dataset per rep is shared by all `(algorithm, R)`
/// cells; reps execute in parallel on disjoint rng streams.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let root = RngSeed::new(cfg.seed);

    let per_rep: Vec<Result<Vec<RunRow>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut data_rng = NoiseRng::new(root.substream("data", rep as u64));
            let data = generate_synthetic(cfg.n, cfg.d, &mut data_rng)?;
            let star = weiszfeld_gm(&data, 1e-8, 200_000)?;
            let oracle = gm_objective(&star, &data)?;
            let mut rows = Vec::new();
            for &big_r in &cfg.sweep_r {
                for &algo in &cfg.algorithms {
                    let label = format!("{}@{big_r}", algo.name());
                    let mut rng = NoiseRng::new(root.substream(&label, rep as u64));
                    let start = Instant::now();
                    let (theta, failed, trace) = run_single(algo, &data, big_r, cfg, &mut rng)?;
                    let wall_ms = if cfg.record_timing {
                        start.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    };
                    let objective = gm_objective(&theta, &data)?;
                    rows.push(RunRow {
                        algorithm: algo.name().to_string(),
                        big_r,
                        rep,
                        objective,
                        oracle_objective: oracle,
                        ratio: objective / oracle,
                        wall_ms,
                        failed,
                        seed: cfg.seed,
                        trace,
                    });
                }
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    // Deterministic order: algorithm (config order), then R (sweep order),
    // then rep.
    let algo_order = |name: &str| {
        cfg.algorithms
            .iter()
            .position(|a| a.name() == name)
            .unwrap_or(usize::MAX)
    };
    let r_order = |v: f64| {
        cfg.sweep_r
            .iter()
            .position(|x| *x == v)
            .unwrap_or(usize::MAX)
    };
    rows.sort_by_key(|row| (algo_order(&row.algorithm), r_order(row.big_r), row.rep));

    let mut aggregates = Vec::new();
    for algo in &cfg.algorithms {
        for &big_r in &cfg.sweep_r {
            let mut ratios: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == algo.name() && r.big_r == big_r)
                .map(|r| r.ratio)
                .collect();
            if ratios.is_empty() {
                continue;
            }
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let median = if ratios.len() % 2 == 1 {
                ratios[ratios.len() / 2]
            } else {
                0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
            };
            aggregates.push(Aggregate {
                algorithm: algo.name().to_string(),
                big_r,
                mean_ratio: mean,
                median_ratio: median,
            });
        }
    }

    Ok(RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        rows,
        aggregates,
    })
}

/// Formats with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Trim trailing zeros but keep at least one digit after the point.
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0');
        let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
        trimmed.to_string()
    } else {
        s
    }
}

/// Writes the per-row table as CSV.
pub fn write_csv<W: Write>(report: &RunReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "algorithm",
        "R",
        "rep",
        "objective",
        "oracle_objective",
        "ratio",
        "wall_ms",
        "failed",
        "seed",
    ])?;
    for row in &report.rows {
        wtr.write_record([
            row.algorithm.clone(),
            sig12(row.big_r),
            row.rep.to_string(),
            sig12(row.objective),
            sig12(row.oracle_objective),
            sig12(row.ratio),
            sig12(row.wall_ms),
            row.failed.to_string(),
            row.seed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serializes the full report (config echo, rows, aggregates) as JSON with a
/// trailing newline.
pub fn to_json_string(report: &RunReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes the report to `path` in the requested format.
pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    match format {
        ReportFormat::Csv => write_csv(report, &mut file)?,
        ReportFormat::Json => file.write_all(to_json_string(report)?.as_bytes())?,
    }
    Ok(())
}
