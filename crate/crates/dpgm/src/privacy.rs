//! Privacy budgets, zCDP/(epsilon, delta) conversions, calibrated noise, and
//! the sparse-vector AboveThreshold scan.
//!
//! All samplers draw from an explicit [`NoiseRng`] handle; there is no hidden
//! global state. Natural logarithms throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::{Error, Result};

/// Zero-concentrated differential privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZcdpBudget {
    rho: f64,
}

impl ZcdpBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be > 0, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Splits off `fraction` of this budget, e.g. `split(0.5)` for half.
    pub fn split(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split fraction must be in (0, 1], got {fraction}"
            )));
        }
        Self::new(self.rho * fraction)
    }
}

/// Approximate differential privacy budget (epsilon, delta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDpBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl ApproxDpBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }
}

/// zCDP budget sufficient for (epsilon, delta)-DP:
/// `rho = epsilon^2 / (4 ln(1/delta) + 4 epsilon)`.
pub fn zcdp_from_approx_dp(budget: ApproxDpBudget) -> ZcdpBudget {
    let eps = budget.epsilon;
    let rho = eps * eps / (4.0 * (1.0 / budget.delta).ln() + 4.0 * eps);
    ZcdpBudget { rho }
}

/// (epsilon, delta)-DP guarantee implied by rho-zCDP:
/// `epsilon = rho + 2 sqrt(rho ln(1/delta))`.
pub fn approx_dp_from_zcdp(rho: f64, delta: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be >= 0, got {rho}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// zCDP composes additively.
pub fn compose_zcdp(budgets: &[ZcdpBudget]) -> Result<ZcdpBudget> {
    if budgets.is_empty() {
        return Err(Error::InvalidArgument("cannot compose an empty budget list".into()));
    }
    ZcdpBudget::new(budgets.iter().map(|b| b.rho).sum())
}

/// Seed plus stream id for reproducible, independently addressable RNG
/// streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Derives an independent stream for `(label, index)`, e.g. one per
    /// algorithm stage and trial. FNV-1a over the label keeps ids stable
    /// across runs without any global registry.
    pub fn substream(&self, label: &str, index: u64) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= index;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        Self {
            seed: self.seed,
            stream: self.stream ^ h,
        }
    }
}

/// Seeded noise source. The `noise_disabled` test hook makes every sampler
/// return its deterministic center; it is reachable only through this
/// constructor, never through the benchmark CLI.
#[derive(Debug, Clone)]
pub struct NoiseRng {
    rng: ChaCha12Rng,
    noise_disabled: bool,
}

impl NoiseRng {
    pub fn new(seed: RngSeed) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.seed);
        rng.set_stream(seed.stream);
        Self {
            rng,
            noise_disabled: false,
        }
    }

    /// Test-only construction with all noise forced to zero.
    pub fn new_noise_disabled(seed: RngSeed) -> Self {
        let mut out = Self::new(seed);
        out.noise_disabled = true;
        out
    }

    pub fn noise_disabled(&self) -> bool {
        self.noise_disabled
    }

    /// Uniform variate in [0, 1); unaffected by the noise hook (used for
    /// non-privacy randomness such as synthetic data and volume sampling).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Standard normal via Box-Muller; unaffected by the noise hook.
    pub fn standard_normal(&mut self) -> f64 {
        // Avoid ln(0).
        let u1: f64 = loop {
            let u = self.rng.gen::<f64>();
            if u > 0.0 {
                break u;
            }
        };
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// I.i.d. `N(0, sigma^2)` coordinates.
pub fn gaussian_vector(sigma: f64, dim: usize, rng: &mut NoiseRng) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    if rng.noise_disabled {
        return Ok(vec![0.0; dim]);
    }
    Ok((0..dim).map(|_| sigma * rng.standard_normal()).collect())
}

/// `Laplace(0, scale)` variate via inverse CDF.
pub fn laplace_scalar(scale: f64, rng: &mut NoiseRng) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
    }
    if rng.noise_disabled {
        return Ok(0.0);
    }
    // u uniform in (-1/2, 1/2); X = -scale * sgn(u) * ln(1 - 2|u|).
    let u = rng.uniform() - 0.5;
    Ok(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// Sparse-vector scan for sensitivity-3 query families.
///
/// Threshold noise `Lap(6/sqrt(2 rho))`, per-query noise `Lap(12/sqrt(2 rho))`;
/// returns the first index whose noisy query clears the noisy threshold,
/// `None` if no query does. With noise disabled this is a plain
/// first-exceedance scan.
pub fn above_threshold(
    queries: &[f64],
    rho: ZcdpBudget,
    threshold: f64,
    rng: &mut NoiseRng,
) -> Result<Option<usize>> {
    let base = (2.0 * rho.rho()).sqrt();
    if rng.noise_disabled {
        return Ok(queries.iter().position(|&q| q > threshold));
    }
    let noisy_threshold = threshold + laplace_scalar(6.0 / base, rng)?;
    for (i, &q) in queries.iter().enumerate() {
        if q + laplace_scalar(12.0 / base, rng)? > noisy_threshold {
            return Ok(Some(i));
        }
    }
    Ok(None)
}
