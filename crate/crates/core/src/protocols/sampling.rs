//! Born-rule sampling of sub-ensembles and dispersion estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HiddenScenario;
use crate::error::{Error, Result};
use crate::gaussian::{marginal_momentum, marginal_position, GaussianDensity};

/// Deterministic generator for sub-ensemble `ensemble` of trial `trial`.
///
/// Streams depend only on `(seed, trial, ensemble)`, never on the order in
/// which trials are executed.
pub fn substream(seed: u64, trial: u32, ensemble: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(trial) << 32) | u64::from(ensemble));
    rng
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("a sub-ensemble needs at least 2 samples, got {n}")));
    }
    Ok(())
}

fn draw<R: Rng + ?Sized>(density: GaussianDensity, n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(density.mean, density.sigma).expect("sigma > 0");
    normal.sample_iter(rng).take(n).collect()
}

/// `n` momentum measurements on particle 1.
pub fn sample_momentum<R: Rng + ?Sized>(
    scenario: &HiddenScenario,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_count(n)?;
    Ok(draw(marginal_momentum(&scenario.params), n, rng))
}

/// `n` position measurements on particle 1, `t_meas` after the observer's
/// first measurement (the pair is `t0 + t_meas` old).
pub fn sample_position<R: Rng + ?Sized>(
    scenario: &HiddenScenario,
    t_meas: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_count(n)?;
    if !(t_meas >= 0.0) {
        return Err(Error::domain(format!("measurement time must be >= 0, got {t_meas}")));
    }
    Ok(draw(marginal_position(t_meas + scenario.t0, &scenario.params), n, rng))
}

/// Sample standard deviation with its Gaussian-theory standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimate {
    pub dx_hat: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl DispersionEstimate {
    /// Standard error of a standard deviation estimated from `n` normal draws.
    pub fn gaussian_stderr(sigma: f64, n: usize) -> f64 {
        sigma / (2.0 * (n as f64 - 1.0)).sqrt()
    }
}

pub fn estimate_dispersion(samples: &[f64]) -> Result<DispersionEstimate> {
    let n = samples.len();
    check_count(n)?;
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    let var = ss / (n as f64 - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate("all samples are equal".into()));
    }
    let dx_hat = var.sqrt();
    Ok(DispersionEstimate {
        dx_hat,
        stderr: DispersionEstimate::gaussian_stderr(dx_hat, n),
        n_samples: n,
    })
}
