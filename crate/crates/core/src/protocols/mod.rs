//! Local classification of the pair by an observer holding only particle 1.
//!
//! The observer measures the momentum spread `u` of a sub-ensemble and the
//! position spread of further sub-ensembles at chosen times. With a known
//! production time a single position measurement decides (protocol 1);
//! without it, a two-parameter curve fit is required (protocol 2).
//! `ħ = m = 1` throughout.

pub mod fit;
pub mod laws;
pub mod sampling;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::gaussian::{dx1, CorrelationLength, PairParams};

pub use fit::{fit_alpha_beta, fit_points, refine_lm, FitOutcome};
pub use laws::{
    ambiguity_time, critical_time, intersection_time, invert_alpha_to_b, invert_excess_to_b, kappa,
    kappa_excess, mimic_aprime, predicted_dx_entangled, predicted_dx_separable, width_for, Crossing,
};
pub use sampling::{estimate_dispersion, sample_momentum, sample_position, substream, DispersionEstimate};

/// The source's true state and the unknown delay between production and the
/// observer's first measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenScenario {
    pub params: PairParams,
    pub t0: f64,
}

impl HiddenScenario {
    pub fn new(params: PairParams, t0: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::domain(format!("t0 must be >= 0, got {t0}")));
        }
        Ok(Self { params, t0 })
    }

    /// Scenario with momentum spread `u` and entanglement length `b`
    /// (`ħ = m = 1`, `k_c = 0`).
    pub fn from_u_b(u: f64, b: CorrelationLength, t0: f64) -> Result<Self> {
        let a = width_for(u, b)?;
        Self::new(PairParams::unit(a, b)?, t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub t: f64,
    pub dx_hat: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Position dispersions measured at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DispersionPoint>", into = "Vec<DispersionPoint>")]
pub struct DispersionSeries {
    entries: Vec<DispersionPoint>,
}

impl DispersionSeries {
    pub fn new(entries: Vec<DispersionPoint>) -> Result<Self> {
        for w in entries.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::domain("series times must be strictly increasing"));
            }
        }
        for p in &entries {
            if !(p.dx_hat > 0.0) {
                return Err(Error::domain(format!("dispersion must be positive, got {}", p.dx_hat)));
            }
            if p.n_samples < 2 {
                return Err(Error::domain("each point needs at least 2 samples"));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[DispersionPoint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TryFrom<Vec<DispersionPoint>> for DispersionSeries {
    type Error = Error;

    fn try_from(v: Vec<DispersionPoint>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DispersionSeries> for Vec<DispersionPoint> {
    fn from(s: DispersionSeries) -> Self {
        s.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Separable,
    Entangled,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub classification: Classification,
    /// Finite exactly when the classification is `Entangled`.
    pub b_hat: CorrelationLength,
    /// Normal-approximation probability mass supporting the verdict.
    pub confidence: f64,
}

impl Verdict {
    fn separable(confidence: f64) -> Self {
        Self { classification: Classification::Separable, b_hat: CorrelationLength::Infinite, confidence }
    }

    fn inconclusive() -> Self {
        Self { classification: Classification::Inconclusive, b_hat: CorrelationLength::Infinite, confidence: 0.0 }
    }

    fn entangled(b_hat: CorrelationLength, confidence: f64) -> Self {
        match b_hat {
            CorrelationLength::Infinite => Self::separable(confidence),
            _ => Self { classification: Classification::Entangled, b_hat, confidence },
        }
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn check_threshold(sigmas: f64) -> Result<()> {
    if sigmas.is_finite() && sigmas >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold must be a non-negative number of sigmas, got {sigmas}")))
    }
}

/// Known-origin test: one dispersion measured at a known time since
/// production is compared with the product-state prediction.
pub fn protocol1(u: f64, measurement: &DispersionPoint, tolerance_sigmas: f64) -> Result<Verdict> {
    check_threshold(tolerance_sigmas)?;
    let t = measurement.t;
    let predicted = predicted_dx_separable(u, t);
    let z = if measurement.stderr > 0.0 {
        (measurement.dx_hat - predicted) / measurement.stderr
    } else if measurement.dx_hat == predicted {
        0.0
    } else {
        (measurement.dx_hat - predicted).signum() * f64::INFINITY
    };
    if z.abs() <= tolerance_sigmas {
        return Ok(Verdict::separable(normal_cdf(tolerance_sigmas - z.abs())));
    }
    let alpha = (2.0 * u * measurement.dx_hat).powi(2) - 4.0 * u.powi(4) * t * t;
    if alpha < 1.0 {
        return Ok(Verdict::inconclusive());
    }
    Ok(Verdict::entangled(invert_alpha_to_b(alpha, u)?, normal_cdf(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol2Outcome {
    pub verdict: Verdict,
    pub fit: FitOutcome,
    /// `σ_α` including the propagated uncertainty of `u`.
    pub sigma_alpha: f64,
    /// Estimated delay since production (the fitted `β`).
    pub t0_hat: f64,
}

/// Unknown-origin test: fits `(α, β)` and z-tests `α - 1`.
///
/// The fixed `t²` coefficient `4û⁴` ignores the spread of `û`; its first-order
/// effect on `α` is added to `σ_α` by differentiating the fit in `û`.
pub fn protocol2(
    series: &DispersionSeries,
    momentum: &DispersionEstimate,
    threshold_sigmas: f64,
) -> Result<Protocol2Outcome> {
    check_threshold(threshold_sigmas)?;
    let u = momentum.dx_hat;
    let fit = fit_alpha_beta(u, series)?;
    let mut var_alpha = fit.param_cov[(0, 0)];
    if momentum.stderr > 0.0 {
        let h = 1e-6 * u;
        let up = fit_alpha_beta(u + h, series)?.alpha;
        let down = fit_alpha_beta(u - h, series)?.alpha;
        let slope = (up - down) / (2.0 * h);
        var_alpha += (slope * momentum.stderr).powi(2);
    }
    let sigma_alpha = var_alpha.sqrt();
    let excess = fit.alpha - 1.0;
    let z = if sigma_alpha > 0.0 { excess / sigma_alpha } else { excess.signum() * f64::INFINITY };

    let verdict = if excess > threshold_sigmas * sigma_alpha {
        Verdict::entangled(invert_excess_to_b(excess, u)?, normal_cdf(z))
    } else if excess < -threshold_sigmas * sigma_alpha {
        Verdict::inconclusive()
    } else {
        Verdict::separable(normal_cdf(threshold_sigmas - z))
    };
    Ok(Protocol2Outcome { verdict, fit, sigma_alpha, t0_hat: fit.beta })
}

/// Measurements gathered by the observer in one campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub momentum: DispersionEstimate,
    pub series: DispersionSeries,
}

/// Samples one momentum sub-ensemble (ensemble 0) and one position
/// sub-ensemble per time (ensembles 1..), all of size `n`.
pub fn simulate_campaign(
    scenario: &HiddenScenario,
    times: &[f64],
    n: usize,
    seed: u64,
    trial: u32,
) -> Result<Campaign> {
    let mut rng = substream(seed, trial, 0);
    let momentum = estimate_dispersion(&sample_momentum(scenario, n, &mut rng)?)?;
    let entries = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut rng = substream(seed, trial, i as u32 + 1);
            let e = estimate_dispersion(&sample_position(scenario, t, n, &mut rng)?)?;
            Ok(DispersionPoint { t, dx_hat: e.dx_hat, stderr: e.stderr, n_samples: n })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Campaign { momentum, series: DispersionSeries::new(entries)? })
}

/// Exact dispersions with the standard errors `n` samples would give.
pub fn noiseless_campaign(scenario: &HiddenScenario, times: &[f64], n: usize) -> Result<Campaign> {
    if n < 2 {
        return Err(Error::domain("a sub-ensemble needs at least 2 samples"));
    }
    let u = crate::gaussian::dp1(&scenario.params);
    let momentum = DispersionEstimate {
        dx_hat: u,
        stderr: DispersionEstimate::gaussian_stderr(u, n),
        n_samples: n,
    };
    let entries = times
        .iter()
        .map(|&t| {
            let dx = dx1(t + scenario.t0, &scenario.params);
            DispersionPoint { t, dx_hat: dx, stderr: DispersionEstimate::gaussian_stderr(dx, n), n_samples: n }
        })
        .collect();
    Ok(Campaign { momentum, series: DispersionSeries::new(entries)? })
}

/// `count` uniformly spaced times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::domain("uniform grid needs count >= 2 and a positive finite end"));
    }
    Ok((0..count).map(|i| t_end * i as f64 / (count - 1) as f64).collect())
}

/// Runs `trials` independent seeded campaigns of protocol 2. Trials are
/// spread over worker threads; results are ordered by trial index.
pub fn run_protocol2_trials(
    scenario: &HiddenScenario,
    times: &[f64],
    n: usize,
    threshold_sigmas: f64,
    seed: u64,
    trials: u32,
) -> Result<Vec<Protocol2Outcome>> {
    let one = |trial: u32| -> Result<Protocol2Outcome> {
        let c = simulate_campaign(scenario, times, n, seed, trial)?;
        protocol2(&c.series, &c.momentum, threshold_sigmas)
    };
    parallel_map(trials, one)
}

/// Runs `trials` seeded single-measurement campaigns of protocol 1 at
/// `t_meas` after the first measurement; the origin is known to the observer.
pub fn run_protocol1_trials(
    scenario: &HiddenScenario,
    t_meas: f64,
    n: usize,
    tolerance_sigmas: f64,
    seed: u64,
    trials: u32,
) -> Result<Vec<Verdict>> {
    let one = |trial: u32| -> Result<Verdict> {
        let c = simulate_campaign(scenario, &[t_meas], n, seed, trial)?;
        let mut point = c.series.entries()[0];
        point.t += scenario.t0;
        protocol1(c.momentum.dx_hat, &point, tolerance_sigmas)
    };
    parallel_map(trials, one)
}

fn parallel_map<T: Send>(count: u32, f: impl Fn(u32) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1) as usize);
    let chunk = (count as usize).div_ceil(workers.max(1)).max(1);
    let f = &f;
    let mut out: Vec<Result<T>> = Vec::with_capacity(count as usize);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .step_by(chunk)
            .map(|start| {
                let end = (start as usize + chunk).min(count as usize) as u32;
                scope.spawn(move || (start..end).map(f).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("trial worker panicked"));
        }
    });
    out.into_iter().collect()
}
