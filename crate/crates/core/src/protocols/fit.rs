//! Fit of `Δx₁(t) = √(α + 4u⁴(t+β)²)/(2u)` to a measured dispersion series.
//!
//! Squaring turns the curve into `y = (2uΔx₁)² = c₀ + c₁t + 4u⁴t²` with a
//! known quadratic coefficient, so `(c₀, c₁)` follow from weighted linear
//! least squares and `β = c₁/(8u⁴)`, `α = c₀ - 4u⁴β²`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{DispersionPoint, DispersionSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub u_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Covariance of `(α, β)` propagated from the weighted fit.
    pub param_cov: Matrix2<f64>,
    /// RMS of `Δx̂ᵢ - Δx₁(tᵢ)` in length units.
    pub residual_rms: f64,
}

impl FitOutcome {
    pub fn sigma_alpha(&self) -> f64 {
        self.param_cov[(0, 0)].sqrt()
    }

    pub fn sigma_beta(&self) -> f64 {
        self.param_cov[(1, 1)].sqrt()
    }

    /// `α < 1` cannot come from either state family; it only arises from noise.
    pub fn below_separable_floor(&self, tolerance: f64) -> bool {
        self.alpha < 1.0 - tolerance
    }
}

/// Model curve for given `(α, β)`; `NaN` where the variance would be negative.
pub fn model_dx(u: f64, alpha: f64, beta: f64, t: f64) -> f64 {
    let g = alpha + 4.0 * u.powi(4) * (t + beta).powi(2);
    if g >= 0.0 {
        g.sqrt() / (2.0 * u)
    } else {
        f64::NAN
    }
}

fn residual_rms(u: f64, alpha: f64, beta: f64, points: &[DispersionPoint]) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|p| (p.dx_hat - model_dx(u, alpha, beta, p.t)).powi(2))
        .sum();
    (ss / points.len() as f64).sqrt()
}

/// Weighted linear fit on raw points. Points need not be ordered; fewer than
/// three or nearly coincident times are rejected.
pub fn fit_points(u_hat: f64, points: &[DispersionPoint]) -> Result<FitOutcome> {
    if !(u_hat.is_finite() && u_hat > 0.0) {
        return Err(Error::domain(format!("u_hat must be positive, got {u_hat}")));
    }
    if points.len() < 3 {
        return Err(Error::IllConditioned(format!(
            "need at least 3 measurement times, got {}",
            points.len()
        )));
    }
    let u4 = u_hat.powi(4);
    let weighted = points.iter().all(|p| p.stderr > 0.0);

    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for p in points {
        let y = (2.0 * u_hat * p.dx_hat).powi(2) - 4.0 * u4 * p.t * p.t;
        // σ_y = |dy/dΔx| σ_Δx = 8u²Δx σ_Δx
        let w = if weighted {
            (8.0 * u_hat * u_hat * p.dx_hat * p.stderr).powi(-2)
        } else {
            1.0
        };
        let row = Vector2::new(1.0, p.t);
        normal += w * row * row.transpose();
        rhs += w * y * row;
    }
    let det = normal.determinant();
    if !(det > 1e-12 * normal[(0, 0)] * normal[(1, 1)]) {
        return Err(Error::IllConditioned("measurement times are (nearly) identical".into()));
    }
    let cov_c = normal.try_inverse().ok_or_else(|| Error::IllConditioned("singular normal matrix".into()))?;
    let coef = cov_c * rhs;

    let beta = coef[1] / (8.0 * u4);
    let alpha = coef[0] - 4.0 * u4 * beta * beta;
    let jac = Matrix2::new(1.0, -beta, 0.0, 1.0 / (8.0 * u4));
    let mut param_cov = jac * cov_c * jac.transpose();
    if !weighted {
        // unit weights: scale by the residual variance of the transformed model
        let dof = (points.len() - 2) as f64;
        let s2: f64 = points
            .iter()
            .map(|p| {
                let y = (2.0 * u_hat * p.dx_hat).powi(2) - 4.0 * u4 * p.t * p.t;
                (y - coef[0] - coef[1] * p.t).powi(2)
            })
            .sum::<f64>()
            / dof.max(1.0);
        param_cov *= s2;
    }
    Ok(FitOutcome {
        u_hat,
        alpha,
        beta,
        param_cov,
        residual_rms: residual_rms(u_hat, alpha, beta, points),
    })
}

pub fn fit_alpha_beta(u_hat: f64, series: &DispersionSeries) -> Result<FitOutcome> {
    fit_points(u_hat, series.entries())
}

/// Levenberg–Marquardt on the untransformed curve, started from `start`.
///
/// Weighted by `1/stderr²` when every point carries a positive stderr.
pub fn refine_lm(u: f64, points: &[DispersionPoint], start: (f64, f64)) -> Result<(f64, f64)> {
    let u4 = u.powi(4);
    let weighted = points.iter().all(|p| p.stderr > 0.0);
    let weight = |p: &DispersionPoint| if weighted { p.stderr.powi(-2) } else { 1.0 };
    let cost = |alpha: f64, beta: f64| -> f64 {
        points
            .iter()
            .map(|p| weight(p) * (p.dx_hat - model_dx(u, alpha, beta, p.t)).powi(2))
            .sum()
    };

    let (mut alpha, mut beta) = start;
    let mut current = cost(alpha, beta);
    if !current.is_finite() {
        return Err(Error::domain("starting point gives a negative model variance"));
    }
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for p in points {
            let g = alpha + 4.0 * u4 * (p.t + beta).powi(2);
            let root = g.sqrt();
            let grad = Vector2::new(1.0 / (4.0 * u * root), 2.0 * u.powi(3) * (p.t + beta) / root);
            let r = p.dx_hat - root / (2.0 * u);
            let w = weight(p);
            jtj += w * grad * grad.transpose();
            jtr += w * r * grad;
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            damped[(0, 0)] *= 1.0 + lambda;
            damped[(1, 1)] *= 1.0 + lambda;
            let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = cost(alpha + step[0], beta + step[1]);
            if trial.is_finite() && trial <= current {
                alpha += step[0];
                beta += step[1];
                let improvement = current - trial;
                current = trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step.norm() <= 1e-15 * (1.0 + alpha.abs() + beta.abs())
                    || improvement <= 1e-30 * (1.0 + current)
                {
                    return Ok((alpha, beta));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            return Ok((alpha, beta));
        }
    }
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::CorrelationLength;
    use crate::protocols::laws::{kappa, predicted_dx_entangled, predicted_dx_separable};

    fn exact(times: &[f64], f: impl Fn(f64) -> f64) -> Vec<DispersionPoint> {
        times
            .iter()
            .map(|&t| {
                let dx = f(t);
                DispersionPoint { t, dx_hat: dx, stderr: dx / 141.0, n_samples: 10_000 }
            })
            .collect()
    }

    #[test]
    fn noiseless_separable() {
        let pts = exact(&[0.0, 1.0, 2.0], |t| predicted_dx_separable(1.0, t + 0.5));
        let fit = fit_points(1.0, &pts).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-8);
        assert!((fit.beta - 0.5).abs() < 1e-8);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn noiseless_entangled() {
        let b = CorrelationLength::Finite(1.0);
        let pts = exact(&[0.0, 0.5, 1.0], |t| predicted_dx_entangled(1.01, b, t).unwrap());
        let fit = fit_points(1.01, &pts).unwrap();
        assert!((fit.alpha - kappa(1.01, b).unwrap()).abs() < 1e-6);
        assert!((fit.alpha - 25.628_11).abs() < 1e-5);
        assert!(fit.beta.abs() < 1e-6);
    }

    #[test]
    fn degenerate_times() {
        let pts = exact(&[1.0, 1.0, 1.0], |t| predicted_dx_separable(1.0, t));
        assert!(matches!(fit_points(1.0, &pts), Err(Error::IllConditioned(_))));
        let pts = exact(&[0.0, 1.0], |t| predicted_dx_separable(1.0, t));
        assert!(matches!(fit_points(1.0, &pts), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn unweighted_points() {
        let mut pts = exact(&[0.0, 0.4, 0.9, 1.7], |t| predicted_dx_separable(1.3, t + 0.2));
        for p in &mut pts {
            p.stderr = 0.0;
        }
        let fit = fit_points(1.3, &pts).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-9);
        assert!((fit.beta - 0.2).abs() < 1e-9);
    }

    #[test]
    fn lm_agrees_with_linear_solution() {
        let b = CorrelationLength::Finite(1.0);
        let pts = exact(&[0.0, 0.5, 1.0, 1.5, 2.0], |t| predicted_dx_entangled(1.01, b, t + 0.7).unwrap());
        let lin = fit_points(1.01, &pts).unwrap();
        let (a, be) = refine_lm(1.01, &pts, (lin.alpha * 1.3, lin.beta + 0.4)).unwrap();
        assert!((a - lin.alpha).abs() < 1e-6, "{a} vs {}", lin.alpha);
        assert!((be - lin.beta).abs() < 1e-6);
        let (a, be) = refine_lm(1.01, &pts, (lin.alpha, lin.beta)).unwrap();
        assert!((a - lin.alpha).abs() < 1e-6 && (be - lin.beta).abs() < 1e-6);
    }
}
