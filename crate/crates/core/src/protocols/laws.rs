//! Dispersion laws in terms of the measured momentum spread `u` (`ħ = m = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::CorrelationLength;

fn check_u(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("momentum dispersion u must be positive, got {u}")))
    }
}

/// `(ub)⁻⁴`, the small parameter of every entangled law; requires `ub > 1`.
fn inv_ub4(u: f64, b: CorrelationLength) -> Result<f64> {
    check_u(u)?;
    match b {
        CorrelationLength::Infinite => Ok(0.0),
        CorrelationLength::Finite(b) => {
            let ub = u * b;
            if !(ub > 1.0) {
                return Err(Error::domain(format!("entangled law needs u*b > 1, got {ub}")));
            }
            Ok(ub.powi(4).recip())
        }
    }
}

/// `κ = u⁴b⁴/(u⁴b⁴ - 1)`, the constant term of the entangled variance law.
pub fn kappa(u: f64, b: CorrelationLength) -> Result<f64> {
    Ok(1.0 / (1.0 - inv_ub4(u, b)?))
}

/// `Δx₁(t) = √(1 + 4u⁴t²)/(2u)`.
pub fn predicted_dx_separable(u: f64, t: f64) -> f64 {
    (1.0 + 4.0 * u.powi(4) * t * t).sqrt() / (2.0 * u)
}

/// `Δx₁(t) = √(κ + 4u⁴t²)/(2u)`.
pub fn predicted_dx_entangled(u: f64, b: CorrelationLength, t: f64) -> Result<f64> {
    let k = kappa(u, b)?;
    Ok((k + 4.0 * u.powi(4) * t * t).sqrt() / (2.0 * u))
}

/// `t_c = b²/(2√(u⁴b⁴ - 1))`; tends to `1/(2u²)` for the product state.
pub fn critical_time(u: f64, b: CorrelationLength) -> Result<f64> {
    inv_ub4(u, b)?;
    match b {
        CorrelationLength::Infinite => Ok(0.5 / (u * u)),
        CorrelationLength::Finite(b) => Ok(b * b / (2.0 * ((u * b).powi(4) - 1.0).sqrt())),
    }
}

/// Width `a' = 1/u` of the product state with the same momentum spread.
pub fn mimic_aprime(u: f64) -> Result<f64> {
    check_u(u)?;
    Ok(1.0 / u)
}

/// The only time at which the product state with `a' = 1/u` reproduces the
/// entangled position spread at `t = 0`: `1/(2u²√(u⁴b⁴ - 1))`.
pub fn ambiguity_time(u: f64, b: CorrelationLength) -> Result<f64> {
    inv_ub4(u, b)?;
    match b {
        CorrelationLength::Infinite => Ok(0.0),
        CorrelationLength::Finite(b) => Ok(1.0 / (2.0 * u * u * ((u * b).powi(4) - 1.0).sqrt())),
    }
}

/// Packet width `a` whose state has momentum spread `u` and entanglement
/// length `b`, i.e. the solution of `u = √f₁/a`.
pub fn width_for(u: f64, b: CorrelationLength) -> Result<f64> {
    inv_ub4(u, b)?;
    Ok(1.0 / (u * u - b.inv_sq()).sqrt())
}

/// Crossing of a product-state curve and an entangled curve whose pair was
/// produced `offset` later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Time since the product pair was produced.
    pub lab: f64,
    /// Time since the entangled pair was produced (`lab - offset`).
    pub entangled_clock: f64,
}

/// Solves `1 + 4u⁴t² = κ + 4u⁴(t - offset)²`.
pub fn intersection_time(u: f64, b: CorrelationLength, offset: f64) -> Result<Crossing> {
    let k = kappa(u, b)?;
    if !(offset.is_finite() && offset > 0.0) {
        return Err(Error::domain(format!("offset must be positive, got {offset}")));
    }
    let u4 = u.powi(4);
    let lab = (k - 1.0 + 4.0 * u4 * offset * offset) / (8.0 * u4 * offset);
    Ok(Crossing { lab, entangled_clock: lab - offset })
}

/// `κ - 1 = 1/(u⁴b⁴ - 1)`, evaluated without cancellation.
pub fn kappa_excess(u: f64, b: CorrelationLength) -> Result<f64> {
    let w = inv_ub4(u, b)?;
    Ok(w / (1.0 - w))
}

/// Inverts `κ - 1` for `b`; exact where `α` itself has lost the excess to
/// rounding (large `ub`).
pub fn invert_excess_to_b(excess: f64, u: f64) -> Result<CorrelationLength> {
    check_u(u)?;
    if !(excess >= 0.0) || !excess.is_finite() {
        return Err(Error::domain(format!("alpha - 1 must be >= 0, got {excess}")));
    }
    if excess == 0.0 {
        return Ok(CorrelationLength::Infinite);
    }
    CorrelationLength::finite(((1.0 + excess) / excess).powf(0.25) / u)
}

/// Inverts `α = κ(u, b)` for `b`; `α = 1` maps to the product state.
pub fn invert_alpha_to_b(alpha: f64, u: f64) -> Result<CorrelationLength> {
    check_u(u)?;
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be >= 1, got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(CorrelationLength::Infinite);
    }
    CorrelationLength::finite((alpha / (u.powi(4) * (alpha - 1.0))).powf(0.25))
}
