//! The two-particle Gaussian family and its closed-form single-particle
//! statistics.
//!
//! The state at `t = 0` is
//!
//! ```text
//! Ψ(x₁,x₂) = √(2/πa²) f₂^{1/4} e^{i k_c (x₁-x₂)} exp[-(f₁/a²)(x₁²+x₂²) + (2/b²) x₁x₂]
//! ```
//!
//! with `f_n = 1 + n a²/b²`. Particle 1 travels towards `+k_c`, particle 2
//! towards `-k_c`. Every quantity below is written in terms of `1/b²`, so the
//! product state `b = ∞` is evaluated exactly rather than as a limit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reduced Planck constant and particle mass. Both default to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::domain(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }
}

/// A positive length that may be infinite.
///
/// Used for the entanglement length `b` (infinite for the product state) and
/// for its estimate recovered by the protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationLength {
    Finite(f64),
    Infinite,
}

impl CorrelationLength {
    pub fn finite(b: f64) -> Result<Self> {
        if b.is_infinite() && b > 0.0 {
            return Ok(Self::Infinite);
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("b must be positive, got {b}")));
        }
        Ok(Self::Finite(b))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// `1/b²`, exactly zero for the infinite case.
    pub fn inv_sq(&self) -> f64 {
        match *self {
            Self::Finite(b) => 1.0 / (b * b),
            Self::Infinite => 0.0,
        }
    }

    /// The value as an `f64` (`+∞` for the infinite case).
    pub fn value(&self) -> f64 {
        match *self {
            Self::Finite(b) => b,
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for CorrelationLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for CorrelationLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(Self::Infinite),
            _ => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::domain(format!("cannot parse length `{s}`")))?;
                Self::finite(v)
            }
        }
    }
}

impl Serialize for CorrelationLength {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Finite(b) => serializer.serialize_f64(b),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for CorrelationLength {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Self::finite(v),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Parameters of the bipartite Gaussian family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub constants: PhysicalConstants,
    /// Packet width.
    pub a: f64,
    /// Central wavenumber of particle 1 (particle 2 is centred at `-k_c`).
    pub k_c: f64,
    /// Entanglement length.
    pub b: CorrelationLength,
}

impl PairParams {
    pub fn new(constants: PhysicalConstants, a: f64, k_c: f64, b: CorrelationLength) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::domain(format!("a must be positive, got {a}")));
        }
        if !k_c.is_finite() {
            return Err(Error::domain("k_c must be finite"));
        }
        if let CorrelationLength::Finite(v) = b {
            CorrelationLength::finite(v)?;
        }
        Ok(Self { constants, a, k_c, b })
    }

    /// `ħ = m = 1`, `k_c = 0`.
    pub fn unit(a: f64, b: CorrelationLength) -> Result<Self> {
        Self::new(PhysicalConstants::default(), a, 0.0, b)
    }

    pub fn with_kc(mut self, k_c: f64) -> Self {
        self.k_c = k_c;
        self
    }

    pub fn is_separable(&self) -> bool {
        self.b.is_infinite()
    }

    pub fn hbar(&self) -> f64 {
        self.constants.hbar
    }

    pub fn mass(&self) -> f64 {
        self.constants.mass
    }

    /// `a²/b²`.
    pub fn ratio_sq(&self) -> f64 {
        self.a * self.a * self.b.inv_sq()
    }
}

/// A normal density `N(mean, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDensity {
    pub mean: f64,
    pub sigma: f64,
}

impl GaussianDensity {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mean, sigma })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
    }
}

/// `f_n = 1 + n a²/b²` for `n ∈ {1, 2}`.
pub fn factor_f(n: u8, params: &PairParams) -> Result<f64> {
    match n {
        1 | 2 => Ok(1.0 + f64::from(n) * params.ratio_sq()),
        _ => Err(Error::domain(format!("f_n is defined for n in {{1,2}}, got {n}"))),
    }
}

fn f1(params: &PairParams) -> f64 {
    1.0 + params.ratio_sq()
}

fn f2(params: &PairParams) -> f64 {
    1.0 + 2.0 * params.ratio_sq()
}

/// Spreading function `F(t) = 4ħ²t²/(m²a⁴)`.
pub fn spreading_f(t: f64, params: &PairParams) -> f64 {
    let PhysicalConstants { hbar, mass } = params.constants;
    let a2 = params.a * params.a;
    4.0 * hbar * hbar * t * t / (mass * mass * a2 * a2)
}

/// Group velocity `ħk_c/m`.
pub fn drift_velocity(params: &PairParams) -> f64 {
    params.hbar() * params.k_c / params.mass()
}

/// Position dispersion of particle 1 at time `t`.
pub fn dx1(t: f64, params: &PairParams) -> f64 {
    let spread = spreading_f(t, params);
    if params.is_separable() {
        0.5 * params.a * (1.0 + spread).sqrt()
    } else {
        let (f1, f2) = (f1(params), f2(params));
        0.5 * params.a * ((f1 / f2) * (1.0 + f2 * spread)).sqrt()
    }
}

/// Momentum dispersion of particle 1; constant under free evolution.
pub fn dp1(params: &PairParams) -> f64 {
    let base = params.hbar() / params.a;
    if params.is_separable() {
        base
    } else {
        base * f1(params).sqrt()
    }
}

/// Position density of particle 1 at time `t`.
pub fn marginal_position(t: f64, params: &PairParams) -> GaussianDensity {
    GaussianDensity {
        mean: drift_velocity(params) * t,
        sigma: dx1(t, params),
    }
}

/// Momentum density of particle 1 (in units of momentum, `p = ħk`).
pub fn marginal_momentum(params: &PairParams) -> GaussianDensity {
    GaussianDensity {
        mean: params.hbar() * params.k_c,
        sigma: dp1(params),
    }
}

/// Single-particle packet `(2/πa²)^{1/4} e^{±ik_c x} e^{-x²/a²}`; `sign` is +1
/// for particle 1 and -1 for particle 2.
pub fn packet_t0(x: f64, sign: f64, params: &PairParams) -> Complex64 {
    let a2 = params.a * params.a;
    let norm = (2.0 / (PI * a2)).powf(0.25);
    Complex64::from_polar(norm * (-x * x / a2).exp(), sign * params.k_c * x)
}

/// Two-particle amplitude `Ψ(x₁, x₂, 0)`.
pub fn amplitude_t0(x1: f64, x2: f64, params: &PairParams) -> Complex64 {
    match params.b {
        CorrelationLength::Infinite => packet_t0(x1, 1.0, params) * packet_t0(x2, -1.0, params),
        CorrelationLength::Finite(_) => {
            let a2 = params.a * params.a;
            let norm = (2.0 / (PI * a2)).sqrt() * f2(params).powf(0.25);
            let exponent =
                -(f1(params) / a2) * (x1 * x1 + x2 * x2) + 2.0 * params.b.inv_sq() * x1 * x2;
            Complex64::from_polar(norm * exponent.exp(), params.k_c * (x1 - x2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: f64, b: f64) -> PairParams {
        PairParams::unit(a, CorrelationLength::finite(b).unwrap()).unwrap()
    }

    fn sep(a: f64) -> PairParams {
        PairParams::unit(a, CorrelationLength::Infinite).unwrap()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn f_factors() {
        assert_eq!(factor_f(2, &sep(1.0)).unwrap(), 1.0);
        assert_eq!(factor_f(1, &p(1.0, 2.0)).unwrap(), 1.25);
        assert_eq!(factor_f(2, &p(1.0, 2.0)).unwrap(), 1.5);
        assert!(factor_f(3, &p(1.0, 2.0)).is_err());
    }

    #[test]
    fn spreading_and_drift() {
        assert_eq!(spreading_f(0.0, &p(3.0, 1.0)), 0.0);
        assert_eq!(spreading_f(1.0, &sep(1.0)), 4.0);
        assert_eq!(spreading_f(2.0, &sep(1.0)), 16.0);
        assert_eq!(drift_velocity(&sep(1.0)), 0.0);
        assert_eq!(drift_velocity(&sep(1.0).with_kc(1.0)), 1.0);
        let heavy = PairParams::new(
            PhysicalConstants::new(1.0, 2.0).unwrap(),
            1.0,
            2.0,
            CorrelationLength::Infinite,
        )
        .unwrap();
        assert_eq!(drift_velocity(&heavy), 1.0);
    }

    #[test]
    fn dispersions() {
        assert_eq!(dx1(0.0, &sep(1.0)), 0.5);
        assert!(close(dx1(0.0, &p(1.0, 2.0)), 0.456_435_464_587_638, 1e-12));
        assert!(close(dx1(1.0, &p(1.0, 2.0)), 1.207_614_728_849_12, 1e-12));
        assert_eq!(dp1(&sep(1.0)), 1.0);
        assert_eq!(dp1(&sep(2.0)), 0.5);
        assert!(close(dp1(&p(1.0, 2.0)), 1.25f64.sqrt(), 1e-15));
    }

    #[test]
    fn marginals() {
        let m = marginal_position(0.0, &sep(1.0));
        assert_eq!((m.mean, m.sigma), (0.0, 0.5));
        let m = marginal_position(1.0, &sep(1.0).with_kc(1.0));
        assert_eq!(m.mean, 1.0);
        assert!(close(m.sigma, 5f64.sqrt() / 2.0, 1e-15));
        let m = marginal_momentum(&p(1.0, 2.0));
        assert!(close(m.sigma, 1.118_033_988_749_895, 1e-12));
        let m = marginal_momentum(&sep(2.0).with_kc(3.0));
        assert_eq!((m.mean, m.sigma), (3.0, 0.5));
    }

    #[test]
    fn amplitude_peak_and_factorization() {
        let peak = amplitude_t0(0.0, 0.0, &p(1.0, 2.0)).norm_sqr();
        assert!(close(peak, 2.0 / PI * 1.5f64.sqrt(), 1e-14));
        assert!(close(peak, 0.779_696_801_233_676, 1e-12));
        let s = sep(1.3).with_kc(0.7);
        for i in -10..=10 {
            for j in -10..=10 {
                let (x1, x2) = (0.31 * i as f64, 0.27 * j as f64);
                let lhs = amplitude_t0(x1, x2, &s) * amplitude_t0(0.0, 0.0, &s);
                let rhs = amplitude_t0(x1, 0.0, &s) * amplitude_t0(0.0, x2, &s);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn amplitude_normalized_by_quadrature() {
        // Midpoint rule on [-10, 10]², 800² cells; spectrally accurate here.
        let params = p(1.0, 2.0);
        let n = 800;
        let h = 20.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x1 = -10.0 + (i as f64 + 0.5) * h;
            for j in 0..n {
                let x2 = -10.0 + (j as f64 + 0.5) * h;
                total += amplitude_t0(x1, x2, &params).norm_sqr();
            }
        }
        assert!(close(total * h * h, 1.0, 1e-8));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PairParams::unit(0.0, CorrelationLength::Infinite).is_err());
        assert!(PairParams::unit(-1.0, CorrelationLength::Infinite).is_err());
        assert!(CorrelationLength::finite(0.0).is_err());
        assert!(CorrelationLength::finite(f64::NAN).is_err());
        assert_eq!("inf".parse::<CorrelationLength>().unwrap(), CorrelationLength::Infinite);
        assert_eq!("2".parse::<CorrelationLength>().unwrap(), CorrelationLength::Finite(2.0));
        assert!("-2".parse::<CorrelationLength>().is_err());
    }

    #[test]
    fn serde_length() {
        let v = serde_json::to_string(&CorrelationLength::Infinite).unwrap();
        assert_eq!(v, "\"inf\"");
        let b: CorrelationLength = serde_json::from_str("2.5").unwrap();
        assert_eq!(b, CorrelationLength::Finite(2.5));
    }

    #[test]
    fn separable_limit_continuity() {
        let far = p(1.0, 1e6);
        let exact = sep(1.0);
        for k in 0..50 {
            let t = 0.2 * k as f64;
            let rel = (dx1(t, &far) - dx1(t, &exact)).abs() / dx1(t, &exact);
            assert!(rel < 1e-10);
        }
        assert!((dp1(&far) - dp1(&exact)).abs() / dp1(&exact) < 1e-10);
    }

    proptest! {
        #[test]
        fn uncertainty_product(a in 0.05f64..20.0, b in 0.05f64..50.0, hbar in 0.1f64..5.0) {
            let c = PhysicalConstants::new(hbar, 1.0).unwrap();
            let ent = PairParams::new(c, a, 0.0, CorrelationLength::Finite(b)).unwrap();
            let f1 = factor_f(1, &ent).unwrap();
            let f2 = factor_f(2, &ent).unwrap();
            let prod = dx1(0.0, &ent) * dp1(&ent);
            prop_assert!((prod - 0.5 * hbar * f1 / f2.sqrt()).abs() <= 1e-12 * prod);
            prop_assert!(prod > 0.5 * hbar);
            let s = PairParams::new(c, a, 0.0, CorrelationLength::Infinite).unwrap();
            prop_assert!((dx1(0.0, &s) * dp1(&s) - 0.5 * hbar).abs() <= 1e-14 * hbar);
        }

        #[test]
        fn f_ordering(a in 0.01f64..100.0, b in 0.01f64..100.0) {
            let q = p(a, b);
            let (f1, f2) = (factor_f(1, &q).unwrap(), factor_f(2, &q).unwrap());
            prop_assert!(1.0 < f1 && f1 < f2);
            prop_assert!(((f2 - f1) - a * a / (b * b)).abs() <= 1e-12 * f2);
        }

        #[test]
        fn monotone_spreading(a in 0.1f64..10.0, b in 0.1f64..10.0, t in 0.001f64..20.0, dt in 1e-3f64..1.0) {
            for q in [p(a, b), sep(a)] {
                prop_assert!(dx1(t + dt, &q) > dx1(t, &q));
            }
        }
    }
}
