//! Correlation matrix, Simon separability invariant, standard form and
//! entanglement of formation.
//!
//! The correlation matrix uses the symmetrized convention
//! `γ_ij = ⟨R_i R_j + R_j R_i⟩ - 2⟨R_i⟩⟨R_j⟩` over `R = (X₁, P₁, X₂, P₂)`,
//! so a coherent state has `det A = ħ²`.

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{factor_f, PairParams};

fn j2() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// 4×4 correlation matrix in block form `[[A, C], [Cᵀ, B]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix4 {
    /// Particle 1 block.
    pub block_a: Matrix2<f64>,
    /// Particle 2 block.
    pub block_b: Matrix2<f64>,
    /// Cross correlations between particle 1 (rows) and particle 2 (columns).
    pub block_c: Matrix2<f64>,
}

impl CovMatrix4 {
    pub fn new(block_a: Matrix2<f64>, block_b: Matrix2<f64>, block_c: Matrix2<f64>) -> Self {
        Self { block_a, block_b, block_c }
    }

    pub fn from_full(m: &Matrix4<f64>) -> Self {
        Self {
            block_a: m.fixed_view::<2, 2>(0, 0).into_owned(),
            block_b: m.fixed_view::<2, 2>(2, 2).into_owned(),
            block_c: m.fixed_view::<2, 2>(0, 2).into_owned(),
        }
    }

    pub fn full(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.block_a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.block_b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.block_c);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.block_c.transpose());
        m
    }

    /// Applies the local symplectic scaling `diag(s₁, 1/s₁, s₂, 1/s₂)`.
    pub fn scaled(&self, s1: f64, s2: f64) -> Self {
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(s1, 1.0 / s1, s2, 1.0 / s2));
        Self::from_full(&(d * self.full() * d))
    }

    /// Smallest eigenvalue of `γ + iħΩ`, computed from its real 8×8 embedding.
    pub fn uncertainty_margin(&self, hbar: f64) -> f64 {
        let gamma = self.full();
        let mut omega = Matrix4::zeros();
        omega.fixed_view_mut::<2, 2>(0, 0).copy_from(&j2());
        omega.fixed_view_mut::<2, 2>(2, 2).copy_from(&j2());
        let y = omega * hbar;
        let mut big = SMatrix::<f64, 8, 8>::zeros();
        big.fixed_view_mut::<4, 4>(0, 0).copy_from(&gamma);
        big.fixed_view_mut::<4, 4>(4, 4).copy_from(&gamma);
        big.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-y));
        big.fixed_view_mut::<4, 4>(4, 0).copy_from(&y);
        SymmetricEigen::new(big).eigenvalues.min()
    }

    /// Symmetric, positive-definite diagonal blocks and `γ + iħΩ ≥ 0`.
    pub fn check_physical(&self, hbar: f64) -> Result<()> {
        let full = self.full();
        let scale = full.abs().max().max(hbar);
        if (full - full.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::domain("correlation matrix is not symmetric"));
        }
        for (name, block) in [("A", &self.block_a), ("B", &self.block_b)] {
            if !(block[(0, 0)] > 0.0 && block.determinant() > 0.0) {
                return Err(Error::domain(format!("block {name} is not positive definite")));
            }
        }
        let margin = self.uncertainty_margin(hbar);
        if margin < -1e-9 * scale {
            return Err(Error::domain(format!(
                "uncertainty relation violated (min eigenvalue {margin:e})"
            )));
        }
        Ok(())
    }
}

/// Outcome of the Simon criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimonResult {
    pub invariant_i: f64,
    pub separable: bool,
}

impl SimonResult {
    pub fn from_invariant(invariant_i: f64) -> Self {
        Self { invariant_i, separable: invariant_i >= 0.0 }
    }
}

/// Symmetric standard form `(n, k_x, k_p)`, stored with the `ħ` it was
/// computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardForm {
    pub n: f64,
    pub k_x: f64,
    pub k_p: f64,
    pub hbar: f64,
}

impl StandardForm {
    /// `γ₀` as a full matrix.
    pub fn matrix(&self) -> Matrix4<f64> {
        let (n, kx, kp) = (self.n, self.k_x, self.k_p);
        Matrix4::new(
            n, 0.0, kx, 0.0, //
            0.0, n, 0.0, -kp, //
            kx, 0.0, n, 0.0, //
            0.0, -kp, 0.0, n,
        )
    }
}

pub fn build_cm(params: &PairParams) -> CovMatrix4 {
    let f1 = factor_f(1, params).expect("n = 1");
    let f2 = factor_f(2, params).expect("n = 2");
    let a2 = params.a * params.a;
    let hbar2 = params.hbar() * params.hbar();
    let inv_b2 = params.b.inv_sq();
    let block = Matrix2::new(a2 * f1 / (2.0 * f2), 0.0, 0.0, 2.0 * hbar2 * f1 / a2);
    let cross = Matrix2::new(a2 * a2 * inv_b2 / (2.0 * f2), 0.0, 0.0, -2.0 * hbar2 * inv_b2);
    CovMatrix4::new(block, block, cross)
}

/// `I = detA detB + (ħ² - |detC|)² - Tr(AJCJBJCᵀJ) - ħ²(detA + detB)`.
///
/// Accepts arbitrary blocks; the state is separable iff `I ≥ 0`.
pub fn simon_invariant_general(cm: &CovMatrix4, hbar: f64) -> SimonResult {
    let j = j2();
    let hbar2 = hbar * hbar;
    let det_a = cm.block_a.determinant();
    let det_b = cm.block_b.determinant();
    let det_c = cm.block_c.determinant();
    let chain = cm.block_a * j * cm.block_c * j * cm.block_b * j * cm.block_c.transpose() * j;
    let i = det_a * det_b + (hbar2 - det_c.abs()).powi(2) - chain.trace() - hbar2 * (det_a + det_b);
    SimonResult::from_invariant(i)
}

/// Closed form `I = -4ħ⁴ a⁴ / (b⁴ f₂)` for this family.
pub fn simon_invariant_closed(params: &PairParams) -> f64 {
    let f2 = factor_f(2, params).expect("n = 2");
    let hbar2 = params.hbar() * params.hbar();
    let r = params.ratio_sq();
    let v = -4.0 * hbar2 * hbar2 * r * r / f2;
    // -0.0 would otherwise print as a negative zero for the product state
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Scaling `s = (4ħ²f₂/a⁴)^{1/4}` of `S = diag(s, 1/s, s, 1/s)`.
pub fn symplectic_scale(params: &PairParams) -> f64 {
    let f2 = factor_f(2, params).expect("n = 2");
    let a2 = params.a * params.a;
    (4.0 * params.hbar() * params.hbar() * f2 / (a2 * a2)).powf(0.25)
}

/// Closed-form standard form: `n = ħf₁/√f₂`, `k_x = k_p = ħa²/(b²√f₂)`.
pub fn standard_form(params: &PairParams) -> StandardForm {
    let f1 = factor_f(1, params).expect("n = 1");
    let f2 = factor_f(2, params).expect("n = 2");
    let hbar = params.hbar();
    let k = hbar * params.ratio_sq() / f2.sqrt();
    StandardForm { n: hbar * f1 / f2.sqrt(), k_x: k, k_p: k, hbar }
}

/// Largest absolute entry of `SγSᵀ - γ₀`.
pub fn congruence_residual(params: &PairParams) -> f64 {
    let s = symplectic_scale(params);
    let transformed = build_cm(params).scaled(s, s).full();
    (transformed - standard_form(params).matrix()).abs().max()
}

/// Reduces a symmetric correlation matrix with diagonal blocks (`A = B`) to
/// standard form by a local scaling `s⁴ = A₂₂/A₁₁`.
pub fn reduce_to_standard_form(cm: &CovMatrix4, hbar: f64) -> Result<StandardForm> {
    let scale = cm.full().abs().max();
    let tol = 1e-12 * scale;
    let off = [
        cm.block_a[(0, 1)],
        cm.block_a[(1, 0)],
        cm.block_b[(0, 1)],
        cm.block_b[(1, 0)],
        cm.block_c[(0, 1)],
        cm.block_c[(1, 0)],
    ];
    if off.iter().any(|v| v.abs() > tol) {
        return Err(Error::domain("standard-form reduction needs diagonal blocks"));
    }
    if (cm.block_a - cm.block_b).abs().max() > 1e-10 * scale {
        return Err(Error::domain("standard-form reduction needs a symmetric state (A = B)"));
    }
    let (x, p) = (cm.block_a[(0, 0)], cm.block_a[(1, 1)]);
    if !(x > 0.0 && p > 0.0) {
        return Err(Error::domain("block A is not positive definite"));
    }
    let ratio = (p / x).sqrt();
    Ok(StandardForm {
        n: (x * p).sqrt(),
        k_x: cm.block_c[(0, 0)] * ratio,
        k_p: -cm.block_c[(1, 1)] / ratio,
        hbar,
    })
}

/// Entanglement of formation in bits, `f(δ)` with `δ = √((n-k_x)(n-k_p))/ħ`.
pub fn eof(sf: &StandardForm) -> Result<f64> {
    let (dx, dp) = (sf.n - sf.k_x, sf.n - sf.k_p);
    if !(dx > 0.0 && dp > 0.0) {
        return Err(Error::domain(format!(
            "standard form needs n > k_x and n > k_p (n={}, k_x={}, k_p={})",
            sf.n, sf.k_x, sf.k_p
        )));
    }
    let delta = (dx * dp).sqrt() / sf.hbar;
    // c± = (δ^{-1/2} ± δ^{1/2})²/4 = (1 ± δ)²/(4δ)
    let c_minus = (1.0 - delta).powi(2) / (4.0 * delta);
    let c_plus = 1.0 + c_minus;
    let plus = c_plus * c_minus.ln_1p() / std::f64::consts::LN_2;
    let minus = if c_minus > 0.0 { c_minus * c_minus.log2() } else { 0.0 };
    Ok(plus - minus)
}

/// `√det A / ħ` of particle 1's block.
pub fn reduced_symplectic_eigenvalue(cm: &CovMatrix4, hbar: f64) -> f64 {
    cm.block_a.determinant().sqrt() / hbar
}

/// Von Neumann entropy (bits) of a one-mode Gaussian state with symplectic
/// eigenvalue `ν` (in units of ħ).
pub fn entropy_from_nu(nu: f64) -> Result<f64> {
    if !(nu >= 1.0) || !nu.is_finite() {
        return Err(Error::domain(format!("symplectic eigenvalue must be >= 1, got {nu}")));
    }
    let upper = (nu + 1.0) / 2.0;
    let lower = (nu - 1.0) / 2.0;
    let tail = if lower > 0.0 { lower * lower.log2() } else { 0.0 };
    Ok(upper * upper.log2() - tail)
}
