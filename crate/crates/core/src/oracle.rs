//! Brute-force validation on a 2-D grid.
//!
//! `Ψ(x₁, x₂)` is sampled on an `n × n` periodic grid over `[-L/2, L/2)²` and
//! evolved with the exact free propagator `exp(-iħ(k₁²+k₂²)t/2m)` in Fourier
//! space. Moments use the midpoint rule in position space and the discrete
//! spectrum in momentum space, so nothing here shares code with the closed
//! forms it checks.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_cm, simon_invariant_general, CovMatrix4};
use crate::error::{Error, Result};
use crate::gaussian::{amplitude_t0, dp1, drift_velocity, dx1, PairParams};
use nalgebra::Matrix2;

const NORM_TOL: f64 = 1e-4;
const LEAK_TOL: f64 = 1e-8;
const EDGE_CELLS: usize = 2;

/// Row-major grid: `amplitudes[i * n + j] = Ψ(x_i, x_j)` with `x₁` along rows.
#[derive(Debug, Clone)]
pub struct WaveGrid {
    pub n: usize,
    pub extent: f64,
    pub amplitudes: Vec<Complex64>,
    pub params: PairParams,
    pub t: f64,
}

/// Grid side length fitting both the initial packet and the packet spread and
/// drifted to `t_max`, with eight standard deviations of margin per side.
pub fn default_extent(params: &PairParams, t_max: f64) -> f64 {
    let drift = 2.0 * drift_velocity(params).abs() * t_max;
    (16.0 * dx1(0.0, params)).max(16.0 * dx1(t_max, params) + drift)
}

enum Direction {
    Forward,
    Inverse,
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn fft2(data: &mut [Complex64], n: usize, dir: Direction) {
    let mut planner = FftPlanner::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    fft.process(data);
    transpose(data, n);
    fft.process(data);
    transpose(data, n);
    if let Direction::Inverse = dir {
        let scale = 1.0 / (n * n) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

impl WaveGrid {
    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn position(&self, idx: usize) -> f64 {
        -0.5 * self.extent + idx as f64 * self.spacing()
    }

    /// Wavenumber of FFT bin `idx`.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        let m = if idx < self.n / 2 { idx as f64 } else { idx as f64 - self.n as f64 };
        2.0 * PI * m / self.extent
    }

    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.extent
    }

    pub fn norm(&self) -> f64 {
        let h = self.spacing();
        self.amplitudes.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }

    fn edge_mass(values: &[f64], n: usize) -> f64 {
        let edge = |k: usize| k < EDGE_CELLS || k >= n - EDGE_CELLS;
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                if edge(i) || edge(j) {
                    mass += values[i * n + j];
                }
            }
        }
        mass
    }

    /// Probability in the outermost two cells along every edge.
    pub fn boundary_leakage(&self) -> f64 {
        let h = self.spacing();
        let dens: Vec<f64> = self.amplitudes.iter().map(|v| v.norm_sqr() * h * h).collect();
        Self::edge_mass(&dens, self.n)
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut spec = self.amplitudes.clone();
        fft2(&mut spec, self.n, Direction::Forward);
        spec
    }

    /// Probability near the Nyquist edges of the discrete spectrum.
    pub fn spectral_leakage(&self) -> f64 {
        let spec = self.spectrum();
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        // Nyquist sits at n/2 in FFT order; shift it to the edges.
        let n = self.n;
        let shifted: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                spec[((i + n / 2) % n) * n + (j + n / 2) % n].norm_sqr() / total
            })
            .collect();
        Self::edge_mass(&shifted, n)
    }

    fn check_leakage(&self) -> Result<()> {
        let leak = self.boundary_leakage();
        if leak >= LEAK_TOL {
            return Err(Error::Leakage(format!(
                "boundary mass {leak:e} at t = {} (extent {})",
                self.t, self.extent
            )));
        }
        Ok(())
    }
}

/// Samples `Ψ(x₁, x₂, 0)` and renormalizes by quadrature.
pub fn init_grid(params: &PairParams, n: usize, extent: f64) -> Result<WaveGrid> {
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n must be a power of two >= 64, got {n}")));
    }
    let min_extent = 16.0 * dx1(0.0, params);
    if !(extent.is_finite() && extent >= min_extent) {
        return Err(Error::InvalidGrid(format!("extent {extent} is below 16·Δx₁(0) = {min_extent}")));
    }
    let mut grid = WaveGrid { n, extent, amplitudes: Vec::with_capacity(n * n), params: *params, t: 0.0 };
    for i in 0..n {
        let x1 = grid.position(i);
        for j in 0..n {
            grid.amplitudes.push(amplitude_t0(x1, grid.position(j), params));
        }
    }
    let norm = grid.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::UnderResolved(format!("sampled norm {norm} differs from 1")));
    }
    let spectral = grid.spectral_leakage();
    if spectral >= LEAK_TOL {
        return Err(Error::UnderResolved(format!("spectral edge mass {spectral:e}")));
    }
    let scale = norm.sqrt().recip();
    grid.amplitudes.iter_mut().for_each(|v| *v *= scale);
    grid.check_leakage()?;
    Ok(grid)
}

/// Advances the grid by `t` with the exact free propagator.
pub fn evolve_free(mut grid: WaveGrid, t: f64) -> Result<WaveGrid> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("evolution time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(grid);
    }
    let n = grid.n;
    let rate = grid.params.hbar() / (2.0 * grid.params.mass());
    let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
    fft2(&mut grid.amplitudes, n, Direction::Forward);
    for i in 0..n {
        for j in 0..n {
            let phase = -rate * (k[i] * k[i] + k[j] * k[j]) * t;
            grid.amplitudes[i * n + j] *= Complex64::from_polar(1.0, phase);
        }
    }
    fft2(&mut grid.amplitudes, n, Direction::Inverse);
    grid.t += t;
    grid.check_leakage()?;
    Ok(grid)
}

/// First and second moments of positions and wavenumbers. Position–wavenumber
/// covariances are symmetrized (`½⟨xk + kx⟩ - ⟨x⟩⟨k⟩`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mean_x1: f64,
    pub mean_x2: f64,
    pub mean_k1: f64,
    pub mean_k2: f64,
    pub var_x1: f64,
    pub var_x2: f64,
    pub cov_x1x2: f64,
    pub var_k1: f64,
    pub var_k2: f64,
    pub cov_k1k2: f64,
    pub cov_x1k1: f64,
    pub cov_x1k2: f64,
    pub cov_x2k1: f64,
    pub cov_x2k2: f64,
}

pub fn moments(grid: &WaveGrid) -> MomentSet {
    let n = grid.n;
    let h2 = grid.spacing().powi(2);
    let x: Vec<f64> = (0..n).map(|i| grid.position(i)).collect();
    let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();

    let (mut s1, mut s2, mut s11, mut s22, mut s12, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = grid.amplitudes[i * n + j].norm_sqr() * h2;
            total += w;
            s1 += w * x[i];
            s2 += w * x[j];
            s11 += w * x[i] * x[i];
            s22 += w * x[j] * x[j];
            s12 += w * x[i] * x[j];
        }
    }
    let (mean_x1, mean_x2) = (s1 / total, s2 / total);

    let spec = grid.spectrum();
    let (mut q1, mut q2, mut q11, mut q22, mut q12, mut qt) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = spec[i * n + j].norm_sqr();
            qt += w;
            q1 += w * k[i];
            q2 += w * k[j];
            q11 += w * k[i] * k[i];
            q22 += w * k[j] * k[j];
            q12 += w * k[i] * k[j];
        }
    }
    let (mean_k1, mean_k2) = (q1 / qt, q2 / qt);

    // -i∂ψ along each axis, computed spectrally
    let derivative = |axis: usize| -> Vec<Complex64> {
        let mut d = spec.clone();
        for i in 0..n {
            for j in 0..n {
                let kk = if axis == 1 { k[i] } else { k[j] };
                d[i * n + j] *= kk;
            }
        }
        fft2(&mut d, n, Direction::Inverse);
        d
    };
    let (d1, d2) = (derivative(1), derivative(2));
    let (mut x1k1, mut x1k2, mut x2k1, mut x2k2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let c = grid.amplitudes[idx].conj();
            let (a1, a2) = ((c * d1[idx]).re * h2, (c * d2[idx]).re * h2);
            x1k1 += x[i] * a1;
            x1k2 += x[i] * a2;
            x2k1 += x[j] * a1;
            x2k2 += x[j] * a2;
        }
    }

    MomentSet {
        mean_x1,
        mean_x2,
        mean_k1,
        mean_k2,
        var_x1: s11 / total - mean_x1 * mean_x1,
        var_x2: s22 / total - mean_x2 * mean_x2,
        cov_x1x2: s12 / total - mean_x1 * mean_x2,
        var_k1: q11 / qt - mean_k1 * mean_k1,
        var_k2: q22 / qt - mean_k2 * mean_k2,
        cov_k1k2: q12 / qt - mean_k1 * mean_k2,
        cov_x1k1: x1k1 / total - mean_x1 * mean_k1,
        cov_x1k2: x1k2 / total - mean_x1 * mean_k2,
        cov_x2k1: x2k1 / total - mean_x2 * mean_k1,
        cov_x2k2: x2k2 / total - mean_x2 * mean_k2,
    }
}

/// Correlation matrix assembled from quadrature moments (`p = ħk`).
pub fn numeric_cm(grid: &WaveGrid) -> CovMatrix4 {
    let m = moments(grid);
    let hbar = grid.params.hbar();
    let block = |vx: f64, cxk: f64, vk: f64| {
        Matrix2::new(2.0 * vx, 2.0 * hbar * cxk, 2.0 * hbar * cxk, 2.0 * hbar * hbar * vk)
    };
    CovMatrix4::new(
        block(m.var_x1, m.cov_x1k1, m.var_k1),
        block(m.var_x2, m.cov_x2k2, m.var_k2),
        Matrix2::new(
            2.0 * m.cov_x1x2,
            2.0 * hbar * m.cov_x1k2,
            2.0 * hbar * m.cov_x2k1,
            2.0 * hbar * hbar * m.cov_k1k2,
        ),
    )
}

/// A one-dimensional density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDensity {
    pub points: Vec<f64>,
    pub density: Vec<f64>,
    pub spacing: f64,
}

impl SampledDensity {
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spacing
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.density).map(|(&x, &d)| f(x) * d).sum::<f64>() * self.spacing
            / self.integral()
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.moment(|x| (x - mu).powi(2))
    }

    pub fn sigma(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let mu = self.mean();
        let v = self.variance();
        self.moment(|x| (x - mu).powi(4)) / (v * v) - 3.0
    }

    pub fn to_csv(&self, label: &str) -> String {
        let mut out = format!("{label},density\n");
        for (x, d) in self.points.iter().zip(&self.density) {
            let _ = writeln!(out, "{x:.9e},{d:.9e}");
        }
        out
    }
}

/// Position density of particle 1 (row sums of `|Ψ|²`).
pub fn marginal_x1(grid: &WaveGrid) -> SampledDensity {
    let n = grid.n;
    let h = grid.spacing();
    let density = (0..n)
        .map(|i| grid.amplitudes[i * n..(i + 1) * n].iter().map(|v| v.norm_sqr()).sum::<f64>() * h)
        .collect();
    SampledDensity { points: (0..n).map(|i| grid.position(i)).collect(), density, spacing: h }
}

/// Wavenumber density of particle 1, ordered by increasing `k₁`.
pub fn marginal_k1(grid: &WaveGrid) -> SampledDensity {
    let n = grid.n;
    let spec = grid.spectrum();
    let dk = grid.wavenumber_spacing();
    let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    let order: Vec<usize> = (n / 2..n).chain(0..n / 2).collect();
    let density = order
        .iter()
        .map(|&i| spec[i * n..(i + 1) * n].iter().map(|v| v.norm_sqr()).sum::<f64>() / (total * dk))
        .collect();
    SampledDensity { points: order.iter().map(|&i| grid.wavenumber(i)).collect(), density, spacing: dk }
}

/// Comparison of quadrature results with the closed forms at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCheck {
    pub t: f64,
    pub dx1_closed: f64,
    pub dx1_grid: f64,
    pub dx1_rel_err: f64,
    pub dp1_closed: f64,
    pub dp1_grid: f64,
    pub dp1_rel_err: f64,
    pub norm_drift: f64,
    pub x1_excess_kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub extent: f64,
    pub times: Vec<TimeCheck>,
    /// Largest entrywise `|numeric_cm - build_cm|` at `t = 0`.
    pub cm_max_abs_err: f64,
    pub simon_grid: f64,
    pub simon_closed: f64,
    pub tolerances: OracleTolerances,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTolerances {
    pub dispersion_rel: f64,
    pub cm_abs: f64,
    pub norm_drift: f64,
    pub excess_kurtosis: f64,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self { dispersion_rel: 1e-3, cm_abs: 1e-4, norm_drift: 1e-10, excess_kurtosis: 1e-3 }
    }
}

/// Evolves a fresh grid to every requested time and compares with the
/// closed-form dispersions and correlation matrix.
pub fn check_against_closed_forms(
    params: &PairParams,
    times: &[f64],
    n: usize,
    extent: Option<f64>,
) -> Result<OracleReport> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let extent = extent.unwrap_or_else(|| default_extent(params, t_max));
    let initial = init_grid(params, n, extent)?;
    let tol = OracleTolerances::default();

    let closed_cm = build_cm(params).full();
    let grid_cm = numeric_cm(&initial);
    let cm_max_abs_err = (grid_cm.full() - closed_cm).abs().max();
    let simon_grid = simon_invariant_general(&grid_cm, params.hbar()).invariant_i;
    let simon_closed = crate::covariance::simon_invariant_closed(params);

    let dp_closed = dp1(params);
    let mut checks = Vec::with_capacity(times.len());
    for &t in times {
        let grid = evolve_free(initial.clone(), t)?;
        let m = moments(&grid);
        let dx_closed = dx1(t, params);
        let dx_grid = m.var_x1.sqrt();
        let dp_grid = params.hbar() * m.var_k1.sqrt();
        checks.push(TimeCheck {
            t,
            dx1_closed: dx_closed,
            dx1_grid: dx_grid,
            dx1_rel_err: (dx_grid - dx_closed).abs() / dx_closed,
            dp1_closed: dp_closed,
            dp1_grid: dp_grid,
            dp1_rel_err: (dp_grid - dp_closed).abs() / dp_closed,
            norm_drift: (grid.norm() - 1.0).abs(),
            x1_excess_kurtosis: marginal_x1(&grid).excess_kurtosis(),
        });
    }
    let passed = cm_max_abs_err <= tol.cm_abs
        && checks.iter().all(|c| {
            c.dx1_rel_err <= tol.dispersion_rel
                && c.dp1_rel_err <= tol.dispersion_rel
                && c.norm_drift <= tol.norm_drift
                && c.x1_excess_kurtosis.abs() <= tol.excess_kurtosis
        });
    Ok(OracleReport {
        n,
        extent,
        times: checks,
        cm_max_abs_err,
        simon_grid,
        simon_closed,
        tolerances: tol,
        passed,
    })
}
