//! Exact low-excitation dynamics near an isotropic band edge.
//!
//! With u = √(s − iδ), the amplitude transforms B̃ = u/P(u) and D̃ = u/P₋(u) with
//! P±(u) = u³ + iδu ± e^{−iπ/4}. Partial fractions over the three roots give
//!
//!   B(τ) = e^{iδτ} Σ_j a_j x_j w(−i x_j √τ),   a_j = x_j / P'(x_j),
//!
//! where w is the Faddeeva function. Roots come from Cardano's formula with
//! A± = {½ ± ½√(1 + 4δ³/27)}^{1/3} and are polished by Newton's method.

use crate::error::{ensure_finite, Error, Result};
use crate::special::faddeeva;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorSolution {
    pub x: [Complex64; 3],
    pub a: [Complex64; 3],
    pub y: [Complex64; 3],
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub delta_c: f64,
    /// +1 for the decaying amplitude B, −1 for the growing amplitude D.
    pub sign: f64,
}

fn cubic(x: Complex64, delta: f64, sign: f64) -> Complex64 {
    x * x * x + Complex64::new(0.0, delta) * x + sign * Complex64::from_polar(1.0, -FRAC_PI_4)
}

fn cubic_deriv(x: Complex64, delta: f64) -> Complex64 {
    3.0 * x * x + Complex64::new(0.0, delta)
}

/// A± of the Cardano construction.
pub fn cardano_coefficients(delta: f64) -> (Complex64, Complex64) {
    let disc = Complex64::new(1.0 + 4.0 * delta.powi(3) / 27.0, 0.0).sqrt();
    let a_plus = (0.5 + 0.5 * disc).powf(1.0 / 3.0);
    let a_minus = if a_plus.norm() > 0.0 { Complex64::new(-delta / 3.0, 0.0) / a_plus } else { Complex64::new(0.0, 0.0) };
    (a_plus, a_minus)
}

/// Roots and residue weights of the decaying amplitude B.
pub fn solve_roots(delta_c: f64) -> Result<OscillatorSolution> {
    solve_roots_signed(delta_c, 1.0)
}

/// sign = +1: B (s + G̃ = 0); sign = −1: D (s − G̃ = 0).
pub fn solve_roots_signed(delta_c: f64, sign: f64) -> Result<OscillatorSolution> {
    ensure_finite("delta_c", delta_c)?;
    let (ap, am) = cardano_coefficients(delta_c);
    let e = |th: f64| Complex64::from_polar(1.0, th);
    let mut x = [
        (ap + am) * e(FRAC_PI_4),
        (ap * e(-PI / 6.0) - am * e(PI / 6.0)) * e(-FRAC_PI_4),
        (ap * e(PI / 6.0) - am * e(-PI / 6.0)) * e(3.0 * FRAC_PI_4),
    ];
    if sign < 0.0 {
        // P₋(x) = −P₊(−x)
        for xi in x.iter_mut() {
            *xi = -*xi;
        }
    }
    for xi in x.iter_mut() {
        for _ in 0..6 {
            let d = cubic_deriv(*xi, delta_c);
            if d.norm() == 0.0 {
                break;
            }
            *xi -= cubic(*xi, delta_c, sign) / d;
        }
    }
    let scale = 1.0 + delta_c.abs();
    for xi in x.iter() {
        let res = cubic(*xi, delta_c, sign).norm();
        if !(res <= 1e-10 * scale) {
            return Err(Error::Numeric(format!("root residual {res:e} exceeds 1e-10 at delta_c = {delta_c}")));
        }
    }
    let min_sep = (0..3)
        .flat_map(|i| ((i + 1)..3).map(move |j| (i, j)))
        .map(|(i, j)| (x[i] - x[j]).norm())
        .fold(f64::INFINITY, f64::min);
    if min_sep < 1e-6 {
        return Err(Error::Numeric(format!(
            "degenerate roots at delta_c = {delta_c}; the residue expansion needs distinct poles"
        )));
    }
    let mut a = [Complex64::new(0.0, 0.0); 3];
    let mut y = [Complex64::new(0.0, 0.0); 3];
    for j in 0..3 {
        a[j] = x[j] / cubic_deriv(x[j], delta_c);
        y[j] = (x[j] * x[j]).sqrt();
    }
    Ok(OscillatorSolution { x, a, y, a_plus: ap, a_minus: am, delta_c, sign })
}

impl OscillatorSolution {
    /// s + σG̃(s) evaluated at s_j = x_j² + iδ on the sheet where √(s − iδ) = x_j.
    pub fn sheet_residual(&self, j: usize) -> f64 {
        let xj = self.x[j];
        let s = xj * xj + Complex64::new(0.0, self.delta_c);
        let g = Complex64::from_polar(1.0, -FRAC_PI_4) / xj;
        (s + self.sign * g).norm()
    }

    /// Roots lying on the physical sheet (principal square root), i.e. true poles.
    pub fn physical_poles(&self) -> Vec<usize> {
        (0..3).filter(|&j| (self.y[j] - self.x[j]).norm() < 1e-9 * (1.0 + self.x[j].norm())).collect()
    }
}

/// Amplitude at τ ≥ 0 (B or D depending on the solution's sign).
pub fn amplitude(sol: &OscillatorSolution, tau: f64) -> Result<Complex64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be non-negative, got {tau}")));
    }
    let rt = tau.sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..3 {
        sum += sol.a[j] * sol.x[j] * faddeeva(-Complex64::i() * sol.x[j] * rt);
    }
    Ok(sum * Complex64::from_polar(1.0, sol.delta_c * tau))
}

pub fn amplitude_b(sol: &OscillatorSolution, tau: f64) -> Result<Complex64> {
    amplitude(sol, tau)
}

/// |B(τ)|², clamped to [0, 1] against roundoff.
pub fn excited_population(sol: &OscillatorSolution, tau: f64) -> Result<f64> {
    Ok(amplitude(sol, tau)?.norm_sqr().clamp(0.0, 1.0))
}

/// Long-time limit of |B|² from the physical-sheet poles on the imaginary s axis.
/// Returns None when the steady amplitude oscillates (two bound poles).
pub fn steady_population(sol: &OscillatorSolution) -> Option<f64> {
    let bound: Vec<usize> = sol
        .physical_poles()
        .into_iter()
        .filter(|&j| (sol.x[j] * sol.x[j]).re.abs() < 1e-9)
        .collect();
    match bound.len() {
        0 => Some(0.0),
        1 => {
            let j = bound[0];
            Some((2.0 * sol.a[j] * sol.x[j]).norm_sqr())
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub omega_grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// S(ω) = √(ω − ω_c) / (1 + (ω − ω₂₁)²(ω − ω_c)) with ω measured from ω_c.
pub fn emission_spectrum(delta_c: f64, omega_grid: &[f64]) -> Result<SpectrumCurve> {
    ensure_finite("delta_c", delta_c)?;
    let mut density = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        ensure_finite("omega", w)?;
        density.push(if w <= 0.0 {
            0.0
        } else {
            let d = w - delta_c;
            w.sqrt() / (1.0 + d * d * w)
        });
    }
    Ok(SpectrumCurve { omega_grid: omega_grid.to_vec(), density })
}

/// Spectral weight integrated over (0, ∞), by the substitution ω = t².
pub fn integrated_spectrum(delta_c: f64) -> Result<f64> {
    use crate::quad::{integrate_to_infinity, QuadOptions};
    let r = integrate_to_infinity(
        |t| {
            let w = t * t;
            let d = w - delta_c;
            Complex64::new(2.0 * t * t / (1.0 + d * d * w), 0.0)
        },
        0.0,
        QuadOptions::default(),
    )?;
    Ok(r.value.re)
}

/// Full width at half maximum of a sampled spectrum, from linear interpolation.
pub fn spectrum_fwhm(curve: &SpectrumCurve) -> Option<f64> {
    let (imax, &peak) = curve.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = peak / 2.0;
    let g = &curve.omega_grid;
    let d = &curve.density;
    let left = (1..=imax).rev().find(|&i| d[i - 1] < half).map(|i| {
        g[i - 1] + (half - d[i - 1]) / (d[i] - d[i - 1]) * (g[i] - g[i - 1])
    })?;
    let right = (imax..d.len() - 1).find(|&i| d[i + 1] < half).map(|i| {
        g[i] + (d[i] - half) / (d[i] - d[i + 1]) * (g[i + 1] - g[i])
    })?;
    Some(right - left)
}

/// Q(τ) = |B(τ)|²(Q(0) − 1) + 1.
pub fn mandel_q(sol: &OscillatorSolution, tau: f64, q0: f64) -> Result<f64> {
    if !(q0 >= 0.0) || !q0.is_finite() {
        return Err(Error::Domain(format!("Q(0) must be non-negative, got {q0}")));
    }
    Ok(mandel_q_from_population(amplitude(sol, tau)?.norm_sqr(), q0))
}

pub fn mandel_q_from_population(pop: f64, q0: f64) -> f64 {
    pop * (q0 - 1.0) + 1.0
}

/// Sampled B(τ) on a uniform grid, for any model with a kernel.
/// The isotropic model uses the closed form; others use the linear Volterra solver.
pub fn amplitude_series(model: &crate::kernel::BandEdgeModel, delta_c: f64, dtau: f64, n: usize) -> Result<Vec<Complex64>> {
    use crate::kernel::BandEdgeModel;
    match model {
        BandEdgeModel::IsotropicEffMass { .. } => {
            let sol = solve_roots(delta_c)?;
            (0..=n).map(|i| amplitude(&sol, i as f64 * dtau)).collect()
        }
        BandEdgeModel::FreeSpace { gamma } => {
            Ok((0..=n).map(|i| Complex64::new((-0.5 * gamma * i as f64 * dtau).exp(), 0.0)).collect())
        }
        _ => crate::volterra::solve_linear(model, delta_c, -1.0, dtau, n),
    }
}
