//! Reservoir memory kernels G(Δτ) and their Laplace transforms.
//!
//! Time, detuning and rates are in collective dimensionless units: τ = N^{2/3}β₁t
//! for the isotropic model, τ = N²β₃t for the anisotropic model and τ = Nγt in
//! free space. The atom number is absorbed into these units.

use crate::error::{ensure_finite, Error, Result};
use crate::quad::{self, QuadOptions};
use crate::special::exp_erfc_sqrt;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandEdgeModel {
    /// Markovian reservoir, G = (γ/2)δ(Δτ).
    FreeSpace { gamma: f64 },
    /// Isotropic effective-mass edge, ρ(ω) ∝ (ω − ω_c)^{-1/2}.
    IsotropicEffMass { beta1: f64 },
    /// Anisotropic effective-mass edge, ρ(ω) ∝ (ω − ω_c)^{1/2}. `omega_c` is the
    /// band-edge frequency in collective units and sets the short-time scale.
    AnisotropicEffMass { beta3: f64, omega_c: f64 },
    /// Isotropic model with the two-band dispersion
    /// ω_k = √(k₀²+γ²) + sgn(k−k₀)√((k−k₀)²+γ²), in units with c = 1.
    IsotropicFull { k0: f64, gamma_k: f64, cutoff: Option<f64> },
}

impl BandEdgeModel {
    pub fn free_space() -> Self {
        BandEdgeModel::FreeSpace { gamma: 1.0 }
    }

    pub fn isotropic() -> Self {
        BandEdgeModel::IsotropicEffMass { beta1: 1.0 }
    }

    pub fn anisotropic(omega_c: f64) -> Self {
        BandEdgeModel::AnisotropicEffMass { beta3: 1.0, omega_c }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be finite and positive, got {x}")))
            }
        };
        match *self {
            BandEdgeModel::FreeSpace { gamma } => positive("gamma", gamma),
            BandEdgeModel::IsotropicEffMass { beta1 } => positive("beta1", beta1),
            BandEdgeModel::AnisotropicEffMass { beta3, omega_c } => {
                positive("beta3", beta3)?;
                positive("omega_c", omega_c)
            }
            BandEdgeModel::IsotropicFull { k0, gamma_k, cutoff } => {
                positive("k0", k0)?;
                positive("gamma_k", gamma_k)?;
                if let Some(l) = cutoff {
                    positive("cutoff", l)?;
                    if l <= k0 {
                        return Err(Error::Domain(format!("cutoff {l} must exceed k0 {k0}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Conversion factor from physical time to collective time for `n_atoms` atoms.
    pub fn collective_rate(&self, n_atoms: f64) -> f64 {
        match *self {
            BandEdgeModel::FreeSpace { gamma } => n_atoms * gamma,
            BandEdgeModel::IsotropicEffMass { beta1 } => n_atoms.powf(2.0 / 3.0) * beta1,
            BandEdgeModel::AnisotropicEffMass { beta3, .. } => n_atoms * n_atoms * beta3,
            BandEdgeModel::IsotropicFull { .. } => n_atoms.powf(2.0 / 3.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BandEdgeModel::FreeSpace { .. } => "free_space",
            BandEdgeModel::IsotropicEffMass { .. } => "isotropic_eff_mass",
            BandEdgeModel::AnisotropicEffMass { .. } => "anisotropic_eff_mass",
            BandEdgeModel::IsotropicFull { .. } => "isotropic_full",
        }
    }
}

/// e^{-iπ/4}/√π, the isotropic kernel prefactor.
pub fn isotropic_prefactor() -> Complex64 {
    Complex64::from_polar(1.0 / PI.sqrt(), -FRAC_PI_4)
}

/// G(Δτ) in collective units.
pub fn memory_kernel(model: &BandEdgeModel, delta_c: f64, dtau: f64) -> Result<Complex64> {
    model.validate()?;
    ensure_finite("delta_c", delta_c)?;
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::Domain(format!("dtau must be positive, got {dtau}")));
    }
    let rot = Complex64::from_polar(1.0, delta_c * dtau);
    match *model {
        BandEdgeModel::FreeSpace { .. } => Err(Error::SingularKernel(
            "free-space kernel is a delta function; use the Markovian code path".into(),
        )),
        BandEdgeModel::IsotropicEffMass { .. } => Ok(isotropic_prefactor() * rot / dtau.sqrt()),
        BandEdgeModel::AnisotropicEffMass { omega_c, .. } => Ok(anisotropic_kernel(omega_c, dtau) * rot),
        BandEdgeModel::IsotropicFull { .. } => full_dispersion_kernel(model, delta_c, dtau),
    }
}

/// Laplace transform of G in collective units.
pub fn kernel_laplace(model: &BandEdgeModel, delta_c: f64, s: Complex64) -> Result<Complex64> {
    model.validate()?;
    ensure_finite("delta_c", delta_c)?;
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::Domain(format!("s must be finite, got {s}")));
    }
    let sp = s - Complex64::new(0.0, delta_c);
    match *model {
        BandEdgeModel::FreeSpace { gamma } => Ok(Complex64::new(gamma / 2.0, 0.0)),
        BandEdgeModel::IsotropicEffMass { .. } => {
            if sp.im == 0.0 && sp.re <= 0.0 {
                return Err(Error::Domain(format!("s = {s} lies on the branch cut")));
            }
            Ok(Complex64::from_polar(1.0, -FRAC_PI_4) / sp.sqrt())
        }
        BandEdgeModel::AnisotropicEffMass { omega_c, .. } => {
            if sp.re == 0.0 && sp.im <= 0.0 {
                return Err(Error::Domain(format!("s = {s} lies on the branch cut")));
            }
            let root = (-Complex64::i() * sp).sqrt();
            Ok(Complex64::new(0.0, -2.0 * PI.sqrt() * omega_c) / (omega_c.sqrt() + root))
        }
        BandEdgeModel::IsotropicFull { .. } => full_dispersion_laplace(model, delta_c, s),
    }
}

fn sqrt_i() -> Complex64 {
    Complex64::from_polar(1.0, FRAC_PI_4)
}

// Coefficients 1/Γ(n/2 + 1), so that e^{z²}erfc(z) = Σ c_n (−z)^n.
fn series_coeffs() -> [f64; 48] {
    let mut c = [0.0; 48];
    c[0] = 1.0;
    c[1] = 2.0 / PI.sqrt();
    for n in 2..48 {
        c[n] = c[n - 2] / (n as f64 / 2.0);
    }
    c
}

/// F(μ) = √(π/μ) − π e^{μ} erfc(√μ) at μ = i·ω_cΔt, times e^{iδΔt}.
/// This is the bracketed full anisotropic kernel without its physical prefactor.
pub fn full_anisotropic_kernel(omega_c_dt: f64, delta_c_dt: f64) -> Result<Complex64> {
    ensure_finite("omega_c_dt", omega_c_dt)?;
    ensure_finite("delta_c_dt", delta_c_dt)?;
    if omega_c_dt <= 0.0 {
        return Err(Error::Domain(format!("omega_c_dt must be positive, got {omega_c_dt}")));
    }
    Ok(bracket(omega_c_dt) * Complex64::from_polar(1.0, delta_c_dt))
}

fn bracket(x: f64) -> Complex64 {
    let mu = Complex64::new(0.0, x);
    if x < 1e-2 {
        short_time_bracket(x)
    } else if x > 1e3 {
        long_time_bracket(x)
    } else {
        (PI / mu).sqrt() - PI * exp_erfc_sqrt(mu)
    }
}

/// Short-time expansion √(π/(iω_cΔt)) − π + 2√(π iω_cΔt) − π iω_cΔt + ...
pub fn short_time_bracket(x: f64) -> Complex64 {
    let z = sqrt_i() * x.sqrt();
    let c = series_coeffs();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut pow = Complex64::new(1.0, 0.0);
    for cn in c.iter().take(16) {
        sum += pow * *cn;
        pow *= -z;
    }
    PI.sqrt() / z - PI * sum
}

/// Long-time expansion (√π/2)μ^{-3/2}[1 − 3/(2μ) + 15/(4μ²) − ...].
pub fn long_time_bracket(x: f64) -> Complex64 {
    let mu = Complex64::new(0.0, x);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 1..8 {
        term *= -((2 * n + 1) as f64) / (2.0 * mu);
        sum += term;
    }
    0.5 * PI.sqrt() * mu.powf(-1.5) * sum
}

/// Leading long-time form (√π/2)e^{-3iπ/4}(ω_cΔt)^{-3/2}.
pub fn asymptotic_bracket(x: f64) -> Complex64 {
    Complex64::from_polar(0.5 * PI.sqrt() * x.powf(-1.5), -3.0 * FRAC_PI_4)
}

/// Anisotropic kernel in collective units without the detuning phase.
/// Normalised so that |G| → Δτ^{-3/2} at long times.
pub fn anisotropic_kernel(omega_c: f64, dtau: f64) -> Complex64 {
    2.0 / PI.sqrt() * omega_c.powf(1.5) * bracket(omega_c * dtau)
}

/// Antiderivatives Φ₀(u) = ∫₀ᵘ K and Φ₁(u) = ∫₀ᵘ vK(v)dv of the detuning-free kernel.
/// Used by product integration.
pub trait KernelMoments {
    fn moments(&self, u: f64) -> (Complex64, Complex64);
    /// Constant added to the instantaneous response, zero for effective-mass kernels.
    fn local_term(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

pub struct IsotropicMoments;

impl KernelMoments for IsotropicMoments {
    fn moments(&self, u: f64) -> (Complex64, Complex64) {
        let c = isotropic_prefactor();
        let r = u.sqrt();
        (c * (2.0 * r), c * (2.0 / 3.0 * u * r))
    }
}

pub struct AnisotropicMoments {
    pub omega_c: f64,
}

impl KernelMoments for AnisotropicMoments {
    fn moments(&self, u: f64) -> (Complex64, Complex64) {
        if u <= 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let w = self.omega_c;
        let x = w * u;
        let mu = Complex64::new(0.0, x);
        let (one_minus_e, b1) = if x < 0.5 {
            let z = sqrt_i() * x.sqrt();
            let c = series_coeffs();
            let mut a = Complex64::new(0.0, 0.0);
            let mut b = Complex64::new(0.0, 0.0);
            let mut pow = -z;
            for n in 1..c.len() {
                a -= pow * c[n];
                if n >= 3 {
                    b += pow * (c[n] - c[n - 2]);
                }
                pow *= -z;
            }
            (a, PI * b)
        } else {
            let e = exp_erfc_sqrt(mu);
            (1.0 - e, -PI * (mu - 1.0) * e + 2.0 * (PI * mu).sqrt() - PI)
        };
        let phi0 = Complex64::new(0.0, -2.0 * PI.sqrt() * w.sqrt()) * one_minus_e;
        let phi1 = -(2.0 / PI.sqrt()) / w.sqrt() * b1;
        (phi0, phi1)
    }
}

/// Kernel of the full two-band isotropic dispersion, by quadrature over k.
pub fn full_dispersion_kernel(model: &BandEdgeModel, delta_c: f64, dtau: f64) -> Result<Complex64> {
    let (lower, upper) = full_dispersion_branches(model, delta_c, dtau)?;
    Ok(lower + upper)
}

pub struct FullDispersion {
    pub k0: f64,
    pub gamma: f64,
    pub cutoff: f64,
    pub omega0: f64,
    pub omega_edge: f64,
    pub prefactor: f64,
}

impl FullDispersion {
    pub fn new(model: &BandEdgeModel) -> Result<Self> {
        model.validate()?;
        match *model {
            BandEdgeModel::IsotropicFull { k0, gamma_k, cutoff } => {
                let omega0 = (k0 * k0 + gamma_k * gamma_k).sqrt();
                let omega_edge = omega0 + gamma_k;
                let a = 1.0 / (2.0 * gamma_k);
                Ok(FullDispersion {
                    k0,
                    gamma: gamma_k,
                    cutoff: cutoff.unwrap_or(20.0 * k0),
                    omega0,
                    omega_edge,
                    prefactor: 2.0 * a.sqrt() * omega_edge / (PI * k0 * k0),
                })
            }
            _ => Err(Error::Input("full dispersion requires the IsotropicFull model".into())),
        }
    }

    pub fn omega(&self, k: f64) -> f64 {
        let d = k - self.k0;
        let r = (d * d + self.gamma * self.gamma).sqrt();
        if d >= 0.0 {
            self.omega0 + r
        } else {
            self.omega0 - r
        }
    }

    pub fn gap_width(&self) -> f64 {
        2.0 * self.gamma
    }

    pub fn midgap(&self) -> f64 {
        self.omega0
    }

    fn weight(&self, k: f64) -> f64 {
        let w = self.omega(k);
        if k == 0.0 {
            0.0
        } else {
            self.prefactor * k * k / w
        }
    }
}

fn full_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_intervals: 20000 }
}

/// Lower-band (k < k₀) and upper-band (k > k₀) contributions to the kernel.
/// The atom sits at ω₂₁ = ω_c + δ_c with ω_c the upper band edge.
pub fn full_dispersion_branches(
    model: &BandEdgeModel,
    delta_c: f64,
    dtau: f64,
) -> Result<(Complex64, Complex64)> {
    ensure_finite("delta_c", delta_c)?;
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::Domain(format!("dtau must be positive, got {dtau}")));
    }
    let fd = FullDispersion::new(model)?;
    let w21 = fd.omega_edge + delta_c;
    let f = |k: f64| {
        let ph = -(fd.omega(k) - w21) * dtau;
        Complex64::from_polar(fd.weight(k), ph)
    };
    let pieces = |a: f64, b: f64| -> Result<Complex64> {
        // split so each panel carries a bounded number of oscillations
        let span = ((fd.omega(b) - fd.omega(a)).abs() * dtau / (2.0 * PI)).ceil().max(1.0);
        let n = (span / 20.0).ceil().max(1.0) as usize;
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let lo = a + (b - a) * j as f64 / n as f64;
            let hi = a + (b - a) * (j + 1) as f64 / n as f64;
            total += quad::integrate(f, lo, hi, full_opts())?.value;
        }
        Ok(total)
    };
    let lower = pieces(0.0, fd.k0)?;
    let upper = pieces(fd.k0, fd.cutoff)?;
    Ok((lower, upper))
}

fn full_dispersion_laplace(model: &BandEdgeModel, delta_c: f64, s: Complex64) -> Result<Complex64> {
    let fd = FullDispersion::new(model)?;
    let w21 = fd.omega_edge + delta_c;
    let f = |k: f64| fd.weight(k) / (s + Complex64::new(0.0, fd.omega(k) - w21));
    let opts = full_opts();
    Ok(quad::integrate(f, 0.0, fd.k0, opts)?.value + quad::integrate(f, fd.k0, fd.cutoff, opts)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_unit_lag() {
        let g = memory_kernel(&BandEdgeModel::isotropic(), 0.0, 1.0).unwrap();
        assert!((g.norm() - 0.5641895835477563).abs() < 1e-14);
        assert!((g.arg() + FRAC_PI_4).abs() < 1e-14);
        let g = memory_kernel(&BandEdgeModel::isotropic(), 1.0, 1.0).unwrap();
        assert!((g.arg() - (1.0 - FRAC_PI_4)).abs() < 1e-14);
    }

    #[test]
    fn free_space_pointwise_is_refused() {
        let r = memory_kernel(&BandEdgeModel::free_space(), 0.0, 1.0);
        assert!(matches!(r, Err(Error::SingularKernel(_))));
        assert!(matches!(memory_kernel(&BandEdgeModel::isotropic(), 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn isotropic_laplace_examples() {
        let m = BandEdgeModel::isotropic();
        let e = Complex64::from_polar(1.0, -FRAC_PI_4);
        assert!((kernel_laplace(&m, 0.0, Complex64::new(1.0, 0.0)).unwrap() - e).norm() < 1e-15);
        assert!((kernel_laplace(&m, 0.0, Complex64::new(4.0, 0.0)).unwrap() - e / 2.0).norm() < 1e-15);
        assert!((kernel_laplace(&m, 2.0, Complex64::new(1.0, 2.0)).unwrap() - e).norm() < 1e-15);
        assert!(kernel_laplace(&m, 0.0, Complex64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn bracket_branches_agree_at_switch_points() {
        for &x in &[1e-2, 1e3] {
            let mu = Complex64::new(0.0, x);
            let direct = (PI / mu).sqrt() - PI * exp_erfc_sqrt(mu);
            let s = short_time_bracket(x);
            let l = long_time_bracket(x);
            let series = if x < 1.0 { s } else { l };
            assert!((direct - series).norm() / direct.norm() < 1e-8, "x={x}: {direct} vs {series}");
        }
    }

    #[test]
    fn anisotropic_moments_continuous_at_series_switch() {
        let m = AnisotropicMoments { omega_c: 1.0 };
        let (a0, a1) = m.moments(0.5 * (1.0 - 1e-12));
        let (b0, b1) = m.moments(0.5 * (1.0 + 1e-12));
        assert!((a0 - b0).norm() < 1e-11 && (a1 - b1).norm() < 1e-11);
    }

    #[test]
    fn full_dispersion_geometry() {
        let m = BandEdgeModel::IsotropicFull { k0: 3.0, gamma_k: 4.0, cutoff: None };
        let fd = FullDispersion::new(&m).unwrap();
        assert!((fd.gap_width() - 8.0).abs() < 1e-15);
        assert!((fd.midgap() - 5.0).abs() < 1e-15);
        assert!((fd.omega(3.0 + 1e-14) - 9.0).abs() < 1e-12);
        assert!((fd.omega(3.0 - 1e-14) - 1.0).abs() < 1e-12);
        assert!(fd.omega(0.0).abs() < 1e-12);
    }
}
