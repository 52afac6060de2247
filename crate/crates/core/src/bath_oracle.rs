//! Discrete-mode reservoir integrated directly, with no memory kernel.
//!
//! In the band-edge frame each mode obeys dc/dτ = −iν c + g q, and the atoms see
//! F = Σ g c + T q, where T is the adiabatic response of the modes above the
//! window. Then dq/dτ = −iδq + j3 F and dj3/dτ = −4 Re(q* F). The low-excitation
//! limit fixes j3 = −1.

use crate::error::{Error, Result};
use crate::kernel::{self, BandEdgeModel};
use crate::quad::{integrate_real, QuadOptions};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteBath {
    /// Mode frequencies above the band edge (collective units).
    pub nu: Vec<f64>,
    pub couplings: Vec<f64>,
    pub delta_c: f64,
    pub window: f64,
    /// Instantaneous response of the truncated tail, multiplying q.
    pub tail: Complex64,
    pub recurrence_time: f64,
}

impl DiscreteBath {
    pub fn n_modes(&self) -> usize {
        self.nu.len()
    }

    /// Mode detunings Δ_λ from the atomic line.
    pub fn mode_detunings(&self) -> Vec<f64> {
        self.nu.iter().map(|v| v - self.delta_c).collect()
    }

    /// Σ g² e^{−iΔΔτ}, the reconstructed kernel in the atom frame.
    pub fn reconstruct_kernel(&self, dtau: f64) -> Complex64 {
        self.nu
            .iter()
            .zip(self.couplings.iter())
            .map(|(v, g)| Complex64::from_polar(g * g, -(v - self.delta_c) * dtau))
            .sum()
    }
}

trait Density {
    fn rho(&self, v: f64) -> f64;
    /// ∫ₐᵇ ρ and ∫ₐᵇ νρ.
    fn cell(&self, a: f64, b: f64) -> (f64, f64);
    /// ∫_W^∞ ρ(ν)/ν dν, the adiabatic tail coefficient.
    fn tail(&self, w: f64) -> f64;
}

struct IsoDensity;

impl Density for IsoDensity {
    fn rho(&self, v: f64) -> f64 {
        1.0 / (PI * v.sqrt())
    }

    fn cell(&self, a: f64, b: f64) -> (f64, f64) {
        // ρ = ν^{-1/2}/π
        let m0 = 2.0 / PI * (b.sqrt() - a.sqrt());
        let m1 = 2.0 / (3.0 * PI) * (b.powf(1.5) - a.powf(1.5));
        (m0, m1)
    }

    fn tail(&self, w: f64) -> f64 {
        2.0 / (PI * w.sqrt())
    }
}

struct AnisoDensity {
    omega_c: f64,
}

impl AnisoDensity {
    // primitives of √ν/(ω+ν) and ν^{3/2}/(ω+ν)
    fn p0(&self, v: f64) -> f64 {
        let w = self.omega_c;
        2.0 * v.sqrt() - 2.0 * w.sqrt() * (v / w).sqrt().atan()
    }

    fn p1(&self, v: f64) -> f64 {
        2.0 / 3.0 * v.powf(1.5) - self.omega_c * self.p0(v)
    }
}

impl Density for AnisoDensity {
    fn rho(&self, v: f64) -> f64 {
        2.0 * self.omega_c / PI.sqrt() * v.sqrt() / (self.omega_c + v)
    }

    fn cell(&self, a: f64, b: f64) -> (f64, f64) {
        // ρ = (2ω/√π) √ν/(ω + ν)
        let c = 2.0 * self.omega_c / PI.sqrt();
        (c * (self.p0(b) - self.p0(a)), c * (self.p1(b) - self.p1(a)))
    }

    fn tail(&self, w: f64) -> f64 {
        let c = 2.0 * self.omega_c / PI.sqrt();
        let s = self.omega_c.sqrt();
        c * 2.0 / s * (PI / 2.0 - (w.sqrt() / s).atan())
    }
}

/// Discretize the reservoir into `n_modes` cells over [0, window] above the band edge.
/// Free space uses a flat density on [δ − window/2, δ + window/2].
pub fn build_bath(model: &BandEdgeModel, delta_c: f64, n_modes: usize, omega_window: f64) -> Result<DiscreteBath> {
    model.validate()?;
    if n_modes < 100 {
        return Err(Error::Input(format!("n_modes must be at least 100, got {n_modes}")));
    }
    if !(omega_window > 0.0 && omega_window.is_finite() && delta_c.is_finite()) {
        return Err(Error::Input("window must be positive and detuning finite".into()));
    }
    let dnu = omega_window / n_modes as f64;
    let (nu, couplings, tail) = match *model {
        BandEdgeModel::FreeSpace { gamma } => {
            let rho = gamma / (2.0 * PI);
            let lo = delta_c - omega_window / 2.0;
            let nu: Vec<f64> = (0..n_modes).map(|i| lo + (i as f64 + 0.5) * dnu).collect();
            (nu, vec![(rho * dnu).sqrt(); n_modes], Complex64::new(0.0, 0.0))
        }
        BandEdgeModel::IsotropicEffMass { .. } => cells(&IsoDensity, n_modes, omega_window)?,
        BandEdgeModel::AnisotropicEffMass { omega_c, .. } => cells(&AnisoDensity { omega_c }, n_modes, omega_window)?,
        BandEdgeModel::IsotropicFull { .. } => {
            return Err(Error::Input("the bath oracle covers the free-space and effective-mass models".into()))
        }
    };
    let widest = nu.windows(2).map(|w| w[1] - w[0]).fold(dnu.min(omega_window), f64::max);
    let recurrence_time = 2.0 * PI / widest;
    let bath = DiscreteBath { nu, couplings, delta_c, window: omega_window, tail, recurrence_time };
    calibrate(model, &bath)?;
    Ok(bath)
}

const TAPER_START: f64 = 0.25;

/// Smooth roll-off from 1 below W/4 to 0 at W. A sharp cutoff would leave an
/// error of order ρ(W)/Δτ in the reconstructed kernel.
fn taper(v: f64, window: f64) -> f64 {
    let u = (v / window - TAPER_START) / (1.0 - TAPER_START);
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let psi = |s: f64| (-1.0 / s).exp();
    psi(1.0 - u) / (psi(u) + psi(1.0 - u))
}

// Cells uniform in √ν resolve the edge, where the long-time tail comes from.
// Weight removed by the taper joins the adiabatic tail.
fn cells<D: Density>(rho: &D, n: usize, window: f64) -> Result<(Vec<f64>, Vec<f64>, Complex64)> {
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 200 };
    let dx = window.sqrt() / n as f64;
    let half = TAPER_START * window;
    let mut nu = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = ((i as f64 * dx).powi(2), ((i + 1) as f64 * dx).powi(2));
        let (m0, m1) = if b <= half {
            rho.cell(a, b)
        } else {
            (
                integrate_real(|v| rho.rho(v) * taper(v, window), a, b, opts)?,
                integrate_real(|v| v * rho.rho(v) * taper(v, window), a, b, opts)?,
            )
        };
        if m0 > 0.0 {
            nu.push(m1 / m0);
            g.push(m0.sqrt());
        }
    }
    let rolled = integrate_real(|v| rho.rho(v) * (1.0 - taper(v, window)) / v, half, window, opts)?;
    Ok((nu, g, Complex64::new(0.0, -(rho.tail(window) + rolled))))
}

/// The reconstructed kernel must track the model kernel at unit lag.
fn calibrate(model: &BandEdgeModel, bath: &DiscreteBath) -> Result<()> {
    if matches!(model, BandEdgeModel::FreeSpace { .. }) {
        if bath.window < 20.0 {
            return Err(Error::Calibration(format!("window {} too narrow for a Markovian bath", bath.window)));
        }
        return Ok(());
    }
    let lag = 1.0f64.min(bath.recurrence_time / 4.0);
    let exact = kernel::memory_kernel(model, bath.delta_c, lag)?;
    let err = (bath.reconstruct_kernel(lag) - exact).norm() / exact.norm();
    if err > 0.1 {
        return Err(Error::Calibration(format!(
            "window {} reproduces the kernel at lag {lag} only to {:.1}%",
            bath.window,
            100.0 * err
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleInit {
    /// Single excitation in the atoms, j3 frozen at −1.
    LowExcitation,
    /// Linearized inverted atoms, j3 frozen at +1; q follows the gain amplitude D.
    Inverted,
    MeanField { j3: f64, j12: Complex64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSeries {
    pub tau: Vec<f64>,
    pub j3: Vec<f64>,
    /// Atom-frame polarization, or the amplitude B (D) in the linear cases.
    pub j12: Vec<Complex64>,
    /// Σ|c|² at each sample.
    pub field_population: Vec<f64>,
    pub truncated: bool,
    pub recurrence_time: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { rtol: 1e-9, atol: 1e-11, max_steps: 5_000_000 }
    }
}

/// Integrate atoms and modes on [0, tau_max], sampling every `sample_dt`.
pub fn oracle_evolve(
    bath: &DiscreteBath,
    init: OracleInit,
    tau_max: f64,
    sample_dt: f64,
    opts: OracleOptions,
) -> Result<OracleSeries> {
    if !(tau_max > 0.0 && sample_dt > 0.0) {
        return Err(Error::Input("tau_max and sample_dt must be positive".into()));
    }
    let truncated = tau_max > bath.recurrence_time;
    let t_end = tau_max.min(bath.recurrence_time);
    let m = bath.n_modes();
    let (frozen, j30, q0) = match init {
        OracleInit::LowExcitation => (true, -1.0, Complex64::new(1.0, 0.0)),
        OracleInit::Inverted => (true, 1.0, Complex64::new(1.0, 0.0)),
        OracleInit::MeanField { j3, j12 } => (false, j3, j12),
    };
    // y = [q, j3, c_0 .. c_{m-1}]
    let mut y = vec![Complex64::new(0.0, 0.0); m + 2];
    y[0] = q0;
    y[1] = Complex64::new(j30, 0.0);
    let nu = &bath.nu;
    let g = &bath.couplings;
    let delta = bath.delta_c;
    let tail = bath.tail;
    let rhs = |y: &[Complex64], dy: &mut [Complex64]| {
        let q = y[0];
        let j3 = y[1].re;
        let mut f = tail * q;
        for k in 0..m {
            let c = y[k + 2];
            f += g[k] * c;
            dy[k + 2] = Complex64::new(nu[k] * c.im, -nu[k] * c.re) + g[k] * q;
        }
        dy[0] = Complex64::new(delta * q.im, -delta * q.re) + j3 * f;
        dy[1] = if frozen { Complex64::new(0.0, 0.0) } else { Complex64::new(-4.0 * (q.conj() * f).re, 0.0) };
    };
    let n_samples = (t_end / sample_dt + 1e-9).floor() as usize;
    let mut out = OracleSeries {
        tau: Vec::with_capacity(n_samples + 1),
        j3: Vec::with_capacity(n_samples + 1),
        j12: Vec::with_capacity(n_samples + 1),
        field_population: Vec::with_capacity(n_samples + 1),
        truncated,
        recurrence_time: bath.recurrence_time,
        steps: 0,
    };
    let record = |out: &mut OracleSeries, t: f64, y: &[Complex64]| {
        out.tau.push(t);
        out.j3.push(y[1].re);
        out.j12.push(y[0] * Complex64::from_polar(1.0, delta * t));
        out.field_population.push(y[2..].iter().map(|c| c.norm_sqr()).sum());
    };
    record(&mut out, 0.0, &y);
    let mut solver = Dopri5::new(m + 2, opts);
    let mut t = 0.0;
    for k in 1..=n_samples {
        let target = k as f64 * sample_dt;
        solver.advance(&rhs, &mut t, &mut y, target)?;
        record(&mut out, target, &y);
    }
    out.steps = solver.steps;
    Ok(out)
}

/// Dormand–Prince 5(4) with PI step-size control for complex state vectors.
struct Dopri5 {
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    y5: Vec<Complex64>,
    h: f64,
    opts: OracleOptions,
    steps: usize,
    err_prev: f64,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Dopri5 {
    fn new(n: usize, opts: OracleOptions) -> Self {
        Dopri5 {
            k: vec![vec![Complex64::new(0.0, 0.0); n]; 7],
            tmp: vec![Complex64::new(0.0, 0.0); n],
            y5: vec![Complex64::new(0.0, 0.0); n],
            h: 1e-3,
            opts,
            steps: 0,
            err_prev: 1e-4,
        }
    }

    fn advance<F: Fn(&[Complex64], &mut [Complex64])>(
        &mut self,
        f: &F,
        t: &mut f64,
        y: &mut [Complex64],
        t_end: f64,
    ) -> Result<()> {
        let n = y.len();
        while *t < t_end - 1e-14 * t_end.max(1.0) {
            if self.steps >= self.opts.max_steps {
                return Err(Error::StepSize(format!("oracle exceeded {} steps", self.opts.max_steps)));
            }
            let h = self.h.min(t_end - *t);
            f(y, &mut self.k[0]);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += self.k[j][i] * (h * a);
                        }
                    }
                    self.tmp[i] = acc;
                }
                f(&self.tmp, &mut self.k[s]);
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut y5 = y[i];
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    y5 += self.k[s][i] * (h * B5[s]);
                    e += self.k[s][i] * (h * (B5[s] - B4[s]));
                }
                self.y5[i] = y5;
                let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(y5.norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Instability { tau: *t, detail: "non-finite oracle state".into() });
            }
            if err <= 1.0 {
                *t += h;
                y.copy_from_slice(&self.y5);
                self.steps += 1;
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0);
                self.h = h * fac.clamp(0.2, 5.0);
                self.err_prev = err.max(1e-4);
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
            }
            if self.h < 1e-12 {
                return Err(Error::StepSize("oracle step size underflow".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_keeps_state() {
        let mut bath = build_bath(&BandEdgeModel::isotropic(), 0.0, 200, 50.0).unwrap();
        bath.couplings.iter_mut().for_each(|g| *g = 0.0);
        bath.tail = Complex64::new(0.0, 0.0);
        let init = OracleInit::MeanField { j3: 0.6, j12: Complex64::new(0.2, 0.0) };
        let s = oracle_evolve(&bath, init, 2.0, 0.5, OracleOptions::default()).unwrap();
        for (j3, z) in s.j3.iter().zip(s.j12.iter()) {
            assert!((j3 - 0.6).abs() < 1e-12 && (z.norm() - 0.2).abs() < 1e-10);
        }
    }

    #[test]
    fn cell_weights_match_density() {
        let b = build_bath(&BandEdgeModel::isotropic(), 0.0, 400, 100.0).unwrap();
        let total: f64 = b.couplings.iter().map(|g| g * g).sum();
        // ρ dν = (2/π) dx with ν = x², midpoint rule in x
        let m = 200_000;
        let h = 10.0 / m as f64;
        let expect: f64 = (0..m).map(|i| 2.0 / PI * taper(((i as f64 + 0.5) * h).powi(2), 100.0) * h).sum();
        assert!((total - expect).abs() < 1e-8, "{total} {expect}");
    }

    #[test]
    fn narrow_window_fails_calibration() {
        let r = build_bath(&BandEdgeModel::isotropic(), 0.0, 100, 0.5);
        assert!(matches!(r, Err(Error::Calibration(_))));
    }

    #[test]
    fn markovian_bath_decays_exponentially() {
        let b = build_bath(&BandEdgeModel::free_space(), 0.0, 2000, 200.0).unwrap();
        let s = oracle_evolve(&b, OracleInit::LowExcitation, 4.0, 1.0, OracleOptions::default()).unwrap();
        for (t, z) in s.tau.iter().zip(s.j12.iter()) {
            assert!((z.norm_sqr() - (-t).exp()).abs() < 2e-2, "t={t}");
        }
    }
}
