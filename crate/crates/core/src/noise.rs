//! Colored classical noise with a band-edge autocorrelation and the
//! noise-driven superradiance equations.
//!
//! ξ(τ) = Σₙ Aₙ cos(ωₙτ + Φₙ) with Φₙ uniform. On the uniform grid ωₙ = nΔω and
//! Aₙ = 2√(P(ωₙ)Δω). On the stratified grid the band [0, ω_max] is cut into cells
//! of equal width in √ω, Aₙ = 2√(∫_cell P), and ωₙ is drawn inside its cell with
//! density ∝ P, stratified across paths. The ensemble autocorrelation is then
//! 2∫₀^{ω_max} P(ω) cos(ωΔτ) dω with no discretization bias.

use crate::error::{Error, Result};
use crate::kernel::BandEdgeModel;
use crate::meanfield::{check_invariants, stream_rng, to_atom_frame};
use crate::series::{CollectiveState, Grid, TimeSeries};
use crate::special::faddeeva;
use crate::volterra::{ConvolutionWeights, Inversion, Stepper};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyGrid {
    Uniform,
    #[default]
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// 1 for the isotropic Δτ^{-1/2} correlation, 3 for the anisotropic Δτ^{-3/2} one.
    pub alpha: u32,
    pub n_terms: usize,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    pub seed: u64,
    #[serde(default)]
    pub grid: FrequencyGrid,
    /// Paths per stratification block.
    #[serde(default = "default_strata")]
    pub strata: u64,
}

pub fn default_omega_max() -> f64 {
    2.0 * PI * 1000.0
}

fn default_strata() -> u64 {
    2000
}

/// One cosine term of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTerm {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
}

// stream reserved for the per-cell stratum permutations
const PERMUTATION_STREAM: u64 = u64::MAX;

impl NoiseSpec {
    pub fn new(alpha: u32, n_terms: usize, seed: u64) -> Self {
        NoiseSpec {
            alpha,
            n_terms,
            omega_max: default_omega_max(),
            seed,
            grid: FrequencyGrid::default(),
            strata: default_strata(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha != 1 && self.alpha != 3 {
            return Err(Error::Input(format!("alpha must be 1 or 3, got {}", self.alpha)));
        }
        if self.n_terms == 0 {
            return Err(Error::Input("n_terms must be at least 1".into()));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::Input(format!("omega_max must be positive, got {}", self.omega_max)));
        }
        if self.strata == 0 {
            return Err(Error::Input("strata must be at least 1".into()));
        }
        Ok(())
    }

    pub fn d_omega(&self) -> f64 {
        self.omega_max / self.n_terms as f64
    }

    /// One-sided power spectrum.
    /// alpha = 1: P = 1/√(2πω), whose cosine pair is Δτ^{-1/2}.
    /// alpha = 3: P = √(2ω/π), whose cosine pair is −Δτ^{-3/2} (experimental).
    pub fn power(&self, omega: f64) -> f64 {
        match self.alpha {
            1 => 1.0 / (2.0 * PI * omega).sqrt(),
            _ => (2.0 * omega / PI).sqrt(),
        }
    }

    /// ∫ₐᵇ P(ω) dω.
    fn cell_power(&self, a: f64, b: f64) -> f64 {
        match self.alpha {
            1 => 2.0 / (2.0 * PI).sqrt() * (b.sqrt() - a.sqrt()),
            _ => (2.0 / PI).sqrt() * 2.0 / 3.0 * (b.powf(1.5) - a.powf(1.5)),
        }
    }

    /// Inverse of the P-weighted distribution function on [a, b].
    fn cell_quantile(&self, a: f64, b: f64, u: f64) -> f64 {
        match self.alpha {
            1 => {
                let (sa, sb) = (a.sqrt(), b.sqrt());
                (sa + u * (sb - sa)).powi(2)
            }
            _ => {
                let (pa, pb) = (a.powf(1.5), b.powf(1.5));
                (pa + u * (pb - pa)).powf(2.0 / 3.0)
            }
        }
    }

    /// The cosine terms of path `path_index`.
    pub fn terms(&self, path_index: u64) -> Result<Vec<NoiseTerm>> {
        self.validate()?;
        let n = self.n_terms;
        let mut rng = stream_rng(self.seed, path_index);
        let phases: Vec<f64> = (0..n).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        match self.grid {
            FrequencyGrid::Uniform => {
                let dw = self.d_omega();
                Ok(phases
                    .into_iter()
                    .enumerate()
                    .map(|(k, phase)| {
                        let w = (k + 1) as f64 * dw;
                        NoiseTerm { omega: w, amplitude: 2.0 * (self.power(w) * dw).sqrt(), phase }
                    })
                    .collect())
            }
            FrequencyGrid::Stratified => {
                let m = self.strata;
                let slot = path_index % m;
                let mut perm = stream_rng(self.seed, PERMUTATION_STREAM);
                let dx = self.omega_max.sqrt() / n as f64;
                let mut out = Vec::with_capacity(n);
                for (k, phase) in phases.into_iter().enumerate() {
                    // affine permutation of the strata, one per cell
                    let mut mult = perm.random_range(1..m.max(2));
                    while gcd(mult, m) != 1 {
                        mult = perm.random_range(1..m.max(2));
                    }
                    let shift = perm.random_range(0..m);
                    let stratum = ((mult as u128 * slot as u128 + shift as u128) % m as u128) as f64;
                    let u = (stratum + rng.random::<f64>()) / m as f64;
                    let (a, b) = ((k as f64 * dx).powi(2), ((k + 1) as f64 * dx).powi(2));
                    out.push(NoiseTerm {
                        omega: self.cell_quantile(a, b, u),
                        amplitude: 2.0 * self.cell_power(a, b).sqrt(),
                        phase,
                    });
                }
                Ok(out)
            }
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sampled noise path on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePath {
    pub dtau: f64,
    pub xi: Vec<f64>,
}

/// One path; `path_index` selects the independent stream for `spec.seed`.
pub fn generate_noise(spec: &NoiseSpec, grid: &Grid, path_index: u64) -> Result<NoisePath> {
    let n = grid.n_steps()?;
    let terms = spec.terms(path_index)?;
    Ok(NoisePath { dtau: grid.dtau, xi: Oscillators::new(&terms, grid.dtau).sample(n + 1) })
}

const LANES: usize = 8;

/// Cosine bank advanced by exact rotations, laid out for vectorization.
struct Oscillators {
    re: Vec<f64>,
    im: Vec<f64>,
    cr: Vec<f64>,
    ci: Vec<f64>,
    amp: Vec<f64>,
}

impl Oscillators {
    fn new(terms: &[NoiseTerm], h: f64) -> Self {
        let m = terms.len().div_ceil(LANES) * LANES;
        let mut o = Oscillators {
            re: vec![0.0; m],
            im: vec![0.0; m],
            cr: vec![1.0; m],
            ci: vec![0.0; m],
            amp: vec![0.0; m],
        };
        for (j, t) in terms.iter().enumerate() {
            (o.im[j], o.re[j]) = t.phase.sin_cos();
            (o.ci[j], o.cr[j]) = (t.omega * h).sin_cos();
            o.amp[j] = t.amplitude;
        }
        o
    }

    fn sample(&mut self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut acc = [0.0; LANES];
            let chunks = self
                .re
                .chunks_exact_mut(LANES)
                .zip(self.im.chunks_exact_mut(LANES))
                .zip(self.cr.chunks_exact(LANES).zip(self.ci.chunks_exact(LANES)))
                .zip(self.amp.chunks_exact(LANES));
            for (((re, im), (cr, ci)), amp) in chunks {
                for l in 0..LANES {
                    let (r, q) = (re[l], im[l]);
                    acc[l] += amp[l] * r;
                    re[l] = r * cr[l] - q * ci[l];
                    im[l] = r * ci[l] + q * cr[l];
                }
            }
            out.push(acc.iter().sum());
            if i % 256 == 255 {
                self.renormalize();
            }
        }
        out
    }

    fn renormalize(&mut self) {
        for (r, q) in self.re.iter_mut().zip(self.im.iter_mut()) {
            let n = (*r * *r + *q * *q).sqrt();
            if n > 0.0 {
                *r /= n;
                *q /= n;
            }
        }
    }
}

/// ⟨ξ(τ)ξ(τ+lag)⟩ averaged over paths and the base indices.
pub fn autocorrelation(paths: &[NoisePath], lags: &[f64], base_indices: &[usize]) -> Result<Vec<f64>> {
    if paths.len() < 2 {
        return Err(Error::Input("autocorrelation needs at least two paths".into()));
    }
    let (dt, len) = (paths[0].dtau, paths[0].xi.len());
    if paths.iter().any(|p| p.dtau != dt || p.xi.len() != len) {
        return Err(Error::Input("paths must share a common grid".into()));
    }
    lags.iter()
        .map(|&lag| {
            let k = (lag / dt).round() as usize;
            if (k as f64 * dt - lag).abs() > 1e-9 * (1.0 + lag) {
                return Err(Error::Input(format!("lag {lag} is not a multiple of the grid spacing {dt}")));
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in paths {
                for &b in base_indices {
                    if b + k < len {
                        sum += p.xi[b] * p.xi[b + k];
                        count += 1;
                    }
                }
            }
            if count == 0 {
                return Err(Error::Input(format!("no base index admits lag {lag}")));
            }
            Ok(sum / count as f64)
        })
        .collect()
}

/// Streaming form of [`autocorrelation`]: paths are generated on a grid of spacing
/// `dtau` covering `base_span` plus the longest lag, and every base time in
/// [0, base_span) is used. Memory stays at one path per worker.
pub fn ensemble_autocorrelation(
    spec: &NoiseSpec,
    n_paths: usize,
    dtau: f64,
    lags: &[f64],
    base_span: f64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    spec.validate()?;
    if n_paths < 2 {
        return Err(Error::Input("autocorrelation needs at least two paths".into()));
    }
    if !(dtau > 0.0 && base_span >= dtau) {
        return Err(Error::Input("need dtau > 0 and base_span >= dtau".into()));
    }
    let shifts: Vec<usize> = lags
        .iter()
        .map(|&lag| {
            let k = (lag / dtau).round() as usize;
            if (k as f64 * dtau - lag).abs() > 1e-9 * (1.0 + lag) {
                Err(Error::Input(format!("lag {lag} is not a multiple of the grid spacing {dtau}")))
            } else {
                Ok(k)
            }
        })
        .collect::<Result<_>>()?;
    let n_base = (base_span / dtau).round() as usize;
    let len = n_base + shifts.iter().copied().max().unwrap_or(0);
    let one = |i: usize| -> Result<Vec<f64>> {
        let xi = Oscillators::new(&spec.terms(i as u64)?, dtau).sample(len);
        Ok(shifts.iter().map(|&k| xi[..n_base].iter().zip(&xi[k..]).map(|(a, b)| a * b).sum()).collect())
    };
    let mut sum = vec![0.0; lags.len()];
    const BLOCK: usize = 64;
    for start in (0..n_paths).step_by(BLOCK) {
        let block: Vec<Result<Vec<f64>>> = (start..(start + BLOCK).min(n_paths)).into_par_iter().map(one).collect();
        for r in block {
            for (s, v) in sum.iter_mut().zip(r?) {
                *s += v;
            }
        }
    }
    let count = (n_paths * n_base) as f64;
    Ok(sum.into_iter().map(|s| s / count).collect())
}

/// Ensemble autocorrelation of the generator at `lag`, averaged over phases
/// (and over in-cell frequencies on the stratified grid).
pub fn analytic_autocorrelation(spec: &NoiseSpec, lag: f64) -> f64 {
    match spec.grid {
        FrequencyGrid::Uniform => {
            let dw = spec.d_omega();
            (1..=spec.n_terms)
                .map(|n| {
                    let w = n as f64 * dw;
                    2.0 * dw * spec.power(w) * (w * lag).cos()
                })
                .sum()
        }
        FrequencyGrid::Stratified => band_limited_autocorrelation(spec.alpha, spec.omega_max, lag),
    }
}

/// 2∫₀^Ω P(ω) cos(ω lag) dω in closed form through the Fresnel integral.
pub fn band_limited_autocorrelation(alpha: u32, omega_max: f64, lag: f64) -> f64 {
    let x = omega_max.sqrt();
    let t = lag.abs();
    let f = fresnel(x, t);
    if alpha == 1 {
        4.0 / (2.0 * PI).sqrt() * f.re
    } else if t == 0.0 {
        2.0 * (2.0 / PI).sqrt() * 2.0 / 3.0 * omega_max.powf(1.5)
    } else {
        // ∫x² cos(x²t) = x sin(x²t)/(2t) − ∫sin(x²t)/(2t)
        4.0 * (2.0 / PI).sqrt() * (x * (x * x * t).sin() - f.im) / (2.0 * t)
    }
}

/// ∫₀ˣ e^{i t s²} ds.
fn fresnel(x: f64, t: f64) -> Complex64 {
    let p = t * x * x;
    if p < 1e-3 {
        return Complex64::new(x - p * p * x / 10.0, p * x / 3.0);
    }
    let e = Complex64::from_polar(1.0, PI / 4.0);
    let z = e * (t.sqrt() * x);
    (PI.sqrt() / (2.0 * t.sqrt())) * e * (1.0 - Complex64::from_polar(1.0, p) * faddeeva(z))
}

/// Continuum target: Δτ^{-1/2} (alpha = 1) or −Δτ^{-3/2} (alpha = 3).
pub fn target_autocorrelation(alpha: u32, lag: f64) -> f64 {
    if alpha == 1 {
        lag.powf(-0.5)
    } else {
        -lag.powf(-1.5)
    }
}

/// Noise coupling e^{−iπ/8}/√(N√π) in the band-edge frame.
pub fn noise_coefficient(n_atoms: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (n_atoms * PI.sqrt()).sqrt(), -PI / 8.0)
}

/// Noise-driven evolution from full inversion.
pub fn evolve_stochastic(
    model: &BandEdgeModel,
    delta_c: f64,
    n_atoms: u64,
    grid: &Grid,
    spec: &NoiseSpec,
    path_index: u64,
) -> Result<TimeSeries> {
    if n_atoms <= 500 {
        return Err(Error::Input(format!(
            "the noise model is valid only for more than 500 atoms, got {n_atoms}"
        )));
    }
    let n = grid.n_steps()?;
    let weights = weights_for(model, grid.dtau, n)?;
    let start = CollectiveState { j3: 1.0, j12: Complex64::new(0.0, 0.0) };
    evolve_driven(&weights, delta_c, start, n, spec, path_index, noise_coefficient(n_atoms as f64))
}

fn weights_for(model: &BandEdgeModel, h: f64, n: usize) -> Result<ConvolutionWeights> {
    if matches!(model, BandEdgeModel::FreeSpace { .. }) {
        return Err(Error::Input("the colored-noise drive is defined for band-edge kernels".into()));
    }
    ConvolutionWeights::for_model(model, h, n)
}

/// Driven evolution with an explicit coupling; a zero coupling reproduces the mean field.
pub fn evolve_driven(
    weights: &ConvolutionWeights,
    delta_c: f64,
    start: CollectiveState,
    n_steps: usize,
    spec: &NoiseSpec,
    path_index: u64,
    coupling: Complex64,
) -> Result<TimeSeries> {
    let h = weights.h;
    let terms = spec.terms(path_index)?;
    // ∫ A cos(ωτ + Φ) over a step is Im[e^{i(ωτ+Φ)} c] with c = 2iA sin(ωh/2) e^{iωh/2}/ω
    let mut rot: Vec<Complex64> = terms.iter().map(|t| Complex64::from_polar(1.0, t.phase)).collect();
    let adv: Vec<Complex64> = terms.iter().map(|t| Complex64::from_polar(1.0, t.omega * h)).collect();
    let step_int: Vec<Complex64> = terms
        .iter()
        .map(|t| {
            let half = 0.5 * t.omega * h;
            let sinc = if half.abs() < 1e-8 { 1.0 } else { half.sin() / half };
            Complex64::new(0.0, t.amplitude * h * sinc) * Complex64::from_polar(1.0, half)
        })
        .collect();
    let mut st = Stepper::new(weights, start.j12, start.j3, Inversion::Dynamic);
    for k in 0..n_steps {
        let mut integral = 0.0;
        for j in 0..rot.len() {
            integral += (rot[j] * step_int[j]).im;
            rot[j] *= adv[j];
        }
        if k % 256 == 255 {
            for z in rot.iter_mut() {
                *z /= z.norm();
            }
        }
        st.step(delta_c, coupling * integral)?;
        check_invariants(st.j3[k + 1], st.q[k + 1], (k + 1) as f64 * h)?;
    }
    Ok(to_atom_frame(st.j3, st.q, delta_c, h, 0.0))
}

/// Noise-driven evolution starting from a given state.
pub fn evolve_stochastic_from(
    model: &BandEdgeModel,
    delta_c: f64,
    start: CollectiveState,
    n_atoms: u64,
    grid: &Grid,
    spec: &NoiseSpec,
    path_index: u64,
    noise_scale: f64,
) -> Result<TimeSeries> {
    let n = grid.n_steps()?;
    let weights = weights_for(model, grid.dtau, n)?;
    evolve_driven(&weights, delta_c, start, n, spec, path_index, noise_coefficient(n_atoms as f64) * noise_scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticEnsemble {
    pub dtau: f64,
    pub mean_inversion: Vec<f64>,
    pub inversion_stderr: Vec<f64>,
    pub delay_times: Vec<f64>,
    pub never_crossed: usize,
}

/// Ensemble of noise-driven trajectories on independent phase streams.
pub fn stochastic_ensemble(
    model: &BandEdgeModel,
    delta_c: f64,
    n_atoms: u64,
    grid: &Grid,
    spec: &NoiseSpec,
    n_paths: usize,
) -> Result<StochasticEnsemble> {
    use rayon::prelude::*;
    if n_atoms <= 500 {
        return Err(Error::Input(format!(
            "the noise model is valid only for more than 500 atoms, got {n_atoms}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::Input("n_paths must be at least 1".into()));
    }
    let n = grid.n_steps()?;
    let weights = weights_for(model, grid.dtau, n)?;
    let start = CollectiveState { j3: 1.0, j12: Complex64::new(0.0, 0.0) };
    let kappa = noise_coefficient(n_atoms as f64);
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    let mut delays = Vec::new();
    let mut never = 0;
    const BLOCK: usize = 64;
    let mut from = 0;
    while from < n_paths {
        let to = (from + BLOCK).min(n_paths);
        let block: Vec<Result<TimeSeries>> = (from..to)
            .into_par_iter()
            .map(|i| evolve_driven(&weights, delta_c, start, n, spec, i as u64, kappa))
            .collect();
        for s in block {
            let s = s?;
            for i in 0..=n {
                sum[i] += s.j3[i];
                sum_sq[i] += s.j3[i] * s.j3[i];
            }
            match s.first_zero_crossing() {
                Some(d) => delays.push(d),
                None => never += 1,
            }
        }
        from = to;
    }
    let m = n_paths as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / m).collect();
    let stderr = sum_sq
        .iter()
        .zip(mean.iter())
        .map(|(s2, mu)| if n_paths < 2 { 0.0 } else { ((s2 / m - mu * mu).max(0.0) / (m - 1.0)).sqrt() })
        .collect();
    Ok(StochasticEnsemble { dtau: grid.dtau, mean_inversion: mean, inversion_stderr: stderr, delay_times: delays, never_crossed: never })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_cosines_give_cosine_autocorrelation() {
        let dt = 0.01;
        let paths: Vec<NoisePath> = (0..2)
            .map(|_| NoisePath { dtau: dt, xi: (0..40000).map(|i| (2.0 * i as f64 * dt).cos() * 2f64.sqrt()).collect() })
            .collect();
        let base: Vec<usize> = (0..39000).collect();
        let ac = autocorrelation(&paths, &[0.5], &base).unwrap();
        // time average of 2 cos(a)cos(a + 1) = cos(1) up to a finite-window term
        assert!((ac[0] - 1f64.cos()).abs() < 0.01);
    }

    #[test]
    fn path_is_reproducible() {
        let spec = NoiseSpec::new(1, 50, 7);
        let g = Grid::new(1.0, 0.1);
        assert_eq!(generate_noise(&spec, &g, 3).unwrap(), generate_noise(&spec, &g, 3).unwrap());
        assert_ne!(generate_noise(&spec, &g, 3).unwrap(), generate_noise(&spec, &g, 4).unwrap());
    }

    #[test]
    fn small_ensembles_rejected() {
        let r = evolve_stochastic(&BandEdgeModel::isotropic(), 0.0, 500, &Grid::new(1.0, 0.1), &NoiseSpec::new(1, 10, 1), 0);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn coupling_scales_with_atom_number() {
        let a = noise_coefficient(1000.0);
        let b = noise_coefficient(2000.0);
        assert!((a.norm() / b.norm() - 2f64.sqrt()).abs() < 1e-14);
        assert!((a.arg() - b.arg()).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_matches_spectral_sum() {
        let mut spec = NoiseSpec::new(1, 40, 3);
        spec.grid = FrequencyGrid::Uniform;
        let terms = spec.terms(0).unwrap();
        let dw = spec.d_omega();
        for (k, t) in terms.iter().enumerate() {
            let w = (k + 1) as f64 * dw;
            assert_eq!(t.omega, w);
            assert!((t.amplitude * t.amplitude / 2.0 - 2.0 * dw * spec.power(w)).abs() < 1e-12);
        }
    }

    #[test]
    fn band_limited_correlation_tends_to_power_law() {
        for &lag in &[0.3, 1.0, 4.0] {
            let c = band_limited_autocorrelation(1, 1e8, lag);
            assert!((c * lag.sqrt() - 1.0).abs() < 2e-3, "lag={lag}: {c}");
        }
    }

    #[test]
    fn band_limited_closed_form_matches_quadrature() {
        use crate::quad::{integrate_real, QuadOptions};
        for alpha in [1u32, 3] {
            let spec = NoiseSpec::new(alpha, 10, 0);
            for &lag in &[0.0, 0.1, 0.7, 2.5] {
                // substitute ω = x² to remove the endpoint singularity
                let q = integrate_real(
                    |x| 2.0 * spec.power(x * x) * (x * x * lag).cos() * 2.0 * x,
                    1e-300,
                    50.0f64.sqrt(),
                    QuadOptions::default(),
                )
                .unwrap();
                let c = band_limited_autocorrelation(alpha, 50.0, lag);
                assert!((c - q).abs() < 1e-9 * (1.0 + q.abs()), "alpha={alpha} lag={lag}: {c} vs {q}");
            }
        }
    }

    #[test]
    fn stratified_frequencies_stay_in_cells() {
        let spec = NoiseSpec::new(1, 100, 5);
        let dx = spec.omega_max.sqrt() / 100.0;
        for i in 0..5 {
            for (k, t) in spec.terms(i).unwrap().iter().enumerate() {
                let x = t.omega.sqrt();
                assert!(x >= k as f64 * dx - 1e-12 && x <= (k + 1) as f64 * dx + 1e-12);
            }
        }
    }

    #[test]
    fn strata_are_used_once_per_block() {
        let mut spec = NoiseSpec::new(1, 3, 11);
        spec.strata = 50;
        let dx = spec.omega_max.sqrt() / 3.0;
        let mut seen = vec![false; 50];
        for i in 0..50 {
            let t = spec.terms(i).unwrap()[1];
            let u = (t.omega.sqrt() - dx) / dx;
            let s = (u * 50.0).floor() as usize;
            assert!(!seen[s]);
            seen[s] = true;
        }
    }
}
