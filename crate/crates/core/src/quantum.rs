//! Fluctuation-triggered superradiance: growth amplitude, crossover time,
//! initial polarization statistics and ensembles of mean-field trajectories.

use crate::error::{Error, Result};
use crate::kernel::BandEdgeModel;
use crate::lowexc;
use crate::meanfield::{check_invariants, stream_rng};
use crate::series::{CollectiveState, Grid};
use crate::volterra::{self, ConvolutionWeights, Inversion, Stepper};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Growth amplitude D(τ), the inverse Laplace transform of [s − G̃(s)]⁻¹.
pub fn amplitude_d(model: &BandEdgeModel, delta_c: f64, tau: f64) -> Result<Complex64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be non-negative, got {tau}")));
    }
    model.validate()?;
    match *model {
        BandEdgeModel::FreeSpace { gamma } => Ok(Complex64::new((0.5 * gamma * tau).exp(), 0.0)),
        BandEdgeModel::IsotropicEffMass { .. } => {
            let sol = lowexc::solve_roots_signed(delta_c, -1.0)?;
            lowexc::amplitude(&sol, tau)
        }
        _ => {
            let h = 1e-3f64.min(tau.max(1e-3) / 100.0);
            let n = (tau / h).ceil() as usize;
            let h = if n == 0 { h } else { tau / n as f64 };
            let d = volterra::solve_linear(model, delta_c, 1.0, h, n.max(1))?;
            Ok(d[n])
        }
    }
}

/// Smallest τ₀ with |D(τ₀)|² = e, searched up to `tau_budget`.
pub fn crossover_time(model: &BandEdgeModel, delta_c: f64) -> Result<f64> {
    crossover_time_with_budget(model, delta_c, 50.0)
}

pub fn crossover_time_with_budget(model: &BandEdgeModel, delta_c: f64, tau_budget: f64) -> Result<f64> {
    model.validate()?;
    if let BandEdgeModel::FreeSpace { gamma } = *model {
        return Ok(1.0 / gamma);
    }
    let target = E;
    match *model {
        BandEdgeModel::IsotropicEffMass { .. } => {
            let sol = lowexc::solve_roots_signed(delta_c, -1.0)?;
            let f = |t: f64| -> Result<f64> { Ok(lowexc::amplitude(&sol, t)?.norm_sqr() - target) };
            let step = 0.01;
            let mut a = 0.0;
            let mut fa = f(a)?;
            while a < tau_budget {
                let b = a + step;
                let fb = f(b)?;
                if fa < 0.0 && fb >= 0.0 {
                    let (mut lo, mut hi) = (a, b);
                    for _ in 0..60 {
                        let m = 0.5 * (lo + hi);
                        if f(m)? < 0.0 {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    return Ok(0.5 * (lo + hi));
                }
                a = b;
                fa = fb;
            }
            Err(Error::Search(format!("|D|^2 does not reach e within tau = {tau_budget}")))
        }
        _ => {
            let h = 1e-3;
            let n = (tau_budget / h).ceil() as usize;
            let d = volterra::solve_linear(model, delta_c, 1.0, h, n)?;
            for i in 1..=n {
                let (x, y) = (d[i - 1].norm_sqr(), d[i].norm_sqr());
                if x < target && y >= target {
                    return Ok(h * ((i - 1) as f64 + (target - x) / (y - x)));
                }
            }
            Err(Error::Search(format!("|D|^2 does not reach e within tau = {tau_budget}")))
        }
    }
}

/// Initial polarization amplitude (absolute units of J₁₂) and phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSample {
    pub kappa: f64,
    pub phi: f64,
}

/// P(κ) ∝ κ exp(−κ²/(N|D|²)) on κ ≥ 0 and φ uniform on [0, 2π).
pub fn sample_initial_polarization<R: Rng>(n_atoms: f64, d_t0_sq: f64, rng: &mut R) -> Result<PolarizationSample> {
    if !(n_atoms > 0.0 && d_t0_sq > 0.0) {
        return Err(Error::Domain("n_atoms and |D(t0)|^2 must be positive".into()));
    }
    let (e, u) = base_draw(rng);
    Ok(polarization_from_base(n_atoms * d_t0_sq, e, u))
}

fn base_draw<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-(1.0 - u1).ln(), u2)
}

fn polarization_from_base(scale: f64, e: f64, u: f64) -> PolarizationSample {
    PolarizationSample { kappa: (scale * e).sqrt(), phi: 2.0 * PI * u }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T0Policy {
    AtZero,
    AtCrossover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_atoms: u64,
    pub n_realizations: usize,
    pub t0_policy: T0Policy,
    pub master_seed: u64,
    pub model: BandEdgeModel,
    pub delta_c: f64,
    pub grid: Grid,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, bins: usize, overflow: u64) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        let mut extra = 0;
        for &s in samples {
            let k = ((s - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            } else if s == hi {
                counts[bins - 1] += 1;
            } else {
                extra += 1;
            }
        }
        Histogram { edges, counts, overflow: overflow + extra }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub tau: f64,
    pub samples: Vec<PolarizationSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub dtau: f64,
    pub tau0: f64,
    pub d_t0_sq: f64,
    pub mean_inversion: Vec<f64>,
    /// Standard error of the mean inversion at each time.
    pub inversion_stderr: Vec<f64>,
    pub mean_polarization: Vec<Complex64>,
    pub mean_polarization_modulus: Vec<f64>,
    /// Ensemble mean of the per-realization |j12|.
    pub mean_amplitude: Vec<f64>,
    pub delay_times: Vec<f64>,
    pub delay_histogram: Histogram,
    pub initial_samples: Vec<PolarizationSample>,
    pub polarization_snapshots: Vec<Snapshot>,
    pub final_amplitudes: Vec<f64>,
    pub final_phases: Vec<f64>,
}

struct Realization {
    j3: Vec<f64>,
    j12: Vec<Complex64>,
    delay: Option<f64>,
    initial: PolarizationSample,
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleStats> {
    use rayon::prelude::*;
    if spec.n_atoms < 2 || spec.n_realizations == 0 {
        return Err(Error::Input("ensemble needs n_atoms >= 2 and n_realizations >= 1".into()));
    }
    spec.model.validate()?;
    let n = spec.grid.n_steps()?;
    let h = spec.grid.dtau;
    let n_atoms = spec.n_atoms as f64;
    let (tau0, i0, d_sq) = match spec.t0_policy {
        T0Policy::AtZero => (0.0, 0usize, 1.0),
        T0Policy::AtCrossover => {
            let t0 = crossover_time(&spec.model, spec.delta_c)?;
            let i0 = (t0 / h).round() as usize;
            if i0 >= n {
                return Err(Error::Input(format!("tau_max {} does not exceed the crossover time {t0}", spec.grid.tau_max)));
            }
            (t0, i0, amplitude_d(&spec.model, spec.delta_c, t0)?.norm_sqr())
        }
    };
    let steps = n - i0;
    let weights = ConvolutionWeights::for_model(&spec.model, h, steps)?;
    let run_one = |idx: usize| -> Result<Realization> {
        let mut rng = stream_rng(spec.master_seed, idx as u64);
        let (e, u) = base_draw(&mut rng);
        let sample = polarization_from_base(n_atoms * d_sq, e, u);
        let j12_0 = Complex64::from_polar(sample.kappa / n_atoms, sample.phi);
        if j12_0.norm() > 0.5 {
            return Err(Error::Numeric(format!(
                "initial polarization {} exceeds 1/2; increase n_atoms",
                j12_0.norm()
            )));
        }
        let start = CollectiveState { j3: (1.0 - 4.0 * j12_0.norm_sqr()).sqrt(), j12: j12_0 };
        // band-edge frame at the start time
        let q0 = start.j12 * Complex64::from_polar(1.0, -spec.delta_c * i0 as f64 * h);
        let mut st = Stepper::new(&weights, q0, start.j3, Inversion::Dynamic);
        for k in 0..steps {
            st.step(spec.delta_c, Complex64::new(0.0, 0.0))?;
            check_invariants(st.j3[k + 1], st.q[k + 1], (i0 + k + 1) as f64 * h)?;
        }
        let mut j3 = vec![1.0; i0];
        j3.extend_from_slice(&st.j3);
        let mut j12 = vec![Complex64::new(0.0, 0.0); i0];
        j12.extend(
            st.q.iter()
                .enumerate()
                .map(|(i, z)| z * Complex64::from_polar(1.0, spec.delta_c * (i0 + i) as f64 * h)),
        );
        let delay = j3.windows(2).enumerate().find_map(|(i, w)| {
            (w[0] > 0.0 && w[1] <= 0.0).then(|| h * (i as f64 + w[0] / (w[0] - w[1])))
        });
        Ok(Realization { j3, j12, delay, initial: sample })
    };

    let mut sum_j3 = vec![0.0; n + 1];
    let mut sum_j3_sq = vec![0.0; n + 1];
    let mut sum_j12 = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut sum_amp = vec![0.0; n + 1];
    let mut delays = Vec::new();
    let mut never = 0u64;
    let mut initial_samples = Vec::with_capacity(spec.n_realizations);
    let snap_idx: Vec<usize> = spec.snapshot_times.iter().map(|t| ((t / h).round() as usize).min(n)).collect();
    let mut snapshots: Vec<Snapshot> =
        spec.snapshot_times.iter().map(|&t| Snapshot { tau: t, samples: Vec::new() }).collect();
    let mut final_amplitudes = Vec::with_capacity(spec.n_realizations);
    let mut final_phases = Vec::with_capacity(spec.n_realizations);

    // fixed-size blocks keep the reduction order independent of the thread count
    const BLOCK: usize = 64;
    let mut start = 0;
    while start < spec.n_realizations {
        let end = (start + BLOCK).min(spec.n_realizations);
        let block: Vec<Result<Realization>> = (start..end).into_par_iter().map(run_one).collect();
        for r in block {
            let r = r?;
            for i in 0..=n {
                sum_j3[i] += r.j3[i];
                sum_j3_sq[i] += r.j3[i] * r.j3[i];
                sum_j12[i] += r.j12[i];
                sum_amp[i] += r.j12[i].norm();
            }
            match r.delay {
                Some(d) => delays.push(d),
                None => never += 1,
            }
            for (s, &i) in snapshots.iter_mut().zip(snap_idx.iter()) {
                let z = r.j12[i];
                s.samples.push(PolarizationSample { kappa: z.norm() * n_atoms, phi: z.arg().rem_euclid(2.0 * PI) });
            }
            final_amplitudes.push(r.j12[n].norm());
            final_phases.push(r.j12[n].arg());
            initial_samples.push(r.initial);
        }
        start = end;
    }
    let m = spec.n_realizations as f64;
    let mean_inversion: Vec<f64> = sum_j3.iter().map(|v| v / m).collect();
    let inversion_stderr = sum_j3_sq
        .iter()
        .zip(mean_inversion.iter())
        .map(|(s2, mu)| {
            if spec.n_realizations < 2 {
                0.0
            } else {
                ((s2 / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt()
            }
        })
        .collect();
    let mean_polarization: Vec<Complex64> = sum_j12.iter().map(|v| v / m).collect();
    let mean_polarization_modulus = mean_polarization.iter().map(|z| z.norm()).collect();
    let hist = Histogram::from_samples(&delays, 0.0, spec.grid.tau_max, spec.histogram_bins, never);
    Ok(EnsembleStats {
        dtau: h,
        tau0,
        d_t0_sq: d_sq,
        mean_inversion,
        inversion_stderr,
        mean_polarization,
        mean_polarization_modulus,
        mean_amplitude: sum_amp.iter().map(|v| v / m).collect(),
        delay_times: delays,
        delay_histogram: hist,
        initial_samples,
        polarization_snapshots: snapshots,
        final_amplitudes,
        final_phases,
    })
}

/// Circular-mean resultant length of a set of angles.
pub fn resultant_length(phases: &[f64]) -> f64 {
    let s: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum();
    s.norm() / phases.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_space_growth() {
        let d = amplitude_d(&BandEdgeModel::free_space(), 0.0, 1.0).unwrap();
        assert!((d.norm_sqr() - E).abs() < 1e-12);
        assert_eq!(crossover_time(&BandEdgeModel::free_space(), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn d_starts_at_one() {
        let d = amplitude_d(&BandEdgeModel::isotropic(), 0.0, 0.0).unwrap();
        assert!((d - 1.0).norm() < 1e-13);
    }

    #[test]
    fn histogram_mass() {
        let h = Histogram::from_samples(&[0.5, 1.5, 9.0, 10.0, 12.0], 0.0, 10.0, 5, 3);
        assert_eq!(h.total(), 8);
        assert_eq!(h.overflow, 4);
    }

    #[test]
    fn unit_scale_second_moment() {
        let mut rng = stream_rng(3, 0);
        let n = 20000;
        let m: f64 = (0..n)
            .map(|_| sample_initial_polarization(1.0, 1.0, &mut rng).unwrap().kappa.powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((m - 1.0).abs() < 0.05);
    }
}
