//! Factorized (mean-field) evolution of inversion and polarization.

use crate::error::{Error, Result};
use crate::kernel::BandEdgeModel;
use crate::series::{self, CollectiveState, Grid, InitialStateSpec, TimeSeries};
use crate::volterra::{ConvolutionWeights, Inversion, Stepper};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const INVARIANT_EPS: f64 = 1e-6;

/// Gaussian Stark shift redrawn once per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Per-realization generator: stream `index` of the ChaCha8 sequence for `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn evolve_meanfield(
    model: &BandEdgeModel,
    delta_c: f64,
    init: &InitialStateSpec,
    grid: &Grid,
    dephasing: Option<&DephasingSpec>,
) -> Result<TimeSeries> {
    let state = init.state()?;
    let n = grid.n_steps()?;
    let weights = ConvolutionWeights::for_model(model, grid.dtau, n)?;
    let mut rng = dephasing.map(|d| stream_rng(d.seed, 0));
    evolve_with_weights(&weights, delta_c, state, n, dephasing.map(|d| d.sigma), rng.as_mut())
}

/// Evolve from an arbitrary state on precomputed weights.
pub fn evolve_with_weights<R: Rng>(
    weights: &ConvolutionWeights,
    delta_c: f64,
    state: CollectiveState,
    n_steps: usize,
    sigma: Option<f64>,
    rng: Option<&mut R>,
) -> Result<TimeSeries> {
    if !delta_c.is_finite() {
        return Err(Error::Domain("delta_c must be finite".into()));
    }
    let normal = match sigma {
        Some(s) if s > 0.0 => {
            Some(Normal::new(0.0, s).map_err(|e| Error::Domain(format!("invalid dephasing sigma: {e}")))?)
        }
        Some(s) if !(s >= 0.0) => return Err(Error::Domain(format!("sigma must be non-negative, got {s}"))),
        _ => None,
    };
    let mut rng = rng;
    let h = weights.h;
    let mut st = Stepper::new(weights, state.j12, state.j3, Inversion::Dynamic);
    for k in 0..n_steps {
        let shift = match (&normal, rng.as_deref_mut()) {
            (Some(d), Some(r)) => d.sample(r),
            _ => 0.0,
        };
        st.step(delta_c + shift, Complex64::new(0.0, 0.0))?;
        check_invariants(st.j3[k + 1], st.q[k + 1], (k + 1) as f64 * h)?;
    }
    Ok(to_atom_frame(st.j3, st.q, delta_c, h, 0.0))
}

pub(crate) fn check_invariants(j3: f64, q: Complex64, tau: f64) -> Result<()> {
    if j3.abs() > 1.0 + INVARIANT_EPS || q.norm() > 0.5 + INVARIANT_EPS {
        return Err(Error::Instability {
            tau,
            detail: format!("state left the Bloch ball: j3 = {j3}, |j12| = {}", q.norm()),
        });
    }
    Ok(())
}

/// j12 = e^{iδ_c τ} q, with τ measured from `tau0`.
pub(crate) fn to_atom_frame(j3: Vec<f64>, q: Vec<Complex64>, delta_c: f64, h: f64, tau0: f64) -> TimeSeries {
    let j12 = q
        .iter()
        .enumerate()
        .map(|(i, z)| z * Complex64::from_polar(1.0, delta_c * (tau0 + i as f64 * h)))
        .collect();
    TimeSeries { dtau: h, j3, j12 }
}

/// Markovian superradiance: j3 = −tanh(γ(τ − τ_d)/2), τ_d = (2/γ) artanh(1 − 2r).
/// Returns (j3, emission rate −dj3/dτ).
pub fn free_space_analytic(r: f64, gamma: f64, tau: f64) -> (f64, f64) {
    let td = 2.0 / gamma * (1.0 - 2.0 * r).atanh();
    let x = gamma * (tau - td) / 2.0;
    let j3 = -x.tanh();
    let sech = 1.0 / x.cosh();
    (j3, gamma / 2.0 * sech * sech)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dtau: f64,
    pub j3_final: f64,
    pub j3_final_halved: f64,
    pub difference: f64,
    pub passed: bool,
}

/// Compare j3(τ_max) at dtau and dtau/2.
pub fn convergence_check(
    model: &BandEdgeModel,
    delta_c: f64,
    init: &InitialStateSpec,
    grid: &Grid,
) -> Result<ConvergenceReport> {
    let a = evolve_meanfield(model, delta_c, init, grid, None)?;
    let b = evolve_meanfield(model, delta_c, init, &grid.halved(), None)?;
    let (x, y) = (a.last().j3, b.last().j3);
    Ok(ConvergenceReport {
        dtau: grid.dtau,
        j3_final: x,
        j3_final_halved: y,
        difference: (x - y).abs(),
        passed: (x - y).abs() < 1e-3,
    })
}

/// Steady-state summary over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub j3: f64,
    pub polarization: f64,
    pub phase_velocity: f64,
}

pub fn steady_state(series: &TimeSeries, window: f64) -> Result<SteadyState> {
    let theta: Vec<f64> = series::phase_angle(series)
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Numeric("polarization vanishes; phase undefined".into()))?;
    let amp = series.polarization_modulus();
    Ok(SteadyState {
        j3: series::tail_mean(&series.j3, series.dtau, window),
        polarization: series::tail_mean(&amp, series.dtau, window),
        phase_velocity: series::tail_slope(&theta, series.dtau, window),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransparentSearch {
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
    pub grid: Grid,
    pub window: f64,
    pub tol: f64,
}

impl Default for TransparentSearch {
    fn default() -> Self {
        TransparentSearch { r: 1e-5, lo: -1.0, hi: 0.0, grid: Grid::new(100.0, 0.02), window: 20.0, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransparentResult {
    pub delta_star: f64,
    pub steady: SteadyState,
    pub evaluations: usize,
}

/// Detuning where the steady phase velocity vanishes, by bisection.
pub fn find_transparent_detuning(model: &BandEdgeModel, search: &TransparentSearch) -> Result<TransparentResult> {
    if !matches!(model, BandEdgeModel::IsotropicEffMass { .. }) {
        return Err(Error::Input("transparent-state search is defined for the isotropic model".into()));
    }
    let init = InitialStateSpec::new(search.r);
    let eval = |d: f64| -> Result<SteadyState> {
        let s = evolve_meanfield(model, d, &init, &search.grid, None)?;
        steady_state(&s, search.window)
    };
    let (mut lo, mut hi) = (search.lo, search.hi);
    let (mut flo, fhi) = (eval(lo)?, eval(hi)?);
    let mut evaluations = 2;
    if flo.phase_velocity.signum() == fhi.phase_velocity.signum() {
        return Err(Error::Search(format!(
            "steady phase velocity has the same sign at {lo} ({}) and {hi} ({})",
            flo.phase_velocity, fhi.phase_velocity
        )));
    }
    let mut last = flo;
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        evaluations += 1;
        if fm.phase_velocity.signum() == flo.phase_velocity.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        last = fm;
    }
    let delta_star = 0.5 * (lo + hi);
    let steady = if evaluations > 2 { eval(delta_star)? } else { last };
    Ok(TransparentResult { delta_star, steady, evaluations: evaluations + 1 })
}

/// Average of `n_runs` dephased trajectories on independent Stark-shift streams.
pub fn dephased_ensemble_mean(
    model: &BandEdgeModel,
    delta_c: f64,
    init: &InitialStateSpec,
    grid: &Grid,
    dephasing: &DephasingSpec,
    n_runs: usize,
) -> Result<TimeSeries> {
    if n_runs == 0 {
        return Err(Error::Input("n_runs must be at least 1".into()));
    }
    let state = init.state()?;
    let n = grid.n_steps()?;
    let weights = ConvolutionWeights::for_model(model, grid.dtau, n)?;
    let runs: Vec<Result<TimeSeries>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(dephasing.seed, i);
            evolve_with_weights(&weights, delta_c, state, n, Some(dephasing.sigma), Some(&mut rng))
        })
        .collect();
    let mut j3 = vec![0.0; n + 1];
    let mut j12 = vec![Complex64::new(0.0, 0.0); n + 1];
    for run in runs {
        let run = run?;
        for i in 0..=n {
            j3[i] += run.j3[i];
            j12[i] += run.j12[i];
        }
    }
    let inv = 1.0 / n_runs as f64;
    Ok(TimeSeries {
        dtau: grid.dtau,
        j3: j3.into_iter().map(|v| v * inv).collect(),
        j12: j12.into_iter().map(|v| v * inv).collect(),
    })
}
