//! Collective state, uniform time series and steady-state detection.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Per-atom inversion and polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveState {
    pub j3: f64,
    pub j12: Complex64,
}

impl CollectiveState {
    pub fn bloch_length_sq(&self) -> f64 {
        self.j3 * self.j3 + 4.0 * self.j12.norm_sqr()
    }
}

/// Product state with ground-state admixture r and polarization phase `phase0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSpec {
    pub r: f64,
    #[serde(default)]
    pub phase0: f64,
}

impl InitialStateSpec {
    pub fn new(r: f64) -> Self {
        InitialStateSpec { r, phase0: 0.0 }
    }

    pub fn state(&self) -> Result<CollectiveState> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::Domain(format!("r must lie in (0, 1), got {}", self.r)));
        }
        if !self.phase0.is_finite() {
            return Err(Error::Domain("phase0 must be finite".into()));
        }
        let amp = (self.r * (1.0 - self.r)).sqrt();
        Ok(CollectiveState { j3: 1.0 - 2.0 * self.r, j12: Complex64::from_polar(amp, self.phase0) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub tau_max: f64,
    pub dtau: f64,
}

impl Grid {
    pub fn new(tau_max: f64, dtau: f64) -> Self {
        Grid { tau_max, dtau }
    }

    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dtau > 0.0 && self.dtau.is_finite() && self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(Error::Domain(format!(
                "grid requires positive finite tau_max and dtau, got {} and {}",
                self.tau_max, self.dtau
            )));
        }
        Ok((self.tau_max / self.dtau).round() as usize)
    }

    pub fn halved(&self) -> Grid {
        Grid { tau_max: self.tau_max, dtau: self.dtau / 2.0 }
    }
}

/// Uniform-grid trajectory of (j3, j12).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dtau: f64,
    pub j3: Vec<f64>,
    pub j12: Vec<Complex64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.j3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j3.is_empty()
    }

    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.dtau
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.tau(i)).collect()
    }

    pub fn state(&self, i: usize) -> CollectiveState {
        CollectiveState { j3: self.j3[i], j12: self.j12[i] }
    }

    pub fn last(&self) -> CollectiveState {
        self.state(self.len() - 1)
    }

    /// Index of the sample nearest to τ.
    pub fn index_at(&self, tau: f64) -> usize {
        ((tau / self.dtau).round() as usize).min(self.len() - 1)
    }

    pub fn polarization_modulus(&self) -> Vec<f64> {
        self.j12.iter().map(|z| z.norm()).collect()
    }

    /// Emission rate −dj3/dτ by central differences.
    pub fn emission_rate(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                if a == b {
                    0.0
                } else {
                    -(self.j3[b] - self.j3[a]) / ((b - a) as f64 * self.dtau)
                }
            })
            .collect()
    }

    /// First τ where j3 crosses zero from above, linearly interpolated.
    pub fn first_zero_crossing(&self) -> Option<f64> {
        self.j3.windows(2).enumerate().find_map(|(i, w)| {
            if w[0] > 0.0 && w[1] <= 0.0 {
                Some(self.tau(i) + self.dtau * w[0] / (w[0] - w[1]))
            } else {
                None
            }
        })
    }
}

/// Unwrapped polarization phase; `None` where |j12| ≤ 1e-12.
pub fn phase_angle(series: &TimeSeries) -> Vec<Option<f64>> {
    unwrap_phase(&series.j12, 1e-12)
}

pub fn unwrap_phase(z: &[Complex64], floor: f64) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(z.len());
    let mut prev: Option<f64> = None;
    for v in z {
        if v.norm() <= floor {
            out.push(None);
            continue;
        }
        let raw = v.arg();
        let th = match prev {
            None => raw,
            Some(p) => {
                let two_pi = 2.0 * std::f64::consts::PI;
                p + (raw - p + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
            }
        };
        prev = Some(th);
        out.push(Some(th));
    }
    out
}

/// Steady when the maximum variation over the trailing window is below `tol`.
pub fn is_steady(values: &[f64], dtau: f64, window: f64, tol: f64) -> bool {
    let m = (window / dtau).round() as usize;
    if values.len() < m + 1 || m == 0 {
        return false;
    }
    let tail = &values[values.len() - m - 1..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo < tol
}

/// Mean of the trailing window.
pub fn tail_mean(values: &[f64], dtau: f64, window: f64) -> f64 {
    let m = ((window / dtau).round() as usize).clamp(1, values.len());
    values[values.len() - m..].iter().sum::<f64>() / m as f64
}

/// Least-squares slope over the trailing window.
pub fn tail_slope(values: &[f64], dtau: f64, window: f64) -> f64 {
    let m = ((window / dtau).round() as usize).clamp(2, values.len());
    let tail = &values[values.len() - m..];
    let n = m as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = tail.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in tail.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx / dtau
}
