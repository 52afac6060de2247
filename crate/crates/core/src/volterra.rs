//! Product-integration stepper for the singular Volterra system
//!
//!   dq/dτ  = −iδ(τ) q + j3 (M + κ ξ)
//!   dj3/dτ = −4 Re[q* (M + κ ξ)]
//!   M(τ)   = ∫₀^τ K(τ−τ') q(τ') dτ' + L q(τ)
//!
//! written in the band-edge frame q = e^{−iδ_c τ} j12, where K carries no
//! detuning phase. The kernel is integrated exactly against piecewise-linear
//! interpolation of q. Each step is an implicit midpoint rule: q_{n+1} is linear
//! given the midpoint inversion, and the inversion is found by fixed-point
//! iteration. The update conserves j3² + 4|q|² exactly.

use crate::error::{Error, Result};
use crate::kernel::{AnisotropicMoments, BandEdgeModel, IsotropicMoments, KernelMoments};
use num_complex::Complex64;

/// Convolution weights on a uniform grid of spacing h.
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    pub h: f64,
    /// Combined weights W_m multiplying q_{n−m}, 0 ≤ m < n.
    pub interior: Vec<Complex64>,
    /// Weights multiplying q_0 at step n, indexed by n − 1.
    pub end: Vec<Complex64>,
    pub local: Complex64,
}

impl ConvolutionWeights {
    pub fn from_moments<K: KernelMoments>(kernel: &K, h: f64, n_steps: usize) -> Self {
        let mut phi: Vec<(Complex64, Complex64)> = Vec::with_capacity(n_steps + 1);
        for j in 0..=n_steps {
            phi.push(kernel.moments(j as f64 * h));
        }
        let mut wa = Vec::with_capacity(n_steps);
        let mut wb = Vec::with_capacity(n_steps);
        for j in 0..n_steps {
            let d0 = phi[j + 1].0 - phi[j].0;
            let d1 = phi[j + 1].1 - phi[j].1;
            wa.push(((j + 1) as f64 * h * d0 - d1) / h);
            wb.push((d1 - j as f64 * h * d0) / h);
        }
        let local = kernel.local_term();
        let mut interior = Vec::with_capacity(n_steps);
        for m in 0..n_steps {
            let mut w = wa[m];
            if m == 0 {
                w += local;
            } else {
                w += wb[m - 1];
            }
            interior.push(w);
        }
        ConvolutionWeights { h, interior, end: wb, local }
    }

    /// Markovian limit: M = (γ/2) q.
    pub fn markovian(rate: f64, h: f64, n_steps: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let local = Complex64::new(rate / 2.0, 0.0);
        let mut interior = vec![zero; n_steps];
        if n_steps > 0 {
            interior[0] = local;
        }
        ConvolutionWeights { h, interior, end: vec![zero; n_steps], local }
    }

    pub fn for_model(model: &BandEdgeModel, h: f64, n_steps: usize) -> Result<Self> {
        model.validate()?;
        match *model {
            BandEdgeModel::FreeSpace { gamma } => Ok(Self::markovian(gamma, h, n_steps)),
            BandEdgeModel::IsotropicEffMass { .. } => Ok(Self::from_moments(&IsotropicMoments, h, n_steps)),
            BandEdgeModel::AnisotropicEffMass { omega_c, .. } => {
                Ok(Self::from_moments(&AnisotropicMoments { omega_c }, h, n_steps))
            }
            BandEdgeModel::IsotropicFull { .. } => Err(Error::Input(
                "time evolution is implemented for the free-space and effective-mass models".into(),
            )),
        }
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    /// Memory integral at node n, excluding the W_0 q_n term.
    fn history(&self, q: &[Complex64], n: usize) -> Complex64 {
        if n == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = self.end[n - 1] * q[0];
        for m in 1..n {
            acc += self.interior[m] * q[n - m];
        }
        acc
    }
}

/// Inversion handling during stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inversion {
    Dynamic,
    /// j3 held fixed; the equation for q is linear.
    Frozen(f64),
}

/// State and history of one trajectory.
pub struct Stepper<'a> {
    weights: &'a ConvolutionWeights,
    pub q: Vec<Complex64>,
    pub j3: Vec<f64>,
    memory: Vec<Complex64>,
    inversion: Inversion,
}

const MAX_ITER: usize = 200;

impl<'a> Stepper<'a> {
    pub fn new(weights: &'a ConvolutionWeights, q0: Complex64, j30: f64, inversion: Inversion) -> Self {
        let cap = weights.len() + 1;
        let mut q = Vec::with_capacity(cap);
        let mut j3 = Vec::with_capacity(cap);
        let mut memory = Vec::with_capacity(cap);
        q.push(q0);
        j3.push(match inversion {
            Inversion::Frozen(v) => v,
            Inversion::Dynamic => j30,
        });
        memory.push(weights.local * q0);
        Stepper { weights, q, j3, memory, inversion }
    }

    pub fn steps_taken(&self) -> usize {
        self.q.len() - 1
    }

    /// Advance one step with local detuning `delta` and integrated noise `xi_int`
    /// (∫ κ ξ dτ over the step, zero for deterministic runs).
    pub fn step(&mut self, delta: f64, xi_int: Complex64) -> Result<()> {
        let n = self.steps_taken();
        let k = n + 1;
        if k > self.weights.len() {
            return Err(Error::StepSize(format!("weights prepared for {} steps only", self.weights.len())));
        }
        let h = self.weights.h;
        let w0 = self.weights.interior[0];
        let hist = self.weights.history(&self.q, k);
        let (qn, jn, mn) = (self.q[n], self.j3[n], self.memory[n]);
        let a = Complex64::new(1.0, -0.5 * delta * h);
        let b = Complex64::new(1.0, 0.5 * delta * h);
        let solve_q = |jm: f64| (qn * a + jm * (0.5 * h * (mn + hist) + xi_int)) / (b - 0.5 * h * jm * w0);
        let (qp, jp) = match self.inversion {
            Inversion::Frozen(v) => (solve_q(v), v),
            Inversion::Dynamic => {
                let mut jp = jn;
                let mut qp = solve_q(jn);
                let mut converged = false;
                for _ in 0..MAX_ITER {
                    let jm = 0.5 * (jn + jp);
                    qp = solve_q(jm);
                    let qm = 0.5 * (qn + qp);
                    let mm = 0.5 * (mn + hist + w0 * qp);
                    let jnew = jn - 4.0 * (qm.conj() * (h * mm + xi_int)).re;
                    let diff = (jnew - jp).abs();
                    jp = jnew;
                    if diff <= 1e-15 * (1.0 + jp.abs()) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::StepSize(format!(
                        "implicit step did not converge at tau = {}; reduce dtau",
                        k as f64 * h
                    )));
                }
                (qp, jp)
            }
        };
        if !(qp.re.is_finite() && qp.im.is_finite() && jp.is_finite()) {
            return Err(Error::Instability { tau: k as f64 * h, detail: "non-finite state".into() });
        }
        self.q.push(qp);
        self.j3.push(jp);
        self.memory.push(hist + w0 * qp);
        Ok(())
    }
}

/// Solve the linear equation dq/dτ = −iδq + σ·M with q(0) = 1.
/// σ = −1 gives the low-excitation amplitude, σ = +1 the inverted-regime growth.
pub fn solve_linear(model: &BandEdgeModel, delta: f64, sign: f64, h: f64, n_steps: usize) -> Result<Vec<Complex64>> {
    let w = ConvolutionWeights::for_model(model, h, n_steps)?;
    let mut st = Stepper::new(&w, Complex64::new(1.0, 0.0), sign, Inversion::Frozen(sign));
    for _ in 0..n_steps {
        st.step(delta, Complex64::new(0.0, 0.0))?;
    }
    // back to the atom frame
    Ok(st
        .q
        .iter()
        .enumerate()
        .map(|(i, q)| q * Complex64::from_polar(1.0, delta * i as f64 * h))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markovian_linear_decay() {
        let b = solve_linear(&BandEdgeModel::free_space(), 0.0, -1.0, 0.01, 200).unwrap();
        let exact = (-0.5f64 * 2.0).exp();
        assert!((b[200].norm() - exact).abs() < 1e-5);
    }

    #[test]
    fn weights_integrate_constant_exactly() {
        // Σ W_m + end = Φ0(nh) for q ≡ 1
        let h = 0.05;
        let n = 40;
        let w = ConvolutionWeights::from_moments(&IsotropicMoments, h, n);
        let q = vec![Complex64::new(1.0, 0.0); n + 1];
        let m = w.history(&q, n) + w.interior[0];
        let exact = IsotropicMoments.moments(n as f64 * h).0;
        assert!((m - exact).norm() < 1e-12);
    }

    #[test]
    fn bloch_length_is_conserved() {
        let model = BandEdgeModel::isotropic();
        let w = ConvolutionWeights::for_model(&model, 0.05, 400).unwrap();
        let r: f64 = 1e-3;
        let mut st = Stepper::new(&w, Complex64::new((r * (1.0 - r)).sqrt(), 0.0), 1.0 - 2.0 * r, Inversion::Dynamic);
        for _ in 0..400 {
            st.step(0.3, Complex64::new(0.0, 0.0)).unwrap();
        }
        for (q, j) in st.q.iter().zip(st.j3.iter()) {
            assert!((j * j + 4.0 * q.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
