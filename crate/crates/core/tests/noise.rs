use bandedge::meanfield::evolve_meanfield;
use bandedge::noise::*;
use bandedge::series::{Grid, InitialStateSpec};
use bandedge::volterra::ConvolutionWeights;
use bandedge::{BandEdgeModel, Complex64};
use std::f64::consts::PI;

#[test]
fn paths_are_reproducible() {
    let spec = NoiseSpec::new(1, 200, 42);
    let g = Grid::new(5.0, 0.01);
    let a = generate_noise(&spec, &g, 3).unwrap();
    assert_eq!(a, generate_noise(&spec, &g, 3).unwrap());
    assert_ne!(a, generate_noise(&spec, &g, 4).unwrap());
    assert_ne!(a, generate_noise(&NoiseSpec::new(1, 200, 43), &g, 3).unwrap());
    assert_eq!(a.xi.len(), 501);
}

#[test]
fn streaming_and_stored_autocorrelation_agree() {
    for grid in [FrequencyGrid::Uniform, FrequencyGrid::Stratified] {
        let spec = NoiseSpec { grid, ..NoiseSpec::new(1, 300, 9) };
        let (dt, span) = (0.01, 3.0);
        let lags = [0.0, 0.1, 0.5, 2.0];
        let n_base = (span / dt) as usize;
        let g = Grid::new(span + 2.0, dt);
        let paths: Vec<NoisePath> = (0..10).map(|i| generate_noise(&spec, &g, i).unwrap()).collect();
        let base: Vec<usize> = (0..n_base).collect();
        let stored = autocorrelation(&paths, &lags, &base).unwrap();
        let streamed = ensemble_autocorrelation(&spec, 10, dt, &lags, span).unwrap();
        for (a, b) in stored.iter().zip(&streamed) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

// 2∫₀^Ω P(ω) cos(ω lag) dω by piecewise adaptive quadrature (scipy).
#[test]
fn band_limited_autocorrelation_matches_quadrature() {
    let cases = [
        (1, 2.0 * PI * 1000.0, 0.1, 3.1621975595002993),
        (1, 2.0 * PI * 1000.0, 1.0, 0.9999991989859461),
        (1, 2.0 * PI * 1000.0, 5.0, 0.4472135634583816),
        (1, 2.0 * PI * 100.0, 0.3, 1.825460440309885),
        (3, 50.0, 0.7, -8.819028035741738),
        (3, 50.0, 2.0, -3.1861632437662952),
    ];
    for (alpha, om, lag, expect) in cases {
        let v = band_limited_autocorrelation(alpha, om, lag);
        assert!((v - expect).abs() < 1e-7 * expect.abs(), "{alpha} {om} {lag}: {v} vs {expect}");
    }
    assert!((target_autocorrelation(1, 4.0) - 0.5).abs() < 1e-15);
    assert!((target_autocorrelation(3, 4.0) + 0.125).abs() < 1e-15);
}

fn mean_and_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn ensemble_moments_within_three_sigma() {
    for grid in [FrequencyGrid::Uniform, FrequencyGrid::Stratified] {
        let spec = NoiseSpec { grid, omega_max: 2.0 * PI * 100.0, ..NoiseSpec::new(1, 1000, 17) };
        let g = Grid::new(1.5, 0.01);
        let paths: Vec<NoisePath> = (0..600).map(|i| generate_noise(&spec, &g, i).unwrap()).collect();
        let at = |k: usize| paths.iter().map(|p| p.xi[k]).collect::<Vec<f64>>();
        let (m, err) = mean_and_error(&at(37));
        assert!(m.abs() < 3.0 * err, "{grid:?} mean {m} ± {err}");
        for lag in [10usize, 50, 100] {
            let prod: Vec<f64> = paths.iter().map(|p| p.xi[20] * p.xi[20 + lag]).collect();
            let (m, err) = mean_and_error(&prod);
            let expect = analytic_autocorrelation(&spec, lag as f64 * 0.01);
            assert!((m - expect).abs() < 3.0 * err, "{grid:?} lag {lag}: {m} vs {expect} ± {err}");
        }
    }
}

#[test]
fn zero_coupling_reproduces_mean_field() {
    let m = BandEdgeModel::isotropic();
    let g = Grid::new(10.0, 0.02);
    let init = InitialStateSpec::new(1e-4);
    let n = g.n_steps().unwrap();
    let w = ConvolutionWeights::for_model(&m, g.dtau, n).unwrap();
    let driven = evolve_driven(&w, 0.1, init.state().unwrap(), n, &NoiseSpec::new(1, 100, 1), 0, Complex64::new(0.0, 0.0)).unwrap();
    let plain = evolve_meanfield(&m, 0.1, &init, &g, None).unwrap();
    for i in 0..plain.len() {
        assert!((driven.j3[i] - plain.j3[i]).abs() < 1e-12);
    }
}

#[test]
fn noise_drives_emission_from_full_inversion() {
    let spec = NoiseSpec { grid: FrequencyGrid::Uniform, omega_max: 2.0 * PI * 100.0, ..NoiseSpec::new(1, 1000, 1) };
    let s = evolve_stochastic(&BandEdgeModel::isotropic(), 0.0, 1000, &Grid::new(15.0, 0.01), &spec, 0).unwrap();
    assert_eq!(s.j3[0], 1.0);
    assert!(s.first_zero_crossing().is_some());
    assert!(s.j3.iter().zip(&s.j12).all(|(a, b)| a * a + 4.0 * b.norm_sqr() <= 1.0 + 1e-9));
    assert!(evolve_stochastic(&BandEdgeModel::isotropic(), 0.0, 500, &Grid::new(1.0, 0.01), &spec, 0).is_err());
    assert!(evolve_stochastic(&BandEdgeModel::free_space(), 0.0, 1000, &Grid::new(1.0, 0.01), &spec, 0).is_err());
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(NoiseSpec::new(2, 10, 0).validate().is_err());
    assert!(NoiseSpec::new(1, 0, 0).validate().is_err());
    assert!(ensemble_autocorrelation(&NoiseSpec::new(1, 10, 0), 4, 0.01, &[0.015], 1.0).is_err());
}
