use bandedge::bath_oracle::*;
use bandedge::kernel::memory_kernel;
use bandedge::lowexc::{excited_population, solve_roots, solve_roots_signed, amplitude};
use bandedge::{BandEdgeModel, Complex64};

fn log_lags(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn kernel_error(bath: &DiscreteBath, m: &BandEdgeModel, lag: f64) -> f64 {
    let exact = memory_kernel(m, bath.delta_c, lag).unwrap();
    (bath.reconstruct_kernel(lag) - exact).norm() / exact.norm()
}

#[test]
fn isotropic_kernel_reconstruction_within_one_percent() {
    let m = BandEdgeModel::isotropic();
    let bath = build_bath(&m, 0.0, 2000, 550.0).unwrap();
    assert!(bath.recurrence_time > 10.0);
    for lag in log_lags(0.05, 10.0, 200) {
        let e = kernel_error(&bath, &m, lag);
        assert!(e < 0.01, "lag {lag}: {e}");
    }
}

#[test]
fn doubling_modes_reduces_the_error() {
    let m = BandEdgeModel::isotropic();
    let coarse = build_bath(&m, 0.0, 1000, 400.0).unwrap();
    let fine = build_bath(&m, 0.0, 2000, 400.0).unwrap();
    for lag in [2.0, 5.0] {
        let (a, b) = (kernel_error(&coarse, &m, lag), kernel_error(&fine, &m, lag));
        assert!(b < 0.5 * a, "lag {lag}: {a} -> {b}");
    }
}

#[test]
fn low_excitation_matches_closed_form() {
    let m = BandEdgeModel::isotropic();
    for d in [-1.0, 0.0, 1.0] {
        let bath = build_bath(&m, d, 2000, 200.0).unwrap();
        let s = oracle_evolve(&bath, OracleInit::LowExcitation, 20.0, 0.1, OracleOptions::default()).unwrap();
        assert!(!s.truncated);
        let sol = solve_roots(d).unwrap();
        for i in 0..s.tau.len() {
            let pop = s.j12[i].norm_sqr();
            assert!((pop - excited_population(&sol, s.tau[i]).unwrap()).abs() < 1e-2, "delta {d} tau {}", s.tau[i]);
            // every excitation is either in the atoms or in a mode
            assert!((pop + s.field_population[i] - 1.0).abs() < 1e-6, "sum rule at tau {}", s.tau[i]);
        }
    }
}

#[test]
fn growth_identity_for_inverted_atoms() {
    let m = BandEdgeModel::isotropic();
    let bath = build_bath(&m, 0.0, 500, 200.0).unwrap();
    let s = oracle_evolve(&bath, OracleInit::Inverted, 5.0, 0.1, OracleOptions::default()).unwrap();
    let sol = solve_roots_signed(0.0, -1.0).unwrap();
    for i in 0..s.tau.len() {
        let d2 = s.j12[i].norm_sqr();
        assert!((d2 - 1.0 - s.field_population[i]).abs() < 1e-6 * d2);
        let exact = amplitude(&sol, s.tau[i]).unwrap().norm_sqr();
        assert!((d2 - exact).abs() < 5e-3 * exact, "tau {}: {d2} vs {exact}", s.tau[i]);
    }
}

// A flat band of width W misses the Lorentzian wings, an error of order γ/W.
#[test]
fn free_space_bath_decays_exponentially() {
    let err = |w: f64| {
        let bath = build_bath(&BandEdgeModel::free_space(), 0.0, (10.0 * w) as usize, w).unwrap();
        let s = oracle_evolve(&bath, OracleInit::LowExcitation, 10.0, 0.1, OracleOptions::default()).unwrap();
        s.tau.iter().zip(&s.j12).map(|(t, b)| (b.norm_sqr() - (-t).exp()).abs()).fold(0.0, f64::max)
    };
    let (a, b) = (err(200.0), err(400.0));
    assert!(a < 1e-2, "{a}");
    assert!(b < 0.6 * a, "{a} -> {b}");
}

#[test]
fn runs_stop_at_the_recurrence_time() {
    let bath = build_bath(&BandEdgeModel::isotropic(), 0.0, 200, 50.0).unwrap();
    let s = oracle_evolve(&bath, OracleInit::LowExcitation, 1e3, 0.5, OracleOptions::default()).unwrap();
    assert!(s.truncated);
    assert!(*s.tau.last().unwrap() <= bath.recurrence_time);
}

#[test]
fn mean_field_oracle_conserves_bloch_length() {
    let bath = build_bath(&BandEdgeModel::isotropic(), 0.0, 500, 200.0).unwrap();
    let init = OracleInit::MeanField { j3: 1.0 - 2e-3, j12: Complex64::new((1e-3f64 * (1.0 - 1e-3)).sqrt(), 0.0) };
    let s = oracle_evolve(&bath, init, 10.0, 0.1, OracleOptions::default()).unwrap();
    for i in 0..s.tau.len() {
        assert!((s.j3[i].powi(2) + 4.0 * s.j12[i].norm_sqr() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn bath_inputs_are_validated() {
    assert!(build_bath(&BandEdgeModel::isotropic(), 0.0, 10, 100.0).is_err());
    assert!(build_bath(&BandEdgeModel::isotropic(), 0.0, 1000, -1.0).is_err());
    let full = BandEdgeModel::IsotropicFull { k0: 3.0, gamma_k: 4.0, cutoff: None };
    assert!(build_bath(&full, 0.0, 1000, 100.0).is_err());
    // far too coarse to reproduce the kernel at unit lag
    assert!(build_bath(&BandEdgeModel::isotropic(), 0.0, 100, 2.0).is_err());
}
