use bandedge::kernel::*;
use bandedge::quad::{integrate_to_infinity, QuadOptions};
use bandedge::{BandEdgeModel, Complex64};
use std::f64::consts::{FRAC_PI_4, PI};

fn opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 5000 }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn isotropic_kernel_scales_as_inverse_root() {
    let m = BandEdgeModel::isotropic();
    for &t in &[1e-4, 0.3, 1.0, 17.0] {
        let g = memory_kernel(&m, 0.0, t).unwrap();
        assert!((g.norm() * (PI * t).sqrt() - 1.0).abs() < 1e-14);
        assert!((g.arg() + FRAC_PI_4).abs() < 1e-14);
    }
    let g = memory_kernel(&m, -0.7, 2.0).unwrap();
    let expect = Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), -FRAC_PI_4 - 1.4);
    assert!((g - expect).norm() < 1e-14);
}

// ∫₀^∞ G(t) e^{−st} dt with t = u², which removes the t^{-1/2} endpoint.
fn numeric_laplace(m: &BandEdgeModel, delta: f64, s: Complex64) -> Complex64 {
    integrate_to_infinity(
        |u| {
            if u == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = u * u;
            2.0 * u * memory_kernel(m, delta, t).unwrap() * (-s * t).exp()
        },
        0.0,
        opts(),
    )
    .unwrap()
    .value
}

#[test]
fn isotropic_laplace_matches_quadrature() {
    let m = BandEdgeModel::isotropic();
    for (d, s) in [(0.0, Complex64::new(0.7, 0.3)), (0.5, Complex64::new(2.0, -1.0))] {
        let num = numeric_laplace(&m, d, s);
        let closed = kernel_laplace(&m, d, s).unwrap();
        assert!(rel(num, closed) < 1e-8, "{num} vs {closed}");
    }
}

#[test]
fn anisotropic_laplace_matches_quadrature() {
    let m = BandEdgeModel::anisotropic(4.0);
    for (d, s) in [(0.0, Complex64::new(1.0, 0.5)), (-0.3, Complex64::new(3.0, 2.0))] {
        let num = numeric_laplace(&m, d, s);
        let closed = kernel_laplace(&m, d, s).unwrap();
        assert!(rel(num, closed) < 1e-6, "{num} vs {closed}");
    }
}

#[test]
fn anisotropic_long_time_form() {
    let full = full_anisotropic_kernel(1e3, 0.0).unwrap();
    let lead = asymptotic_bracket(1e3);
    assert!(rel(full, lead) < 0.01);
    assert!((lead.arg() + 3.0 * FRAC_PI_4).abs() < 1e-12);
    assert!((full.arg() + 3.0 * FRAC_PI_4).abs() < 0.01);
    // |G| Δτ^{3/2} → 1
    for &t in &[50.0, 200.0] {
        let g = anisotropic_kernel(100.0, t);
        assert!((g.norm() * t.powf(1.5) - 1.0).abs() < 0.01, "{t}: {}", g.norm() * t.powf(1.5));
    }
}

#[test]
fn anisotropic_short_time_divergence() {
    for &x in &[1e-8, 1e-6] {
        let b = full_anisotropic_kernel(x, 0.0).unwrap();
        let lead = (PI / Complex64::new(0.0, x)).sqrt();
        assert!(rel(b, lead) < 3.0 * x.sqrt() * PI.sqrt(), "{x}");
    }
}

// G(t) = (2ω/√π) ∫₀^∞ √ν/(ω+ν) e^{−iνt} dν, rotated onto ν = −iy and then y = u².
fn mode_integral(omega: f64, t: f64) -> Complex64 {
    let c = Complex64::from_polar(1.0, -FRAC_PI_4);
    let v = integrate_to_infinity(
        |u| {
            let y = u * u;
            -Complex64::i() * c * 2.0 * u * u * (-y * t).exp() / Complex64::new(omega, -y)
        },
        0.0,
        opts(),
    )
    .unwrap()
    .value;
    2.0 * omega / PI.sqrt() * v
}

#[test]
fn anisotropic_kernel_matches_mode_integral() {
    for (omega, t) in [(1.0, 1.0), (100.0, 0.01), (3.0, 2.5)] {
        let closed = anisotropic_kernel(omega, t);
        let num = mode_integral(omega, t);
        assert!(rel(closed, num) < 1e-4, "{omega} {t}: {closed} vs {num}");
    }
}

#[test]
fn full_dispersion_upper_band_approaches_effective_mass() {
    let iso = BandEdgeModel::isotropic();
    let full = BandEdgeModel::IsotropicFull { k0: 10.0, gamma_k: 10.0, cutoff: None };
    // long times correspond to small s; constants from the far band cancel in the difference
    let diff = |m: &BandEdgeModel, s1: f64| {
        kernel_laplace(m, 0.0, Complex64::new(s1, 0.0)).unwrap()
            - kernel_laplace(m, 0.0, Complex64::new(4.0 * s1, 0.0)).unwrap()
    };
    let mut last = f64::INFINITY;
    for s in [1e-3, 1e-4, 1e-5] {
        let err = rel(diff(&full, s), diff(&iso, s));
        assert!(err < last);
        last = err;
    }
    assert!(last < 0.05);
    let e = rel(diff(&full, 1e-4), diff(&iso, 1e-4));
    assert!(e < 0.05, "{e}");
}

#[test]
fn full_dispersion_kernel_is_bounded() {
    let m = BandEdgeModel::IsotropicFull { k0: 3.0, gamma_k: 4.0, cutoff: None };
    let g0 = memory_kernel(&m, 0.0, 1e-9).unwrap().norm();
    assert!(g0.is_finite() && g0 > 0.0);
    for &t in &[1e-4, 1e-2, 0.3, 2.0, 10.0] {
        let g = memory_kernel(&m, 0.0, t).unwrap();
        assert!(g.norm() <= g0 * (1.0 + 1e-6), "{t}: {} > {g0}", g.norm());
        let (lo, up) = full_dispersion_branches(&m, 0.0, t).unwrap();
        assert!((lo + up - g).norm() < 1e-12 * g0);
    }
}

#[test]
fn invalid_arguments_are_rejected() {
    assert!(memory_kernel(&BandEdgeModel::isotropic(), 0.0, -1.0).is_err());
    assert!(memory_kernel(&BandEdgeModel::isotropic(), f64::NAN, 1.0).is_err());
    assert!(full_anisotropic_kernel(0.0, 0.0).is_err());
    assert!(memory_kernel(&BandEdgeModel::IsotropicFull { k0: 3.0, gamma_k: 4.0, cutoff: Some(2.0) }, 0.0, 1.0).is_err());
}
