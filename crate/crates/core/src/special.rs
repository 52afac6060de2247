//! Faddeeva function w(z) = exp(-z^2) erfc(-iz) and related scaled error functions.
//!
//! Upper half plane: Weideman's rational expansion with 32 terms. Lower half
//! plane: reflection w(z) = 2 exp(-z^2) - w(-z). Very small arguments use the
//! Taylor series, very large ones the Laplace continued fraction.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const N_TERMS: usize = 32;

struct Weideman {
    l: f64,
    coeffs: [f64; N_TERMS],
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = 2 * N_TERMS;
        let l = (N_TERMS as f64 / 2f64.sqrt()).sqrt();
        let f: Vec<f64> = (-(m as i64) + 1..m as i64)
            .map(|k| {
                let t = l * (k as f64 * PI / m as f64 / 2.0).tan();
                (-t * t).exp() * (l * l + t * t)
            })
            .collect();
        let mut coeffs = [0.0; N_TERMS];
        for (n, c) in coeffs.iter_mut().enumerate() {
            let n = (n + 1) as f64;
            let s: f64 = f
                .iter()
                .enumerate()
                .map(|(j, fk)| {
                    let k = j as f64 - (m as f64 - 1.0);
                    fk * (PI * k * n / m as f64).cos()
                })
                .sum();
            *c = s / (2 * m) as f64;
        }
        Weideman { l, coeffs }
    })
}

fn w_upper(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let r = z.norm();
    if r < 1e-3 {
        // w(z) = sum (iz)^n / Gamma(n/2 + 1)
        let iz = i * z;
        let two_over_sqrt_pi = 2.0 / PI.sqrt();
        return Complex64::new(1.0, 0.0) + iz * two_over_sqrt_pi + iz * iz
            + iz * iz * iz * (2.0 * two_over_sqrt_pi / 3.0)
            + iz * iz * iz * iz * 0.5;
    }
    if r > 40.0 {
        return continued_fraction(z);
    }
    let tab = weideman();
    let lmiz = tab.l - i * z;
    let zz = (tab.l + i * z) / lmiz;
    let mut p = Complex64::new(0.0, 0.0);
    for c in tab.coeffs.iter().rev() {
        p = p * zz + c;
    }
    p * 2.0 / (lmiz * lmiz) + 1.0 / (PI.sqrt() * lmiz)
}

fn continued_fraction(z: Complex64) -> Complex64 {
    // w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))
    let mut t = z;
    for k in (1..=40).rev() {
        t = z - (k as f64 * 0.5) / t;
    }
    Complex64::i() / (PI.sqrt() * t)
}

/// Faddeeva function w(z) on the whole complex plane.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        w_upper(z)
    } else {
        2.0 * (-z * z).exp() - w_upper(-z)
    }
}

/// e^{mu} erfc(sqrt(mu)) with the principal square root, evaluated as w(i sqrt(mu)).
pub fn exp_erfc_sqrt(mu: Complex64) -> Complex64 {
    faddeeva(Complex64::i() * mu.sqrt())
}

/// Complementary error function erfc(z).
pub fn erfc(z: Complex64) -> Complex64 {
    (-z * z).exp() * faddeeva(Complex64::i() * z)
}
