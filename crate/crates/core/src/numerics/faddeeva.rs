//! Faddeeva (complex probability) function w(z) = e^{-z²} erfc(-iz) in the
//! closed upper half plane.
//!
//! Near the origin w is evaluated with Weideman's 32-term rational expansion
//! in the Möbius variable (L + iz)/(L − iz); far from it the Laplace continued
//! fraction converges quickly and keeps full relative accuracy in the wings.

use num_complex::Complex64;
use std::sync::LazyLock;

const WEIDEMAN_TERMS: usize = 32;
const FAR_FIELD: f64 = 12.0;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

struct Weideman {
    l: f64,
    coeffs: [f64; WEIDEMAN_TERMS],
}

static WEIDEMAN: LazyLock<Weideman> = LazyLock::new(|| {
    let n = WEIDEMAN_TERMS;
    let m = 2 * n;
    let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
    let f = |k: i64| {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let t = l * (0.5 * theta).tan();
        (-t * t).exp() * (l * l + t * t)
    };
    // the samples are even in k, so the DFT collapses to a cosine sum
    let mut coeffs = [0.0; WEIDEMAN_TERMS];
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let mm = (idx + 1) as f64;
        let mut acc = f(0);
        for k in 1..m as i64 {
            acc += 2.0 * f(k) * (std::f64::consts::PI * k as f64 * mm / m as f64).cos();
        }
        *c = acc / (2 * m) as f64;
    }
    Weideman { l, coeffs }
});

/// Faddeeva function for `Im z >= 0`.
///
/// Inputs with negative imaginary part are reflected through
/// w(z) = 2 e^{-z²} − w(−z), which is only accurate close to the real axis.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    if z.re.abs() + z.im > FAR_FIELD {
        return continued_fraction(z);
    }
    let wd = &*WEIDEMAN;
    let i = Complex64::i();
    let denom = wd.l - i * z;
    let big_z = (wd.l + i * z) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for c in wd.coeffs.iter().rev() {
        p = p * big_z + c;
    }
    2.0 * p / (denom * denom) + FRAC_1_SQRT_PI / denom
}

/// Laplace continued fraction
/// w(z) = (i/√π) / (z − (1/2)/(z − 1/(z − (3/2)/(z − …)))).
fn continued_fraction(z: Complex64) -> Complex64 {
    let mut tail = z;
    for k in (1..=24).rev() {
        tail = z - (0.5 * k as f64) / tail;
    }
    Complex64::i() * FRAC_1_SQRT_PI / tail
}

/// Real part of w(x + iy) for y >= 0, the core of the Voigt profile.
pub fn voigt_kernel(x: f64, y: f64) -> f64 {
    if y == 0.0 && x.abs() > 26.7 {
        return 0.0;
    }
    faddeeva(Complex64::new(x, y)).re
}
