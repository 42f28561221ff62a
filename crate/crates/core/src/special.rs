//! Sine and cosine integrals.
//!
//! Power series below `|x| = 4`, continued fraction for `E1(ix)` above it.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 4.0;

/// `Si(x) + i (Ci(x) - gamma - ln x)` pieces from the continued fraction,
/// valid for `x > SERIES_LIMIT`. Returns `(Si, Ci)`.
fn si_ci_continued_fraction(x: f64) -> (f64, f64) {
    // modified Lentz evaluation of E1(ix) = e^{-ix} / (1 + ix - 1/(3 + ix - 4/(5 + ix - ...)))
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..1000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    let (s, co) = x.sin_cos();
    let e1 = Complex64::new(co, -s) * h;
    (FRAC_PI_2 + e1.im, -e1.re)
}

/// Sine integral `Si(x) = int_0^x sin(u)/u du`.
pub fn si(x: f64) -> f64 {
    if x < 0.0 {
        return -si(-x);
    }
    if x <= SERIES_LIMIT {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 0u32;
        loop {
            k += 1;
            let kk = f64::from(2 * k);
            term *= -x2 / (kk * (kk + 1.0));
            let add = term / (kk + 1.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                return sum;
            }
        }
    }
    si_ci_continued_fraction(x).0
}

/// Entire cosine integral `Cin(x) = int_0^x (1 - cos u)/u du = gamma + ln x - Ci(x)`.
pub fn cin(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 0u32;
        loop {
            k += 1;
            let kk = f64::from(2 * k);
            term *= -x2 / ((kk - 1.0) * kk);
            let add = -term / kk;
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() || sum == 0.0 {
                return sum;
            }
        }
    }
    EULER_GAMMA + x.ln() - si_ci_continued_fraction(x).1
}

/// Cosine integral `Ci(x) = -int_x^inf cos(u)/u du` for `x > 0`.
pub fn ci(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        return EULER_GAMMA + x.ln() - cin(x);
    }
    si_ci_continued_fraction(x).1
}
