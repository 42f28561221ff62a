//! Globally adaptive 21-point Gauss-Kronrod quadrature.
//!
//! The caller supplies an initial partition of the interval. Panels are kept
//! in a max-heap keyed by their truncation-error estimate and the worst one
//! is bisected until the summed estimate meets the tolerance. The reported
//! error also includes a rounding floor proportional to the integral of
//! `|f|`, which subdivision cannot reduce.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types the integrator can accumulate.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Kronrod abscissae on `[0, 1]`, descending; odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for `XGK[1], XGK[3], ..., XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub panels: usize,
}

/// Tolerances and panel budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    rounding: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl<T> Eq for Panel<T> {}

impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Kronrod estimate of one panel.
struct PanelRule<T> {
    value: T,
    error: f64,
    rounding: f64,
}

/// One 21-point Kronrod panel with the embedded 10-point Gauss estimate.
fn kronrod<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> PanelRule<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    let mut abs_sum = fc.magnitude() * WGK[10];
    let mut values = [(T::zero(), T::zero()); 10];
    for (k, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += (f1 + f2) * WGK[k];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[k];
        if k % 2 == 1 {
            gauss += (f1 + f2) * WG[k / 2];
        }
        *slot = (f1, f2);
    }
    let mean = kron * 0.5;
    let mut asc = (fc - mean).magnitude() * WGK[10];
    for (k, &(f1, f2)) in values.iter().enumerate() {
        asc += ((f1 - mean).magnitude() + (f2 - mean).magnitude()) * WGK[k];
    }
    let width = half.abs();
    let res_asc = asc * width;
    let mut error = ((kron - gauss) * half).magnitude();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    PanelRule {
        value: kron * half,
        error,
        rounding: 50.0 * f64::EPSILON * abs_sum * width,
    }
}

/// Integrate `f` over `[breaks[0], breaks[last]]` starting from the given partition.
pub fn integrate<T, F>(f: F, breaks: &[f64], tol: Tolerance) -> Result<QuadResult<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    let panel = |a: f64, b: f64| {
        let r = kronrod(&f, a, b);
        Panel {
            a,
            b,
            value: r.value,
            error: r.error,
            rounding: r.rounding,
        }
    };
    let mut heap = BinaryHeap::with_capacity(breaks.len().max(16));
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(panel(w[0], w[1]));
        }
    }
    let sums = |heap: &BinaryHeap<Panel<T>>| {
        let mut total = T::zero();
        let mut err = 0.0;
        for p in heap.iter() {
            total += p.value;
            err += p.error;
        }
        (total, err)
    };
    let (mut total, mut err) = sums(&heap);
    let mut splits = 0usize;
    loop {
        if err <= tol.abs.max(tol.rel * total.magnitude()) {
            break;
        }
        let worst = match heap.peek() {
            Some(p) if heap.len() < tol.max_panels && p.b - p.a > 0.0 => heap.pop().unwrap(),
            _ => {
                return Err(Error::Quadrature {
                    value: total.magnitude(),
                    error: err,
                    panels: heap.len(),
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The panel can no longer be split in floating point.
            return Err(Error::Quadrature {
                value: total.magnitude(),
                error: err,
                panels: heap.len() + 1,
            });
        }
        let left = panel(worst.a, mid);
        let right = panel(mid, worst.b);
        total = total - worst.value + left.value + right.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
        if splits.is_multiple_of(256) {
            (total, err) = sums(&heap);
        }
    }
    // Final sums in a fixed order so results do not depend on heap history.
    let mut panels: Vec<Panel<T>> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = T::zero();
    let mut error = 0.0;
    for p in &panels {
        value += p.value;
        error += p.error.max(p.rounding);
    }
    Ok(QuadResult {
        value,
        error,
        panels: panels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance {
        abs: 1e-15,
        rel: 1e-13,
        max_panels: 10_000,
    };

    #[test]
    fn weights_are_normalized() {
        let k: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rules_are_exact_for_polynomials() {
        for p in 0..=31 {
            let exact = if p % 2 == 0 {
                2.0 / (p + 1) as f64
            } else {
                0.0
            };
            let mut kron = WGK[10] * if p == 0 { 1.0 } else { 0.0 };
            for k in 0..10 {
                kron += WGK[k] * (XGK[k].powi(p) + (-XGK[k]).powi(p));
            }
            assert!((kron - exact).abs() < 1e-14, "kronrod degree {p}");
            if p <= 19 {
                let mut gauss = 0.0;
                for k in 0..5 {
                    let x = XGK[2 * k + 1];
                    gauss += WG[k] * (x.powi(p) + (-x).powi(p));
                }
                assert!((gauss - exact).abs() < 1e-14, "gauss degree {p}");
            }
        }
    }

    #[test]
    fn integrates_oscillatory_function() {
        let r = integrate(|x: f64| (50.0 * x).cos(), &[0.0, 1.0], TOL).unwrap();
        let exact = 50f64.sin() / 50.0;
        assert!((r.value - exact).abs() < 1e-14);
        assert!(r.error < 1e-12);
    }

    #[test]
    fn integrates_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], TOL).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_complex_values() {
        let r = integrate(
            |x: f64| Complex64::new(0.0, 3.0 * x).exp(),
            &[0.0, 0.5, 2.0],
            TOL,
        )
        .unwrap();
        let exact = (Complex64::new(0.0, 6.0).exp() - 1.0) / Complex64::new(0.0, 3.0);
        assert!((r.value - exact).norm() < 1e-14);
    }

    #[test]
    fn reports_budget_exhaustion() {
        let tight = Tolerance {
            abs: 0.0,
            rel: 0.0,
            max_panels: 8,
        };
        let err = integrate(|x: f64| x.sqrt().sin(), &[0.0, 1.0], tight).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
