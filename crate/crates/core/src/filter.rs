//! Filter function of a pulse sequence.
//!
//! For instants `d_1 < ... < d_n` the filter is
//!
//! ```text
//! y(z) = 1 + (-1)^(n+1) e^{iz} + 2 sum_j (-1)^j e^{i z d_j}
//! ```
//!
//! with `z = omega t`. Its real companion is `x(z) = -Im y(z)`. The order
//! to which `y` vanishes at `z = 0` is governed by the residuals
//! `(-1)^(n+1) + 2 sum_j (-1)^j d_j^m`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sequences::{Family, PulseSequence};

/// One evaluation of the filter at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterEvaluation {
    pub z: f64,
    pub value: Complex64,
    pub abs2: f64,
}

/// `e^{i theta} - 1` without cancellation near `theta = 0`.
#[inline]
fn cis_minus_one(theta: f64) -> Complex64 {
    let (s, c) = (0.5 * theta).sin_cos();
    // sin(theta) = 2 sin(theta/2) cos(theta/2)
    Complex64::new(-2.0 * s * s, 2.0 * s * c)
}

/// Precomputed exponential terms of `y`.
///
/// The constant term is folded in by writing `y = sum_k w_k (e^{i z tau_k} - 1)`,
/// which is the same sum because the weights add up to zero. Terms are kept
/// in the order `d_1, ..., d_n, 1`.
#[derive(Debug, Clone)]
pub struct Filter {
    times: Vec<f64>,
    weights: Vec<f64>,
}

impl Filter {
    pub fn new(seq: &PulseSequence) -> Self {
        let n = seq.len();
        let mut times = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        for (j, &d) in seq.deltas().iter().enumerate() {
            times.push(d);
            weights.push(if j % 2 == 0 { -2.0 } else { 2.0 });
        }
        times.push(1.0);
        weights.push(if n.is_multiple_of(2) { -1.0 } else { 1.0 });
        Self { times, weights }
    }

    pub fn pulses(&self) -> usize {
        self.times.len() - 1
    }

    pub fn y(&self, z: f64) -> Complex64 {
        self.times
            .iter()
            .zip(&self.weights)
            .fold(Complex64::new(0.0, 0.0), |acc, (&tau, &w)| {
                acc + cis_minus_one(z * tau) * w
            })
    }

    /// `-Im y(z)`, summed in the same order as [`Filter::y`].
    pub fn x(&self, z: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.weights)
            .fold(0.0, |acc, (&tau, &w)| {
                acc + (-w) * cis_minus_one(z * tau).im
            })
    }

    pub fn abs2(&self, z: f64) -> f64 {
        self.y(z).norm_sqr()
    }

    /// Nonzero instants with their weights, `(tau_k, w_k)`.
    pub(crate) fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.weights.iter().copied())
    }

    /// Cosine expansion of `|y(z)|^2`.
    ///
    /// Returns `(a0, [(gap, amplitude)])` with
    /// `|y(z)|^2 = a0 + sum amplitude * cos(gap * z)`, gaps strictly positive
    /// and equal gaps merged.
    pub fn power_spectrum(&self) -> (f64, Vec<(f64, f64)>) {
        let mut taus = vec![0.0];
        let mut ws = vec![1.0];
        taus.extend_from_slice(&self.times);
        ws.extend_from_slice(&self.weights);
        let a0 = ws.iter().map(|w| w * w).sum();
        let mut pairs = Vec::with_capacity(taus.len() * (taus.len() - 1) / 2);
        for a in 0..taus.len() {
            for b in a + 1..taus.len() {
                pairs.push((taus[b] - taus[a], 2.0 * ws[a] * ws[b]));
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (gap, amp) in pairs {
            match merged.last_mut() {
                Some(last) if (gap - last.0).abs() <= 1e-13 => last.1 += amp,
                _ => merged.push((gap, amp)),
            }
        }
        merged.retain(|&(_, amp)| amp != 0.0);
        (a0, merged)
    }

    /// `(-1)^(n+1) + 2 sum_j (-1)^j d_j^m`.
    pub fn residual(&self, m: u32) -> f64 {
        let n = self.pulses();
        let head = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        self.times[..n]
            .iter()
            .zip(&self.weights)
            .fold(head, |acc, (&d, &w)| acc + w * d.powi(m as i32))
    }
}

/// `y(z)` by direct summation over the pulse instants.
pub fn eval_y(seq: &PulseSequence, z: f64) -> Complex64 {
    Filter::new(seq).y(z)
}

/// `x(z) = -Im y(z) = (-1)^n sin z + 2 sum_j (-1)^(j+1) sin(z d_j)`.
pub fn eval_x(seq: &PulseSequence, z: f64) -> f64 {
    Filter::new(seq).x(z)
}

pub fn evaluate(seq: &PulseSequence, z: f64) -> FilterEvaluation {
    let value = eval_y(seq, z);
    FilterEvaluation {
        z,
        value,
        abs2: value.norm_sqr(),
    }
}

/// Residual of the `m`-th order condition.
///
/// Zero exactly when the `m`-th derivative of `y` vanishes at `z = 0`.
pub fn derivative_residual(seq: &PulseSequence, m: u32) -> f64 {
    Filter::new(seq).residual(m)
}

/// Leading non-vanishing order of `y` at the origin.
///
/// Returns the smallest `m` in `1..=max_m` whose residual exceeds `tol`, or
/// `max_m + 1` if none does.
pub fn taylor_order(seq: &PulseSequence, max_m: u32, tol: f64) -> u32 {
    let filter = Filter::new(seq);
    (1..=max_m)
        .find(|&m| filter.residual(m).abs() > tol)
        .unwrap_or(max_m + 1)
}

/// Families with a known closed-form filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// Even `n` only.
    Udd {
        n: usize,
    },
    Cdd {
        level: usize,
    },
    /// Even `n` only.
    Bb {
        n: usize,
    },
    /// Even `n` only.
    Cpmg {
        n: usize,
    },
}

impl ClosedForm {
    /// Checks that a closed form exists for these parameters.
    pub fn new(form: ClosedForm) -> Result<Self> {
        let even = |name: &str, n: usize| {
            if n == 0 || n % 2 == 1 {
                Err(Error::UnsupportedClosedForm(format!(
                    "{name} with n = {n} (only even n >= 2)"
                )))
            } else {
                Ok(form)
            }
        };
        match form {
            ClosedForm::Udd { n } => even("UDD", n),
            ClosedForm::Bb { n } => even("BB", n),
            ClosedForm::Cpmg { n } => even("CPMG", n),
            ClosedForm::Cdd { level } if level > 60 => {
                Err(Error::UnsupportedClosedForm(format!("CDD level {level}")))
            }
            ClosedForm::Cdd { .. } => Ok(form),
        }
    }

    /// Closed form matching a generated sequence, if there is one.
    pub fn for_sequence(seq: &PulseSequence) -> Result<Self> {
        match seq.family() {
            Family::Udd { n } => Self::new(ClosedForm::Udd { n }),
            Family::Cdd { level } => Self::new(ClosedForm::Cdd { level }),
            Family::Bb { n } => Self::new(ClosedForm::Bb { n }),
            Family::Cpmg { n } => Self::new(ClosedForm::Cpmg { n }),
            other => Err(Error::UnsupportedClosedForm(format!("{other:?}"))),
        }
    }

    pub fn eval(&self, z: f64) -> Complex64 {
        let i = Complex64::i();
        let half_phase = Complex64::from_polar(1.0, 0.5 * z);
        match *self {
            ClosedForm::Udd { n } => {
                let mut bracket = (0.5 * z).sin();
                for j in 1..=n / 2 {
                    let sign = if j % 2 == 0 { 2.0 } else { -2.0 };
                    let c = (j as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
                    bracket += sign * (0.5 * z * c).sin();
                }
                -2.0 * i * half_phase * bracket
            }
            ClosedForm::Cdd { level } => {
                let mut prod = (z / 2f64.powi(level as i32 + 1)).sin();
                for k in 1..=level {
                    prod *= (z / 2f64.powi(k as i32 + 1)).sin();
                }
                (-2.0 * i).powu(level as u32 + 1) * half_phase * prod
            }
            ClosedForm::Bb { n } => {
                let r = (0.5 * z).cos() * (z / (2 * n + 2) as f64).tan();
                -2.0 * i * half_phase * r
            }
            ClosedForm::Cpmg { n } => {
                let s = (z / (4 * n) as f64).sin();
                let r = s * s * (0.5 * z).sin() / (z / (2 * n) as f64).cos();
                4.0 * i * half_phase * r
            }
        }
    }
}

/// Closed-form filter for a supported family.
pub fn eval_y_closed(form: ClosedForm, z: f64) -> Result<Complex64> {
    Ok(ClosedForm::new(form)?.eval(z))
}
