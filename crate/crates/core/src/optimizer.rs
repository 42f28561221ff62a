//! Newton solver for the order conditions
//! `(-1)^(n+1) + 2 sum_j (-1)^j d_j^m = 0`, `m = 1..n`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::derivative_residual;
use crate::general_bath::exact_instants;
use crate::sequences::{make_custom, make_udd, PulseSequence};

pub const DEFAULT_FTOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: u32 = 30;
/// Extra full Newton steps taken after the tolerance is met.
const POLISH_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub deltas: Vec<f64>,
    /// Max-norm of the residuals `m = 1..n`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sign(j: usize) -> f64 {
    // (-1)^j for the 1-based pulse index j
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Residual vector `r_m`, `m = 1..n`.
pub fn residuals(deltas: &[f64]) -> Vec<f64> {
    let n = deltas.len();
    let head = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
    (1..=n as i32)
        .map(|m| {
            deltas
                .iter()
                .enumerate()
                .fold(head, |acc, (i, &d)| acc + 2.0 * sign(i + 1) * d.powi(m))
        })
        .collect()
}

/// `d r_m / d d_j = 2 (-1)^j m d_j^(m-1)`.
pub fn jacobian(deltas: &[f64]) -> DMatrix<f64> {
    let n = deltas.len();
    DMatrix::from_fn(n, n, |row, col| {
        let m = (row + 1) as i32;
        2.0 * sign(col + 1) * f64::from(m) * deltas[col].powi(m - 1)
    })
}

/// Ratio of extreme singular values of the Jacobian.
pub fn jacobian_condition(deltas: &[f64]) -> f64 {
    let sv = jacobian(deltas).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn admissible(deltas: &[f64]) -> bool {
    deltas.iter().all(|&d| d > 0.0 && d < 1.0) && deltas.windows(2).all(|w| w[0] < w[1])
}

/// CPMG grid `(j - 1/2)/n`.
pub fn default_start(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j as f64 - 0.5) / n as f64).collect()
}

/// Full Newton step `-J^{-1} r`.
fn newton_step(x: &[f64], r: &[f64], iteration: usize) -> Result<DVector<f64>> {
    jacobian(x)
        .lu()
        .solve(&-DVector::from_column_slice(r))
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularJacobian { iteration })
}

/// Largest step fraction in `(0, 1]` that closes at most half of every gap.
fn step_limit(x: &[f64], step: &[f64]) -> f64 {
    let n = x.len();
    let pos = |i: usize| {
        if i == 0 {
            0.0
        } else if i == n + 1 {
            1.0
        } else {
            x[i - 1]
        }
    };
    let vel = |i: usize| {
        if i == 0 || i == n + 1 {
            0.0
        } else {
            step[i - 1]
        }
    };
    (0..=n).fold(1.0f64, |acc, i| {
        let closing = vel(i) - vel(i + 1);
        if closing > 0.0 {
            acc.min(0.5 * (pos(i + 1) - pos(i)) / closing)
        } else {
            acc
        }
    })
}

/// Damped Newton iteration from `initial` (CPMG grid when `None`).
///
/// A step may close at most half of any gap between neighbouring instants
/// (including the ends 0 and 1). From there it is halved until the
/// Euclidean residual norm decreases. Convergence is judged on the max-norm.
pub fn solve_order_conditions(
    n: usize,
    initial: Option<&[f64]>,
    ftol: f64,
) -> Result<OptimizationResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one pulse".into()));
    }
    if ftol.is_nan() || ftol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ftol must be positive, got {ftol}"
        )));
    }
    let mut x = match initial {
        Some(v) => {
            if v.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "initial guess has {} entries, expected {n}",
                    v.len()
                )));
            }
            make_custom(v)?;
            v.to_vec()
        }
        None => default_start(n),
    };
    let mut r = residuals(&x);
    let mut norm = max_norm(&r);
    let mut merit = two_norm(&r);
    let mut iterations = 0;
    let mut polish = 0;
    while iterations < MAX_ITERATIONS {
        if norm <= ftol {
            if polish == POLISH_STEPS {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let step = newton_step(&x, &r, iterations)?;
        let mut lambda = step_limit(&x, step.as_slice());
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            if admissible(&trial) {
                let tr = residuals(&trial);
                let tn = max_norm(&tr);
                let tm = two_norm(&tr);
                if tm < merit || (norm <= ftol && tn <= ftol) {
                    accepted = Some((trial, tr, tn, tm));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, tr, tn, tm)) => {
                x = trial;
                r = tr;
                norm = tn;
                merit = tm;
            }
            None => break,
        }
    }
    Ok(OptimizationResult {
        converged: norm <= ftol && admissible(&x),
        deltas: x,
        residual_norm: norm,
        iterations,
    })
}

/// Outcome of checking the closed-form timings against the order conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormReport {
    pub n: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evaluate residuals `m = 1..n` at the closed-form optimal timings.
pub fn verify_closed_form(n: usize, tol: f64) -> Result<ClosedFormReport> {
    let seq = make_udd(n)?;
    let residuals: Vec<f64> = (1..=n as u32)
        .map(|m| derivative_residual(&seq, m))
        .collect();
    let max_residual = max_norm(&residuals);
    Ok(ClosedFormReport {
        n,
        residuals,
        max_residual,
        tolerance: tol,
        passed: max_residual <= tol,
    })
}

/// Residuals `m = 1..max_order` in rational arithmetic.
///
/// Fails with [`Error::NotRational`] when the instants are irrational.
pub fn exact_residuals(seq: &PulseSequence, max_order: u32) -> Result<Vec<BigRational>> {
    let deltas = exact_instants(seq)?;
    let two = BigRational::from_integer(BigInt::from(2));
    let head = if deltas.len() % 2 == 0 {
        -BigRational::one()
    } else {
        BigRational::one()
    };
    Ok((1..=max_order as i32)
        .map(|m| {
            deltas.iter().enumerate().fold(head.clone(), |acc, (i, d)| {
                let term = &two * d.pow(m);
                if i % 2 == 0 {
                    acc - term
                } else {
                    acc + term
                }
            })
        })
        .collect())
}

/// True when every residual up to order `n` is exactly zero for the closed-form timings.
pub fn verify_closed_form_exact(n: usize) -> Result<bool> {
    let seq = make_udd(n)?;
    Ok(exact_residuals(&seq, n as u32)?.iter().all(Zero::is_zero))
}

/// CPMG grid with uniform noise of the given amplitude, redrawn until monotone.
pub fn perturbed_start<R: Rng>(n: usize, amplitude: f64, rng: &mut R) -> Vec<f64> {
    let base = default_start(n);
    loop {
        let v: Vec<f64> = base
            .iter()
            .map(|&d| d + rng.gen_range(-amplitude..=amplitude))
            .collect();
        if admissible(&v) {
            return v;
        }
    }
}

/// Tally of Newton runs from perturbed starts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub n: usize,
    pub trials: usize,
    /// Runs that converged to the closed-form timings within the match tolerance.
    pub matched: usize,
    /// Converged solutions that differ from the closed form.
    pub other_solutions: Vec<Vec<f64>>,
    /// Runs that did not converge or hit a singular Jacobian.
    pub failures: usize,
}

/// Run `trials` seeded Newton solves from perturbed CPMG grids.
///
/// Trial `k` draws from a generator seeded with `seed + k`, so the summary
/// does not depend on scheduling.
pub fn perturbed_trials(
    n: usize,
    trials: usize,
    seed: u64,
    amplitude: f64,
    match_tol: f64,
) -> Result<TrialSummary> {
    let target = make_udd(n)?;
    let outcomes: Vec<Option<std::result::Result<(), Vec<f64>>>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let start = perturbed_start(n, amplitude, &mut rng);
            match solve_order_conditions(n, Some(&start), DEFAULT_FTOL) {
                Ok(res) if res.converged => {
                    let diff = res
                        .deltas
                        .iter()
                        .zip(target.deltas())
                        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                    Some(if diff <= match_tol {
                        Ok(())
                    } else {
                        Err(res.deltas)
                    })
                }
                _ => None,
            }
        })
        .collect();
    let mut summary = TrialSummary {
        n,
        trials,
        matched: 0,
        other_solutions: Vec::new(),
        failures: 0,
    };
    for o in outcomes {
        match o {
            Some(Ok(())) => summary.matched += 1,
            Some(Err(d)) => summary.other_solutions.push(d),
            None => summary.failures += 1,
        }
    }
    Ok(summary)
}
