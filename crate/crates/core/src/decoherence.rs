//! Suppression exponent `chi(t)`, phase `phi(t)` and the coherence signal
//! `s(t) = cos(2 phi) exp(-2 chi)` for a pulse sequence in an ohmic bath.
//!
//! ```text
//! chi(t) = int_0^inf J(w) coth(beta w / 2) |y(w t)|^2 / (4 w^2) dw
//! phi(t) = int_0^inf J(w) x(w t) / (2 w^2) dw
//! ```
//!
//! The free-evolution signal is the empty sequence, whose filter is
//! `1 - e^{iz}`. For a power-law cutoff the range `[0, W]` is integrated
//! along the real axis and the tail along the vertical line `W + i s`,
//! where the oscillating factors decay exponentially. This is exact because
//! the poles of `J` sit on the circle `|w| = omega_d < W` and those of the
//! thermal factor on the imaginary axis.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{fmt_inf, Cutoff, Environment, Mode, SpectralDensity};
use crate::error::{Error, Result};
use crate::filter::Filter;
use crate::quadrature::{integrate, Tolerance};
use crate::sequences::PulseSequence;

/// Quadrature tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            max_panels: 200_000,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && self.abs_tol.is_finite()
            && self.rel_tol.is_finite()
            && (self.abs_tol > 0.0 || self.rel_tol > 0.0)
            && self.max_panels > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "quadrature tolerances must be non-negative with at least one positive: {self:?}"
            )))
        }
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.rel_tol,
            max_panels: self.max_panels,
        }
    }
}

/// Integral value with the quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Signal at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherencePoint {
    pub t: f64,
    pub chi: f64,
    pub phi: f64,
    pub s: f64,
    /// `1 - s`, accurate when tiny.
    pub deviation: f64,
}

impl DecoherencePoint {
    /// Assemble the signal from the two exponents.
    pub fn from_exponents(t: f64, chi: f64, phi: f64) -> Self {
        let decay = (-2.0 * chi).exp();
        let sin_phi = phi.sin();
        let deviation = -(-2.0 * chi).exp_m1() + decay * 2.0 * sin_phi * sin_phi;
        Self {
            t,
            chi,
            phi,
            s: (2.0 * phi).cos() * decay,
            deviation,
        }
    }
}

/// Signal over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceCurve {
    pub sequence_label: String,
    pub bath: SpectralDensity,
    pub environment: Environment,
    pub points: Vec<DecoherencePoint>,
}

impl DecoherenceCurve {
    /// `alpha=.. omega_d=.. gamma=.. beta=.. mode=..` provenance string.
    pub fn provenance(&self) -> String {
        format!(
            "sequence={} {} beta={} mode={}",
            self.sequence_label,
            self.bath,
            fmt_inf(self.environment.beta()),
            self.environment.mode()
        )
    }
}

/// Below this fraction of `omega_d` the integrands use their analytic limits.
const SMALL_OMEGA: f64 = 1e-12;

/// Frequency integrals for one sequence and bath.
#[derive(Debug, Clone)]
pub struct Decoherence {
    filter: Filter,
    a0: f64,
    spectrum: Vec<(f64, f64)>,
    first_residual: f64,
    sd: SpectralDensity,
    env: Environment,
    config: QuadratureConfig,
}

impl Decoherence {
    pub fn new(
        seq: &PulseSequence,
        sd: &SpectralDensity,
        env: &Environment,
        config: QuadratureConfig,
    ) -> Result<Self> {
        config.validate()?;
        let filter = Filter::new(seq);
        let (a0, spectrum) = filter.power_spectrum();
        let first_residual = filter.residual(1);
        Ok(Self {
            filter,
            a0,
            spectrum,
            first_residual,
            sd: *sd,
            env: *env,
            config,
        })
    }

    /// `J(w) coth(beta w / 2)`, or `(4/pi) p(w)` for classical noise.
    fn weight(&self, omega: f64) -> f64 {
        match self.env.mode() {
            Mode::Quantum => self.sd.value(omega) * self.env.thermal(omega),
            Mode::Classical => {
                let p = FRAC_PI_4 * self.sd.value(omega) * self.env.thermal(omega);
                p * (4.0 / PI)
            }
        }
    }

    fn weight_complex(&self, omega: Complex64) -> Complex64 {
        let jc = self.sd.value_complex(omega) * self.env.thermal_complex(omega);
        match self.env.mode() {
            Mode::Quantum => jc,
            Mode::Classical => (jc * FRAC_PI_4) * (4.0 / PI),
        }
    }

    fn chi_integrand(&self, omega: f64, t: f64) -> f64 {
        if omega < SMALL_OMEGA * self.sd.omega_d() {
            if self.env.is_zero_temperature() {
                return 0.0;
            }
            let r = self.first_residual;
            return self.sd.alpha() * t * t * r * r / self.env.beta();
        }
        self.weight(omega) * self.filter.abs2(omega * t) / (4.0 * omega * omega)
    }

    fn phi_integrand(&self, omega: f64, t: f64) -> f64 {
        if omega < SMALL_OMEGA * self.sd.omega_d() {
            return -self.sd.alpha() * t * self.first_residual;
        }
        self.sd.value(omega) * self.filter.x(omega * t) / (2.0 * omega * omega)
    }

    /// Real-axis partition of `[0, end]` resolving the filter oscillation.
    fn partition(&self, t: f64, end: f64) -> Vec<f64> {
        let wd = self.sd.omega_d();
        let cap = PI / (4.0 * t);
        let h0 = wd.min(PI / t) / 4.0;
        let mut breaks = vec![0.0];
        let first = wd.min(end);
        let k = (first / h0).ceil().max(1.0) as usize;
        for i in 1..=k {
            breaks.push(first * i as f64 / k as f64);
        }
        let mut h = h0;
        let mut x = first;
        while x < end {
            if x >= 2.0 * wd {
                h = (h * 1.25).min(cap.max(h0));
            }
            x = (x + h).min(end);
            breaks.push(x);
        }
        breaks
    }

    /// Where the real-axis part ends for a power-law cutoff.
    fn split_point(&self, t: f64) -> f64 {
        (2.0 * self.sd.omega_d()).max(2.0 * PI / t)
    }

    /// `int_W^inf g(x) dx` with `x = W + W u / (1 - u)`.
    fn real_tail<G>(&self, w: f64, g: G) -> Result<(f64, f64)>
    where
        G: Fn(f64) -> f64,
    {
        let f = |u: f64| {
            let one_minus = 1.0 - u;
            let x = w + w * u / one_minus;
            let v = g(x) * w / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let breaks: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let r = integrate(f, &breaks, self.config.tolerance())?;
        Ok((r.value, r.error))
    }

    /// `i int_0^inf g(W + i s) ds` with `s = W u / (1 - u)`.
    fn vertical_tail<G>(&self, w: f64, g: G) -> Result<(Complex64, f64)>
    where
        G: Fn(Complex64) -> Complex64,
    {
        let scale = w;
        let f = |u: f64| {
            let one_minus = 1.0 - u;
            let s = scale * u / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = g(Complex64::new(w, s)) * jac;
            if v.re.is_finite() && v.im.is_finite() {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let breaks: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let r = integrate(f, &breaks, self.config.tolerance())?;
        Ok((r.value * Complex64::new(0.0, 1.0), r.error))
    }

    /// Suppression exponent with its error estimate.
    pub fn chi_estimate(&self, t: f64) -> Result<Estimate> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
        let tol = self.config.tolerance();
        match self.sd.cutoff() {
            Cutoff::Hard => {
                let breaks = self.partition(t, self.sd.support_end());
                let r = integrate(|w| self.chi_integrand(w, t), &breaks, tol)?;
                Ok(Estimate {
                    value: r.value.max(0.0),
                    error: r.error,
                })
            }
            Cutoff::PowerLaw { .. } => {
                let w = self.split_point(t);
                let breaks = self.partition(t, w);
                let head = integrate(|x| self.chi_integrand(x, t), &breaks, tol)?;
                // The constant part of |y|^2 does not oscillate and stays on
                // the real axis, where the thermal factor is smooth.
                let flat = self.real_tail(w, |x| self.weight(x) / (4.0 * x * x))?;
                let (wave, wave_err) = self.vertical_tail(w, |om| {
                    let g = self.weight_complex(om) / (om * om * 4.0);
                    let mut p = Complex64::new(0.0, 0.0);
                    for &(gap, amp) in &self.spectrum {
                        p += (om * Complex64::new(0.0, t * gap)).exp() * amp;
                    }
                    g * p
                })?;
                Ok(Estimate {
                    value: (head.value + self.a0 * flat.0 + wave.re).max(0.0),
                    error: head.error + self.a0 * flat.1 + wave_err,
                })
            }
        }
    }

    /// Phase with its error estimate; zero for classical noise.
    pub fn phi_estimate(&self, t: f64) -> Result<Estimate> {
        check_time(t)?;
        if t == 0.0 || self.env.mode() == Mode::Classical {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
        let tol = self.config.tolerance();
        match self.sd.cutoff() {
            Cutoff::Hard => {
                let breaks = self.partition(t, self.sd.support_end());
                let r = integrate(|w| self.phi_integrand(w, t), &breaks, tol)?;
                Ok(Estimate {
                    value: r.value,
                    error: r.error,
                })
            }
            Cutoff::PowerLaw { .. } => {
                let w = self.split_point(t);
                let breaks = self.partition(t, w);
                let head = integrate(|x| self.phi_integrand(x, t), &breaks, tol)?;
                let (tail, tail_err) = self.vertical_tail(w, |om| {
                    let h = self.sd.value_complex(om) / (om * om * 2.0);
                    let mut q = Complex64::new(0.0, 0.0);
                    for (tau, wk) in self.filter.terms() {
                        q += (om * Complex64::new(0.0, t * tau)).exp() * wk;
                    }
                    h * q
                })?;
                Ok(Estimate {
                    value: head.value - tail.im,
                    error: head.error + tail_err,
                })
            }
        }
    }

    pub fn signal(&self, t: f64) -> Result<DecoherencePoint> {
        let chi = self.chi_estimate(t)?.value;
        let phi = self.phi_estimate(t)?.value;
        Ok(DecoherencePoint::from_exponents(t, chi, phi))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "time must be finite and non-negative, got {t}"
        )))
    }
}

/// `chi(t)` with default tolerances.
pub fn chi(seq: &PulseSequence, sd: &SpectralDensity, env: &Environment, t: f64) -> Result<f64> {
    chi_estimate(seq, sd, env, t, QuadratureConfig::default()).map(|e| e.value)
}

pub fn chi_estimate(
    seq: &PulseSequence,
    sd: &SpectralDensity,
    env: &Environment,
    t: f64,
    config: QuadratureConfig,
) -> Result<Estimate> {
    Decoherence::new(seq, sd, env, config)?.chi_estimate(t)
}

/// `phi(t)` in the quantum bath with default tolerances.
pub fn phi(seq: &PulseSequence, sd: &SpectralDensity, t: f64) -> Result<f64> {
    phi_estimate(seq, sd, t, QuadratureConfig::default()).map(|e| e.value)
}

pub fn phi_estimate(
    seq: &PulseSequence,
    sd: &SpectralDensity,
    t: f64,
    config: QuadratureConfig,
) -> Result<Estimate> {
    let env = Environment::zero_temperature(Mode::Quantum);
    Decoherence::new(seq, sd, &env, config)?.phi_estimate(t)
}

pub fn signal(
    seq: &PulseSequence,
    sd: &SpectralDensity,
    env: &Environment,
    t: f64,
) -> Result<DecoherencePoint> {
    Decoherence::new(seq, sd, env, QuadratureConfig::default())?.signal(t)
}

/// Signal on every grid point, evaluated in parallel.
pub fn curve(
    seq: &PulseSequence,
    sd: &SpectralDensity,
    env: &Environment,
    t_grid: &[f64],
) -> Result<DecoherenceCurve> {
    curve_with(seq, sd, env, t_grid, QuadratureConfig::default())
}

pub fn curve_with(
    seq: &PulseSequence,
    sd: &SpectralDensity,
    env: &Environment,
    t_grid: &[f64],
    config: QuadratureConfig,
) -> Result<DecoherenceCurve> {
    for (i, &t) in t_grid.iter().enumerate() {
        check_time(t)?;
        if i > 0 && t <= t_grid[i - 1] {
            return Err(Error::InvalidArgument(format!(
                "time grid must be strictly increasing (index {i})"
            )));
        }
    }
    let model = Decoherence::new(seq, sd, env, config)?;
    let points = t_grid
        .par_iter()
        .map(|&t| model.signal(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecoherenceCurve {
        sequence_label: seq.label(),
        bath: *sd,
        environment: *env,
        points,
    })
}

/// `points` log-spaced values from `t_min` to `t_max`, endpoints exact.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || points < 2 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < t_min < t_max and at least 2 points, got [{t_min}, {t_max}] x {points}"
        )));
    }
    let (l0, l1) = (t_min.log10(), t_max.log10());
    let last = (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / last))
        .collect();
    grid[0] = t_min;
    grid[points - 1] = t_max;
    Ok(grid)
}

/// `points` evenly spaced values from `t_min` to `t_max`.
pub fn linear_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min >= 0.0 && t_max > t_min && t_max.is_finite()) || points < 2 {
        return Err(Error::InvalidArgument(format!(
            "linear grid needs 0 <= t_min < t_max and at least 2 points, got [{t_min}, {t_max}] x {points}"
        )));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| t_min + (t_max - t_min) * k as f64 / last)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{make_bb, make_cpmg, make_udd};
    use crate::special::{cin, si};

    fn hard() -> SpectralDensity {
        SpectralDensity::hard_cutoff(0.25, 1.0).unwrap()
    }

    fn zero_t() -> Environment {
        Environment::zero_temperature(Mode::Quantum)
    }

    #[test]
    fn zero_time_gives_unit_signal() {
        let seq = make_udd(4).unwrap();
        for sd in [hard(), SpectralDensity::power_law(0.25, 1.0, 2.0).unwrap()] {
            let p = signal(&seq, &sd, &zero_t(), 0.0).unwrap();
            assert_eq!((p.chi, p.phi, p.s, p.deviation), (0.0, 0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn negative_time_rejected() {
        let seq = make_udd(2).unwrap();
        assert!(chi(&seq, &hard(), &zero_t(), -1.0).is_err());
        assert!(phi(&seq, &hard(), f64::NAN).is_err());
    }

    #[test]
    fn free_evolution_matches_special_functions() {
        let seq = PulseSequence::free();
        for z in [0.01, 0.3, 1.0, 7.5, 42.0, 100.0] {
            let c = chi(&seq, &hard(), &zero_t(), z).unwrap();
            let p = phi(&seq, &hard(), z).unwrap();
            assert!(
                (c - 0.25 * cin(z)).abs() <= 1e-10 * c.abs().max(1e-300) + 1e-15,
                "chi z={z}"
            );
            assert!(
                (p - 0.25 * si(z)).abs() <= 1e-10 * p.abs() + 1e-15,
                "phi z={z}"
            );
        }
    }

    #[test]
    fn pure_phase_extreme() {
        let p = DecoherencePoint::from_exponents(1.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert!((p.s + 1.0).abs() < 1e-15);
        assert!((p.deviation - 2.0).abs() < 1e-15);
    }

    #[test]
    fn deviation_keeps_tiny_values() {
        let p = DecoherencePoint::from_exponents(1.0, 1e-20, 0.0);
        assert!((p.deviation - 2e-20).abs() < 1e-34);
        assert_eq!(p.s, 1.0);
    }

    #[test]
    fn classical_mode_has_no_phase() {
        let seq = make_cpmg(4).unwrap();
        let env = Environment::new(1.0, Mode::Classical).unwrap();
        let p = signal(&seq, &hard(), &env, 3.0).unwrap();
        assert_eq!(p.phi, 0.0);
        assert!((p.s - (-2.0 * p.chi).exp()).abs() < 1e-15);
    }

    #[test]
    fn classical_matches_quantum() {
        let seq = make_udd(5).unwrap();
        for sd in [hard(), SpectralDensity::power_law(0.25, 1.0, 2.0).unwrap()] {
            for beta in [1.0, f64::INFINITY] {
                let q = Environment::new(beta, Mode::Quantum).unwrap();
                let c = Environment::new(beta, Mode::Classical).unwrap();
                for t in [0.1, 1.0, 10.0] {
                    let a = chi(&seq, &sd, &q, t).unwrap();
                    let b = chi(&seq, &sd, &c, t).unwrap();
                    assert!((a - b).abs() <= 1e-10 * a, "t={t} beta={beta}");
                }
            }
        }
    }

    #[test]
    fn tail_rotation_matches_real_axis_integral() {
        // gamma = 4 decays fast enough to integrate along the real axis directly
        let seq = make_udd(3).unwrap();
        let sd = SpectralDensity::power_law(0.25, 1.0, 4.0).unwrap();
        let env = Environment::new(2.0, Mode::Quantum).unwrap();
        let model = Decoherence::new(&seq, &sd, &env, QuadratureConfig::default()).unwrap();
        for t in [0.5, 3.0] {
            let tol = Tolerance {
                abs: 1e-15,
                rel: 1e-12,
                max_panels: 1_000_000,
            };
            let mut breaks = model.partition(t, 20_000.0);
            breaks.dedup();
            let direct_chi = integrate(|w| model.chi_integrand(w, t), &breaks, tol).unwrap();
            let direct_phi = integrate(|w| model.phi_integrand(w, t), &breaks, tol).unwrap();
            // the integrands fall off like w^-5 so the part beyond 2e4 is below 1e-17
            let c = model.chi_estimate(t).unwrap().value;
            let p = model.phi_estimate(t).unwrap().value;
            assert!(
                (c - direct_chi.value).abs() < 1e-11 * c.abs().max(1e-3),
                "chi t={t}"
            );
            assert!((p - direct_phi.value).abs() < 1e-11, "phi t={t}");
        }
    }

    #[test]
    fn finite_temperature_increases_chi() {
        let seq = make_bb(3).unwrap();
        let cold = chi(&seq, &hard(), &zero_t(), 2.0).unwrap();
        let warm = chi(
            &seq,
            &hard(),
            &Environment::new(1.0, Mode::Quantum).unwrap(),
            2.0,
        )
        .unwrap();
        assert!(warm > cold);
    }

    #[test]
    fn tighter_tolerance_within_error_estimate() {
        let seq = make_udd(6).unwrap();
        let sd = SpectralDensity::power_law(0.25, 1.0, 8.0).unwrap();
        let env = Environment::new(1.0, Mode::Quantum).unwrap();
        let loose = QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-16,
            ..Default::default()
        };
        let tight = QuadratureConfig {
            rel_tol: 0.5e-8,
            abs_tol: 0.5e-16,
            ..Default::default()
        };
        for t in [0.2, 2.0, 20.0] {
            let a = chi_estimate(&seq, &sd, &env, t, loose).unwrap();
            let b = chi_estimate(&seq, &sd, &env, t, tight).unwrap();
            assert!((a.value - b.value).abs() <= a.error, "t={t}");
        }
    }

    #[test]
    fn curve_grid_edge_cases() {
        let seq = make_udd(2).unwrap();
        let empty = curve(&seq, &hard(), &zero_t(), &[]).unwrap();
        assert!(empty.points.is_empty());
        let single = curve(&seq, &hard(), &zero_t(), &[0.0]).unwrap();
        assert_eq!(single.points.len(), 1);
        assert_eq!(single.points[0].s, 1.0);
        assert_eq!(single.points[0].deviation, 0.0);
        assert!(curve(&seq, &hard(), &zero_t(), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn curve_is_deterministic() {
        let seq = make_udd(4).unwrap();
        let sd = SpectralDensity::power_law(0.25, 1.0, 4.0).unwrap();
        let grid = log_grid(0.05, 50.0, 40).unwrap();
        let a = curve(&seq, &sd, &zero_t(), &grid).unwrap();
        let b = curve(&seq, &sd, &zero_t(), &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-2, 1e2, 5).unwrap();
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[4], 1e2);
        assert!((g[2] - 1.0).abs() < 1e-15);
        assert!(log_grid(0.0, 1.0, 5).is_err());
        assert!(log_grid(1.0, 2.0, 1).is_err());
        assert_eq!(linear_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn chi_nonnegative_and_deviation_bounded() {
        let seq = make_cpmg(3).unwrap();
        let sd = SpectralDensity::power_law(0.25, 1.0, 1.5).unwrap();
        let env = Environment::new(0.5, Mode::Quantum).unwrap();
        for t in log_grid(0.01, 100.0, 15).unwrap() {
            let p = signal(&seq, &sd, &env, t).unwrap();
            assert!(p.chi >= 0.0);
            assert!((0.0..=2.0).contains(&p.deviation));
            let s = (2.0 * p.phi).cos() * (-2.0 * p.chi).exp();
            assert!((p.s - s).abs() <= 4.0 * f64::EPSILON);
        }
    }
}
