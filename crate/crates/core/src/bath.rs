//! Ohmic bath spectral densities, the thermal occupation factor and the
//! classical power spectrum that reproduces the quantum dephasing exponent.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Shape of the ultraviolet cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// `J(w) = 2 alpha w` for `w < omega_d`, zero above.
    Hard,
    /// `J(w) = 2 alpha w / (1 + (w / omega_d)^gamma)`.
    PowerLaw { gamma: f64 },
}

/// Ohmic spectral density with a hard or power-law cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    alpha: f64,
    omega_d: f64,
    cutoff: Cutoff,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl SpectralDensity {
    pub fn hard_cutoff(alpha: f64, omega_d: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("omega_d", omega_d)?;
        Ok(Self {
            alpha,
            omega_d,
            cutoff: Cutoff::Hard,
        })
    }

    /// Power-law cutoff; `gamma = inf` gives the hard cutoff.
    pub fn power_law(alpha: f64, omega_d: f64, gamma: f64) -> Result<Self> {
        if gamma == f64::INFINITY {
            return Self::hard_cutoff(alpha, omega_d);
        }
        check_positive("alpha", alpha)?;
        check_positive("omega_d", omega_d)?;
        if gamma.is_nan() || gamma <= 0.0 {
            // The integrand decays like w^(-1-gamma); nothing converges below zero.
            return Err(Error::Divergent(format!(
                "cutoff exponent gamma = {gamma}; the frequency integrals need gamma > 0"
            )));
        }
        Ok(Self {
            alpha,
            omega_d,
            cutoff: Cutoff::PowerLaw { gamma },
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Cutoff exponent, infinite for the hard cutoff.
    pub fn gamma(&self) -> f64 {
        match self.cutoff {
            Cutoff::Hard => f64::INFINITY,
            Cutoff::PowerLaw { gamma } => gamma,
        }
    }

    /// Largest frequency with nonzero weight.
    pub(crate) fn support_end(&self) -> f64 {
        match self.cutoff {
            Cutoff::Hard => self.omega_d,
            Cutoff::PowerLaw { .. } => f64::INFINITY,
        }
    }

    /// `J(omega)` for `omega >= 0`, unchecked.
    #[inline]
    pub fn value(&self, omega: f64) -> f64 {
        let ohmic = 2.0 * self.alpha * omega;
        match self.cutoff {
            Cutoff::Hard => {
                if omega < self.omega_d {
                    ohmic
                } else {
                    0.0
                }
            }
            Cutoff::PowerLaw { gamma } => ohmic / (1.0 + (omega / self.omega_d).powf(gamma)),
        }
    }

    /// Analytic continuation of the power-law density to `Re w > 0`.
    ///
    /// The hard cutoff has none; callers only use this beyond `omega_d`.
    pub(crate) fn value_complex(&self, omega: Complex64) -> Complex64 {
        let ohmic = omega * (2.0 * self.alpha);
        match self.cutoff {
            Cutoff::Hard => Complex64::new(0.0, 0.0),
            Cutoff::PowerLaw { gamma } => {
                let log_ratio = (omega / self.omega_d).ln() * gamma;
                if log_ratio.re > 700.0 {
                    ohmic * (-log_ratio).exp()
                } else {
                    ohmic / (log_ratio.exp() + 1.0)
                }
            }
        }
    }
}

impl fmt::Display for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} omega_d={} gamma={}",
            self.alpha,
            self.omega_d,
            fmt_inf(self.gamma())
        )
    }
}

pub(crate) fn fmt_inf(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// How the bath enters the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Bosonic bath: exponential suppression and a phase.
    Quantum,
    /// Classical Gaussian noise with the equivalent power spectrum: no phase.
    Classical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Quantum => "quantum",
            Mode::Classical => "classical",
        })
    }
}

/// Inverse temperature and evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    beta: f64,
    mode: Mode,
}

impl Environment {
    /// `beta = f64::INFINITY` is zero temperature.
    pub fn new(beta: f64, mode: Mode) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be positive or inf, got {beta}"
            )));
        }
        Ok(Self { beta, mode })
    }

    pub fn zero_temperature(mode: Mode) -> Self {
        Self {
            beta: f64::INFINITY,
            mode,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta == f64::INFINITY
    }

    /// `coth(beta omega / 2)` for `omega > 0`, unchecked.
    #[inline]
    pub fn thermal(&self, omega: f64) -> f64 {
        if self.is_zero_temperature() {
            return 1.0;
        }
        let x = 0.5 * self.beta * omega;
        if x < 1e-8 {
            1.0 / x + x / 3.0
        } else {
            1.0 / x.tanh()
        }
    }

    /// `coth(beta omega / 2)` for `Re omega > 0`.
    pub(crate) fn thermal_complex(&self, omega: Complex64) -> Complex64 {
        if self.is_zero_temperature() {
            return Complex64::new(1.0, 0.0);
        }
        let e = (omega * (-self.beta)).exp();
        (e + 1.0) / (-e + 1.0)
    }
}

fn check_frequency(omega: f64) -> Result<()> {
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "frequency must be non-negative, got {omega}"
        )));
    }
    Ok(())
}

/// `J(omega)`.
pub fn eval_j(sd: &SpectralDensity, omega: f64) -> Result<f64> {
    check_frequency(omega)?;
    Ok(sd.value(omega))
}

/// `coth(beta omega / 2)`, exactly 1 at zero temperature.
pub fn thermal_factor(env: &Environment, omega: f64) -> Result<f64> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "thermal factor needs omega > 0, got {omega}"
        )));
    }
    Ok(env.thermal(omega))
}

/// Classical power spectrum `p(omega) = (pi/4) J(omega) coth(beta omega / 2)`.
///
/// Gaussian noise with this spectrum produces the same suppression exponent
/// as the bosonic bath.
pub fn power_spectrum_from_quantum(
    sd: &SpectralDensity,
    env: &Environment,
    omega: f64,
) -> Result<f64> {
    Ok(FRAC_PI_4 * eval_j(sd, omega)? * thermal_factor(env, omega)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_density_values() {
        let hard = SpectralDensity::hard_cutoff(0.25, 1.0).unwrap();
        assert_eq!(eval_j(&hard, 0.5).unwrap(), 0.25);
        assert_eq!(eval_j(&hard, 1.5).unwrap(), 0.0);
        assert_eq!(eval_j(&hard, 1.0).unwrap(), 0.0);
        let soft = SpectralDensity::power_law(0.25, 1.0, 2.0).unwrap();
        assert_eq!(eval_j(&soft, 1.0).unwrap(), 0.25);
        assert!(eval_j(&soft, -1.0).is_err());
        assert!(eval_j(&hard, f64::NAN).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(SpectralDensity::hard_cutoff(0.0, 1.0).is_err());
        assert!(SpectralDensity::hard_cutoff(0.25, -1.0).is_err());
        assert!(matches!(
            SpectralDensity::power_law(0.25, 1.0, 0.0),
            Err(Error::Divergent(_))
        ));
        assert!(SpectralDensity::power_law(0.25, 1.0, -2.0).is_err());
        let inf = SpectralDensity::power_law(0.25, 1.0, f64::INFINITY).unwrap();
        assert_eq!(inf.cutoff(), Cutoff::Hard);
        assert!(Environment::new(0.0, Mode::Quantum).is_err());
        assert!(Environment::new(-1.0, Mode::Quantum).is_err());
        assert!(Environment::new(f64::INFINITY, Mode::Classical).is_ok());
    }

    #[test]
    fn power_law_approaches_hard_cutoff() {
        let hard = SpectralDensity::hard_cutoff(0.25, 1.0).unwrap();
        let steep = SpectralDensity::power_law(0.25, 1.0, 1e6).unwrap();
        for k in 0..=400 {
            let w = 0.005 * k as f64;
            if (w - 1.0).abs() < 1e-3 {
                continue;
            }
            assert!((steep.value(w) - hard.value(w)).abs() < 1e-6, "w={w}");
        }
    }

    #[test]
    fn thermal_factor_values() {
        let zero = Environment::zero_temperature(Mode::Quantum);
        for w in [1e-9, 0.3, 7.0, 1e6] {
            assert_eq!(thermal_factor(&zero, w).unwrap(), 1.0);
        }
        let env = Environment::new(2.0, Mode::Quantum).unwrap();
        let coth2 = 2f64.cosh() / 2f64.sinh();
        assert!((thermal_factor(&env, 2.0).unwrap() - coth2).abs() < 1e-15);
        assert!((thermal_factor(&env, 2.0).unwrap() - 1.037_314_720_727_548).abs() < 1e-14);
        assert!(thermal_factor(&env, 0.0).is_err());
        assert!(thermal_factor(&env, -1.0).is_err());
    }

    #[test]
    fn thermal_factor_high_temperature_limit() {
        for beta in [1e-3, 1e-6, 1e-10, 1e-14] {
            let env = Environment::new(beta, Mode::Quantum).unwrap();
            let w = 1.0;
            let scaled = thermal_factor(&env, w).unwrap() * beta * w / 2.0;
            assert!((scaled - 1.0).abs() < 1e-6, "beta={beta} scaled={scaled}");
        }
        // both sides of the Laurent switch agree
        let env = Environment::new(1.0, Mode::Quantum).unwrap();
        let below = env.thermal(2.0 * 0.999_999_99e-8);
        let above = env.thermal(2.0 * 1.000_000_01e-8);
        assert!((below / above - 1.0).abs() < 1e-7);
    }

    #[test]
    fn thermal_factor_monotone() {
        for beta in [0.1, 1.0, 10.0] {
            let env = Environment::new(beta, Mode::Quantum).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..2000 {
                let w = 0.01 * k as f64;
                let c = env.thermal(w);
                assert!(c >= 1.0 && c <= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn classical_spectrum() {
        let hard = SpectralDensity::hard_cutoff(0.25, 1.0).unwrap();
        let zero = Environment::zero_temperature(Mode::Classical);
        assert_eq!(power_spectrum_from_quantum(&hard, &zero, 1.5).unwrap(), 0.0);
        let p = power_spectrum_from_quantum(&hard, &zero, 0.5).unwrap();
        assert!((p - FRAC_PI_4 * 0.25).abs() < 1e-16);
        let soft = SpectralDensity::power_law(0.3, 2.0, 4.0).unwrap();
        let warm = Environment::new(0.7, Mode::Quantum).unwrap();
        for k in 1..100 {
            let w = 0.1 * k as f64;
            let lhs = power_spectrum_from_quantum(&soft, &warm, w).unwrap() / FRAC_PI_4;
            let rhs = eval_j(&soft, w).unwrap() * thermal_factor(&warm, w).unwrap();
            assert!((lhs - rhs).abs() <= 1e-15 * rhs);
        }
    }

    #[test]
    fn complex_continuation_matches_real_axis() {
        let soft = SpectralDensity::power_law(0.25, 1.0, 8.0).unwrap();
        let env = Environment::new(1.3, Mode::Quantum).unwrap();
        for w in [2.0, 3.5, 10.0, 200.0] {
            let z = Complex64::new(w, 0.0);
            assert!((soft.value_complex(z).re - soft.value(w)).abs() < 1e-15);
            assert!((env.thermal_complex(z).re - env.thermal(w)).abs() < 1e-14);
        }
    }
}
