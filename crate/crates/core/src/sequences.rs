//! Pulse-sequence families as normalized timing lists.
//!
//! A sequence of `n` ideal pi pulses over a window of length `t` is stored as
//! the fractions `d_1 < ... < d_n` of `t` at which the pulses fire. The
//! window boundaries `d_0 = 0` and `d_{n+1} = 1` are implicit and never
//! stored.
//!
//! Concatenated sequences (CDD) are unfolded from their level recursion. An
//! odd level carries a global spin flip in front of the whole evolution; it
//! is a frame change rather than a timed pulse, so it does not show up in the
//! instants.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which family a sequence was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Free evolution, no pulses.
    Free,
    Udd {
        n: usize,
    },
    Cpmg {
        n: usize,
    },
    Bb {
        n: usize,
    },
    Cdd {
        level: usize,
    },
    /// `c` back-to-back cycles of an `m`-pulse UDD block.
    Iudd {
        m: usize,
        c: usize,
    },
    Custom,
}

/// Strictly increasing pulse instants in the open interval `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    deltas: Vec<f64>,
    family: Family,
}

impl PulseSequence {
    /// The pulse-free evolution.
    pub fn free() -> Self {
        Self {
            deltas: Vec::new(),
            family: Family::Free,
        }
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Number of pulses.
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Instants with the window boundaries attached: `[0, d_1, ..., d_n, 1]`.
    pub fn instants_with_bounds(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.deltas.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.deltas);
        out.push(1.0);
        out
    }

    /// Spec string that rebuilds this sequence, e.g. `udd:10`.
    pub fn label(&self) -> String {
        self.to_string()
    }

    fn from_checked(deltas: Vec<f64>, family: Family) -> Self {
        debug_assert!(validate(&deltas).is_ok(), "{family:?} produced {deltas:?}");
        Self { deltas, family }
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Free => write!(f, "free"),
            Family::Udd { n } => write!(f, "udd:{n}"),
            Family::Cpmg { n } => write!(f, "cpmg:{n}"),
            Family::Bb { n } => write!(f, "bb:{n}"),
            Family::Cdd { level } => write!(f, "cdd:{level}"),
            Family::Iudd { m, c } => write!(f, "iudd:{m}x{c}"),
            Family::Custom => {
                write!(f, "custom:")?;
                for (i, d) in self.deltas.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
        }
    }
}

fn require_positive(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(format!(
            "{what} needs at least one pulse; use `free` for the pulse-free evolution"
        )));
    }
    Ok(())
}

/// `sin^2(pi j / (2n + 2))` for `j = 1..=n`.
///
/// The upper half is taken from the reflection `d_j = 1 - d_{n+1-j}`, and the
/// three rational points (`cos(pi j/(n+1))` in `{-1/2, 0, 1/2}`) are returned
/// exactly.
fn udd_instants(n: usize) -> Vec<f64> {
    let np1 = n + 1;
    let lower = |j: usize| -> f64 {
        if 2 * j == np1 {
            0.5
        } else if 3 * j == np1 {
            0.25
        } else {
            let s = (PI * j as f64 / (2 * np1) as f64).sin();
            s * s
        }
    };
    (1..=n)
        .map(|j| {
            if 2 * j <= np1 {
                lower(j)
            } else {
                1.0 - lower(np1 - j)
            }
        })
        .collect()
}

/// Uhrig sequence: `d_j = sin^2(pi j / (2n + 2))`.
pub fn make_udd(n: usize) -> Result<PulseSequence> {
    require_positive("UDD", n)?;
    Ok(PulseSequence::from_checked(
        udd_instants(n),
        Family::Udd { n },
    ))
}

/// CPMG: `d_j = (j - 1/2) / n`.
pub fn make_cpmg(n: usize) -> Result<PulseSequence> {
    require_positive("CPMG", n)?;
    let deltas = (1..=n)
        .map(|j| (2 * j - 1) as f64 / (2 * n) as f64)
        .collect();
    Ok(PulseSequence::from_checked(deltas, Family::Cpmg { n }))
}

/// Periodic bang-bang: `d_j = j / (n + 1)`.
pub fn make_bb(n: usize) -> Result<PulseSequence> {
    require_positive("BB", n)?;
    let deltas = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();
    Ok(PulseSequence::from_checked(deltas, Family::Bb { n }))
}

/// Concatenated sequence of the given level.
///
/// Level 0 is free evolution. Going from level `l` to `l + 1` halves two
/// copies of level `l`, with a pi pulse between them when `l` is even.
pub fn make_cdd(level: usize) -> PulseSequence {
    let mut deltas: Vec<f64> = Vec::new();
    for l in 0..level {
        let mut next = Vec::with_capacity(2 * deltas.len() + 1);
        next.extend(deltas.iter().map(|d| d / 2.0));
        if l % 2 == 0 {
            next.push(0.5);
        }
        next.extend(deltas.iter().map(|d| 0.5 + d / 2.0));
        deltas = next;
    }
    PulseSequence::from_checked(deltas, Family::Cdd { level })
}

/// `c` cycles of `UDD_m`, each squeezed into a window of width `1/c`.
pub fn make_iudd(m: usize, c: usize) -> Result<PulseSequence> {
    require_positive("iUDD block", m)?;
    if c == 0 {
        return Err(Error::InvalidArgument(
            "iUDD needs at least one cycle".into(),
        ));
    }
    let block = udd_instants(m);
    // UDD blocks have no pulse on their boundaries, so cycles never collide.
    debug_assert!(block.first().is_some_and(|&d| d > 0.0));
    debug_assert!(block.last().is_some_and(|&d| d < 1.0));
    let deltas = (0..c)
        .flat_map(|k| block.iter().map(move |s| (k as f64 + s) / c as f64))
        .collect();
    Ok(PulseSequence::from_checked(deltas, Family::Iudd { m, c }))
}

/// Wraps a caller-supplied list after validating it.
pub fn make_custom(deltas: &[f64]) -> Result<PulseSequence> {
    validate(deltas)?;
    Ok(PulseSequence {
        deltas: deltas.to_vec(),
        family: Family::Custom,
    })
}

fn validate(deltas: &[f64]) -> Result<()> {
    for (index, &d) in deltas.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 || d >= 1.0 {
            return Err(Error::InvalidInstant {
                index,
                reason: format!("{d} is outside the open interval (0, 1)"),
            });
        }
        if index > 0 {
            let prev = deltas[index - 1];
            if d == prev {
                return Err(Error::InvalidInstant {
                    index,
                    reason: format!("duplicate of the previous instant {prev}"),
                });
            }
            if d < prev {
                return Err(Error::InvalidInstant {
                    index,
                    reason: format!("{d} is smaller than the previous instant {prev}"),
                });
            }
        }
    }
    Ok(())
}

/// Parses `udd:N`, `cpmg:N`, `bb:N`, `cdd:L`, `iudd:MxC`, `custom:d1,d2,...`
/// or `free`.
pub fn parse_sequence(spec: &str) -> Result<PulseSequence> {
    let trimmed = spec.trim_start();
    let lead = spec.len() - trimmed.len();
    let s = trimmed.trim_end();
    if s.eq_ignore_ascii_case("free") || s.eq_ignore_ascii_case("none") {
        return Ok(PulseSequence::free());
    }
    let Some(colon) = s.find(':') else {
        return Err(Error::Parse {
            position: lead + s.len(),
            message: "expected `<family>:<parameters>`".into(),
        });
    };
    let family = &s[..colon];
    let args = &s[colon + 1..];
    let at = lead + colon + 1;

    let count = |text: &str, offset: usize| -> Result<usize> {
        text.trim().parse::<usize>().map_err(|_| Error::Parse {
            position: offset,
            message: format!("`{text}` is not a non-negative integer"),
        })
    };

    match family.to_ascii_lowercase().as_str() {
        "udd" => make_udd(count(args, at)?),
        "cpmg" => make_cpmg(count(args, at)?),
        "bb" => make_bb(count(args, at)?),
        "cdd" => Ok(make_cdd(count(args, at)?)),
        "iudd" => {
            let Some(x) = args.find(['x', 'X']) else {
                return Err(Error::Parse {
                    position: at + args.len(),
                    message: "expected `iudd:MxC`".into(),
                });
            };
            let m = count(&args[..x], at)?;
            let c = count(&args[x + 1..], at + x + 1)?;
            make_iudd(m, c)
        }
        "custom" => {
            let mut deltas = Vec::new();
            let mut offset = at;
            for field in args.split(',') {
                let value = field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    position: offset,
                    message: format!("`{field}` is not a decimal number"),
                })?;
                deltas.push(value);
                offset += field.len() + 1;
            }
            make_custom(&deltas)
        }
        other => Err(Error::Parse {
            position: lead,
            message: format!("unknown sequence family `{other}`"),
        }),
    }
}

impl FromStr for PulseSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}
