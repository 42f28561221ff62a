//! Coefficient recursion for the general single-axis dephasing model.
//!
//! Between pulses the evolution is `exp(A_0 + s A_1)` with `s = +-1` flipped
//! by every pulse. Expanding the full propagator in the two operators gives
//! one coefficient per binary word: letter `0` stands for `A_0`, letter `1`
//! for `A_1`. A pulse sequence decouples to a given order when every word
//! with an odd number of `1` letters has a vanishing coefficient.
//!
//! The coefficients obey
//!
//! ```text
//! C^v_{p+1} = sum over splittings v = (w, m) of
//!             (-1)^{(p+1)|w|} (d_{p+2} - d_{p+1})^{len w} / (len w)!  C^m_p
//! ```
//!
//! starting from `C^m_0 = d_1^{len m} / (len m)!`, with `d_{n+1} = 1`.
//! Here `m` holds the first `len m` letters of `v` and `w` the rest.
//!
//! Values are exact rationals when every instant is rational and
//! high-precision binary floats otherwise.

use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sequences::{make_udd, Family, PulseSequence};

/// Longest word length the tables will hold.
pub const MAX_WORD_LEN: usize = 24;

/// A word over `{0, 1}` with significant leading zeros.
///
/// Letter `i` (0-based) is bit `i` of `bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryWord {
    len: u8,
    bits: u32,
}

impl BinaryWord {
    pub fn new(len: usize, bits: u32) -> Result<Self> {
        if len > MAX_WORD_LEN || (len < 32 && bits >> len != 0) {
            return Err(Error::InvalidArgument(format!(
                "bit pattern {bits:#b} does not fit a word of length {len}"
            )));
        }
        Ok(Self {
            len: len as u8,
            bits,
        })
    }

    pub fn empty() -> Self {
        Self { len: 0, bits: 0 }
    }

    pub fn len(&self) -> usize {
        usize::from(self.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of `1` letters.
    pub fn checksum(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn letter(&self, i: usize) -> Option<u8> {
        (i < self.len()).then(|| ((self.bits >> i) & 1) as u8)
    }
}

impl fmt::Display for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if (self.bits >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BinaryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u32;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' if i < 32 => bits |= 1 << i,
                _ => {
                    return Err(Error::Parse {
                        position: i,
                        message: format!("expected 0 or 1, found {c:?}"),
                    })
                }
            }
        }
        Self::new(s.chars().count(), bits)
    }
}

/// Number system the recursion runs in.
pub trait Field: Sync {
    type Value: Clone + Send + Sync + fmt::Debug;

    fn zero(&self) -> Self::Value;
    fn one(&self) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn div_small(&self, a: &Self::Value, k: u64) -> Self::Value;
    fn neg(&self, a: &Self::Value) -> Self::Value;
    fn is_zero(&self, a: &Self::Value) -> bool;
    /// `log10 |a|`, negative infinity for zero.
    fn log10_abs(&self, a: &Self::Value) -> f64;
    fn to_f64(&self, a: &Self::Value) -> f64;
}

/// Exact rational arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exact;

impl Field for Exact {
    type Value = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn div_small(&self, a: &BigRational, k: u64) -> BigRational {
        a / BigRational::from_integer(BigInt::from(k))
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
    fn log10_abs(&self, a: &BigRational) -> f64 {
        if a.is_zero() {
            return f64::NEG_INFINITY;
        }
        let a = a.abs();
        let digits = |x: &BigInt| x.to_string().len() as i64;
        let shift = digits(a.numer()) - digits(a.denom());
        let scaled = if shift >= 0 {
            &a / BigRational::from_integer(BigInt::from(10).pow(shift as u32))
        } else {
            &a * BigRational::from_integer(BigInt::from(10).pow((-shift) as u32))
        };
        scaled
            .to_f64()
            .map_or(f64::NAN, |m| m.log10() + shift as f64)
    }
    fn to_f64(&self, a: &BigRational) -> f64 {
        a.to_f64().unwrap_or(f64::NAN)
    }
}

/// Binary floating point with a fixed number of decimal digits.
#[derive(Debug, Clone, Copy)]
pub struct HighPrecision {
    digits: u32,
    bits: usize,
}

const RM: RoundingMode = RoundingMode::ToEven;

impl HighPrecision {
    pub fn new(digits: u32) -> Result<Self> {
        if !(10..=10_000).contains(&digits) {
            return Err(Error::InvalidArgument(format!(
                "precision must be between 10 and 10000 digits, got {digits}"
            )));
        }
        // decimal digits to bits, plus a guard word
        let bits = ((f64::from(digits) * std::f64::consts::LOG2_10).ceil() as usize + 64)
            .div_ceil(64)
            * 64;
        Ok(Self { digits, bits })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    fn ratio(&self, num: i64, den: i64) -> BigFloat {
        BigFloat::from_i64(num, self.bits).div(&BigFloat::from_i64(den, self.bits), self.bits, RM)
    }

    /// `(mantissa in [0.5, 1), binary exponent)` of a nonzero value.
    fn split(a: &BigFloat) -> Option<(f64, i64)> {
        let e = a.exponent()?;
        let words = a.mantissa_digits()?;
        let top = *words.last()?;
        if top == 0 {
            return None;
        }
        Some(((top as f64) / 2f64.powi(64), i64::from(e)))
    }
}

impl Field for HighPrecision {
    type Value = BigFloat;

    fn zero(&self) -> BigFloat {
        BigFloat::from_u64(0, self.bits)
    }
    fn one(&self) -> BigFloat {
        BigFloat::from_u64(1, self.bits)
    }
    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, RM)
    }
    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.bits, RM)
    }
    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, RM)
    }
    fn div_small(&self, a: &BigFloat, k: u64) -> BigFloat {
        a.div(&BigFloat::from_u64(k, self.bits), self.bits, RM)
    }
    fn neg(&self, a: &BigFloat) -> BigFloat {
        a.neg()
    }
    fn is_zero(&self, a: &BigFloat) -> bool {
        a.is_zero()
    }
    fn log10_abs(&self, a: &BigFloat) -> f64 {
        match Self::split(a) {
            Some((m, e)) => (m.log2() + e as f64) * std::f64::consts::LOG10_2,
            None => f64::NEG_INFINITY,
        }
    }
    fn to_f64(&self, a: &BigFloat) -> f64 {
        match Self::split(a) {
            Some((m, e)) => {
                let v = m * 2f64.powi(e.clamp(-1100, 1100) as i32);
                if a.sign() == Some(Sign::Neg) {
                    -v
                } else {
                    v
                }
            }
            None => 0.0,
        }
    }
}

/// Pulse instants as exact rationals, when the family provides them.
///
/// Custom lists use the exact binary value of each stored double.
pub fn exact_instants(seq: &PulseSequence) -> Result<Vec<BigRational>> {
    let ratio = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let udd_small = |m: usize| -> Result<Vec<BigRational>> {
        match m {
            1 => Ok(vec![ratio(1, 2)]),
            2 => Ok(vec![ratio(1, 4), ratio(3, 4)]),
            _ => Err(Error::NotRational(format!(
                "optimal timings with {m} pulses are irrational"
            ))),
        }
    };
    match seq.family() {
        Family::Free => Ok(Vec::new()),
        Family::Udd { n } => udd_small(n),
        Family::Cpmg { n } => Ok((1..=n as i64)
            .map(|j| ratio(2 * j - 1, 2 * n as i64))
            .collect()),
        Family::Bb { n } => Ok((1..=n as i64).map(|j| ratio(j, n as i64 + 1)).collect()),
        Family::Iudd { m, c } => {
            let block = udd_small(m)?;
            let c_big = BigRational::from_integer(BigInt::from(c));
            Ok((0..c)
                .flat_map(|k| {
                    let shift = BigRational::from_integer(BigInt::from(k));
                    let c_big = c_big.clone();
                    block.iter().map(move |s| (&shift + s) / &c_big)
                })
                .collect())
        }
        Family::Cdd { .. } | Family::Custom => seq
            .deltas()
            .iter()
            .map(|&d| {
                BigRational::from_float(d)
                    .ok_or_else(|| Error::NotRational(format!("non-finite instant {d}")))
            })
            .collect(),
    }
}

/// `sin^2(pi j / (2m + 2))` for `j = 1..m` at the given precision.
fn udd_block_hp(hp: &HighPrecision, m: usize) -> Vec<BigFloat> {
    let p = hp.bits;
    let mut cc = Consts::new().expect("constant cache");
    let pi = cc.pi(p, RM);
    (1..=m)
        .map(|j| {
            let arg = pi.mul(&BigFloat::from_u64(j as u64, p), p, RM).div(
                &BigFloat::from_u64(2 * m as u64 + 2, p),
                p,
                RM,
            );
            let s = arg.sin(p, RM, &mut cc);
            s.mul(&s, p, RM)
        })
        .collect()
}

/// Pulse instants at high precision.
pub fn high_precision_instants(seq: &PulseSequence, hp: &HighPrecision) -> Vec<BigFloat> {
    match seq.family() {
        Family::Udd { n } if n > 2 => udd_block_hp(hp, n),
        Family::Iudd { m, c } if m > 2 => {
            let block = udd_block_hp(hp, m);
            let c_f = BigFloat::from_u64(c as u64, hp.bits);
            (0..c)
                .flat_map(|k| {
                    let shift = BigFloat::from_u64(k as u64, hp.bits);
                    let c_f = c_f.clone();
                    block
                        .iter()
                        .map(move |s| shift.add(s, hp.bits, RM).div(&c_f, hp.bits, RM))
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        _ => match exact_instants(seq) {
            Ok(exact) => exact
                .iter()
                .zip(seq.deltas())
                .map(|(r, &d)| match (r.numer().to_i64(), r.denom().to_i64()) {
                    (Some(a), Some(b)) => hp.ratio(a, b),
                    _ => BigFloat::from_f64(d, hp.bits),
                })
                .collect(),
            Err(_) => seq
                .deltas()
                .iter()
                .map(|&d| BigFloat::from_f64(d, hp.bits))
                .collect(),
        },
    }
}

/// Coefficients `C^w_p` for every word up to a length bound.
#[derive(Debug, Clone)]
pub struct CoefficientTable<V> {
    stage: usize,
    max_len: usize,
    /// `levels[len][bits]`
    levels: Vec<Vec<V>>,
}

impl<V> CoefficientTable<V> {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Number of stored words, `2^(L+1) - 1`.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, word: &BinaryWord) -> Option<&V> {
        self.levels.get(word.len())?.get(word.bits() as usize)
    }

    /// All coefficients of words with the given length, indexed by bit pattern.
    pub fn level(&self, len: usize) -> Option<&[V]> {
        self.levels.get(len).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BinaryWord, &V)> + '_ {
        self.levels.iter().enumerate().flat_map(|(len, level)| {
            level.iter().enumerate().map(move |(bits, v)| {
                (
                    BinaryWord {
                        len: len as u8,
                        bits: bits as u32,
                    },
                    v,
                )
            })
        })
    }
}

/// The recursion for one pulse sequence in a chosen number system.
#[derive(Debug, Clone)]
pub struct Recursion<F: Field> {
    field: F,
    /// `0, d_1, ..., d_n, 1`
    instants: Vec<F::Value>,
}

impl Recursion<Exact> {
    pub fn exact(seq: &PulseSequence) -> Result<Self> {
        let mut instants = vec![BigRational::zero()];
        instants.extend(exact_instants(seq)?);
        instants.push(BigRational::one());
        Ok(Self {
            field: Exact,
            instants,
        })
    }
}

impl Recursion<HighPrecision> {
    pub fn high_precision(seq: &PulseSequence, digits: u32) -> Result<Self> {
        let hp = HighPrecision::new(digits)?;
        let mut instants = vec![hp.zero()];
        instants.extend(high_precision_instants(seq, &hp));
        instants.push(hp.one());
        Ok(Self {
            field: hp,
            instants,
        })
    }
}

impl<F: Field> Recursion<F> {
    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn pulses(&self) -> usize {
        self.instants.len() - 2
    }

    /// `[1, x, x^2/2!, ..., x^L/L!]`
    fn powers(&self, x: &F::Value, max_len: usize) -> Vec<F::Value> {
        let mut out = Vec::with_capacity(max_len + 1);
        out.push(self.field.one());
        for k in 1..=max_len {
            let next = self.field.mul(&out[k - 1], x);
            out.push(self.field.div_small(&next, k as u64));
        }
        out
    }

    fn check_len(max_len: usize) -> Result<()> {
        if max_len > MAX_WORD_LEN {
            return Err(Error::InvalidArgument(format!(
                "word length bound {max_len} exceeds {MAX_WORD_LEN}"
            )));
        }
        Ok(())
    }

    /// Stage-0 table: `C^w_0 = d_1^len / len!`.
    pub fn seed_table(&self, max_len: usize) -> Result<CoefficientTable<F::Value>> {
        Self::check_len(max_len)?;
        let g = self.powers(&self.instants[1], max_len);
        let levels = (0..=max_len)
            .map(|len| vec![g[len].clone(); 1 << len])
            .collect();
        Ok(CoefficientTable {
            stage: 0,
            max_len,
            levels,
        })
    }

    /// Table at stage `p + 1` from the table at stage `p`.
    pub fn advance(
        &self,
        table: &CoefficientTable<F::Value>,
    ) -> Result<CoefficientTable<F::Value>> {
        let n = self.pulses();
        let p = table.stage;
        if p + 1 > n {
            return Err(Error::StageOverflow {
                stage: p,
                pulses: n,
            });
        }
        let gap = self.field.sub(&self.instants[p + 2], &self.instants[p + 1]);
        let g = self.powers(&gap, table.max_len);
        let flip_parity = (p + 1) % 2 == 1;
        let levels = (0..=table.max_len)
            .map(|len| {
                (0..1u32 << len)
                    .into_par_iter()
                    .map(|bits| {
                        let mut acc = self.field.zero();
                        for k in 0..=len {
                            let prefix =
                                table.levels[k][(bits & ((1u32 << k) - 1)) as usize].clone();
                            let term = self.field.mul(&g[len - k], &prefix);
                            let upper = if k == 32 { 0 } else { bits >> k };
                            if flip_parity && upper.count_ones() % 2 == 1 {
                                acc = self.field.sub(&acc, &term);
                            } else {
                                acc = self.field.add(&acc, &term);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(CoefficientTable {
            stage: p + 1,
            max_len: table.max_len,
            levels,
        })
    }

    /// Seed and advance through every pulse, keeping only the current stage.
    pub fn final_table(&self, max_len: usize) -> Result<CoefficientTable<F::Value>> {
        let mut table = self.seed_table(max_len)?;
        for _ in 0..self.pulses() {
            table = self.advance(&table)?;
        }
        Ok(table)
    }
}

/// Number system selection for a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Exact,
    HighPrecision {
        digits: u32,
    },
    /// Exact when the instants are rational, otherwise the default precision.
    Auto,
}

/// Working precision used when none is requested.
pub fn default_digits(n: usize) -> u32 {
    match n {
        0..=10 => 60,
        11..=14 => 80,
        _ => 80 + 6 * (n as u32 - 14),
    }
}

/// Largest odd- and even-checksum magnitudes among words of one length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthStats {
    pub len: usize,
    pub odd_max_log10: f64,
    pub even_max_log10: f64,
}

/// Outcome of a vanishing check on the final-stage coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub sequence: String,
    pub pulses: usize,
    pub max_len: usize,
    /// `None` for exact arithmetic.
    pub digits: Option<u32>,
    pub odd_max: f64,
    pub even_max: f64,
    pub per_length: Vec<LengthStats>,
    /// Smallest per-length gap `log10(even max) - log10(odd max)`.
    pub separation: f64,
    /// All odd-checksum coefficients are exactly zero.
    pub exact_zeros: bool,
    pub passed: bool,
}

impl OrderReport {
    pub fn is_exact(&self) -> bool {
        self.digits.is_none()
    }
}

/// Orders of magnitude the vanishing threshold must sit below the coefficient scale.
pub const REQUIRED_SEPARATION: f64 = 10.0;

fn collect_stats<F: Field>(
    field: &F,
    table: &CoefficientTable<F::Value>,
) -> (Vec<LengthStats>, bool) {
    let mut stats = Vec::with_capacity(table.max_len);
    let mut all_zero = true;
    for len in 1..=table.max_len {
        let mut odd = f64::NEG_INFINITY;
        let mut even = f64::NEG_INFINITY;
        for (bits, v) in table.levels[len].iter().enumerate() {
            let l = field.log10_abs(v);
            if (bits as u32).count_ones() % 2 == 1 {
                all_zero &= field.is_zero(v);
                odd = odd.max(l);
            } else {
                even = even.max(l);
            }
        }
        stats.push(LengthStats {
            len,
            odd_max_log10: odd,
            even_max_log10: even,
        });
    }
    (stats, all_zero)
}

/// Check that odd-checksum coefficients up to length `max_len` vanish after the last pulse.
///
/// In high-precision mode a run passes when every odd coefficient is below
/// `10^-(digits - 10)` and at least ten orders of magnitude below the largest
/// even coefficient of the same length. If the threshold itself is less than
/// ten orders below the even scale the run is rejected as under-resolved.
pub fn verify_sequence_order(
    seq: &PulseSequence,
    max_len: usize,
    arithmetic: Arithmetic,
) -> Result<OrderReport> {
    let n = seq.len();
    if max_len > n {
        return Err(Error::InvalidArgument(format!(
            "word length bound {max_len} exceeds the pulse count {n}"
        )));
    }
    let arithmetic = match arithmetic {
        Arithmetic::Auto => {
            if exact_instants(seq).is_ok() {
                Arithmetic::Exact
            } else {
                Arithmetic::HighPrecision {
                    digits: default_digits(n),
                }
            }
        }
        other => other,
    };
    let max_of = |stats: &[LengthStats], f: fn(&LengthStats) -> f64| {
        stats.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    match arithmetic {
        Arithmetic::Exact => {
            let rec = Recursion::exact(seq)?;
            let table = rec.final_table(max_len)?;
            let (per_length, exact_zeros) = collect_stats(rec.field(), &table);
            let separation = per_length
                .iter()
                .map(|s| s.even_max_log10 - s.odd_max_log10)
                .fold(f64::INFINITY, f64::min);
            Ok(OrderReport {
                sequence: seq.label(),
                pulses: n,
                max_len,
                digits: None,
                odd_max: 10f64.powf(max_of(&per_length, |s| s.odd_max_log10)),
                even_max: 10f64.powf(max_of(&per_length, |s| s.even_max_log10)),
                separation,
                exact_zeros,
                passed: exact_zeros,
                per_length,
            })
        }
        Arithmetic::HighPrecision { digits } => {
            let rec = Recursion::high_precision(seq, digits)?;
            let table = rec.final_table(max_len)?;
            let (per_length, exact_zeros) = collect_stats(rec.field(), &table);
            let threshold = -(f64::from(digits) - 10.0);
            let headroom = per_length
                .iter()
                .map(|s| s.even_max_log10 - threshold)
                .fold(f64::INFINITY, f64::min);
            if headroom < REQUIRED_SEPARATION {
                let smallest_scale = per_length
                    .iter()
                    .map(|s| s.even_max_log10)
                    .fold(0.0, f64::min);
                let suggested = (20.0 - smallest_scale).ceil().max(f64::from(digits) + 1.0) as u32;
                return Err(Error::PrecisionTooLow {
                    digits,
                    separation: headroom,
                    suggested,
                });
            }
            let separation = per_length
                .iter()
                .map(|s| s.even_max_log10 - s.odd_max_log10)
                .fold(f64::INFINITY, f64::min);
            let odd_log = max_of(&per_length, |s| s.odd_max_log10);
            Ok(OrderReport {
                sequence: seq.label(),
                pulses: n,
                max_len,
                digits: Some(digits),
                odd_max: 10f64.powf(odd_log),
                even_max: 10f64.powf(max_of(&per_length, |s| s.even_max_log10)),
                separation,
                exact_zeros,
                passed: odd_log < threshold && separation >= REQUIRED_SEPARATION,
                per_length,
            })
        }
        Arithmetic::Auto => unreachable!("resolved above"),
    }
}

/// [`verify_sequence_order`] for the optimal `n`-pulse timings.
pub fn verify_udd_order(n: usize, max_len: usize, arithmetic: Arithmetic) -> Result<OrderReport> {
    verify_sequence_order(&make_udd(n)?, max_len, arithmetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::derivative_residual;
    use crate::sequences::{make_bb, make_cdd, make_cpmg, make_custom, make_iudd};

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn word(s: &str) -> BinaryWord {
        s.parse().unwrap()
    }

    #[test]
    fn words() {
        let w = word("0110");
        assert_eq!(w.len(), 4);
        assert_eq!(w.checksum(), 2);
        assert_eq!(w.bits(), 0b0110);
        assert_eq!(w.to_string(), "0110");
        assert_eq!(word("001").len(), 3);
        assert_ne!(word("1"), word("10"));
        assert!(BinaryWord::new(2, 0b100).is_err());
        assert!(matches!(
            "01x".parse::<BinaryWord>(),
            Err(Error::Parse { position: 2, .. })
        ));
        assert_eq!(BinaryWord::empty().checksum(), 0);
    }

    #[test]
    fn seed_values() {
        let rec = Recursion::exact(&make_udd(1).unwrap()).unwrap();
        let t = rec.seed_table(3).unwrap();
        assert_eq!(t.get(&BinaryWord::empty()).unwrap(), &q(1, 1));
        assert_eq!(t.get(&word("1")).unwrap(), &q(1, 2));
        assert_eq!(t.get(&word("01")).unwrap(), &q(1, 8));
        assert_eq!(t.get(&word("10")).unwrap(), &q(1, 8));
        assert_eq!(t.get(&word("111")).unwrap(), &q(1, 48));
    }

    #[test]
    fn word_count() {
        let rec = Recursion::exact(&make_cpmg(4).unwrap()).unwrap();
        for l in 0..=6 {
            assert_eq!(rec.seed_table(l).unwrap().len(), (1 << (l + 1)) - 1);
        }
        assert_eq!(rec.final_table(4).unwrap().iter().count(), 31);
    }

    #[test]
    fn hahn_echo_first_order() {
        let rec = Recursion::exact(&make_udd(1).unwrap()).unwrap();
        let t1 = rec.advance(&rec.seed_table(1).unwrap()).unwrap();
        assert_eq!(t1.stage(), 1);
        assert!(t1.get(&word("1")).unwrap().is_zero());
        assert!(matches!(
            rec.advance(&t1),
            Err(Error::StageOverflow {
                stage: 1,
                pulses: 1
            })
        ));
    }

    #[test]
    fn empty_word_stays_one() {
        let rec = Recursion::exact(&make_bb(3).unwrap()).unwrap();
        let mut t = rec.seed_table(2).unwrap();
        for _ in 0..3 {
            t = rec.advance(&t).unwrap();
            assert!(t.get(&BinaryWord::empty()).unwrap().is_one());
        }
    }

    #[test]
    fn two_pulse_optimum_exact() {
        let rec = Recursion::exact(&make_udd(2).unwrap()).unwrap();
        let t = rec.final_table(2).unwrap();
        for (w, v) in t.iter() {
            if w.checksum() % 2 == 1 {
                assert!(v.is_zero(), "word {w}");
            }
        }
    }

    #[test]
    fn all_zero_word_equals_free_evolution() {
        for n in 1..=8 {
            let rec = Recursion::high_precision(&make_udd(n).unwrap(), 40).unwrap();
            let t = rec.final_table(n).unwrap();
            let zeros = t.get(&BinaryWord::new(n, 0).unwrap()).unwrap();
            let factorial: f64 = (1..=n).map(|k| k as f64).product();
            let v = rec.field().to_f64(zeros);
            assert!(v != 0.0);
            assert!((v * factorial - 1.0).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn first_letter_coefficient_tracks_first_residual() {
        for seq in [
            make_cpmg(1).unwrap(),
            make_cpmg(4).unwrap(),
            make_cpmg(7).unwrap(),
            make_bb(2).unwrap(),
            make_bb(3).unwrap(),
            make_bb(10).unwrap(),
            make_bb(11).unwrap(),
        ] {
            let rec = Recursion::exact(&seq).unwrap();
            let c1 = rec.final_table(1).unwrap().get(&word("1")).unwrap().clone();
            let r1 = derivative_residual(&seq, 1);
            assert!((rec.field().to_f64(&c1) + r1).abs() < 1e-15, "{seq}");
            let vanishes = matches!(seq.family(), Family::Cpmg { .. })
                || matches!(seq.family(), Family::Bb { n } if n % 2 == 1);
            assert_eq!(c1.is_zero(), vanishes, "{seq}");
        }
    }

    #[test]
    fn exact_and_high_precision_agree() {
        for seq in [
            make_udd(1).unwrap(),
            make_udd(2).unwrap(),
            make_bb(2).unwrap(),
        ] {
            let exact = Recursion::exact(&seq).unwrap().final_table(2).unwrap();
            let rec = Recursion::high_precision(&seq, 30).unwrap();
            let hp = rec.final_table(2).unwrap();
            for ((w, a), (_, b)) in exact.iter().zip(hp.iter()) {
                let a = Exact.to_f64(a);
                let b = rec.field().to_f64(b);
                assert!(
                    (a - b).abs() <= 1e-16 * a.abs().max(1e-30) + 1e-300,
                    "{seq} {w}"
                );
            }
        }
    }

    #[test]
    fn exact_instants_by_family() {
        assert_eq!(
            exact_instants(&make_cpmg(2).unwrap()).unwrap(),
            vec![q(1, 4), q(3, 4)]
        );
        assert_eq!(exact_instants(&make_bb(3).unwrap()).unwrap()[2], q(3, 4));
        assert_eq!(exact_instants(&make_cdd(4)).unwrap()[2], q(1, 4));
        assert_eq!(
            exact_instants(&make_iudd(2, 6).unwrap()).unwrap(),
            exact_instants(&make_cpmg(12).unwrap()).unwrap()
        );
        assert!(matches!(
            exact_instants(&make_udd(3).unwrap()),
            Err(Error::NotRational(_))
        ));
        assert_eq!(
            exact_instants(&make_custom(&[0.5]).unwrap()).unwrap(),
            vec![q(1, 2)]
        );
    }

    #[test]
    fn high_precision_instants_match_doubles() {
        let hp = HighPrecision::new(50).unwrap();
        for seq in [
            make_udd(7).unwrap(),
            make_iudd(3, 4).unwrap(),
            make_cdd(3),
            make_custom(&[0.1, 0.7]).unwrap(),
        ] {
            let v = high_precision_instants(&seq, &hp);
            for (a, &b) in v.iter().zip(seq.deltas()) {
                assert!((hp.to_f64(a) - b).abs() <= 2.0 * f64::EPSILON * b, "{seq}");
            }
        }
    }

    #[test]
    fn log10_helpers() {
        assert!((Exact.log10_abs(&q(-1, 1000)) + 3.0).abs() < 1e-12);
        assert!((Exact.log10_abs(&q(7, 3)) - (7f64 / 3.0).log10()).abs() < 1e-12);
        assert_eq!(Exact.log10_abs(&q(0, 1)), f64::NEG_INFINITY);
        let hp = HighPrecision::new(40).unwrap();
        let x = hp.div_small(&hp.one(), 1_000_000_007);
        assert!((hp.log10_abs(&x) + 9.000_000_003).abs() < 1e-9);
        assert!((hp.to_f64(&hp.neg(&x)) + 1.0 / 1_000_000_007.0).abs() < 1e-24);
        assert_eq!(hp.log10_abs(&hp.zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn verify_small_orders() {
        let r = verify_udd_order(2, 2, Arithmetic::Exact).unwrap();
        assert!(r.passed && r.exact_zeros && r.is_exact());
        let r = verify_udd_order(1, 1, Arithmetic::Auto).unwrap();
        assert!(r.passed && r.is_exact());
        let r = verify_udd_order(5, 5, Arithmetic::HighPrecision { digits: 60 }).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.separation > 30.0);
        assert!(verify_udd_order(3, 3, Arithmetic::Exact).is_err());
        assert!(verify_udd_order(3, 4, Arithmetic::Auto).is_err());
    }

    #[test]
    fn non_optimal_sequences_fail() {
        let r = verify_sequence_order(&make_bb(4).unwrap(), 2, Arithmetic::Exact).unwrap();
        assert!(!r.passed);
        let r = verify_sequence_order(
            &make_cpmg(6).unwrap(),
            4,
            Arithmetic::HighPrecision { digits: 40 },
        )
        .unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn starved_precision_rejected() {
        let err = verify_udd_order(8, 8, Arithmetic::HighPrecision { digits: 20 }).unwrap_err();
        match err {
            Error::PrecisionTooLow {
                digits, suggested, ..
            } => {
                assert_eq!(digits, 20);
                assert!(suggested >= 25);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_precision_grows_with_pulses() {
        assert_eq!(default_digits(9), 60);
        assert_eq!(default_digits(14), 80);
        assert_eq!(default_digits(16), 92);
    }
}
