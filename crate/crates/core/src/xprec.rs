//! Extended-precision magnitudes for likelihood and posterior arithmetic.
//!
//! Likelihood values in this crate routinely have base-10 exponents around
//! `-1e8`, far outside the range of any hardware float.  [`BigLog`] stores
//! such a value as the base-10 logarithm of its magnitude, kept as a
//! 120-digit decimal, so that products, ratios, comparisons and weighted sums
//! of astronomically small probabilities stay exact to dozens of digits.
//!
//! The canonical text form is scientific notation with an explicit exponent
//! sign, e.g. `2.50e-1`; [`parse_decimal`] and [`render_decimal`] convert
//! between that form and [`BigLog`] without losing any of the first
//! [`RENDER_DIGITS_SUPPORTED`] significant digits.

use std::cmp::Ordering;
use std::str::FromStr;
use std::sync::OnceLock;

use dashu_float::DBig;
use dashu_int::IBig;
use thiserror::Error;

/// 120-digit decimal float; the working scalar for all log-domain arithmetic.
pub type Dec = DBig;

/// Significant decimal digits carried by every [`Dec`] value.
///
/// Rendering must be faithful to at least [`RENDER_DIGITS_SUPPORTED`] digits;
/// 120 leaves ~50 guard digits, so the accumulated `ln`/`exp` rounding error
/// (observed ~1e-118 relative) can never reach the rounding position.
pub const WORKING_DIGITS: usize = 120;

/// Largest `digits` argument for which [`render_decimal`] guarantees that a
/// parse -> render round trip reproduces the input string byte for byte.
pub const RENDER_DIGITS_SUPPORTED: usize = 64;

/// Terms more than this many orders of magnitude below the largest term are
/// dropped from [`log_sum`]: they cannot influence the first ~118 digits.
const LOG_SUM_ORDER_CUTOFF: i32 = 150;

/// Upper bound on the `digits` argument of [`render_decimal`].  Beyond this
/// the accumulated log-domain arithmetic error could reach the rounding
/// position, so requests are rejected rather than silently degraded.
pub const MAX_RENDER_DIGITS: usize = 100;

/// Nudge added on top of the exact half before truncating, so values whose
/// true mantissa sits exactly on a rounding boundary (e.g. 2.5 rendered to
/// one digit) reliably round away from zero.  The round trip through
/// `ln`/`exp` leaves an absolute error below ~1e-46 on the scaled mantissa
/// for exponents up to 1e9 at 64 digits; 1e-40 dominates that error while
/// staying far below any digit distance that matters.
const ROUND_HALF_BIAS: &str = "1e-40";

#[derive(Debug, Error)]
pub enum XprecError {
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
    #[error("`{0}` is negative; magnitudes must be non-negative")]
    Negative(String),
    #[error("plain decimal `{0}` must lie in [0, 1]; use scientific notation for larger values")]
    PlainOutOfRange(String),
    #[error("natural-log input must be finite or -inf, got {0}")]
    NonFiniteLog(f64),
    #[error("log_sum needs at least one term")]
    EmptySum,
    #[error("log_sum called with {values} values but {weights} weights")]
    WeightCount { values: usize, weights: usize },
    #[error("log_sum weight at index {0} is negative")]
    NegativeWeight(usize),
    #[error("division by a zero magnitude")]
    DivisionByZero,
    #[error("rendering requires at least one significant digit")]
    ZeroDigits,
    #[error("rendering supports at most {MAX_RENDER_DIGITS} digits, got {0}")]
    TooManyDigits(usize),
}

/// Parse a decimal string into a working-precision [`Dec`].
pub fn dec(s: &str) -> Result<Dec, XprecError> {
    let parsed = Dec::from_str(s).map_err(|_| XprecError::Parse(s.to_string()))?;
    Ok(parsed.with_precision(WORKING_DIGITS).value())
}

/// ln(10) at working precision, computed once.
pub fn ln10() -> &'static Dec {
    static LN10: OnceLock<Dec> = OnceLock::new();
    LN10.get_or_init(|| Dec::from(10).with_precision(WORKING_DIGITS).value().ln())
}

/// `0.5 + ROUND_HALF_BIAS` at working precision (parsed literals carry only
/// their own digit count as precision, which would swallow the bias).
fn round_half() -> &'static Dec {
    static HALF: OnceLock<Dec> = OnceLock::new();
    HALF.get_or_init(|| {
        let half = Dec::from_str("0.5")
            .expect("half literal is parseable")
            .with_precision(WORKING_DIGITS)
            .value();
        half + Dec::from_str(ROUND_HALF_BIAS).expect("bias literal is parseable")
    })
}

/// A non-negative real magnitude stored in log10 space.
///
/// `Zero` is the exact zero (log undefined); every positive value, however
/// small, is `Positive` with its base-10 logarithm as a 120-digit decimal.
#[derive(Clone, Debug, PartialEq)]
pub enum BigLog {
    Zero,
    Positive { log10_mag: Dec },
}

impl BigLog {
    /// The multiplicative identity (magnitude 1, log10 = 0).
    pub fn one() -> Self {
        BigLog::Positive {
            log10_mag: Dec::ZERO.with_precision(WORKING_DIGITS).value(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BigLog::Zero)
    }

    /// Base-10 logarithm of the magnitude, or `None` for zero.
    pub fn log10_magnitude(&self) -> Option<&Dec> {
        match self {
            BigLog::Zero => None,
            BigLog::Positive { log10_mag } => Some(log10_mag),
        }
    }

    pub fn from_log10_magnitude(log10_mag: Dec) -> Self {
        BigLog::Positive { log10_mag }
    }

    /// Lift a plain non-negative decimal (e.g. a prior weight) into log form.
    pub fn from_plain(value: &Dec) -> Result<Self, XprecError> {
        if *value < Dec::ZERO {
            return Err(XprecError::Negative(value.to_string()));
        }
        if *value == Dec::ZERO {
            return Ok(BigLog::Zero);
        }
        // Compose log10(s * 10^e) as log10(s) + e: `ln` slows superlinearly
        // in the decimal exponent, so it must only ever see the significand
        // (whose size is bounded by the working precision), never a value
        // with an astronomical exponent.
        let (significand, exponent) = value
            .clone()
            .with_precision(WORKING_DIGITS)
            .value()
            .into_repr()
            .into_parts();
        let significand = Dec::from(significand)
            .with_precision(WORKING_DIGITS)
            .value();
        let mut log10_mag = significand.ln() / ln10();
        log10_mag += Dec::from(IBig::from(exponent));
        Ok(BigLog::Positive {
            log10_mag: log10_mag.with_precision(WORKING_DIGITS).value(),
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (BigLog::Zero, _) | (_, BigLog::Zero) => BigLog::Zero,
            (BigLog::Positive { log10_mag: a }, BigLog::Positive { log10_mag: b }) => {
                BigLog::Positive { log10_mag: a + b }
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self, XprecError> {
        match (self, other) {
            (_, BigLog::Zero) => Err(XprecError::DivisionByZero),
            (BigLog::Zero, _) => Ok(BigLog::Zero),
            (BigLog::Positive { log10_mag: a }, BigLog::Positive { log10_mag: b }) => {
                Ok(BigLog::Positive { log10_mag: a - b })
            }
        }
    }

    /// Total order on magnitudes: zero sorts below every positive value.
    pub fn compare(&self, other: &Self) -> Ordering {
        match (self, other) {
            (BigLog::Zero, BigLog::Zero) => Ordering::Equal,
            (BigLog::Zero, BigLog::Positive { .. }) => Ordering::Less,
            (BigLog::Positive { .. }, BigLog::Zero) => Ordering::Greater,
            (BigLog::Positive { log10_mag: a }, BigLog::Positive { log10_mag: b }) => {
                a.partial_cmp(b).expect("decimal comparison is total")
            }
        }
    }
}

impl PartialOrd for BigLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.compare(other))
    }
}

/// Parse scientific notation (`6.755e-149625`) or a plain decimal in `[0, 1]`
/// (`0.25`, `1`, `0`) into a [`BigLog`].
///
/// Negative inputs are a domain error; plain decimals above 1 are rejected so
/// that magnitudes outside `[0, 1]` are always spelled with an explicit
/// exponent.  A zero mantissa parses to [`BigLog::Zero`] regardless of the
/// exponent.
pub fn parse_decimal(s: &str) -> Result<BigLog, XprecError> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Err(XprecError::Parse(s.to_string()));
    }
    let (mant_str, exp) = match trimmed.find(['e', 'E']) {
        Some(pos) => {
            let exp_str = trimmed[pos + 1..].strip_prefix('+').unwrap_or(&trimmed[pos + 1..]);
            let exp = IBig::from_str(exp_str).map_err(|_| XprecError::Parse(s.to_string()))?;
            (&trimmed[..pos], Some(exp))
        }
        None => (trimmed, None),
    };
    if mant_str.starts_with('-') {
        return Err(XprecError::Negative(s.to_string()));
    }
    let mantissa = Dec::from_str(mant_str)
        .map_err(|_| XprecError::Parse(s.to_string()))?
        .with_precision(WORKING_DIGITS)
        .value();
    if mantissa == Dec::ZERO {
        return Ok(BigLog::Zero);
    }
    if exp.is_none() && mantissa > Dec::ONE {
        return Err(XprecError::PlainOutOfRange(s.to_string()));
    }
    let mut log10_mag = mantissa.ln() / ln10();
    if let Some(exp) = exp {
        log10_mag += Dec::from(exp);
    }
    Ok(BigLog::Positive {
        log10_mag: log10_mag.with_precision(WORKING_DIGITS).value(),
    })
}

/// Convert a finite natural logarithm (or `-inf`, meaning exact zero) into a
/// [`BigLog`].  The f64 is taken at face value, bit-exactly.
pub fn from_natural_log(ln_value: f64) -> Result<BigLog, XprecError> {
    if ln_value == f64::NEG_INFINITY {
        return Ok(BigLog::Zero);
    }
    if !ln_value.is_finite() {
        return Err(XprecError::NonFiniteLog(ln_value));
    }
    let as_dec = Dec::from_str(&format!("{ln_value:e}"))
        .expect("f64 scientific formatting is always parseable")
        .with_precision(WORKING_DIGITS)
        .value();
    Ok(BigLog::Positive {
        log10_mag: as_dec / ln10(),
    })
}

/// Convert a working-precision natural logarithm into a [`BigLog`].
pub fn from_natural_log_dec(ln_value: &Dec) -> BigLog {
    let normalized = ln_value.clone().with_precision(WORKING_DIGITS).value();
    BigLog::Positive {
        log10_mag: normalized / ln10(),
    }
}

/// Natural logarithm of a positive magnitude, at working precision.
pub fn to_natural_log(value: &BigLog) -> Option<Dec> {
    value.log10_magnitude().map(|lm| lm * ln10())
}

/// Materialize a magnitude as a plain working-precision decimal.
///
/// The integer part of the exponent is carried exactly (decimals here have
/// arbitrary-precision exponents), so this is safe even for magnitudes like
/// 1e-300000000; only the ~120-digit mantissa is approximate.
pub fn to_plain_decimal(value: &BigLog) -> Result<Dec, XprecError> {
    let BigLog::Positive { log10_mag } = value else {
        return Ok(Dec::ZERO.with_precision(WORKING_DIGITS).value());
    };
    let int_part = log10_mag.trunc();
    let mut exponent = dec_to_ibig(&int_part);
    if log10_mag < &int_part {
        exponent -= IBig::ONE;
    }
    let frac = (log10_mag - Dec::from(exponent.clone()))
        .with_precision(WORKING_DIGITS)
        .value();
    let mantissa = (frac * ln10()).exp();
    let power = Dec::from_str(&format!("1e{exponent}"))
        .expect("power-of-ten literal is parseable")
        .with_precision(WORKING_DIGITS)
        .value();
    Ok(mantissa * power)
}

/// Weighted sum `sum_i w_i * v_i` of non-negative magnitudes, computed in log
/// space: the largest term is factored out so the sum never over- or
/// underflows, and terms more than [`LOG_SUM_ORDER_CUTOFF`] orders of
/// magnitude below the largest are skipped.
///
/// Weights must be non-negative; zero-weight and zero-valued terms drop out.
/// An empty `values` slice is an error; if no term survives, the sum is zero.
pub fn log_sum(values: &[BigLog], weights: &[Dec]) -> Result<BigLog, XprecError> {
    if values.is_empty() {
        return Err(XprecError::EmptySum);
    }
    if values.len() != weights.len() {
        return Err(XprecError::WeightCount {
            values: values.len(),
            weights: weights.len(),
        });
    }
    let mut term_logs: Vec<Dec> = Vec::with_capacity(values.len());
    for (i, (value, weight)) in values.iter().zip(weights).enumerate() {
        if *weight < Dec::ZERO {
            return Err(XprecError::NegativeWeight(i));
        }
        let Some(log10_mag) = value.log10_magnitude() else {
            continue;
        };
        if *weight == Dec::ZERO {
            continue;
        }
        let weight = weight.clone().with_precision(WORKING_DIGITS).value();
        term_logs.push(log10_mag + weight.ln() / ln10());
    }
    let Some(t_max) = term_logs.iter().max_by(|a, b| {
        a.partial_cmp(b).expect("decimal comparison is total")
    }) else {
        return Ok(BigLog::Zero);
    };
    let t_max = t_max.clone();
    let cutoff = Dec::from(LOG_SUM_ORDER_CUTOFF);
    let mut sum = Dec::ZERO;
    for t in &term_logs {
        if &t_max - t > cutoff {
            continue;
        }
        sum += ((t - &t_max) * ln10()).exp();
    }
    let sum = sum.with_precision(WORKING_DIGITS).value();
    Ok(BigLog::Positive {
        log10_mag: t_max + sum.ln() / ln10(),
    })
}

/// Render a magnitude to `digits` significant digits in canonical scientific
/// notation: one leading digit, a fractional part, and a signed unpadded
/// exponent (`2.50e-1`).  Zero renders as `"0"`.  Rounding is half away from
/// zero at the last kept digit.
pub fn render_decimal(value: &BigLog, digits: usize) -> Result<String, XprecError> {
    if digits == 0 {
        return Err(XprecError::ZeroDigits);
    }
    if digits > MAX_RENDER_DIGITS {
        return Err(XprecError::TooManyDigits(digits));
    }
    let BigLog::Positive { log10_mag } = value else {
        return Ok("0".to_string());
    };
    // Split log10 into integer exponent and fraction in [0, 1).
    let int_part = log10_mag.trunc();
    let mut exponent = dec_to_ibig(&int_part);
    if log10_mag < &int_part {
        exponent -= IBig::ONE;
    }
    let frac = (log10_mag - Dec::from(exponent.clone()))
        .with_precision(WORKING_DIGITS)
        .value();
    // Leading mantissa in [1, 10), scaled so the kept digits sit left of the
    // decimal point, then rounded half away from zero.
    let mantissa = (frac * ln10()).exp();
    let scale = Dec::from_str(&format!("1e{}", digits - 1))
        .expect("power-of-ten literal is parseable")
        .with_precision(WORKING_DIGITS)
        .value();
    let rounded = (mantissa * scale + round_half()).trunc();
    let mut digit_str = ibig_digits(&dec_to_ibig(&rounded));
    if digit_str.len() > digits {
        // Rounding carried 9.99... up to 10.0...: keep the leading digits and
        // bump the exponent.
        digit_str.truncate(digits);
        exponent += IBig::ONE;
    }
    debug_assert_eq!(digit_str.len(), digits);
    let (sign, magnitude) = if exponent < IBig::ZERO {
        ('-', -exponent)
    } else {
        ('+', exponent)
    };
    let mantissa_str = if digits == 1 {
        digit_str
    } else {
        format!("{}.{}", &digit_str[..1], &digit_str[1..])
    };
    Ok(format!("{mantissa_str}e{sign}{magnitude}"))
}

/// Exact conversion of an integer-valued [`Dec`] to an [`IBig`].
fn dec_to_ibig(value: &Dec) -> IBig {
    let repr = value.repr();
    let significand = repr.significand().clone();
    let exponent = repr.exponent();
    if exponent >= 0 {
        significand * IBig::from(10).pow(exponent as usize)
    } else {
        // Only reachable if the representation carries trailing fractional
        // zeros; the value is still integral, so the division is exact.
        significand / IBig::from(10).pow((-exponent) as usize)
    }
}

/// Decimal digit string of a non-negative integer.
fn ibig_digits(value: &IBig) -> String {
    value.to_string()
}
