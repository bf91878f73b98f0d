//! Exact rational scalars and the q-context.
//!
//! Every exponent that shows up in the q-calculus handled by this crate is an
//! integer multiple of 1/4, so the whole field is generated by a single
//! rational `t = q^{1/4}`. A [`QContext`] carries `t` together with the
//! derived constants `q`, `q^{1/2}`, `alpha` and `u` that the operators and
//! recurrences are written in.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("invalid rational literal `{0}`")]
    Parse(String),
    #[error("q^(1/4) must lie strictly between 0 and 1, got {0}")]
    OutOfRange(String),
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"` (surrounding whitespace allowed).
pub fn parse_rational(s: &str) -> Result<Rational, ScalarError> {
    let trimmed = s.trim();
    let err = || ScalarError::Parse(s.to_string());
    match trimmed.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            Ok(Rational::new(n, d))
        }
        None => BigInt::from_str(trimmed)
            .map(Rational::from_integer)
            .map_err(|_| err()),
    }
}

/// Canonical text form: `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact square root, if `r` is the square of a rational. Returns the
/// non-negative root.
pub fn rational_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// Integer power with negative exponents allowed. `base` must be nonzero when
/// `k < 0`.
pub fn powi(base: &Rational, k: i64) -> Rational {
    let mut acc = Rational::one();
    let mut b = if k < 0 { base.recip() } else { base.clone() };
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        e >>= 1;
        if e > 0 {
            b = &b * &b;
        }
    }
    acc
}

/// Serde adapter: a single rational as a `"p/q"` string.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter: a list of rationals as a list of strings.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(format_rational).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// The base field data generated by `t = q^{1/4}`.
///
/// A context built with [`QContext::new`] satisfies `0 < t < 1`. The
/// [`QContext::inverted`] context replaces `q` by `1/q`; it is the same field
/// and is only used to evaluate family formulas in the inverse base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QContext {
    t: Rational,
    q: Rational,
    sqrt_q: Rational,
    alpha: Rational,
    u: Rational,
    inverted: bool,
}

impl QContext {
    pub fn new(t: Rational) -> Result<Self, ScalarError> {
        if !t.is_positive() || t >= Rational::one() {
            return Err(ScalarError::OutOfRange(format_rational(&t)));
        }
        Ok(Self::build(t, false))
    }

    fn build(t: Rational, inverted: bool) -> Self {
        let sqrt_q = &t * &t;
        let q = &sqrt_q * &sqrt_q;
        let inv_sqrt_q = sqrt_q.recip();
        let alpha = (&sqrt_q + &inv_sqrt_q) / int(2);
        let u = (&sqrt_q - &inv_sqrt_q).recip();
        QContext {
            t,
            q,
            sqrt_q,
            alpha,
            u,
            inverted,
        }
    }

    /// The same field with `q` replaced by `1/q`. `alpha` and every `gamma_n`
    /// are unchanged; `u` flips sign.
    pub fn inverted(&self) -> Self {
        Self::build(self.t.recip(), !self.inverted)
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// `q^{1/4}`
    pub fn t(&self) -> &Rational {
        &self.t
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn sqrt_q(&self) -> &Rational {
        &self.sqrt_q
    }

    /// `(q^{1/2} + q^{-1/2}) / 2`
    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    /// `1 / (q^{1/2} - q^{-1/2})`
    pub fn u(&self) -> &Rational {
        &self.u
    }

    /// `q^{k/4} = t^k`.
    pub fn qpow(&self, k: i64) -> Rational {
        powi(&self.t, k)
    }

    /// `gamma_n = (q^{n/2} - q^{-n/2}) / (q^{1/2} - q^{-1/2})`.
    pub fn gamma(&self, n: usize) -> Rational {
        let k = 2 * n as i64;
        (self.qpow(k) - self.qpow(-k)) * &self.u
    }

    /// `alpha_n = (q^{n/2} + q^{-n/2}) / 2`, the eigenvalue of the averaging
    /// operator on `T_n`.
    pub fn alpha_n(&self, n: usize) -> Rational {
        let k = 2 * n as i64;
        (self.qpow(k) + self.qpow(-k)) / int(2)
    }
}

impl fmt::Display for QContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q^(1/4) = {}", format_rational(&self.t))
    }
}
