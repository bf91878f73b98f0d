//! Three-term recurrences for the q-families, monic OPS tables, and moments
//! of the associated linear functional.
//!
//! A monic OPS satisfies `x P_n = P_{n+1} + B_n P_n + C_n P_{n-1}` with
//! `P_{-1} = 0` and `C_n != 0` for `n >= 1`. By convention `C_0 = 0`.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly;
use crate::scalar::{format_rational, int, rat, serde_rational, serde_rational_vec, QContext, Rational};

pub const DEFAULT_N_MAX: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("irregular parameters for {family}: {factor} vanishes at n = {n}")]
    IrregularParameters {
        family: String,
        factor: String,
        n: usize,
    },
    #[error("recurrence is not regular: C_{0} = 0")]
    ZeroC(usize),
    #[error("malformed recurrence: {0}")]
    Malformed(String),
    #[error("requested horizon {requested} exceeds the materialized horizon {available}")]
    HorizonExceeded { requested: usize, available: usize },
    #[error("missing parameter `{1}` for family {0}")]
    MissingParameter(String, &'static str),
}

/// Recurrence coefficients `B_0..=B_N` and `C_0..=C_N` (with `C_0 = 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TtrrSpec {
    b: Vec<Rational>,
    c: Vec<Rational>,
}

impl TtrrSpec {
    /// Builds a regular recurrence from `B_0..=B_N` and `C_1..=C_N`.
    pub fn new(b: Vec<Rational>, c_from_one: Vec<Rational>) -> Result<Self, FamilyError> {
        let spec = Self::unchecked(b, c_from_one)?;
        if let Some(n) = (1..spec.c.len()).find(|&n| spec.c[n].is_zero()) {
            return Err(FamilyError::ZeroC(n));
        }
        Ok(spec)
    }

    /// Like [`TtrrSpec::new`] but accepts vanishing `C_n`. Such a recurrence
    /// defines monic polynomials that are not an OPS; it is useful for
    /// probing the structure-relation fitter on formal inputs.
    pub fn unchecked(b: Vec<Rational>, c_from_one: Vec<Rational>) -> Result<Self, FamilyError> {
        if b.is_empty() || b.len() != c_from_one.len() + 1 {
            return Err(FamilyError::Malformed(format!(
                "expected |B| = |C| + 1, got |B| = {} and |C| = {}",
                b.len(),
                c_from_one.len()
            )));
        }
        let mut c = Vec::with_capacity(b.len());
        c.push(Rational::zero());
        c.extend(c_from_one);
        Ok(TtrrSpec { b, c })
    }

    /// Materialized horizon `N`: `B_0..=B_N` and `C_1..=C_N` are available.
    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    pub fn b(&self, n: usize) -> &Rational {
        &self.b[n]
    }

    /// `C_n`, with `C_0 = 0`.
    pub fn c(&self, n: usize) -> &Rational {
        &self.c[n]
    }

    pub fn bs(&self) -> &[Rational] {
        &self.b
    }

    /// `C_0..=C_N`, with the conventional `C_0 = 0` first.
    pub fn cs(&self) -> &[Rational] {
        &self.c
    }

    pub fn truncated(&self, n: usize) -> Result<TtrrSpec, FamilyError> {
        self.check_horizon(n)?;
        Ok(TtrrSpec {
            b: self.b[..=n].to_vec(),
            c: self.c[..=n].to_vec(),
        })
    }

    /// Coefficientwise equality of `B_0..=B_n` and `C_1..=C_n`.
    pub fn agrees_with(&self, other: &TtrrSpec, n: usize) -> bool {
        n <= self.n_max()
            && n <= other.n_max()
            && self.b[..=n] == other.b[..=n]
            && self.c[..=n] == other.c[..=n]
    }

    pub fn with_b_shifted(&self, n: usize, delta: &Rational) -> TtrrSpec {
        let mut out = self.clone();
        out.b[n] += delta;
        out
    }

    pub fn with_c_shifted(&self, n: usize, delta: &Rational) -> TtrrSpec {
        assert!(n >= 1, "C_0 is fixed at zero");
        let mut out = self.clone();
        out.c[n] += delta;
        out
    }

    pub(crate) fn check_horizon(&self, n: usize) -> Result<(), FamilyError> {
        if n > self.n_max() {
            return Err(FamilyError::HorizonExceeded {
                requested: n,
                available: self.n_max(),
            });
        }
        Ok(())
    }

    pub fn to_document(&self, q_quarter: &Rational) -> TtrrDocument {
        TtrrDocument {
            q_quarter: q_quarter.clone(),
            b: self.b.clone(),
            c: self.c[1..].to_vec(),
        }
    }
}

/// On-disk recurrence: `{ "q_quarter": "1/2", "B": [...], "C": [...] }`
/// where `B` lists `B_0..=B_N` and `C` lists `C_1..=C_N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtrrDocument {
    #[serde(with = "serde_rational")]
    pub q_quarter: Rational,
    #[serde(rename = "B", with = "serde_rational_vec")]
    pub b: Vec<Rational>,
    #[serde(rename = "C", with = "serde_rational_vec")]
    pub c: Vec<Rational>,
}

impl TtrrDocument {
    pub fn context(&self) -> Result<QContext, crate::scalar::ScalarError> {
        QContext::new(self.q_quarter.clone())
    }

    pub fn ttrr(&self) -> Result<TtrrSpec, FamilyError> {
        TtrrSpec::new(self.b.clone(), self.c.clone())
    }
}

/// Which value of the base the family formulas are evaluated in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Base {
    #[default]
    Q,
    QInverse,
}

impl Base {
    pub fn context(self, ctx: &QContext) -> QContext {
        match (self, ctx.is_inverted()) {
            (Base::Q, false) | (Base::QInverse, true) => ctx.clone(),
            _ => ctx.inverted(),
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::Q => "q",
            Base::QInverse => "q-inverse",
        })
    }
}

/// The four families, with rational parameters. Continuous q-Jacobi takes
/// `p_a = q^{a/2}` and `p_b = q^{b/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    QHermite,
    AlSalamChihara { c: Rational, d: Rational },
    ChebyshevT,
    ContinuousQJacobi { p_a: Rational, p_b: Rational },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::QHermite => "q-hermite",
            Family::AlSalamChihara { .. } => "alsalam-chihara",
            Family::ChebyshevT => "chebyshev-t",
            Family::ContinuousQJacobi { .. } => "continuous-q-jacobi",
        }
    }

    /// Recurrence of the family with `q` taken from `ctx` as is.
    pub fn ttrr(&self, ctx: &QContext, n_max: usize) -> Result<TtrrSpec, FamilyError> {
        match self {
            Family::QHermite => Ok(ttrr_qhermite(ctx, n_max)),
            Family::AlSalamChihara { c, d } => ttrr_alsalam_chihara(ctx, c, d, n_max),
            Family::ChebyshevT => Ok(ttrr_chebyshev_t(n_max)),
            Family::ContinuousQJacobi { p_a, p_b } => ttrr_cq_jacobi(ctx, p_a, p_b, n_max),
        }
    }
}

/// A family together with the base it is evaluated in. Serializes as
/// `{ "family": "alsalam-chihara", "c": "1/4", "d": "1", "base": "q" }`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub family: Family,
    pub base: Base,
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        FamilySpec {
            family,
            base: Base::Q,
        }
    }

    pub fn inverse(family: Family) -> Self {
        FamilySpec {
            family,
            base: Base::QInverse,
        }
    }

    pub fn ttrr(&self, ctx: &QContext, n_max: usize) -> Result<TtrrSpec, FamilyError> {
        self.family.ttrr(&self.base.context(ctx), n_max)
    }

    pub fn from_parts(
        name: &str,
        c: Option<Rational>,
        d: Option<Rational>,
        p_a: Option<Rational>,
        p_b: Option<Rational>,
        base: Base,
    ) -> Result<Self, FamilyError> {
        let need = |v: Option<Rational>, what: &'static str| {
            v.ok_or_else(|| FamilyError::MissingParameter(name.to_string(), what))
        };
        let family = match name {
            "q-hermite" => Family::QHermite,
            "alsalam-chihara" => Family::AlSalamChihara {
                c: need(c, "c")?,
                d: need(d, "d")?,
            },
            "chebyshev-t" => Family::ChebyshevT,
            "continuous-q-jacobi" => Family::ContinuousQJacobi {
                p_a: need(p_a, "p_a")?,
                p_b: need(p_b, "p_b")?,
            },
            other => return Err(FamilyError::Malformed(format!("unknown family `{other}`"))),
        };
        Ok(FamilySpec { family, base })
    }
}

#[derive(Serialize, Deserialize)]
struct FamilySpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    c: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    d: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    p_a: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    p_b: Option<Rational>,
    #[serde(default)]
    base: Base,
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| crate::scalar::parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl Serialize for FamilySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (c, d, p_a, p_b) = match &self.family {
            Family::AlSalamChihara { c, d } => (Some(c.clone()), Some(d.clone()), None, None),
            Family::ContinuousQJacobi { p_a, p_b } => {
                (None, None, Some(p_a.clone()), Some(p_b.clone()))
            }
            _ => (None, None, None, None),
        };
        FamilySpecRepr {
            family: self.family.name().to_string(),
            c,
            d,
            p_a,
            p_b,
            base: self.base,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FamilySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FamilySpecRepr::deserialize(d)?;
        FamilySpec::from_parts(&r.family, r.c, r.d, r.p_a, r.p_b, r.base)
            .map_err(serde::de::Error::custom)
    }
}

fn irregular(family: &str, factor: &str, n: usize) -> FamilyError {
    FamilyError::IrregularParameters {
        family: family.to_string(),
        factor: factor.to_string(),
        n,
    }
}

/// Rogers q-Hermite: `B_n = 0`, `C_n = (1 - q^n)/4`.
pub fn ttrr_qhermite(ctx: &QContext, n_max: usize) -> TtrrSpec {
    let b = vec![Rational::zero(); n_max + 1];
    let c = (1..=n_max)
        .map(|n| (int(1) - ctx.qpow(4 * n as i64)) / int(4))
        .collect();
    TtrrSpec::new(b, c).expect("q-Hermite recurrence is regular for q != 1")
}

/// Al-Salam-Chihara: `B_n = (c + d) q^n / 2`,
/// `C_n = (1 - c d q^{n-1})(1 - q^n) / 4`.
pub fn ttrr_alsalam_chihara(
    ctx: &QContext,
    c: &Rational,
    d: &Rational,
    n_max: usize,
) -> Result<TtrrSpec, FamilyError> {
    ttrr_alsalam_chihara_symmetric(ctx, &(c + d), &(c * d), n_max)
}

/// Al-Salam-Chihara coefficients from the symmetric functions `c + d` and
/// `c d`, which is all the recurrence depends on. Lets a pair with
/// irrational members but rational sum and product be represented.
pub fn ttrr_alsalam_chihara_symmetric(
    ctx: &QContext,
    sum: &Rational,
    product: &Rational,
    n_max: usize,
) -> Result<TtrrSpec, FamilyError> {
    let (b, cc) = alsalam_chihara_symmetric_sequences(ctx, sum, product, n_max);
    if let Some(n) = (1..=n_max).find(|&n| cc[n - 1].is_zero()) {
        return Err(irregular("alsalam-chihara", "1 - c*d*q^(n-1)", n));
    }
    TtrrSpec::new(b, cc)
}

/// The raw Al-Salam-Chihara coefficients without the regularity check:
/// `(B_0..=B_N, C_1..=C_N)`.
pub fn alsalam_chihara_sequences(
    ctx: &QContext,
    c: &Rational,
    d: &Rational,
    n_max: usize,
) -> (Vec<Rational>, Vec<Rational>) {
    alsalam_chihara_symmetric_sequences(ctx, &(c + d), &(c * d), n_max)
}

fn alsalam_chihara_symmetric_sequences(
    ctx: &QContext,
    sum: &Rational,
    prod: &Rational,
    n_max: usize,
) -> (Vec<Rational>, Vec<Rational>) {
    let b = (0..=n_max)
        .map(|n| sum * ctx.qpow(4 * n as i64) / int(2))
        .collect();
    let cc = (1..=n_max)
        .map(|n| {
            let qn = ctx.qpow(4 * n as i64);
            let qn1 = ctx.qpow(4 * (n as i64 - 1));
            (int(1) - prod * qn1) * (int(1) - qn) / int(4)
        })
        .collect();
    (b, cc)
}

/// Monic Chebyshev polynomials of the first kind: `B_n = 0`, `C_1 = 1/2`,
/// `C_{n+1} = 1/4`.
pub fn ttrr_chebyshev_t(n_max: usize) -> TtrrSpec {
    let b = vec![Rational::zero(); n_max + 1];
    let c = (1..=n_max)
        .map(|n| if n == 1 { rat(1, 2) } else { rat(1, 4) })
        .collect();
    TtrrSpec::new(b, c).expect("Chebyshev recurrence is regular")
}

/// The auxiliary sequences `y_n`, `z_n` of continuous q-Jacobi, for
/// `n = 0..=N+1` (`C_{N}` needs `z_N`, and `y` is exposed one step further).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QJacobiSequences {
    pub y: Vec<Rational>,
    pub z: Vec<Rational>,
}

/// Powers of `q` in the q-Jacobi formulas, all expressed through
/// `t = q^{1/4}`, `p_a = q^{a/2}` and `p_b = q^{b/2}`.
struct JacobiPowers<'a> {
    ctx: &'a QContext,
    p_a: &'a Rational,
    /// q^a
    qa: Rational,
    /// q^b
    qb: Rational,
    /// q^{(a+b)/2}
    pab: Rational,
}

impl<'a> JacobiPowers<'a> {
    fn new(ctx: &'a QContext, p_a: &'a Rational, p_b: &'a Rational) -> Self {
        JacobiPowers {
            ctx,
            p_a,
            qa: p_a * p_a,
            qb: p_b * p_b,
            pab: p_a * p_b,
        }
    }

    fn qn(&self, n: usize) -> Rational {
        self.ctx.qpow(4 * n as i64)
    }

    /// q^{(2a+1)/4}
    fn shift(&self) -> Rational {
        self.p_a * self.ctx.t()
    }
}

pub fn cq_jacobi_sequences(
    ctx: &QContext,
    p_a: &Rational,
    p_b: &Rational,
    n_max: usize,
) -> Result<QJacobiSequences, FamilyError> {
    const FAMILY: &str = "continuous-q-jacobi";
    if p_a.is_zero() || p_b.is_zero() {
        return Err(irregular(FAMILY, "q^(a/2) * q^(b/2)", 0));
    }
    let jp = JacobiPowers::new(ctx, p_a, p_b);
    let one = Rational::one();
    let q = ctx.q();
    let sqrt_q = ctx.sqrt_q();
    let shift = jp.shift();
    let mut y = Vec::with_capacity(n_max + 2);
    let mut z = Vec::with_capacity(n_max + 2);
    for n in 0..=n_max + 1 {
        let qn = jp.qn(n);
        let q2n = &qn * &qn;
        let pab2 = &jp.pab * &jp.pab;
        let den_y1 = &one - &q2n * &pab2 * q;
        let den_y2 = &one - &q2n * &pab2 * q * q;
        if den_y1.is_zero() {
            return Err(irregular(FAMILY, "1 - q^(2n+a+b+1)", n));
        }
        if den_y2.is_zero() {
            return Err(irregular(FAMILY, "1 - q^(2n+a+b+2)", n));
        }
        let num_y = (&one - &qn * &jp.qa * q)
            * (&one - &qn * &pab2 * q)
            * (&one + &qn * &jp.pab * sqrt_q)
            * (&one + &qn * &jp.pab * q);
        y.push(num_y / (&shift * &den_y1 * &den_y2));
        if n == 0 {
            // the factor 1 - q^n kills z_0
            z.push(Rational::zero());
            continue;
        }
        let den_z1 = &one - &q2n * &pab2;
        if den_z1.is_zero() {
            return Err(irregular(FAMILY, "1 - q^(2n+a+b)", n));
        }
        let num_z = &shift
            * (&one - &qn)
            * (&one - &qn * &jp.qb)
            * (&one + &qn * &jp.pab)
            * (&one + &qn * &jp.pab * sqrt_q);
        z.push(num_z / (den_z1 * den_y1));
    }
    Ok(QJacobiSequences { y, z })
}

/// Continuous q-Jacobi with `B_n = (q^{(2a+1)/4} + q^{-(2a+1)/4} - y_n - z_n)/2`
/// and `C_{n+1} = y_n z_{n+1} / 4`.
pub fn ttrr_cq_jacobi(
    ctx: &QContext,
    p_a: &Rational,
    p_b: &Rational,
    n_max: usize,
) -> Result<TtrrSpec, FamilyError> {
    const FAMILY: &str = "continuous-q-jacobi";
    let seq = cq_jacobi_sequences(ctx, p_a, p_b, n_max)?;
    let jp = JacobiPowers::new(ctx, p_a, p_b);
    let one = Rational::one();
    let q = ctx.q();
    for n in 0..=n_max {
        let qn = jp.qn(n);
        if (&one - &qn * &jp.qa * q).is_zero() {
            return Err(irregular(FAMILY, "1 - q^(n+a+1)", n));
        }
        if (&one - &qn * &jp.qb * q).is_zero() {
            return Err(irregular(FAMILY, "1 - q^(n+b+1)", n));
        }
        if (&one - &qn * &jp.pab * &jp.pab * q).is_zero() {
            return Err(irregular(FAMILY, "1 - q^(n+a+b+1)", n));
        }
    }
    let shift = jp.shift();
    let outer = &shift + shift.recip();
    let b = (0..=n_max)
        .map(|n| (&outer - &seq.y[n] - &seq.z[n]) / int(2))
        .collect();
    let c: Vec<Rational> = (1..=n_max)
        .map(|n| &seq.y[n - 1] * &seq.z[n] / int(4))
        .collect();
    if let Some(n) = c.iter().position(Zero::is_zero) {
        return Err(irregular(FAMILY, "C_n", n + 1));
    }
    TtrrSpec::new(b, c)
}

/// The family formulas with every `q` replaced by `1/q`.
pub fn inverse_q_variant(
    ctx: &QContext,
    family: &Family,
    n_max: usize,
) -> Result<TtrrSpec, FamilyError> {
    FamilySpec::inverse(family.clone()).ttrr(ctx, n_max)
}

/// Monic polynomials `P_0..=P_N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct OpsTable {
    pub polys: Vec<Poly>,
}

impl OpsTable {
    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Highest available degree.
    pub fn horizon(&self) -> usize {
        self.polys.len().saturating_sub(1)
    }

    pub fn get(&self, n: usize) -> &Poly {
        &self.polys[n]
    }

    /// `P_{n-1}`, with `P_{-1} = 0`.
    pub fn prev(&self, n: usize) -> Poly {
        if n == 0 {
            Poly::zero()
        } else {
            self.polys[n - 1].clone()
        }
    }

    /// Coordinates of `p` in the basis `P_0, P_1, ...`. `None` when
    /// `deg p` exceeds the table.
    pub fn expand(&self, p: &Poly) -> Option<Vec<Rational>> {
        let deg = match p.degree().finite() {
            None => return Some(Vec::new()),
            Some(d) => d,
        };
        if deg >= self.polys.len() {
            return None;
        }
        let mut rem = p.clone();
        let mut out = vec![Rational::zero(); deg + 1];
        for k in (0..=deg).rev() {
            let lc = rem.coeff(k);
            if !lc.is_zero() {
                rem.add_scaled(&self.polys[k], &-&lc);
                out[k] = lc;
            }
        }
        debug_assert!(rem.is_zero());
        Some(out)
    }
}

/// `P_0 = 1`, `P_1 = x - B_0`, `P_{n+1} = (x - B_n) P_n - C_n P_{n-1}`.
pub fn generate_ops(ttrr: &TtrrSpec, n: usize) -> Result<OpsTable, FamilyError> {
    ttrr.check_horizon(n)?;
    let mut polys = Vec::with_capacity(n + 1);
    polys.push(Poly::one());
    for k in 0..n {
        let mut next = &Poly::x() * &polys[k];
        next.add_scaled(&polys[k], &-ttrr.b(k));
        if k >= 1 {
            next.add_scaled(&polys[k - 1], &-ttrr.c(k));
        }
        polys.push(next);
    }
    Ok(OpsTable { polys })
}

/// Moments `mu_n = <u, x^n>` of the functional making the recurrence
/// orthogonal, normalized by `mu_0 = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentVector {
    pub mu: Vec<Rational>,
}

impl MomentVector {
    pub fn order(&self) -> usize {
        self.mu.len() - 1
    }

    /// `<u, p>`.
    pub fn apply(&self, p: &Poly) -> Result<Rational, FamilyError> {
        if let Some(d) = p.degree().finite() {
            if d > self.order() {
                return Err(FamilyError::HorizonExceeded {
                    requested: d,
                    available: self.order(),
                });
            }
        }
        Ok(p
            .coeffs()
            .iter()
            .zip(&self.mu)
            .fold(Rational::zero(), |acc, (c, m)| acc + c * m))
    }

    /// `<u, p q>`.
    pub fn bilinear(&self, p: &Poly, q: &Poly) -> Result<Rational, FamilyError> {
        self.apply(&(p * q))
    }
}

/// Moments up to order `n` (`n <= N + 1`), read off as the `P_0`
/// coordinate of `x^n` expanded through the recurrence.
pub fn moments(ttrr: &TtrrSpec, n: usize) -> Result<MomentVector, FamilyError> {
    if n > ttrr.n_max() + 1 {
        return Err(FamilyError::HorizonExceeded {
            requested: n,
            available: ttrr.n_max() + 1,
        });
    }
    let mut coords = vec![Rational::one()];
    let mut mu = vec![Rational::one()];
    for _ in 1..=n {
        let mut next = vec![Rational::zero(); coords.len() + 1];
        for (k, ck) in coords.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            next[k + 1] += ck;
            next[k] += ck * ttrr.b(k);
            if k >= 1 {
                next[k - 1] += ck * ttrr.c(k);
            }
        }
        mu.push(next[0].clone());
        coords = next;
    }
    Ok(MomentVector { mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> QContext {
        QContext::new(rat(1, 2)).unwrap()
    }

    #[test]
    fn qhermite_examples() {
        let t = ttrr_qhermite(&ctx(), 8);
        assert_eq!(t.b(5), &int(0));
        assert_eq!(t.c(1), &rat(15, 64));
        assert_eq!(t.c(2), &rat(255, 1024));
        assert_eq!(t.c(0), &int(0));
    }

    #[test]
    fn alsalam_chihara_examples() {
        let c = ctx();
        let t = ttrr_alsalam_chihara(&c, &rat(1, 4), &int(1), 8).unwrap();
        assert_eq!(t.b(0), &rat(5, 8));
        assert_eq!(t.c(1), &rat(45, 256));
        let zero = ttrr_alsalam_chihara(&c, &int(0), &int(0), 12).unwrap();
        assert_eq!(zero, ttrr_qhermite(&c, 12));
    }

    #[test]
    fn alsalam_chihara_irregular() {
        let err = ttrr_alsalam_chihara(&ctx(), &int(1), &int(1), 8).unwrap_err();
        assert!(matches!(err, FamilyError::IrregularParameters { n: 1, .. }), "{err}");
        // c d q^{n-1} = 1 at n = 3 when c d = q^{-2}
        let err = ttrr_alsalam_chihara(&ctx(), &int(16), &int(16), 8).unwrap_err();
        assert!(matches!(err, FamilyError::IrregularParameters { n: 3, .. }), "{err}");
    }

    #[test]
    fn chebyshev_examples() {
        let t = ttrr_chebyshev_t(8);
        assert_eq!(t.b(3), &int(0));
        assert_eq!(t.c(1), &rat(1, 2));
        assert_eq!(t.c(7), &rat(1, 4));
    }

    #[test]
    fn cq_jacobi_symmetric_has_zero_b() {
        let c = ctx();
        for p in [rat(1, 4), rat(1, 3), rat(3, 2)] {
            let t = ttrr_cq_jacobi(&c, &p, &p, 10).unwrap();
            assert!(t.bs().iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn cq_jacobi_c1_closed_form() {
        // a = b = 1 at q = 1/16:
        // (1-q)(1-q^2)^2(1+q^{3/2}) / (4(1-q^{5/2})(1-q^2)^2) = 325/1364
        let t = ttrr_cq_jacobi(&ctx(), &rat(1, 4), &rat(1, 4), 4).unwrap();
        assert_eq!(t.c(1), &rat(325, 1364));
        let t = ttrr_cq_jacobi(&ctx(), &rat(1, 4), &rat(1, 16), 4).unwrap();
        assert_eq!(t.b(0), &rat(20, 341));
        assert_eq!(t.c(1), &rat(109225, 465124));
    }

    #[test]
    fn cq_jacobi_intro_and_closed_form_indices_agree() {
        // C at index n is y_{n-1} z_n / 4 in both displays
        let c = ctx();
        let (pa, pb) = (rat(1, 4), rat(1, 16));
        let seq = cq_jacobi_sequences(&c, &pa, &pb, 10).unwrap();
        let t = ttrr_cq_jacobi(&c, &pa, &pb, 10).unwrap();
        for n in 1..=10 {
            assert_eq!(t.c(n), &(&seq.y[n - 1] * &seq.z[n] / int(4)));
        }
    }

    #[test]
    fn cq_jacobi_b_uses_symmetric_exponent_pair() {
        // The alternative pair q^{(2a+1)/4} + q^{-(2a-1)/4} disagrees with the
        // closed form t(1+q^{1/2})(1-P)(p_a-p_b) q^n / (2(1-q^n P)(1-q^{n+1} P)),
        // P = p_a p_b, while the symmetric pair reproduces it.
        let c = ctx();
        let (pa, pb) = (rat(1, 4), rat(1, 16));
        let seq = cq_jacobi_sequences(&c, &pa, &pb, 6).unwrap();
        let t = ttrr_cq_jacobi(&c, &pa, &pb, 6).unwrap();
        let pab = &pa * &pb;
        let tq = c.t();
        for n in 0..=6usize {
            let qn = c.qpow(4 * n as i64);
            let closed = tq * (int(1) + c.sqrt_q()) * (int(1) - &pab) * (&pa - &pb) * &qn
                / (int(2) * (int(1) - &qn * &pab) * (int(1) - &qn * &pab * c.q()));
            assert_eq!(t.b(n), &closed, "n = {n}");
            // q^{-(2a-1)/4} = q^{1/4} / p_a
            let alt = (&pa * tq + tq / &pa - &seq.y[n] - &seq.z[n]) / int(2);
            assert_ne!(alt, closed, "n = {n}");
        }
    }

    #[test]
    fn cq_jacobi_irregular() {
        let c = ctx();
        // q^{a+1} = 1 when p_a^2 q = 1, i.e. p_a = 4
        let err = ttrr_cq_jacobi(&c, &int(4), &rat(1, 3), 6).unwrap_err();
        assert!(matches!(err, FamilyError::IrregularParameters { .. }), "{err}");
        assert!(ttrr_cq_jacobi(&c, &int(0), &rat(1, 3), 6).is_err());
        // Chebyshev-T sits at a = b = -1/2, where the recurrence degenerates
        let err = ttrr_cq_jacobi(&c, &int(2), &int(2), 6).unwrap_err();
        assert!(matches!(err, FamilyError::IrregularParameters { n: 0, .. }), "{err}");
    }

    #[test]
    fn inverse_variants() {
        let c = ctx();
        let h = inverse_q_variant(&c, &Family::QHermite, 6).unwrap();
        assert_eq!(h.c(1), &rat(-15, 4));
        for n in 1..=6 {
            let expected = (int(1) - powi_q_inv(&c, n)) / int(4);
            assert_eq!(h.c(n), &expected);
            assert!(h.c(n) < &int(0));
        }
        let asc = inverse_q_variant(
            &c,
            &Family::AlSalamChihara {
                c: int(0),
                d: int(0),
            },
            6,
        )
        .unwrap();
        assert!(asc.bs().iter().all(Zero::is_zero));
        assert_eq!(asc, h);
    }

    fn powi_q_inv(c: &QContext, n: usize) -> Rational {
        c.qpow(-4 * n as i64)
    }

    #[test]
    fn cq_jacobi_inverse_base_matches_reciprocal_parameters() {
        let c = QContext::new(rat(1, 3)).unwrap();
        let (pa, pb) = (rat(1, 2), rat(1, 3));
        let inv = inverse_q_variant(
            &c,
            &Family::ContinuousQJacobi {
                p_a: pa.clone(),
                p_b: pb.clone(),
            },
            10,
        )
        .unwrap();
        let direct = ttrr_cq_jacobi(&c, &pa.recip(), &pb.recip(), 10).unwrap();
        assert_eq!(inv, direct);
        // (p_a, p_b) and (-p_b, -p_a) give the same recurrence
        let swapped = ttrr_cq_jacobi(&c, &-&pb, &-&pa, 10).unwrap();
        assert_eq!(ttrr_cq_jacobi(&c, &pa, &pb, 10).unwrap(), swapped);
    }

    #[test]
    fn generate_ops_examples() {
        let t = ttrr_alsalam_chihara(&ctx(), &rat(1, 4), &int(1), 6).unwrap();
        let ops = generate_ops(&t, 5).unwrap();
        assert_eq!(ops.get(0), &Poly::one());
        assert_eq!(ops.get(1), &Poly::linear_root(t.b(0)));
        let p2 = &(&Poly::linear_root(t.b(1)) * &Poly::linear_root(t.b(0)))
            - &Poly::constant(t.c(1).clone());
        assert_eq!(ops.get(2), &p2);
        assert!(generate_ops(&t, 7).is_err());
    }

    fn all_families(n: usize) -> Vec<TtrrSpec> {
        let c = ctx();
        vec![
            ttrr_qhermite(&c, n),
            ttrr_alsalam_chihara(&c, &rat(1, 4), &int(1), n).unwrap(),
            ttrr_chebyshev_t(n),
            ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 4), n).unwrap(),
            ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 16), n).unwrap(),
            inverse_q_variant(&c, &Family::QHermite, n).unwrap(),
        ]
    }

    #[test]
    fn recurrence_residual_vanishes() {
        for t in all_families(14) {
            let ops = generate_ops(&t, 14).unwrap();
            for n in 1..14 {
                let mut r = ops.get(n + 1).clone();
                r.add_scaled(&(&Poly::x() * ops.get(n)), &int(-1));
                r.add_scaled(ops.get(n), t.b(n));
                r.add_scaled(ops.get(n - 1), t.c(n));
                assert!(r.is_zero());
                assert!(ops.get(n).is_monic());
            }
        }
    }

    #[test]
    fn moment_examples() {
        let t = ttrr_alsalam_chihara(&ctx(), &rat(1, 4), &int(1), 6).unwrap();
        let m = moments(&t, 4).unwrap();
        assert_eq!(m.mu[0], int(1));
        assert_eq!(m.mu[1], t.b(0).clone());
        assert_eq!(m.mu[2], t.b(0) * t.b(0) + t.c(1));
        assert!(moments(&t, 8).is_err());
    }

    #[test]
    fn orthogonality_via_moments() {
        for t in all_families(24) {
            let ops = generate_ops(&t, 12).unwrap();
            let mu = moments(&t, 24).unwrap();
            let mut norm = int(1);
            for m in 0..=12 {
                if m >= 1 {
                    norm *= t.c(m);
                }
                for n in 0..=12 {
                    let v = mu.bilinear(ops.get(m), ops.get(n)).unwrap();
                    if m == n {
                        assert_eq!(v, norm);
                    } else {
                        assert!(v.is_zero(), "<P_{m}, P_{n}> = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn expand_in_ops_basis() {
        let t = ttrr_chebyshev_t(6);
        let ops = generate_ops(&t, 6).unwrap();
        let x2 = Poly::monomial(int(1), 2);
        assert_eq!(ops.expand(&x2).unwrap(), vec![rat(1, 2), int(0), int(1)]);
        assert!(ops.expand(&Poly::monomial(int(1), 7)).is_none());
    }

    #[test]
    fn family_spec_json() {
        let spec = FamilySpec::new(Family::AlSalamChihara {
            c: rat(1, 4),
            d: int(1),
        });
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"family":"alsalam-chihara","c":"1/4","d":"1","base":"q"}"#);
        let back: FamilySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let err = serde_json::from_str::<FamilySpec>(r#"{"family":"continuous-q-jacobi"}"#);
        assert!(err.is_err());
    }

    #[test]
    fn ttrr_document_json() {
        let t = ttrr_chebyshev_t(3);
        let doc = t.to_document(&rat(1, 2));
        let s = serde_json::to_string(&doc).unwrap();
        assert_eq!(
            s,
            r#"{"q_quarter":"1/2","B":["0","0","0","0"],"C":["1/2","1/4","1/4"]}"#
        );
        let back: TtrrDocument = serde_json::from_str(&s).unwrap();
        assert_eq!(back.ttrr().unwrap(), t);
    }

    #[test]
    fn malformed_recurrences() {
        assert!(TtrrSpec::new(vec![int(0)], vec![int(1)]).is_err());
        assert!(matches!(
            TtrrSpec::new(vec![int(0), int(0)], vec![int(0)]),
            Err(FamilyError::ZeroC(1))
        ));
        assert!(TtrrSpec::unchecked(vec![int(0), int(0)], vec![int(0)]).is_ok());
    }
}
