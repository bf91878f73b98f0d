//! The Askey-Wilson divided-difference operator `D_q` and the averaging
//! operator `S_q` on polynomials.
//!
//! Under `x = (z + 1/z)/2` the Chebyshev polynomial `T_k` becomes
//! `(z^k + z^{-k})/2`, so both operators are cheap in that basis:
//!
//! * `D_q T_k = gamma_k U_{k-1}` where `U_{k-1}` is the Chebyshev polynomial
//!   of the second kind, `(z^k - z^{-k}) / (z - z^{-1})`;
//! * `S_q T_k = alpha_k T_k`.
//!
//! [`dq_oracle`] and [`sq_oracle`] evaluate the defining divided difference and
//! average literally at a sample point and serve as an independent check.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{from_cheb, to_cheb, ChebCoeffs, Poly};
use crate::scalar::{int, QContext, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AwError {
    #[error("sample point z = {0} makes the divided difference degenerate")]
    DegenerateSamplePoint(String),
}

/// The auxiliary lattice polynomials `U1 = (alpha^2 - 1) x` and
/// `U2 = (alpha^2 - 1)(x^2 - 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePolys {
    pub u1: Poly,
    pub u2: Poly,
}

pub fn lattice_polys(ctx: &QContext) -> LatticePolys {
    let k = ctx.alpha() * ctx.alpha() - int(1);
    LatticePolys {
        u1: Poly::monomial(k.clone(), 1),
        u2: Poly::from_ints(&[-1, 0, 1]).scale(&k),
    }
}

/// `D_q f`, exact. Lowers the degree by one and multiplies the leading
/// coefficient by `gamma_{deg f}`.
pub fn dq_apply(ctx: &QContext, f: &Poly) -> Poly {
    let c = to_cheb(f).c;
    if c.len() <= 1 {
        return Poly::zero();
    }
    // U_m = 2 (T_m + T_{m-2} + ...), with the T_0 term (m even) counted once.
    let mut out = vec![Rational::zero(); c.len() - 1];
    for (k, ck) in c.iter().enumerate().skip(1) {
        if ck.is_zero() {
            continue;
        }
        let w = ck * ctx.gamma(k);
        let twice = &w * int(2);
        for j in (0..k).rev().step_by(2) {
            if j == 0 {
                out[0] += &w;
            } else {
                out[j] += &twice;
            }
        }
    }
    from_cheb(&ChebCoeffs { c: out })
}

/// `S_q f`, exact. Preserves the degree and multiplies the leading
/// coefficient by `alpha_{deg f}`.
pub fn sq_apply(ctx: &QContext, f: &Poly) -> Poly {
    let mut c = to_cheb(f).c;
    for (k, ck) in c.iter_mut().enumerate() {
        if !ck.is_zero() && k > 0 {
            *ck *= ctx.alpha_n(k);
        }
    }
    from_cheb(&ChebCoeffs { c })
}

/// `(z + 1/z) / 2`
pub fn lattice_point(z: &Rational) -> Rational {
    (z + z.recip()) / int(2)
}

fn shifted_points(ctx: &QContext, z: &Rational) -> Result<(Rational, Rational), AwError> {
    if z.is_zero() {
        return Err(AwError::DegenerateSamplePoint(crate::scalar::format_rational(z)));
    }
    let up = lattice_point(&(ctx.sqrt_q() * z));
    let down = lattice_point(&(z / ctx.sqrt_q()));
    Ok((up, down))
}

/// Evaluates the divided difference
/// `(f(x(q^{1/2} z)) - f(x(q^{-1/2} z))) / (x(q^{1/2} z) - x(q^{-1/2} z))`
/// directly at the sample point. The denominator vanishes exactly when
/// `z` is `0` or `±1`.
pub fn dq_oracle(ctx: &QContext, f: &Poly, z: &Rational) -> Result<Rational, AwError> {
    let (up, down) = shifted_points(ctx, z)?;
    let denom = &up - &down;
    if denom.is_zero() {
        return Err(AwError::DegenerateSamplePoint(crate::scalar::format_rational(z)));
    }
    Ok((f.eval(&up) - f.eval(&down)) / denom)
}

/// Evaluates `(f(x(q^{1/2} z)) + f(x(q^{-1/2} z))) / 2` directly.
pub fn sq_oracle(ctx: &QContext, f: &Poly, z: &Rational) -> Result<Rational, AwError> {
    let (up, down) = shifted_points(ctx, z)?;
    Ok((f.eval(&up) + f.eval(&down)) / int(2))
}

/// `D_q (x^n)` for `n = 0..count`; shared by callers that need the operator
/// on the monomial basis repeatedly.
pub fn dq_monomials(ctx: &QContext, count: usize) -> Vec<Poly> {
    (0..count)
        .map(|n| dq_apply(ctx, &Poly::monomial(Rational::one(), n)))
        .collect()
}
