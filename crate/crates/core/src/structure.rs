//! Fitting and verifying the structure relation
//!
//! ```text
//! pi(x) D_q P_n(x) = (a_n x + b_n) P_n(x) + c_n P_{n-1}(x)
//! ```
//!
//! with `pi` monic of degree at most two, and the five-term expansion of
//! `pi S_q P_n` that it implies.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::awops::{dq_apply, sq_apply};
use crate::families::{FamilyError, OpsTable, TtrrSpec};
use crate::linalg::{self, Solution};
use crate::poly::Poly;
use crate::scalar::{serde_rational_vec, QContext, Rational};

/// Indices used to pin `pi` before extending to the full horizon.
const PIN_HORIZON: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("deg pi must be 0, 1 or 2, got {0}")]
    InvalidDegree(usize),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("the fit is not exact ({0})")]
    NotExact(FitStatus),
    #[error("structure residual at n = {n} is {residual}")]
    ResidualNonzero { n: usize, residual: Poly },
    #[error("five-term coefficient r[{k}] disagrees with the basis expansion at n = {n}")]
    ExpansionMismatch { n: usize, k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FitStatus {
    Exact,
    /// No choice of the unknowns satisfies the relation at this index.
    NoSolution(usize),
    /// The relation holds but `c_n = 0` at this index.
    DegenerateC(usize),
}

impl FitStatus {
    pub fn is_exact(&self) -> bool {
        matches!(self, FitStatus::Exact)
    }
}

impl std::fmt::Display for FitStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitStatus::Exact => f.write_str("exact"),
            FitStatus::NoSolution(n) => write!(f, "no solution at n = {n}"),
            FitStatus::DegenerateC(n) => write!(f, "c_n vanishes at n = {n}"),
        }
    }
}

/// Result of [`fit_structure`]. The sequences are indexed from `n = 0`
/// (with `a_0 = b_0 = c_0 = 0`) and cover every index solved before the
/// first failure, so for an exact fit they run to `horizon`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFit {
    pub deg_pi: usize,
    pub pi: Option<Poly>,
    #[serde(with = "serde_rational_vec")]
    pub a: Vec<Rational>,
    #[serde(with = "serde_rational_vec")]
    pub b: Vec<Rational>,
    #[serde(with = "serde_rational_vec")]
    pub c: Vec<Rational>,
    pub status: FitStatus,
    pub horizon: usize,
}

impl StructureFit {
    pub fn is_exact(&self) -> bool {
        self.status.is_exact()
    }

    /// Multiplies `pi` and every `a_n, b_n, c_n` by `lambda`, which yields
    /// another solution of the same relation.
    pub fn scaled(&self, lambda: &Rational) -> StructureFit {
        let sc = |v: &[Rational]| v.iter().map(|x| x * lambda).collect();
        StructureFit {
            pi: self.pi.as_ref().map(|p| p.scale(lambda)),
            a: sc(&self.a),
            b: sc(&self.b),
            c: sc(&self.c),
            ..self.clone()
        }
    }

    pub fn with_c_shifted(&self, n: usize, delta: &Rational) -> StructureFit {
        let mut out = self.clone();
        out.c[n] += delta;
        out
    }

    fn require_exact(&self) -> Result<&Poly, StructureError> {
        match (&self.status, &self.pi) {
            (FitStatus::Exact, Some(pi)) => Ok(pi),
            _ => Err(StructureError::NotExact(self.status)),
        }
    }
}

fn column(p: &Poly, len: usize) -> Vec<Rational> {
    (0..len).map(|i| p.coeff(i)).collect()
}

/// Joint linear system over the non-leading coefficients of `pi` and
/// `(a_n, b_n, c_n)` for `n = 1..=upto`. Returns the solved `pi`, or `None`
/// when inconsistent.
fn pin_pi(dq: &[Poly], ops: &OpsTable, deg_pi: usize, upto: usize) -> Option<(Poly, usize)> {
    let unknowns = deg_pi + 3 * upto;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (n, d) in dq.iter().enumerate().take(upto + 1).skip(1) {
        let len = (deg_pi + n).max(n + 2);
        let pi_cols: Vec<Vec<Rational>> = (0..=deg_pi)
            .map(|j| column(&(&Poly::monomial(Rational::one(), j) * d), len))
            .collect();
        let xp = column(&(&Poly::x() * ops.get(n)), len);
        let p = column(ops.get(n), len);
        let pm = column(&ops.prev(n), len);
        let base = deg_pi + 3 * (n - 1);
        for i in 0..len {
            let mut row = vec![Rational::zero(); unknowns];
            for j in 0..deg_pi {
                row[j] = pi_cols[j][i].clone();
            }
            row[base] = -&xp[i];
            row[base + 1] = -&p[i];
            row[base + 2] = -&pm[i];
            rows.push(row);
            rhs.push(-&pi_cols[deg_pi][i]);
        }
    }
    let (x, nullity) = match linalg::solve(&rows, &rhs, unknowns) {
        Solution::Inconsistent => return None,
        Solution::Unique(x) => (x, 0),
        Solution::Underdetermined {
            particular,
            nullity,
        } => (particular, nullity),
    };
    let mut coeffs = x[..deg_pi].to_vec();
    coeffs.push(Rational::one());
    Some((Poly::new(coeffs), nullity))
}

/// Solves `target = (a x + b) P_n + c P_{n-1}` by peeling coefficients from
/// the top. `None` when the residual is nonzero.
fn peel(target: &Poly, ops: &OpsTable, n: usize) -> Option<(Rational, Rational, Rational)> {
    if target.degree() > crate::poly::Degree::Finite(n + 1) {
        return None;
    }
    let mut r = target.clone();
    let xp = &Poly::x() * ops.get(n);
    let a = r.coeff(n + 1);
    r.add_scaled(&xp, &-&a);
    let b = r.coeff(n);
    r.add_scaled(ops.get(n), &-&b);
    let c = if n >= 1 { r.coeff(n - 1) } else { Rational::zero() };
    r.add_scaled(&ops.prev(n), &-&c);
    r.is_zero().then_some((a, b, c))
}

/// Finds monic `pi` of degree `deg_pi` and `(a_n, b_n, c_n)` for
/// `1 <= n <= horizon`, or reports the first index at which none exist.
///
/// `pi` is pinned by a joint exact solve over `n = 1..=3`, widened one index
/// at a time while the system leaves `pi` undetermined. The remaining indices
/// are then solved one by one with `pi` fixed.
pub fn fit_structure(
    ctx: &QContext,
    ops: &OpsTable,
    deg_pi: usize,
    horizon: usize,
) -> Result<StructureFit, StructureError> {
    if deg_pi > 2 {
        return Err(StructureError::InvalidDegree(deg_pi));
    }
    if horizon == 0 {
        return Err(StructureError::EmptyHorizon);
    }
    if horizon > ops.horizon() {
        return Err(FamilyError::HorizonExceeded {
            requested: horizon,
            available: ops.horizon(),
        }
        .into());
    }
    let dq: Vec<Poly> = ops.polys[..=horizon].iter().map(|p| dq_apply(ctx, p)).collect();
    let zero = || vec![Rational::zero()];
    let mut fit = StructureFit {
        deg_pi,
        pi: None,
        a: zero(),
        b: zero(),
        c: zero(),
        status: FitStatus::Exact,
        horizon,
    };

    let mut pinned = None;
    for upto in 1..=horizon {
        match pin_pi(&dq, ops, deg_pi, upto) {
            None => {
                fit.status = FitStatus::NoSolution(upto);
                return Ok(fit);
            }
            Some((pi, nullity)) => {
                pinned = Some(pi);
                if upto >= PIN_HORIZON.min(horizon) && nullity == 0 {
                    break;
                }
            }
        }
    }
    let pi = pinned.expect("horizon >= 1");

    for (n, d) in dq.iter().enumerate().take(horizon + 1).skip(1) {
        match peel(&(&pi * d), ops, n) {
            None => {
                fit.status = FitStatus::NoSolution(n);
                break;
            }
            Some((a, b, c)) => {
                let degenerate = c.is_zero();
                fit.a.push(a);
                fit.b.push(b);
                fit.c.push(c);
                if degenerate {
                    fit.status = FitStatus::DegenerateC(n);
                    break;
                }
            }
        }
    }
    fit.pi = Some(pi);
    Ok(fit)
}

/// `pi D_q P_n - (a_n x + b_n) P_n - c_n P_{n-1}` for `1 <= n <= horizon`.
pub fn structure_residuals(
    ctx: &QContext,
    ops: &OpsTable,
    fit: &StructureFit,
) -> Result<Vec<(usize, Poly)>, StructureError> {
    let pi = fit.require_exact()?;
    if fit.horizon > ops.horizon() {
        return Err(FamilyError::HorizonExceeded {
            requested: fit.horizon,
            available: ops.horizon(),
        }
        .into());
    }
    Ok((1..=fit.horizon)
        .map(|n| {
            let mut r = pi * &dq_apply(ctx, ops.get(n));
            r.add_scaled(&(&Poly::x() * ops.get(n)), &-&fit.a[n]);
            r.add_scaled(ops.get(n), &-&fit.b[n]);
            r.add_scaled(&ops.prev(n), &-&fit.c[n]);
            (n, r)
        })
        .collect())
}

/// Recomputes every structure residual and fails on the first nonzero one.
pub fn verify_structure(
    ctx: &QContext,
    ops: &OpsTable,
    fit: &StructureFit,
) -> Result<(), StructureError> {
    match structure_residuals(ctx, ops, fit)?
        .into_iter()
        .find(|(_, r)| !r.is_zero())
    {
        Some((n, residual)) => Err(StructureError::ResidualNonzero { n, residual }),
        None => Ok(()),
    }
}

/// Coefficients of `pi S_q P_n = r1 P_{n+2} + r2 P_{n+1} + r3 P_n + r4 P_{n-1}
/// + r5 P_{n-2}`, with `g_n = b_n + a_n B_n` and `s_n = c_n + a_n C_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiveTermExpansion {
    pub r: [Vec<Rational>; 5],
    pub g: Vec<Rational>,
    pub s: Vec<Rational>,
}

/// Five-term coefficients for `0 <= n <= n_max` from the closed formulas,
/// each checked against a direct expansion of `pi S_q P_n` in the
/// `P_k` basis. Needs the fit to reach `n_max + 1` and the table `n_max + 2`.
pub fn five_term(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    ops: &OpsTable,
    fit: &StructureFit,
    n_max: usize,
) -> Result<FiveTermExpansion, StructureError> {
    let pi = fit.require_exact()?;
    let need = n_max + 2;
    for avail in [ops.horizon(), ttrr.n_max() + 1, fit.horizon + 1] {
        if need > avail {
            return Err(FamilyError::HorizonExceeded {
                requested: need,
                available: avail,
            }
            .into());
        }
    }
    let al = ctx.alpha();
    let (a, b, c) = (&fit.a, &fit.b, &fit.c);
    let g: Vec<Rational> = (0..=n_max + 1).map(|n| &b[n] + &a[n] * ttrr.b(n)).collect();
    let s: Vec<Rational> = (0..=n_max + 1).map(|n| &c[n] + &a[n] * ttrr.c(n)).collect();
    let zero = Rational::zero();
    let big_b = |n: usize| ttrr.b(n);
    let big_c = |n: usize| ttrr.c(n);
    let mut r: [Vec<Rational>; 5] = Default::default();
    for n in 0..=n_max {
        let prev = |v: &[Rational]| if n >= 1 { v[n - 1].clone() } else { zero.clone() };
        let b_prev = if n >= 1 { big_b(n - 1).clone() } else { zero.clone() };
        let c_prev = if n >= 1 { big_c(n - 1).clone() } else { zero.clone() };
        let r1 = &a[n + 1] - al * &a[n];
        let r2 = &g[n + 1] - al * &g[n] + &a[n] * (big_b(n) - al * big_b(n + 1));
        let r3 = &s[n + 1] - al * &s[n] + &g[n] * (Rational::one() - al) * big_b(n)
            + prev(a) * big_c(n)
            - al * &a[n] * big_c(n + 1);
        let r4 = (prev(&g) - al * &g[n]) * big_c(n) + &s[n] * (big_b(n) - al * &b_prev);
        let r5 = big_c(n) * prev(&s) - al * &c_prev * &s[n];
        for (k, v) in [r1, r2, r3, r4, r5].into_iter().enumerate() {
            r[k].push(v);
        }

        let lhs = pi * &sq_apply(ctx, ops.get(n));
        let coords = ops.expand(&lhs).expect("table reaches n + 2");
        for (k, rk) in r.iter().enumerate() {
            let idx = n as i64 + 2 - k as i64;
            let expected = if idx >= 0 {
                coords.get(idx as usize).cloned().unwrap_or_default()
            } else {
                zero.clone()
            };
            if expected != rk[n] {
                return Err(StructureError::ExpansionMismatch { n, k: k + 1 });
            }
        }
        if coords.len() > n + 3 || coords.iter().take(n.saturating_sub(2)).any(|v| !v.is_zero()) {
            return Err(StructureError::ExpansionMismatch { n, k: 0 });
        }
    }
    Ok(FiveTermExpansion { r, g, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{
        generate_ops, ttrr_alsalam_chihara, ttrr_chebyshev_t, ttrr_cq_jacobi, ttrr_qhermite,
        Family, inverse_q_variant,
    };
    use crate::scalar::{int, rat};

    const N: usize = 10;

    fn ctx() -> QContext {
        QContext::new(rat(1, 2)).unwrap()
    }

    fn fit_for(t: &TtrrSpec, deg: usize) -> (OpsTable, StructureFit) {
        let ops = generate_ops(t, N + 2).unwrap();
        let fit = fit_structure(&ctx(), &ops, deg, N + 1).unwrap();
        (ops, fit)
    }

    fn families() -> Vec<(TtrrSpec, usize)> {
        let c = ctx();
        let n = N + 3;
        vec![
            (ttrr_qhermite(&c, n), 0),
            (ttrr_alsalam_chihara(&c, &rat(1, 4), &int(1), n).unwrap(), 1),
            (ttrr_chebyshev_t(n), 2),
            (ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 4), n).unwrap(), 2),
            (ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 16), n).unwrap(), 2),
            (
                inverse_q_variant(
                    &c,
                    &Family::AlSalamChihara {
                        c: rat(1, 4),
                        d: int(1),
                    },
                    n,
                )
                .unwrap(),
                1,
            ),
            (inverse_q_variant(&c, &Family::QHermite, n).unwrap(), 0),
        ]
    }

    #[test]
    fn qhermite_fit() {
        let c = ctx();
        let (_, fit) = fit_for(&ttrr_qhermite(&c, N + 3), 0);
        assert!(fit.is_exact());
        assert_eq!(fit.pi, Some(Poly::one()));
        for n in 1..=N {
            assert!(fit.a[n].is_zero() && fit.b[n].is_zero());
            assert_eq!(fit.c[n], c.gamma(n));
        }
    }

    #[test]
    fn alsalam_chihara_fit() {
        let c = ctx();
        let (_, fit) = fit_for(&ttrr_alsalam_chihara(&c, &rat(1, 4), &int(1), N + 3).unwrap(), 1);
        assert!(fit.is_exact());
        assert_eq!(fit.pi, Some(Poly::from_ints(&[-1, 1])));
        assert_eq!(fit.c[1], rat(-3, 8));
        assert_eq!(fit.c[2], rat(-1071, 512));
        assert_eq!(fit.b[..4], [int(0), int(1), rat(17, 4), rat(273, 16)]);
    }

    #[test]
    fn chebyshev_fit() {
        let c = ctx();
        let (_, fit) = fit_for(&ttrr_chebyshev_t(N + 3), 2);
        assert!(fit.is_exact());
        assert_eq!(fit.pi, Some(Poly::from_ints(&[-1, 0, 1])));
        assert_eq!(fit.c[1], int(-1));
        for n in 1..=N {
            assert_eq!(fit.a[n], c.gamma(n));
            assert!(fit.b[n].is_zero());
            if n >= 2 {
                assert_eq!(fit.c[n], -c.gamma(n) / int(2));
            }
        }
    }

    #[test]
    fn cq_jacobi_fit() {
        let c = ctx();
        let (_, fit) = fit_for(&ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 4), N + 3).unwrap(), 2);
        assert!(fit.is_exact());
        assert_eq!(fit.pi, Some(Poly::new(vec![rat(-4225, 256), int(0), int(1)])));
        assert_eq!(fit.c[1], rat(-4225, 256));
        let (_, fit) = fit_for(&ttrr_cq_jacobi(&c, &rat(1, 4), &rat(1, 16), N + 3).unwrap(), 2);
        assert!(fit.is_exact());
        assert_eq!(
            fit.pi,
            Some(Poly::new(vec![rat(-66625, 1024), rat(765, 64), int(1)]))
        );
        assert_eq!(fit.c[1], rat(-7663335225, 119071744));
        for n in 1..=N {
            assert_eq!(fit.a[n], c.gamma(n));
        }
    }

    #[test]
    fn lower_degrees_fail_where_expected() {
        let c = ctx();
        let (_, fit) = fit_for(&ttrr_qhermite(&c, N + 3), 1);
        assert!(matches!(fit.status, FitStatus::NoSolution(_)), "{:?}", fit.status);
        let (_, fit) = fit_for(&ttrr_chebyshev_t(N + 3), 1);
        assert!(matches!(fit.status, FitStatus::NoSolution(_)));
        let (_, fit) = fit_for(&ttrr_chebyshev_t(N + 3), 0);
        assert!(matches!(fit.status, FitStatus::NoSolution(_)));
    }

    #[test]
    fn alsalam_chihara_off_ratio_has_no_linear_fit() {
        // c = d = 1 makes C_1 vanish, so feed the raw coefficients in unchecked
        let c = ctx();
        let (b, cc) = crate::families::alsalam_chihara_sequences(&c, &int(1), &int(1), N + 3);
        let t = TtrrSpec::unchecked(b, cc).unwrap();
        let (_, fit) = fit_for(&t, 1);
        assert!(matches!(fit.status, FitStatus::NoSolution(_)), "{:?}", fit.status);
        // a regular off-ratio pair behaves the same way
        let t = ttrr_alsalam_chihara(&c, &rat(1, 3), &rat(1, 5), N + 3).unwrap();
        let (_, fit) = fit_for(&t, 1);
        assert!(matches!(fit.status, FitStatus::NoSolution(_)));
    }

    #[test]
    fn exact_fits_verify() {
        let c = ctx();
        for (t, deg) in families() {
            let (ops, fit) = fit_for(&t, deg);
            assert!(fit.is_exact(), "{:?}", fit.status);
            verify_structure(&c, &ops, &fit).unwrap();
            for lambda in [rat(3, 7), int(-2)] {
                verify_structure(&c, &ops, &fit.scaled(&lambda)).unwrap();
            }
        }
    }

    #[test]
    fn perturbed_fit_fails_verification() {
        let c = ctx();
        let (ops, fit) = fit_for(&ttrr_qhermite(&c, N + 3), 0);
        let bad = fit.with_c_shifted(2, &rat(1, 1000));
        match verify_structure(&c, &ops, &bad) {
            Err(StructureError::ResidualNonzero { n, residual }) => {
                assert_eq!(n, 2);
                assert_eq!(residual, ops.get(1).scale(&rat(-1, 1000)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_relations() {
        let c = ctx();
        for (t, deg) in families() {
            let (_, fit) = fit_for(&t, deg);
            let pi = fit.pi.clone().unwrap();
            let mut partial = Rational::zero();
            for n in 1..=N {
                partial += t.b(n - 1);
                match deg {
                    1 => {
                        assert_eq!(fit.b[n], c.gamma(n));
                        let expected = (&fit.b[n] - &fit.b[n - 1]) * &partial + pi.coeff(0) * &fit.b[n];
                        assert_eq!(fit.c[n], expected);
                    }
                    2 => {
                        assert_eq!(fit.a[n], c.gamma(n));
                        let expected = (&fit.a[n] - &fit.a[n - 1]) * &partial + pi.coeff(1) * &fit.a[n];
                        assert_eq!(fit.b[n], expected);
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn five_term_agrees_with_expansion() {
        let c = ctx();
        for (t, deg) in families() {
            let (ops, fit) = fit_for(&t, deg);
            let ft = five_term(&c, &t, &ops, &fit, 8).unwrap();
            assert!(ft.r[3][0].is_zero() && ft.r[4][0].is_zero());
            if deg == 0 {
                assert!(ft.r[0].iter().all(Zero::is_zero));
            }
        }
        let (ops, fit) = fit_for(&ttrr_chebyshev_t(N + 3), 2);
        let ft = five_term(&c, &ttrr_chebyshev_t(N + 3), &ops, &fit, 8).unwrap();
        assert_eq!(ft.r[0][2], c.gamma(3) - c.alpha() * c.gamma(2));
    }

    #[test]
    fn status_json() {
        assert_eq!(serde_json::to_string(&FitStatus::Exact).unwrap(), r#""exact""#);
        assert_eq!(
            serde_json::to_string(&FitStatus::NoSolution(4)).unwrap(),
            r#"{"noSolution":4}"#
        );
        assert_eq!(
            serde_json::to_string(&FitStatus::DegenerateC(2)).unwrap(),
            r#"{"degenerateC":2}"#
        );
    }

    #[test]
    fn rejects_bad_requests() {
        let t = ttrr_chebyshev_t(6);
        let ops = generate_ops(&t, 4).unwrap();
        assert!(fit_structure(&ctx(), &ops, 3, 4).is_err());
        assert!(fit_structure(&ctx(), &ops, 1, 5).is_err());
        assert!(fit_structure(&ctx(), &ops, 1, 0).is_err());
    }
}
