//! From a three-term recurrence and an exact structure fit to the auxiliary
//! sequences, the Pearson data, the difference-equation system they satisfy,
//! and finally a family with recovered parameters.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::awops::{dq_apply, sq_apply};
use crate::families::{
    generate_ops, moments, ttrr_alsalam_chihara_symmetric, ttrr_chebyshev_t, ttrr_cq_jacobi,
    ttrr_qhermite, Base, FamilyError, TtrrSpec,
};
use crate::poly::Poly;
use crate::scalar::{format_rational, int, rat, rational_sqrt, QContext, Rational};
use crate::structure::{fit_structure, StructureError, StructureFit};

/// Smallest horizon [`classify`] accepts.
pub const MIN_CLASSIFY_HORIZON: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CharacterizeError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("structure fit is not exact")]
    NotExact,
    #[error("fit horizon {got} is below the required {required}")]
    HorizonTooSmall { required: usize, got: usize },
    #[error("t_(n+2) - 2 alpha t_(n+1) + t_n = {residual} at n = {n}")]
    RecurrenceViolated { n: usize, residual: String },
    #[error("a_1 C_1 + c_1 vanishes")]
    DegenerateR1,
    #[error("Pearson equation fails at n = {n}: residual {residual}")]
    PearsonViolated { n: usize, residual: String },
    #[error("expected deg pi = {expected}, got {got}")]
    WrongDegree { expected: usize, got: usize },
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("recovery quadratic does not split over the rationals (discriminant {discriminant})")]
    IrrationalRoots { discriminant: String },
    #[error("parameters are degenerate: {0}")]
    Degenerate(String),
    #[error("no recovered parameter set regenerates the input recurrence")]
    RegenerationMismatch,
}

fn fmt(r: &Rational) -> String {
    format_rational(r)
}

/// `t_n = c_n / C_n` and `r_n = t_n + a_n - a_{n-1}`, with their two-term
/// closed-form coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxSequences {
    /// `t_0 = k1 + k2`, then `t_n = c_n / C_n`.
    pub t: Vec<Rational>,
    pub k1: Rational,
    pub k2: Rational,
    /// `r_0 = t_0 + a_1`, then `r_n = t_n + a_n - a_{n-1}`.
    pub r: Vec<Rational>,
    pub a_hat: Rational,
    pub b_hat: Rational,
}

fn require_exact(fit: &StructureFit, min_horizon: usize) -> Result<(), CharacterizeError> {
    if !fit.is_exact() || fit.pi.is_none() {
        return Err(CharacterizeError::NotExact);
    }
    if fit.horizon < min_horizon {
        return Err(CharacterizeError::HorizonTooSmall {
            required: min_horizon,
            got: fit.horizon,
        });
    }
    Ok(())
}

/// `k1 q^{n/2} + k2 q^{-n/2}`
fn two_term(ctx: &QContext, k1: &Rational, k2: &Rational, n: usize) -> Rational {
    let e = 2 * n as i64;
    k1 * ctx.qpow(e) + k2 * ctx.qpow(-e)
}

pub fn aux_sequences(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
) -> Result<AuxSequences, CharacterizeError> {
    require_exact(fit, 2)?;
    let m = fit.horizon;
    ttrr.check_horizon(m)?;
    let (c1, c2) = (ttrr.c(1), ttrr.c(2));
    let (s, q, u) = (ctx.sqrt_q(), ctx.q(), ctx.u());
    let (a, c) = (&fit.a, &fit.c);
    let k1 = (&c[2] * c1 - s.recip() * &c[1] * c2) / ((q - int(1)) * c1 * c2);
    let k2 = (&c[2] * c1 - s * &c[1] * c2) / ((q.recip() - int(1)) * c1 * c2);
    let mut t = vec![&k1 + &k2];
    t.extend((1..=m).map(|n| &c[n] / ttrr.c(n)));
    let two_alpha = ctx.alpha() * int(2);
    for n in 0..=m - 2 {
        let residual = &t[n + 2] - &two_alpha * &t[n + 1] + &t[n];
        if !residual.is_zero() {
            return Err(CharacterizeError::RecurrenceViolated {
                n,
                residual: fmt(&residual),
            });
        }
    }
    // a_{-1} = -a_1 continues a_{n+1} - 2 alpha a_n + a_{n-1} = 0 back to n = 0
    let mut r = vec![&t[0] + &a[1]];
    r.extend((1..=m).map(|n| &t[n] + &a[n] - &a[n - 1]));
    let one = Rational::one();
    let a_hat = &k1 + &a[1] * u * (&one - s.recip());
    let b_hat = &k2 - &a[1] * u * (&one - s);
    Ok(AuxSequences {
        t,
        k1,
        k2,
        r,
        a_hat,
        b_hat,
    })
}

/// Coefficients of the Pearson-type equation `D_q(phi u) = S_q(psi u)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PearsonData {
    pub frak_a: Rational,
    pub frak_b: Rational,
    pub phi: Poly,
    pub psi: Poly,
}

pub fn pearson_data(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
) -> Result<PearsonData, CharacterizeError> {
    require_exact(fit, 2)?;
    ttrr.check_horizon(2)?;
    let (a, b, c) = (&fit.a, &fit.b, &fit.c);
    let (b0, b1) = (ttrr.b(0), ttrr.b(1));
    let (c1, c2) = (ttrr.c(1), ttrr.c(2));
    let r1 = &c[1] + &a[1] * c1;
    if r1.is_zero() {
        return Err(CharacterizeError::DegenerateR1);
    }
    let al = ctx.alpha();
    let frak_a = (&a[2] * c2 + &c[2]) * c1 / (&r1 * c2) - al;
    let frak_b = -b0 + (&frak_a + al) * b1 - (&b[1] + &a[1] * b1) * c1 / &r1;
    let psi = Poly::linear_root(b0);
    let mut phi = &Poly::new(vec![-&frak_b, frak_a.clone()]) * &psi;
    phi.add_scaled(&Poly::one(), &-((&frak_a + al) * c1));
    Ok(PearsonData {
        frak_a,
        frak_b,
        phi,
        psi,
    })
}

/// `-<u, phi D_q x^n> - <u, psi S_q x^n>` for `0 <= n <= n_max`.
pub fn pearson_residuals(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    pd: &PearsonData,
    n_max: usize,
) -> Result<Vec<(usize, Rational)>, CharacterizeError> {
    let mu = moments(ttrr, n_max + 1)?;
    (0..=n_max)
        .map(|n| {
            let xn = Poly::monomial(Rational::one(), n);
            let lhs = -mu.apply(&(&pd.phi * &dq_apply(ctx, &xn)))?;
            let rhs = mu.apply(&(&pd.psi * &sq_apply(ctx, &xn)))?;
            Ok((n, lhs - rhs))
        })
        .collect()
}

/// Checks `-<u, phi D_q x^n> = <u, psi S_q x^n>` exactly against the moments
/// of the recurrence. Needs `n_max <= N`.
pub fn pearson_check(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    pd: &PearsonData,
    n_max: usize,
) -> Result<(), CharacterizeError> {
    match pearson_residuals(ctx, ttrr, pd, n_max)?
        .into_iter()
        .find(|(_, r)| !r.is_zero())
    {
        Some((n, r)) => Err(CharacterizeError::PearsonViolated {
            n,
            residual: fmt(&r),
        }),
        None => Ok(()),
    }
}

/// One evaluated identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquationResidual {
    pub name: &'static str,
    pub n: usize,
    #[serde(serialize_with = "crate::scalar::serde_rational::serialize")]
    pub residual: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SystemReport {
    pub residuals: Vec<EquationResidual>,
}

impl SystemReport {
    fn push(&mut self, name: &'static str, n: usize, residual: Rational) {
        self.residuals.push(EquationResidual { name, n, residual });
    }

    pub fn failures(&self) -> impl Iterator<Item = &EquationResidual> {
        self.residuals.iter().filter(|e| !e.residual.is_zero())
    }

    pub fn is_clean(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v: Vec<_> = self.residuals.iter().map(|e| e.name).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Evaluates the difference-equation system satisfied by the recurrence
/// coefficients `(B_n, C_n)` and the structure coefficients `(a_n, b_n, c_n)`.
///
/// The reduced equations and their raw unreduced counterparts are evaluated
/// for `2 <= n <= M - 3` with `M` the fit horizon. The report also carries
/// the closed forms of `t_n` and `r_n`, the power relations fixing the
/// leading structure coefficients, the explicit form of `B_n` in terms of
/// `r_n`, and for quadratic `pi` the identities tying the first coefficients
/// to the roots of `pi`.
pub fn verify_difference_system(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    aux: &AuxSequences,
) -> Result<SystemReport, CharacterizeError> {
    require_exact(fit, 2)?;
    let m = fit.horizon;
    ttrr.check_horizon(m)?;
    let pi = fit.pi.as_ref().expect("exact fit carries pi");
    let mut rep = SystemReport::default();
    let al = ctx.alpha();
    let one = Rational::one();
    let quarter = rat(1, 4);
    let a = |n: usize| fit.a[n].clone();
    let b = |n: usize| fit.b[n].clone();
    let c = |n: usize| fit.c[n].clone();
    let t = |n: usize| aux.t[n].clone();
    let r = |n: usize| aux.r[n].clone();
    let bb = |n: usize| ttrr.b(n).clone();
    let cc = |n: usize| ttrr.c(n).clone();
    let two = int(2);
    let one_m_al = &one - al;
    let one_m_al2 = &one - al * al;

    for n in 0..=m - 2 {
        rep.push("a_recurrence", n, a(n + 2) - &two * al * a(n + 1) + a(n));
        rep.push("t_recurrence", n, t(n + 2) - &two * al * t(n + 1) + t(n));
    }
    for n in 0..=m {
        rep.push("t_closed_form", n, t(n) - two_term(ctx, &aux.k1, &aux.k2, n));
        rep.push("r_closed_form", n, r(n) - two_term(ctx, &aux.a_hat, &aux.b_hat, n));
    }

    for n in 2..=m.saturating_sub(3) {
        rep.push(
            "reduced_r_b",
            n,
            r(n + 3) * bb(n + 2) - (r(n + 2) + r(n + 1)) * bb(n + 1) + r(n) * bb(n),
        );
        rep.push(
            "reduced_b_quadratic",
            n,
            r(n) * (bb(n) * bb(n) - &two * al * bb(n) * bb(n - 1) + bb(n - 1) * bb(n - 1))
                - ((r(n + 1) + r(n + 2)) * (cc(n + 1) - &quarter)
                    - &two * (&one + al) * r(n) * (cc(n) - &quarter)
                    + (r(n - 1) + r(n - 2)) * (cc(n - 1) - &quarter)),
        );
        rep.push(
            "reduced_b_cubic",
            n,
            &one_m_al2 * b(n)
                - (&two * &one_m_al * (a(n) * bb(n) + b(n)) * bb(n) * bb(n)
                    + (t(n + 1) + a(n + 1) - a(n + 2)) * bb(n + 1) * cc(n + 1)
                    + (t(n) + a(n - 1) - a(n - 2)) * bb(n - 1) * cc(n)
                    + ((&two * a(n) - a(n + 2) - a(n - 1)) * cc(n + 1)
                        + (&two * a(n) - a(n + 1) - a(n - 2)) * cc(n)
                        + (&one - &two * al) * (c(n) + c(n + 1))
                        + (al * al - &one) * a(n))
                        * bb(n)
                    + &two * (b(n) - al * b(n + 1)) * cc(n + 1)
                    + &two * (b(n) - al * b(n - 1)) * cc(n)),
        );
        rep.push(
            "raw_b_recurrence",
            n,
            (a(n + 1) - a(n + 2)) * bb(n + 1) + (a(n) - a(n - 1)) * bb(n) + b(n + 2)
                - &two * al * b(n + 1)
                + b(n),
        );
        rep.push(
            "raw_t_shift",
            n,
            (a(n + 1) - a(n + 2) - t(n + 2)) * bb(n + 1)
                + (a(n) - a(n - 1) + t(n + 1) + t(n)) * bb(n)
                - t(n - 1) * bb(n - 1)
                + b(n + 1)
                - &two * al * b(n)
                + b(n - 1),
        );
        rep.push(
            "raw_c_recurrence",
            n,
            (a(n + 1) - a(n + 2)) * bb(n + 1) * bb(n + 1)
                + &two * &one_m_al * a(n) * bb(n) * bb(n)
                + (a(n) - a(n - 1)) * bb(n) * bb(n + 1)
                + (a(n) - a(n + 2)) * cc(n + 1)
                + (b(n + 1) + b(n) - &two * al * b(n + 1)) * bb(n + 1)
                + (b(n + 1) + b(n) - &two * al * b(n)) * bb(n)
                + (a(n) - a(n - 2)) * cc(n)
                + c(n + 2)
                - &two * al * c(n + 1)
                + c(n)
                - &one_m_al2 * a(n),
        );
        rep.push(
            "raw_quadratic",
            n,
            (&two * &one_m_al * a(n) + t(n)) * bb(n) * bb(n)
                + (t(n) + a(n - 1) - a(n - 2)) * bb(n - 1) * bb(n - 1)
                + (b(n) + b(n - 1) - &two * al * b(n)) * bb(n)
                + (a(n) - t(n - 1) - t(n + 1) - a(n + 1)) * bb(n) * bb(n - 1)
                + (b(n - 1) + b(n) - &two * al * b(n - 1)) * bb(n - 1)
                + (a(n) - a(n + 2) - t(n + 2) - t(n + 1)) * cc(n + 1)
                + (&two * (&one + al) * t(n) + a(n) - a(n - 2)) * cc(n)
                - (t(n - 2) + t(n - 1)) * cc(n - 1)
                + c(n + 1)
                - &two * al * c(n)
                + c(n - 1)
                - &one_m_al2 * (t(n) + a(n)),
        );
        rep.push(
            "raw_cubic",
            n,
            &two * &one_m_al * a(n) * bb(n) * bb(n) * bb(n)
                + &two * &one_m_al * b(n) * bb(n) * bb(n)
                + ((&two * a(n) - a(n + 2) - a(n - 1)) * cc(n + 1)
                    + (&two * a(n) - a(n + 1) - a(n - 2)) * cc(n)
                    + c(n + 1)
                    - &two * al * c(n)
                    + c(n)
                    - &two * al * c(n + 1)
                    - &one_m_al2 * a(n))
                    * bb(n)
                + (c(n + 1) + a(n + 1) * cc(n + 1) - a(n + 2) * cc(n + 1)) * bb(n + 1)
                + (c(n) + a(n - 1) * cc(n) - a(n - 2) * cc(n)) * bb(n - 1)
                + &two * (b(n) - al * b(n + 1)) * cc(n + 1)
                + &two * (b(n) - al * b(n - 1)) * cc(n)
                - &one_m_al2 * b(n),
        );
    }

    // B_n r_n r_{n+1} = B_0 r_0 r_1, cross-multiplied
    for n in 0..m {
        rep.push("explicit_b", n, bb(n) * r(n) * r(n + 1) - bb(0) * r(0) * r(1));
    }
    if m >= 2 {
        rep.push("explicit_b_start", 0, r(2) * bb(1) - r(0) * bb(0));
    }

    let mut partial = Rational::zero();
    for n in 1..=m {
        partial += ttrr.b(n - 1);
        match fit.deg_pi {
            1 => {
                rep.push("power_leading", n, b(n) - ctx.gamma(n));
                rep.push(
                    "power_next",
                    n,
                    c(n) - ((b(n) - b(n - 1)) * &partial + pi.coeff(0) * b(n)),
                );
            }
            2 => {
                rep.push("power_leading", n, a(n) - ctx.gamma(n));
                rep.push(
                    "power_next",
                    n,
                    b(n) - ((a(n) - a(n - 1)) * &partial + pi.coeff(1) * a(n)),
                );
            }
            _ => {}
        }
    }

    if fit.deg_pi == 2 {
        // pi = (x - r)(x - s)
        let rps = -pi.coeff(1);
        let rs = pi.coeff(0);
        let (b0, b1, c1) = (bb(0), bb(1), cc(1));
        let s01 = &b0 + &b1;
        let p01 = &b0 * &b1 - &c1;
        rep.push("initial_b1", 0, &b0 - (b(1) + &rps));
        rep.push("initial_c1", 0, c(1) - (&b0 * &b0 - &rps * &b0 + &rs));
        rep.push(
            "initial_b2",
            0,
            b(2) - ((&two * al - &one) * &s01 - &two * al * &rps),
        );
        rep.push(
            "initial_rs",
            0,
            &rs * &s01 - (c(2) * &b0 - b(2) * &p01),
        );
        rep.push(
            "initial_c2",
            0,
            c(2) - (b(2) * &s01 - &two * al * &p01 + &rps * &s01 + &two * al * &rs),
        );
    }
    Ok(rep)
}

/// One evaluated condition with a human-readable witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Predicate {
    pub holds: bool,
    pub witness: String,
}

/// Named conditions, kept in key order for stable output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PredicateLedger {
    pub entries: BTreeMap<String, Predicate>,
}

impl PredicateLedger {
    pub fn record(&mut self, name: impl Into<String>, holds: bool, witness: impl Into<String>) {
        self.entries.insert(
            name.into(),
            Predicate {
                holds,
                witness: witness.into(),
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&Predicate> {
        self.entries.get(name)
    }

    pub fn holds(&self, name: &str) -> bool {
        self.get(name).is_some_and(|p| p.holds)
    }

    pub fn extend(&mut self, other: PredicateLedger) {
        self.entries.extend(other.entries);
    }
}

/// Evaluates the necessary conditions that single out each degree of `pi`:
///
/// * degree 0: `c_n = gamma_n`;
/// * degree 1: `k1 k2 = 0`, recording which of the two vanishes;
/// * degree 2: `a_hat b_hat (1 - 2 frak_a u)(1 + 2 frak_a u) != 0`, or else
///   the Chebyshev data `C_1 = 1/2`, `frak_a = alpha`, together with
///   `k1 = -k2 = -2u` and `t_n = -2 gamma_n`.
pub fn predicate_ledger(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    aux: &AuxSequences,
    pd: &PearsonData,
) -> PredicateLedger {
    let mut ledger = PredicateLedger::default();
    match fit.deg_pi {
        0 => {
            let bad = (1..=fit.horizon).find(|&n| fit.c[n] != ctx.gamma(n));
            ledger.record(
                "c_equals_gamma",
                bad.is_none(),
                match bad {
                    Some(n) => format!("c_{n} = {}", fmt(&fit.c[n])),
                    None => format!("n <= {}", fit.horizon),
                },
            );
        }
        1 => {
            let prod = &aux.k1 * &aux.k2;
            ledger.record(
                "k1_k2_product_vanishes",
                prod.is_zero(),
                format!("k1 = {}, k2 = {}", fmt(&aux.k1), fmt(&aux.k2)),
            );
            ledger.record("k1_vanishes", aux.k1.is_zero(), fmt(&aux.k1));
            ledger.record("k2_vanishes", aux.k2.is_zero(), fmt(&aux.k2));
        }
        _ => {
            let u = ctx.u();
            let one = Rational::one();
            let two_au = int(2) * &pd.frak_a * u;
            let prod = &aux.a_hat * &aux.b_hat * (&one - &two_au) * (&one + &two_au);
            let factors_nonzero = !prod.is_zero();
            ledger.record(
                "ahat_bhat_frak_factors_nonzero",
                factors_nonzero,
                format!(
                    "a_hat = {}, b_hat = {}, frak_a = {}, product = {}",
                    fmt(&aux.a_hat),
                    fmt(&aux.b_hat),
                    fmt(&pd.frak_a),
                    fmt(&prod)
                ),
            );
            let cheb = ttrr.c(1) == &rat(1, 2) && &pd.frak_a == ctx.alpha();
            ledger.record(
                "chebyshev_data",
                cheb,
                format!("C_1 = {}, frak_a = {}", fmt(ttrr.c(1)), fmt(&pd.frak_a)),
            );
            let two_u = int(2) * u;
            ledger.record(
                "k1_equals_minus_k2_equals_minus_two_u",
                aux.k1 == -&two_u && aux.k2 == two_u,
                format!("k1 = {}, k2 = {}", fmt(&aux.k1), fmt(&aux.k2)),
            );
            let bad = (1..=fit.horizon).find(|&n| aux.t[n] != int(-2) * ctx.gamma(n));
            ledger.record(
                "t_equals_minus_two_gamma",
                bad.is_none(),
                match bad {
                    Some(n) => format!("t_{n} = {}", fmt(&aux.t[n])),
                    None => format!("n <= {}", fit.horizon),
                },
            );
            ledger.record(
                "quadratic_case_condition",
                factors_nonzero || cheb,
                if cheb {
                    "chebyshev data"
                } else {
                    "nonvanishing factors"
                },
            );
        }
    }
    ledger
}

/// Symmetric functions of the recovered Al-Salam-Chihara pair and, when the
/// pair is rational, the pair itself in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AscRecovery {
    pub sum: Rational,
    pub product: Rational,
    pub roots: Option<(Rational, Rational)>,
    pub discriminant: Rational,
}

impl AscRecovery {
    pub fn pair(&self) -> Result<(Rational, Rational), CharacterizeError> {
        self.roots
            .clone()
            .ok_or_else(|| CharacterizeError::IrrationalRoots {
                discriminant: fmt(&self.discriminant),
            })
    }
}

/// Reads `c + d = 2 B_0` and `c d = 1 - 4 C_1 / (1 - q)` off the recurrence,
/// with `q` taken from `base`, and checks `c^2 + d^2 = 2 alpha c d`.
pub fn recover_asc_params(
    base: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
) -> Result<AscRecovery, CharacterizeError> {
    require_exact(fit, 1)?;
    if fit.deg_pi != 1 {
        return Err(CharacterizeError::WrongDegree {
            expected: 1,
            got: fit.deg_pi,
        });
    }
    ttrr.check_horizon(1)?;
    let sum = ttrr.b(0) * int(2);
    let product = int(1) - ttrr.c(1) * int(4) / (int(1) - base.q());
    if sum.is_zero() && product.is_zero() {
        return Err(CharacterizeError::Degenerate("c = d = 0".into()));
    }
    // c^2 + d^2 = 2 alpha c d  <=>  (c + d)^2 = 2 (1 + alpha) c d
    let lhs = &sum * &sum;
    let rhs = int(2) * (int(1) + base.alpha()) * &product;
    if lhs != rhs {
        return Err(CharacterizeError::ConstraintViolated(format!(
            "c^2 + d^2 - 2 alpha c d = {}",
            fmt(&(&lhs - &rhs))
        )));
    }
    let discriminant = &lhs - int(4) * &product;
    let roots = rational_sqrt(&discriminant).map(|root| {
        let lo = (&sum - &root) / int(2);
        let hi = (&sum + &root) / int(2);
        (lo, hi)
    });
    Ok(AscRecovery {
        sum,
        product,
        roots,
        discriminant,
    })
}

/// `(p_a, p_b)` and `(-p_b, -p_a)` give the same recurrence; prefer the
/// representative with `p_a + p_b > 0`.
pub fn canonical_qjacobi(p_a: Rational, p_b: Rational) -> (Rational, Rational) {
    if (&p_a + &p_b).is_negative() {
        (-p_b, -p_a)
    } else {
        (p_a, p_b)
    }
}

/// Recovers continuous q-Jacobi parameters `(p_a, p_b)` from a quadratic
/// fit. `p_a p_b = -a_hat / b_hat`; the individual parameters come from the
/// quadratic `Y^2 + 2 r_1 B_0 q^{1/4} / (b_hat (1 + q^{1/2})) Y + a_hat / b_hat`
/// with roots `-p_a` and `p_b` when `B_0 != 0`, and otherwise from `C_1`,
/// which fixes `p_a^2 + p_b^2`. Every candidate is regenerated and compared
/// with the input to horizon `n`.
pub fn recover_qjacobi_params(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    aux: &AuxSequences,
    n: usize,
) -> Result<(Rational, Rational), CharacterizeError> {
    require_exact(fit, 2)?;
    if fit.deg_pi != 2 {
        return Err(CharacterizeError::WrongDegree {
            expected: 2,
            got: fit.deg_pi,
        });
    }
    ttrr.check_horizon(n)?;
    if aux.a_hat.is_zero() || aux.b_hat.is_zero() {
        return Err(CharacterizeError::ConstraintViolated(
            "a_hat b_hat vanishes".into(),
        ));
    }
    let (t, s, q) = (ctx.t(), ctx.sqrt_q(), ctx.q());
    let one = Rational::one();
    let prod = -&aux.a_hat / &aux.b_hat;
    let b0 = ttrr.b(0);
    let mut candidates = Vec::new();
    let mut discriminant = None;

    if !b0.is_zero() {
        let lin = int(2) * &aux.r[1] * b0 * t / (&aux.b_hat * (&one + s));
        let disc = &lin * &lin - int(4) * &aux.a_hat / &aux.b_hat;
        match rational_sqrt(&disc) {
            Some(root) => {
                let y1 = (-&lin + &root) / int(2);
                let y2 = (-&lin - &root) / int(2);
                candidates.push((-&y1, y2.clone()));
                candidates.push((-y2, y1));
            }
            None => discriminant = Some(disc),
        }
    }

    // C_1 = (1-q)(1-q^{a+1})(1-q^{b+1})(1+q^{(a+b+1)/2})
    //       / (4 (1-q^{(a+b+3)/2}) (1-q^{(a+b+2)/2})^2)
    // is linear in p_a^2 + p_b^2 once p_a p_b is known.
    let den = (&one - q) * (&one + &prod * s);
    if !den.is_zero() {
        let one_m = &one - &prod * q;
        let sigma = int(4) * ttrr.c(1) * (&one - &prod * s * q) * &one_m * &one_m / den;
        let sq_sum = (&one + q * q * &prod * &prod - sigma) / q;
        let diff2 = &sq_sum - int(2) * &prod;
        let sum2 = &sq_sum + int(2) * &prod;
        match (rational_sqrt(&sum2), rational_sqrt(&diff2)) {
            (Some(sp), Some(dp)) => {
                for (su, di) in [(sp.clone(), dp.clone()), (sp.clone(), -&dp), (-&sp, dp.clone()), (-sp, -dp)] {
                    candidates.push(((&su + &di) / int(2), (&su - &di) / int(2)));
                }
            }
            _ => {
                discriminant.get_or_insert(if rational_sqrt(&sum2).is_none() {
                    sum2
                } else {
                    diff2
                });
            }
        }
    }

    for (p_a, p_b) in candidates {
        if &p_a * &p_b != prod {
            continue;
        }
        if let Ok(regen) = ttrr_cq_jacobi(ctx, &p_a, &p_b, n) {
            if regen.agrees_with(ttrr, n) {
                return Ok(canonical_qjacobi(p_a, p_b));
            }
        }
    }
    match discriminant {
        Some(d) => Err(CharacterizeError::IrrationalRoots {
            discriminant: fmt(&d),
        }),
        None => Err(CharacterizeError::RegenerationMismatch),
    }
}

/// A recognized family with its parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassifiedFamily {
    QHermite,
    AlSalamChihara { c: Rational, d: Rational },
    /// Al-Salam-Chihara whose parameters are irrational; only their sum and
    /// product are rational.
    AlSalamChiharaSymmetric { sum: Rational, product: Rational },
    ChebyshevT,
    ContinuousQJacobi { p_a: Rational, p_b: Rational },
    NotCharacterized,
}

impl ClassifiedFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifiedFamily::QHermite => "q-hermite",
            ClassifiedFamily::AlSalamChihara { .. } => "alsalam-chihara",
            ClassifiedFamily::AlSalamChiharaSymmetric { .. } => "alsalam-chihara-symmetric",
            ClassifiedFamily::ChebyshevT => "chebyshev-t",
            ClassifiedFamily::ContinuousQJacobi { .. } => "continuous-q-jacobi",
            ClassifiedFamily::NotCharacterized => "not-characterized",
        }
    }

    pub fn params(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        match self {
            ClassifiedFamily::AlSalamChihara { c, d } => {
                m.insert("c", fmt(c));
                m.insert("d", fmt(d));
            }
            ClassifiedFamily::AlSalamChiharaSymmetric { sum, product } => {
                m.insert("sum", fmt(sum));
                m.insert("product", fmt(product));
            }
            ClassifiedFamily::ContinuousQJacobi { p_a, p_b } => {
                m.insert("p_a", fmt(p_a));
                m.insert("p_b", fmt(p_b));
            }
            _ => {}
        }
        m
    }
}

/// Outcome of [`classify`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub family: ClassifiedFamily,
    /// Base in which the family formulas reproduce the input; `None` when
    /// not characterized.
    pub base: Option<Base>,
    pub predicates: PredicateLedger,
    /// The first exact structure fit, or the last attempted one.
    pub fit: Option<StructureFit>,
}

impl Classification {
    pub fn is_characterized(&self) -> bool {
        self.family != ClassifiedFamily::NotCharacterized
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("base", &self.base)?;
        m.serialize_entry("family", self.family.name())?;
        m.serialize_entry("fit", &self.fit)?;
        m.serialize_entry("params", &self.family.params())?;
        m.serialize_entry("predicates", &self.predicates)?;
        m.end()
    }
}

/// Identifies which family, if any, produced `ttrr`.
///
/// Fits the structure relation with `deg pi = 0, 1, 2` in that order and
/// stops at the first exact fit. From there the auxiliary sequences, the
/// Pearson data, the difference system and the degree-specific conditions
/// are evaluated, parameters are recovered, and the family recurrence is
/// regenerated (in base `q`, then `1/q` where that yields a different
/// family) and compared with the input up to `n`.
pub fn classify(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    n: usize,
) -> Result<Classification, CharacterizeError> {
    if n < MIN_CLASSIFY_HORIZON {
        return Err(CharacterizeError::HorizonTooSmall {
            required: MIN_CLASSIFY_HORIZON,
            got: n,
        });
    }
    ttrr.check_horizon(n)?;
    let ops = generate_ops(ttrr, n)?;
    let mut ledger = PredicateLedger::default();
    let mut last_fit = None;
    for deg in 0..=2 {
        let fit = fit_structure(ctx, &ops, deg, n)?;
        ledger.record(
            format!("fit_deg_{deg}"),
            fit.is_exact(),
            fit.status.to_string(),
        );
        if fit.is_exact() {
            let (family, base) = characterize_exact(ctx, ttrr, &fit, n, &mut ledger);
            return Ok(Classification {
                family,
                base,
                predicates: ledger,
                fit: Some(fit),
            });
        }
        last_fit = Some(fit);
    }
    Ok(Classification {
        family: ClassifiedFamily::NotCharacterized,
        base: None,
        predicates: ledger,
        fit: last_fit,
    })
}

fn characterize_exact(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    n: usize,
    ledger: &mut PredicateLedger,
) -> (ClassifiedFamily, Option<Base>) {
    let not = (ClassifiedFamily::NotCharacterized, None);
    let aux = match aux_sequences(ctx, ttrr, fit) {
        Ok(aux) => {
            ledger.record("t_recurrence", true, format!("n <= {}", fit.horizon));
            aux
        }
        Err(e) => {
            ledger.record("t_recurrence", false, e.to_string());
            return not;
        }
    };
    let pd = match pearson_data(ctx, ttrr, fit) {
        Ok(pd) => pd,
        Err(e) => {
            ledger.record("pearson_equation", false, e.to_string());
            return not;
        }
    };
    let pearson = pearson_check(ctx, ttrr, &pd, n);
    ledger.record(
        "pearson_equation",
        pearson.is_ok(),
        match &pearson {
            Ok(()) => format!("n <= {n}"),
            Err(e) => e.to_string(),
        },
    );
    match verify_difference_system(ctx, ttrr, fit, &aux) {
        Ok(rep) => {
            let first = rep.failures().next();
            ledger.record(
                "difference_system",
                first.is_none(),
                match first {
                    Some(e) => format!("{} at n = {}: {}", e.name, e.n, fmt(&e.residual)),
                    None => format!("{} identities", rep.residuals.len()),
                },
            );
        }
        Err(e) => ledger.record("difference_system", false, e.to_string()),
    }
    ledger.extend(predicate_ledger(ctx, ttrr, fit, &aux, &pd));

    let found = match fit.deg_pi {
        0 => [Base::Q, Base::QInverse]
            .into_iter()
            .find(|b| ttrr_qhermite(&b.context(ctx), n).agrees_with(ttrr, n))
            .map(|b| (ClassifiedFamily::QHermite, b)),
        1 => classify_linear(ctx, ttrr, fit, n, ledger),
        _ => classify_quadratic(ctx, ttrr, fit, &aux, n, ledger),
    };
    ledger.record(
        "regenerated_family_matches",
        found.is_some(),
        match &found {
            Some((f, b)) => format!("{} in base {b}", f.name()),
            None => "no family regenerates the input".into(),
        },
    );
    match found {
        Some((f, b)) => (f, Some(b)),
        None => not,
    }
}

fn classify_linear(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    n: usize,
    ledger: &mut PredicateLedger,
) -> Option<(ClassifiedFamily, Base)> {
    for base in [Base::Q, Base::QInverse] {
        let bctx = base.context(ctx);
        let key = format!("asc_recovery_base_{base}");
        let rec = match recover_asc_params(&bctx, ttrr, fit) {
            Ok(rec) => rec,
            Err(e) => {
                ledger.record(key, false, e.to_string());
                continue;
            }
        };
        let matches = ttrr_alsalam_chihara_symmetric(&bctx, &rec.sum, &rec.product, n)
            .is_ok_and(|regen| regen.agrees_with(ttrr, n));
        ledger.record(
            key,
            matches,
            format!("c + d = {}, c d = {}", fmt(&rec.sum), fmt(&rec.product)),
        );
        if !matches {
            continue;
        }
        let family = match rec.roots {
            Some((c, d)) => ClassifiedFamily::AlSalamChihara { c, d },
            None => ClassifiedFamily::AlSalamChiharaSymmetric {
                sum: rec.sum,
                product: rec.product,
            },
        };
        return Some((family, base));
    }
    None
}

fn classify_quadratic(
    ctx: &QContext,
    ttrr: &TtrrSpec,
    fit: &StructureFit,
    aux: &AuxSequences,
    n: usize,
    ledger: &mut PredicateLedger,
) -> Option<(ClassifiedFamily, Base)> {
    if ledger.holds("chebyshev_data") && ttrr_chebyshev_t(n).agrees_with(ttrr, n) {
        return Some((ClassifiedFamily::ChebyshevT, Base::Q));
    }
    // The q^{-1} form of continuous q-Jacobi with (p_a, p_b) coincides with
    // the base-q form with (1/p_a, 1/p_b), so base q covers both.
    match recover_qjacobi_params(ctx, ttrr, fit, aux, n) {
        Ok((p_a, p_b)) => {
            ledger.record(
                "qjacobi_recovery",
                true,
                format!("p_a = {}, p_b = {}", fmt(&p_a), fmt(&p_b)),
            );
            Some((ClassifiedFamily::ContinuousQJacobi { p_a, p_b }, Base::Q))
        }
        Err(e) => {
            ledger.record("qjacobi_recovery", false, e.to_string());
            None
        }
    }
}
