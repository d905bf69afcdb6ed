//! Smooth scalar expressions with exact symbolic differentiation.
//!
//! The grammar covers real constants, coordinate symbols, `+ - * /`, integer
//! powers, `exp`, `sin`, `cos`, and the C-infinity plateau primitive
//! `bump(s; lo, hi)` together with all of its derivatives. Every expression is
//! kept in a canonical sum-of-products form with exact rational coefficients,
//! so structural equality (and in particular exact-zero detection) is a plain
//! comparison after construction. Two normalization rules beyond ordinary
//! flattening/folding:
//!
//! * `cos(u)^k` with `|k| >= 2` is rewritten through `1 - sin(u)^2`, which
//!   makes trigonometric cancellations (rotations preserving `x dy - y dx`)
//!   structural;
//! * bump nodes fold to exact `0`/`1` whenever their argument provably sits on
//!   a plateau, either because it is constant or, under `restrict_to_band`,
//!   because interval bounds clear the ramp.
//!
//! Division is carried as inverse powers; an inverse power of a genuine sum is
//! held as an opaque normalized `Poly` factor rather than expanded.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::jets;
use crate::real::{self, R64};
use crate::rng::Rng;

pub(crate) type Rat = BigRational;

fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn rat_from_f64(x: f64) -> Rat {
    debug_assert!(x.is_finite());
    Rat::from_float(x).expect("finite float converts exactly to a rational")
}

fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Interned coordinate symbol.
#[derive(Clone, Debug)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(name: &str) -> Self {
        Sym(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Sym {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl Eq for Sym {}
impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}
impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}
impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Base {
    Var(Sym),
    Exp(Canon),
    Sin(Canon),
    Cos(Canon),
    Bump {
        order: u32,
        lo: R64,
        hi: R64,
        arg: Canon,
    },
    /// Normalized multi-term polynomial carried as an opaque base for inverse
    /// powers. The leading coefficient is always 1.
    Poly(Canon),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Factor {
    pub base: Base,
    pub exp: i32,
}

#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub coef: Rat,
    pub coef_f64: f64,
    pub factors: Vec<Factor>,
}

impl Term {
    fn new(coef: Rat, factors: Vec<Factor>) -> Self {
        let coef_f64 = rat_to_f64(&coef);
        Term {
            coef,
            coef_f64,
            factors,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.coef == other.coef
    }
}
impl Eq for Term {}
impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.factors
            .cmp(&other.factors)
            .then_with(|| self.coef.cmp(&other.coef))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub(crate) struct Canon {
    pub terms: Vec<Term>,
}

impl Canon {
    pub fn zero() -> Self {
        Canon { terms: vec![] }
    }

    pub fn one() -> Self {
        Canon::constant(rat_int(1))
    }

    pub fn constant(c: Rat) -> Self {
        if c.is_zero() {
            Canon::zero()
        } else {
            Canon {
                terms: vec![Term::new(c, vec![])],
            }
        }
    }

    pub fn var(s: Sym) -> Self {
        Canon {
            terms: vec![Term::new(
                rat_int(1),
                vec![Factor {
                    base: Base::Var(s),
                    exp: 1,
                }],
            )],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the expression is a plain constant (including zero).
    pub fn as_const(&self) -> Option<Rat> {
        match self.terms.as_slice() {
            [] => Some(Rat::zero()),
            [t] if t.factors.is_empty() => Some(t.coef.clone()),
            _ => None,
        }
    }

    fn normalized(terms: Vec<Term>) -> Canon {
        let mut rewritten: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coef.is_zero() {
                continue;
            }
            match rewrite_term(t) {
                RewriteOut::Clean(t) => rewritten.push(t),
                RewriteOut::Expanded(c) => rewritten.extend(c.terms),
            }
        }
        let mut terms = rewritten;
        terms.sort_by(|a, b| a.factors.cmp(&b.factors));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coef.is_zero() {
                continue;
            }
            match out.last_mut() {
                Some(prev) if prev.factors == t.factors => {
                    prev.coef += &t.coef;
                    prev.coef_f64 = rat_to_f64(&prev.coef);
                }
                _ => out.push(t),
            }
        }
        out.retain(|t| !t.coef.is_zero());
        Canon { terms: out }
    }

    pub fn add(&self, other: &Canon) -> Canon {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Canon::normalized(terms)
    }

    pub fn neg(&self) -> Canon {
        Canon {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(-t.coef.clone(), t.factors.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Canon) -> Canon {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Canon) -> Canon {
        let mut acc: Vec<Term> = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                acc.push(raw_mul_term(a, b));
            }
        }
        Canon::normalized(acc)
    }

    pub fn powi(&self, k: i32) -> Canon {
        if k == 0 {
            return Canon::one();
        }
        if let Some(c) = self.as_const() {
            return Canon::constant(c.pow(k));
        }
        if k > 0 {
            let mut acc = Canon::one();
            let mut base = self.clone();
            let mut n = k as u32;
            loop {
                if n & 1 == 1 {
                    acc = acc.mul(&base);
                }
                n >>= 1;
                if n == 0 {
                    break;
                }
                base = base.mul(&base);
            }
            return acc;
        }
        // Negative power: invert a single term directly, otherwise carry the
        // sum as a normalized Poly base.
        if self.terms.len() == 1 {
            let t = &self.terms[0];
            let coef = t.coef.pow(k);
            let factors = t
                .factors
                .iter()
                .map(|f| Factor {
                    base: f.base.clone(),
                    exp: f.exp * k,
                })
                .collect();
            return Canon::normalized(vec![Term::new(coef, factors)]);
        }
        poly_power(self, k)
    }
}

/// `poly^k` for a genuine sum, `k < 0`. The content is normalized so the
/// leading coefficient is 1; the scalar moves into the term coefficient.
fn poly_power(c: &Canon, k: i32) -> Canon {
    debug_assert!(k < 0 && c.terms.len() > 1);
    let lead = c.terms[0].coef.clone();
    let inv_lead = Canon::constant(rat_int(1) / lead.clone());
    let content = inv_lead.mul(c);
    // Poly bases never nest a single-term canon by construction here.
    Canon::normalized(vec![Term::new(
        lead.pow(k),
        vec![Factor {
            base: Base::Poly(content),
            exp: k,
        }],
    )])
}

/// Merge-sorted product of two terms, without trig rewriting.
fn raw_mul_term(a: &Term, b: &Term) -> Term {
    let mut factors = Vec::with_capacity(a.factors.len() + b.factors.len());
    let (mut i, mut j) = (0, 0);
    while i < a.factors.len() && j < b.factors.len() {
        match a.factors[i].base.cmp(&b.factors[j].base) {
            Ordering::Less => {
                factors.push(a.factors[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                factors.push(b.factors[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                let exp = a.factors[i].exp + b.factors[j].exp;
                if exp != 0 {
                    factors.push(Factor {
                        base: a.factors[i].base.clone(),
                        exp,
                    });
                }
                i += 1;
                j += 1;
            }
        }
    }
    factors.extend_from_slice(&a.factors[i..]);
    factors.extend_from_slice(&b.factors[j..]);
    Term::new(a.coef.clone() * b.coef.clone(), factors)
}

enum RewriteOut {
    Clean(Term),
    Expanded(Canon),
}

/// Canonical per-term rewrites:
/// * all exponential factors merge into one `exp` of the exponent-weighted
///   argument sum (so `exp(u)^2 = exp(2u)` and `exp(u) exp(-u) = 1`);
/// * `cos^k` with `|k| >= 2` is eliminated through `1 - sin^2`.
fn rewrite_term(term: Term) -> RewriteOut {
    let needs_exp = {
        let mut exps = 0;
        let mut scaled = false;
        for f in &term.factors {
            if matches!(f.base, Base::Exp(_)) {
                exps += 1;
                scaled |= f.exp != 1;
            }
        }
        exps > 1 || scaled
    };
    if needs_exp {
        let mut arg = Canon::zero();
        let mut rest = Vec::with_capacity(term.factors.len());
        for f in &term.factors {
            if let Base::Exp(u) = &f.base {
                arg = arg.add(&u.mul(&Canon::constant(rat_int(f.exp as i64))));
            } else {
                rest.push(f.clone());
            }
        }
        if !arg.is_zero() {
            let nf = Factor {
                base: Base::Exp(arg),
                exp: 1,
            };
            let at = rest
                .binary_search_by(|g| (&g.base, g.exp).cmp(&(&nf.base, nf.exp)))
                .unwrap_or_else(|e| e);
            rest.insert(at, nf);
        }
        return rewrite_term(Term::new(term.coef, rest));
    }
    let pos = term
        .factors
        .iter()
        .position(|f| matches!(f.base, Base::Cos(_)) && f.exp.abs() >= 2);
    let Some(pos) = pos else {
        return RewriteOut::Clean(term);
    };
    let f = term.factors[pos].clone();
    let Base::Cos(u) = &f.base else { unreachable!() };
    let half = f.exp.div_euclid(2);
    let rem = f.exp.rem_euclid(2); // 0 or 1, with cos^{2h+r}
    let mut rest_factors = term.factors.clone();
    rest_factors.remove(pos);
    if rem != 0 {
        // Keep a single cos, insert preserving sort order.
        let nf = Factor {
            base: f.base.clone(),
            exp: rem,
        };
        let at = rest_factors
            .binary_search_by(|g| g.base.cmp(&nf.base))
            .unwrap_or_else(|e| e);
        rest_factors.insert(at, nf);
    }
    let rest = Canon {
        terms: vec![Term::new(term.coef.clone(), rest_factors)],
    };
    let sin2 = Canon::var_like(Base::Sin(u.clone()), 2);
    let one_minus_sin2 = Canon::one().sub(&sin2);
    RewriteOut::Expanded(rest.mul(&one_minus_sin2.powi(half)))
}

impl Canon {
    fn var_like(base: Base, exp: i32) -> Canon {
        Canon {
            terms: vec![Term::new(rat_int(1), vec![Factor { base, exp }])],
        }
    }

    /// Sign of the leading coefficient; used to normalize trig arguments.
    fn lead_is_negative(&self) -> bool {
        self.terms
            .first()
            .map(|t| t.coef.is_negative())
            .unwrap_or(false)
    }
}

pub(crate) fn c_exp(u: &Canon) -> Canon {
    if u.is_zero() {
        return Canon::one();
    }
    Canon::var_like(Base::Exp(u.clone()), 1)
}

pub(crate) fn c_sin(u: &Canon) -> Canon {
    if u.is_zero() {
        return Canon::zero();
    }
    if u.lead_is_negative() {
        return Canon::var_like(Base::Sin(u.neg()), 1).neg();
    }
    Canon::var_like(Base::Sin(u.clone()), 1)
}

pub(crate) fn c_cos(u: &Canon) -> Canon {
    if u.is_zero() {
        return Canon::one();
    }
    if u.lead_is_negative() {
        return Canon::var_like(Base::Cos(u.neg()), 1);
    }
    Canon::var_like(Base::Cos(u.clone()), 1)
}

pub(crate) fn c_bump(arg: &Canon, lo: f64, hi: f64, order: u32) -> Canon {
    assert!(
        lo < hi && lo.is_finite() && hi.is_finite(),
        "bump requires finite lo < hi"
    );
    assert!(order <= jets::MAX_ORDER, "bump derivative order too high");
    if let Some(c) = arg.as_const() {
        let v = rat_to_f64(&c);
        if v <= lo {
            return Canon::zero();
        }
        if v >= hi {
            return if order == 0 { Canon::one() } else { Canon::zero() };
        }
    }
    Canon::var_like(
        Base::Bump {
            order,
            lo: R64::new(lo),
            hi: R64::new(hi),
            arg: arg.clone(),
        },
        1,
    )
}

fn d_base(base: &Base, var: &Sym) -> Canon {
    match base {
        Base::Var(s) => {
            if s == var {
                Canon::one()
            } else {
                Canon::zero()
            }
        }
        Base::Exp(u) => c_exp(u).mul(&d_canon(u, var)),
        Base::Sin(u) => c_cos(u).mul(&d_canon(u, var)),
        Base::Cos(u) => c_sin(u).neg().mul(&d_canon(u, var)),
        Base::Bump { order, lo, hi, arg } => {
            c_bump(arg, lo.0, hi.0, order + 1).mul(&d_canon(arg, var))
        }
        Base::Poly(c) => d_canon(c, var),
    }
}

pub(crate) fn d_canon(c: &Canon, var: &Sym) -> Canon {
    let mut acc = Canon::zero();
    for t in &c.terms {
        for (i, f) in t.factors.iter().enumerate() {
            let db = d_base(&f.base, var);
            if db.is_zero() {
                continue;
            }
            // coef * exp * base^{exp-1} * (other factors) * d(base)
            let mut factors: Vec<Factor> = Vec::with_capacity(t.factors.len());
            for (j, g) in t.factors.iter().enumerate() {
                if j == i {
                    if f.exp != 1 {
                        factors.push(Factor {
                            base: g.base.clone(),
                            exp: f.exp - 1,
                        });
                    }
                } else {
                    factors.push(g.clone());
                }
            }
            let stub = Canon::normalized(vec![Term::new(
                t.coef.clone() * rat_int(f.exp as i64),
                factors,
            )]);
            acc = acc.add(&stub.mul(&db));
        }
    }
    acc
}

pub(crate) fn subst_canon(c: &Canon, map: &BTreeMap<Sym, Canon>) -> Canon {
    let mut acc = Canon::zero();
    for t in &c.terms {
        let mut prod = Canon::constant(t.coef.clone());
        for f in &t.factors {
            let base = match &f.base {
                Base::Var(s) => match map.get(s) {
                    Some(r) => r.clone(),
                    None => Canon::var(s.clone()),
                },
                Base::Exp(u) => c_exp(&subst_canon(u, map)),
                Base::Sin(u) => c_sin(&subst_canon(u, map)),
                Base::Cos(u) => c_cos(&subst_canon(u, map)),
                Base::Bump { order, lo, hi, arg } => {
                    c_bump(&subst_canon(arg, map), lo.0, hi.0, *order)
                }
                Base::Poly(p) => subst_canon(p, map),
            };
            prod = prod.mul(&base.powi(f.exp));
        }
        acc = acc.add(&prod);
    }
    acc
}

fn eval_base(base: &Base, env: &dyn Fn(&str) -> Option<f64>) -> Result<f64, Sym> {
    match base {
        Base::Var(s) => env(s.as_str()).ok_or_else(|| s.clone()),
        Base::Exp(u) => Ok(real::exp(eval_canon(u, env)?)),
        Base::Sin(u) => Ok(real::sin(eval_canon(u, env)?)),
        Base::Cos(u) => Ok(real::cos(eval_canon(u, env)?)),
        Base::Bump { order, lo, hi, arg } => {
            Ok(jets::bump_deriv(*order, lo.0, hi.0, eval_canon(arg, env)?))
        }
        Base::Poly(c) => eval_canon(c, env),
    }
}

pub(crate) fn eval_canon(c: &Canon, env: &dyn Fn(&str) -> Option<f64>) -> Result<f64, Sym> {
    let mut sum = 0.0;
    for t in &c.terms {
        let mut prod = t.coef_f64;
        for f in &t.factors {
            prod *= real::powi(eval_base(&f.base, env)?, f.exp);
        }
        sum += prod;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// interval arithmetic
// ---------------------------------------------------------------------------

pub type Interval = [f64; 2];

fn imul(a: Interval, b: Interval) -> Interval {
    let c = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    let mut lo = c[0];
    let mut hi = c[0];
    for &x in &c[1..] {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    [lo, hi]
}

fn ipow(a: Interval, k: i32) -> Option<Interval> {
    if k == 0 {
        return Some([1.0, 1.0]);
    }
    let base = if k < 0 {
        if a[0] <= 0.0 && a[1] >= 0.0 {
            return None;
        }
        [1.0 / a[1], 1.0 / a[0]]
    } else {
        a
    };
    let mut acc = [1.0, 1.0];
    for _ in 0..k.unsigned_abs() {
        acc = imul(acc, base);
    }
    // Tighten even powers that straddle zero.
    if k > 0 && k % 2 == 0 && a[0] <= 0.0 && a[1] >= 0.0 {
        acc[0] = 0.0;
    }
    Some(acc)
}

fn ival_base(base: &Base, env: &dyn Fn(&str) -> Option<Interval>) -> Option<Interval> {
    match base {
        Base::Var(s) => env(s.as_str()),
        Base::Exp(u) => {
            let v = ival_canon(u, env)?;
            Some([real::exp(v[0]), real::exp(v[1])])
        }
        Base::Sin(_) | Base::Cos(_) => Some([-1.0, 1.0]),
        Base::Bump { order, lo, hi, arg } => {
            let v = ival_canon(arg, env)?;
            if *order == 0 {
                Some([
                    jets::bump_deriv(0, lo.0, hi.0, v[0]),
                    jets::bump_deriv(0, lo.0, hi.0, v[1]),
                ])
            } else if v[1] <= lo.0 || v[0] >= hi.0 {
                Some([0.0, 0.0])
            } else {
                let b = jets::bump_deriv_bound(*order, lo.0, hi.0);
                Some([-b, b])
            }
        }
        Base::Poly(c) => ival_canon(c, env),
    }
}

pub(crate) fn ival_canon(c: &Canon, env: &dyn Fn(&str) -> Option<Interval>) -> Option<Interval> {
    let mut sum = [0.0, 0.0];
    for t in &c.terms {
        let mut prod = [t.coef_f64, t.coef_f64];
        for f in &t.factors {
            let b = ival_base(&f.base, env)?;
            prod = imul(prod, ipow(b, f.exp)?);
        }
        sum = [sum[0] + prod[0], sum[1] + prod[1]];
    }
    Some(sum)
}

/// Rebuild an expression folding every bump whose argument interval clears a
/// plateau under the given variable bounds.
pub(crate) fn restrict_canon(c: &Canon, env: &dyn Fn(&str) -> Option<Interval>) -> Canon {
    let mut acc = Canon::zero();
    for t in &c.terms {
        let mut prod = Canon::constant(t.coef.clone());
        for f in &t.factors {
            let base = match &f.base {
                Base::Var(s) => Canon::var(s.clone()),
                Base::Exp(u) => c_exp(&restrict_canon(u, env)),
                Base::Sin(u) => c_sin(&restrict_canon(u, env)),
                Base::Cos(u) => c_cos(&restrict_canon(u, env)),
                Base::Bump { order, lo, hi, arg } => {
                    let arg2 = restrict_canon(arg, env);
                    match ival_canon(&arg2, env) {
                        Some(v) if v[1] <= lo.0 => Canon::zero(),
                        Some(v) if v[0] >= hi.0 => {
                            if *order == 0 {
                                Canon::one()
                            } else {
                                Canon::zero()
                            }
                        }
                        _ => c_bump(&arg2, lo.0, hi.0, *order),
                    }
                }
                Base::Poly(p) => restrict_canon(p, env),
            };
            prod = prod.mul(&base.powi(f.exp));
        }
        acc = acc.add(&prod);
    }
    acc
}

fn vars_base(base: &Base, out: &mut BTreeSet<Sym>) {
    match base {
        Base::Var(s) => {
            out.insert(s.clone());
        }
        Base::Exp(u) | Base::Sin(u) | Base::Cos(u) | Base::Poly(u) => vars_canon(u, out),
        Base::Bump { arg, .. } => vars_canon(arg, out),
    }
}

pub(crate) fn vars_canon(c: &Canon, out: &mut BTreeSet<Sym>) {
    for t in &c.terms {
        for f in &t.factors {
            vars_base(&f.base, out);
        }
    }
}

// ---------------------------------------------------------------------------
// public wrapper
// ---------------------------------------------------------------------------

/// A smooth closed-form scalar function of named coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScalarExpr {
    pub(crate) canon: Canon,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        ScalarExpr {
            canon: Canon::zero(),
        }
    }

    pub fn one() -> Self {
        ScalarExpr { canon: Canon::one() }
    }

    pub fn constant(c: f64) -> Self {
        assert!(c.is_finite(), "expression constants must be finite");
        ScalarExpr {
            canon: Canon::constant(rat_from_f64(c)),
        }
    }

    /// Exact rational constant `num/den`.
    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0);
        ScalarExpr {
            canon: Canon::constant(rat_int(num) / rat_int(den)),
        }
    }

    pub fn var(name: &str) -> Self {
        ScalarExpr {
            canon: Canon::var(Sym::new(name)),
        }
    }

    pub fn powi(&self, k: i32) -> Self {
        ScalarExpr {
            canon: self.canon.powi(k),
        }
    }

    pub fn exp(&self) -> Self {
        ScalarExpr {
            canon: c_exp(&self.canon),
        }
    }

    pub fn sin(&self) -> Self {
        ScalarExpr {
            canon: c_sin(&self.canon),
        }
    }

    pub fn cos(&self) -> Self {
        ScalarExpr {
            canon: c_cos(&self.canon),
        }
    }

    /// Smooth plateau: identically 0 for `arg <= lo`, identically 1 for
    /// `arg >= hi`.
    pub fn bump(arg: &ScalarExpr, lo: f64, hi: f64) -> Self {
        ScalarExpr {
            canon: c_bump(&arg.canon, lo, hi, 0),
        }
    }

    /// Exact partial derivative. Closed on the grammar.
    pub fn partial(&self, var: &str) -> Self {
        ScalarExpr {
            canon: d_canon(&self.canon, &Sym::new(var)),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<Sym, ScalarExpr>) -> Self {
        let inner: BTreeMap<Sym, Canon> = map
            .iter()
            .map(|(k, v)| (k.clone(), v.canon.clone()))
            .collect();
        ScalarExpr {
            canon: subst_canon(&self.canon, &inner),
        }
    }

    /// Evaluate with a variable resolver. Unknown variables error.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<f64>) -> crate::error::Result<f64> {
        eval_canon(&self.canon, env)
            .map_err(|s| crate::error::Error::UnknownCoordinate(s.as_str().to_owned()))
    }

    /// Interval bound under per-variable ranges; `None` when unbounded.
    pub fn eval_interval(&self, env: &dyn Fn(&str) -> Option<Interval>) -> Option<Interval> {
        ival_canon(&self.canon, env)
    }

    /// Fold bump plateaus provable from the variable bounds; other structure
    /// is untouched. Used for structural identities that hold on a band.
    pub fn restrict_to_band(&self, env: &dyn Fn(&str) -> Option<Interval>) -> Self {
        ScalarExpr {
            canon: restrict_canon(&self.canon, env),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.canon.is_zero()
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.canon.as_const().map(|c| rat_to_f64(&c))
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        vars_canon(&self.canon, &mut out);
        out
    }

    /// `Some(r)` if `self == r * other` structurally for a single constant.
    pub fn ratio_to(&self, other: &ScalarExpr) -> Option<f64> {
        if other.canon.is_zero() {
            return None;
        }
        if self.canon.is_zero() {
            return Some(0.0);
        }
        if self.canon.terms.len() != other.canon.terms.len() {
            return None;
        }
        let r = &self.canon.terms[0].coef / &other.canon.terms[0].coef;
        for (a, b) in self.canon.terms.iter().zip(other.canon.terms.iter()) {
            if a.factors != b.factors || a.coef != b.coef.clone() * r.clone() {
                return None;
            }
        }
        Some(rat_to_f64(&r))
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn fmt_canon(c: &Canon, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.terms.is_empty() {
        return f.write_str("0");
    }
    for (i, t) in c.terms.iter().enumerate() {
        if i > 0 {
            f.write_str(if t.coef.is_negative() { " - " } else { " + " })?;
        } else if t.coef.is_negative() {
            f.write_str("-")?;
        }
        let mag = t.coef.abs();
        let one = mag == rat_int(1);
        if !one || t.factors.is_empty() {
            if mag.is_integer() {
                write!(f, "{}", mag.numer())?;
            } else {
                write!(f, "{}/{}", mag.numer(), mag.denom())?;
            }
            if !t.factors.is_empty() {
                f.write_str("*")?;
            }
        }
        for (j, fac) in t.factors.iter().enumerate() {
            if j > 0 {
                f.write_str("*")?;
            }
            fmt_base(&fac.base, f)?;
            if fac.exp != 1 {
                write!(f, "^{}", fac.exp)?;
            }
        }
    }
    Ok(())
}

fn fmt_base(b: &Base, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        Base::Var(s) => f.write_str(s.as_str()),
        Base::Exp(u) => {
            f.write_str("exp(")?;
            fmt_canon(u, f)?;
            f.write_str(")")
        }
        Base::Sin(u) => {
            f.write_str("sin(")?;
            fmt_canon(u, f)?;
            f.write_str(")")
        }
        Base::Cos(u) => {
            f.write_str("cos(")?;
            fmt_canon(u, f)?;
            f.write_str(")")
        }
        Base::Bump { order, lo, hi, arg } => {
            if *order == 0 {
                f.write_str("bump(")?;
            } else {
                write!(f, "bump'{order}(")?;
            }
            fmt_canon(arg, f)?;
            write!(f, "; {}, {})", lo.0, hi.0)
        }
        Base::Poly(c) => {
            f.write_str("(")?;
            fmt_canon(c, f)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_canon(&self.canon, f)
    }
}

// operator impls ------------------------------------------------------------

macro_rules! binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl core::ops::$trait for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr {
                    canon: self.canon.$inner(&rhs.canon),
                }
            }
        }
        impl core::ops::$trait for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                (&self).$method(&rhs)
            }
        }
        impl core::ops::$trait<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                (&self).$method(rhs)
            }
        }
        impl core::ops::$trait<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);

impl core::ops::Div for &ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: &ScalarExpr) -> ScalarExpr {
        assert!(!rhs.canon.is_zero(), "division by structural zero");
        if let Some(r) = self.ratio_to(rhs) {
            return ScalarExpr::constant(r);
        }
        ScalarExpr {
            canon: self.canon.mul(&rhs.canon.powi(-1)),
        }
    }
}
impl core::ops::Div for ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: ScalarExpr) -> ScalarExpr {
        &self / &rhs
    }
}
impl core::ops::Div<&ScalarExpr> for ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: &ScalarExpr) -> ScalarExpr {
        &self / rhs
    }
}
impl core::ops::Div<ScalarExpr> for &ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: ScalarExpr) -> ScalarExpr {
        self / &rhs
    }
}

impl core::ops::Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr {
            canon: self.canon.neg(),
        }
    }
}
impl core::ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -&self
    }
}

// ---------------------------------------------------------------------------
// zero verdicts
// ---------------------------------------------------------------------------

/// Outcome of an exact-zero query. Structural zero is a proof; a numeric probe
/// alone never certifies zero.
#[derive(Clone, Debug, PartialEq)]
pub enum ZeroVerdict {
    StructuralZero,
    NonZero { witness: Vec<(Sym, f64)>, value: f64 },
    NotProvablyZero { max_abs: f64 },
}

/// Structural zero check with a randomized 64-point numeric safety net over
/// the given variable ranges.
pub fn zero_verdict(e: &ScalarExpr, ranges: &[(Sym, f64, f64)], seed: u64) -> ZeroVerdict {
    if e.is_zero() {
        return ZeroVerdict::StructuralZero;
    }
    let mut rng = Rng::new(seed);
    let mut max_abs = 0.0f64;
    for _ in 0..64 {
        let sample: Vec<(Sym, f64)> = ranges
            .iter()
            .map(|(s, lo, hi)| (s.clone(), rng.range(*lo, *hi)))
            .collect();
        let v = e
            .eval(&|name| {
                sample
                    .iter()
                    .find(|(s, _)| s.as_str() == name)
                    .map(|(_, v)| *v)
            })
            .unwrap_or(f64::NAN);
        if !v.is_finite() || real::abs(v) > 1e-9 {
            return ZeroVerdict::NonZero {
                witness: sample,
                value: v,
            };
        }
        max_abs = max_abs.max(real::abs(v));
    }
    ZeroVerdict::NotProvablyZero { max_abs }
}
