//! Pointwise derivatives of the standard mollifier step.
//!
//! The step is `rho(u) = E(u) / (E(u) + E(1-u))` with `E(u) = exp(-1/u)` for
//! `u > 0` and `0` otherwise. `bump(s; lo, hi)` rescales `rho` onto `[lo, hi]`:
//! identically 0 for `s <= lo`, identically 1 for `s >= hi`, strictly
//! increasing in between, and C-infinity everywhere. Derivatives of any order
//! are obtained from truncated Taylor (jet) arithmetic rather than symbolic
//! closed forms, which keeps the expression grammar closed: the k-th
//! derivative of the bump is its own grammar node and is evaluated here.
//! The jets live in fixed-size stack arrays so sweep evaluations stay
//! allocation-free.

use crate::real;

pub(crate) const MAX_ORDER: u32 = 12;
const W: usize = MAX_ORDER as usize + 1;

type Jet = [f64; W];

/// Truncated Taylor series of 1/(series), first `n` coefficients.
fn jet_recip(a: &Jet, n: usize) -> Jet {
    let mut r = [0.0; W];
    r[0] = 1.0 / a[0];
    for k in 1..n {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += a[j] * r[k - j];
        }
        r[k] = -acc / a[0];
    }
    r
}

/// Truncated Taylor series of exp(series).
fn jet_exp(a: &Jet, n: usize) -> Jet {
    let mut e = [0.0; W];
    e[0] = real::exp(a[0]);
    for k in 1..n {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * a[j] * e[k - j];
        }
        e[k] = acc / k as f64;
    }
    e
}

fn jet_mul(a: &Jet, b: &Jet, n: usize) -> Jet {
    let mut c = [0.0; W];
    for i in 0..n {
        for j in 0..n - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

/// Jet of E(u) = exp(-1/u) at u0 > 0.
fn jet_mollifier(u0: f64, n: usize) -> Jet {
    // exp(-1/u) underflows to an exact zero jet well before 1/u overflows.
    if u0 <= 0.0 || 1.0 / u0 > 700.0 {
        return [0.0; W];
    }
    let mut u = [0.0; W];
    u[0] = u0;
    if n > 1 {
        u[1] = 1.0;
    }
    let inv = jet_recip(&u, n);
    let mut neg = [0.0; W];
    for k in 0..n {
        neg[k] = -inv[k];
    }
    jet_exp(&neg, n)
}

/// Jet of rho(u) at u0 in (0, 1).
fn jet_rho(u0: f64, n: usize) -> Jet {
    let e1 = jet_mollifier(u0, n);
    // E(1-u): flip the sign of odd-order coefficients (chain rule for u -> 1-u).
    let mut e2 = jet_mollifier(1.0 - u0, n);
    for (k, c) in e2.iter_mut().enumerate().take(n) {
        if k % 2 == 1 {
            *c = -*c;
        }
    }
    let mut den = [0.0; W];
    for k in 0..n {
        den[k] = e1[k] + e2[k];
    }
    jet_mul(&e1, &jet_recip(&den, n), n)
}

/// Direct value and first derivative of rho, allocation- and loop-free;
/// these two orders dominate grid sweeps.
fn rho_fast(u: f64, order: u32) -> f64 {
    let e1 = if 1.0 / u > 700.0 { 0.0 } else { real::exp(-1.0 / u) };
    let v = 1.0 - u;
    let e2 = if 1.0 / v > 700.0 { 0.0 } else { real::exp(-1.0 / v) };
    let den = e1 + e2;
    if order == 0 {
        return e1 / den;
    }
    // rho' = (e1' e2 - e1 e2') / den^2 with e1' = e1/u^2, e2' = -e2/v^2
    let d1 = if e1 == 0.0 { 0.0 } else { e1 / (u * u) };
    let d2 = if e2 == 0.0 { 0.0 } else { -e2 / (v * v) };
    (d1 * e2 - e1 * d2) / (den * den)
}

/// `order`-th derivative of `bump(s; lo, hi)` at `s`. Order 0 is the bump
/// itself. Exact 0.0 / 1.0 on the plateaus, including the endpoints.
pub(crate) fn bump_deriv(order: u32, lo: f64, hi: f64, s: f64) -> f64 {
    debug_assert!(hi > lo);
    debug_assert!(order <= MAX_ORDER);
    if s <= lo {
        return 0.0;
    }
    if s >= hi {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let width = hi - lo;
    let u0 = (s - lo) / width;
    if order == 0 {
        return rho_fast(u0, 0);
    }
    if order == 1 {
        return rho_fast(u0, 1) / width;
    }
    let n = order as usize + 1;
    let jet = jet_rho(u0, n);
    // d^k/ds^k = (1/width)^k d^k/du^k, and the k-th Taylor coefficient is
    // f^(k)/k!.
    let mut fact = 1.0;
    for i in 1..=order as u64 {
        fact *= i as f64;
    }
    jet[order as usize] * fact * real::powi(1.0 / width, order as i32)
}

/// Crude global bound for |bump^(order)| over the ramp, used by interval
/// arithmetic. Dense sweep with a safety factor; adequate at desk scale.
pub(crate) fn bump_deriv_bound(order: u32, lo: f64, hi: f64) -> f64 {
    if order == 0 {
        return 1.0;
    }
    let mut max = 0.0f64;
    let n = 2001;
    for i in 0..n {
        let s = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
        max = max.max(real::abs(bump_deriv(order, lo, hi, s)));
    }
    max * 1.25
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_are_exact() {
        assert_eq!(bump_deriv(0, -1.0, 1.0, -1.0), 0.0);
        assert_eq!(bump_deriv(0, -1.0, 1.0, -2.5), 0.0);
        assert_eq!(bump_deriv(0, -1.0, 1.0, 1.0), 1.0);
        assert_eq!(bump_deriv(0, -1.0, 1.0, 7.0), 1.0);
        for order in 1..=4 {
            assert_eq!(bump_deriv(order, -1.0, 1.0, -1.0), 0.0);
            assert_eq!(bump_deriv(order, -1.0, 1.0, 1.0), 0.0);
        }
    }

    #[test]
    fn midpoint_is_half_and_symmetric() {
        let v = bump_deriv(0, 0.0, 1.0, 0.5);
        assert!((v - 0.5).abs() < 1e-14);
        for &s in &[0.1, 0.2, 0.3, 0.45] {
            let a = bump_deriv(0, 0.0, 1.0, s);
            let b = bump_deriv(0, 0.0, 1.0, 1.0 - s);
            assert!((a + b - 1.0).abs() < 1e-13, "rho({s}) + rho(1-{s}) != 1");
        }
    }

    #[test]
    fn fast_first_derivative_matches_jet_route() {
        for &s in &[0.1, 0.25, 0.5, 0.66, 0.93] {
            let fast = bump_deriv(1, 0.0, 1.0, s);
            let jet = {
                let j = jet_rho(s, 2);
                j[1]
            };
            assert!((fast - jet).abs() < 1e-13 * jet.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for &s in &[0.15, 0.3, 0.5, 0.7, 0.9] {
            for order in 1..=3u32 {
                let fd = (bump_deriv(order - 1, 0.0, 1.0, s + h)
                    - bump_deriv(order - 1, 0.0, 1.0, s - h))
                    / (2.0 * h);
                let jet = bump_deriv(order, 0.0, 1.0, s);
                assert!(
                    (fd - jet).abs() < 1e-5 * jet.abs().max(1.0),
                    "order {order} at {s}: fd {fd} vs jet {jet}"
                );
            }
        }
    }

    #[test]
    fn rescaled_chain_rule() {
        // bump on [2, 6] is rho((s-2)/4); derivative picks up 1/4.
        let s = 3.7;
        let a = bump_deriv(1, 2.0, 6.0, s);
        let b = bump_deriv(1, 0.0, 1.0, (s - 2.0) / 4.0) / 4.0;
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn bound_dominates_samples() {
        let bound = bump_deriv_bound(2, 0.0, 1.0);
        for i in 0..500 {
            let s = (i as f64 + 0.5) / 500.0;
            assert!(bump_deriv(2, 0.0, 1.0, s).abs() <= bound);
        }
    }
}
