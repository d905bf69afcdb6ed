//! Thin wrappers over `libm` so the crate builds without `std` and produces
//! bit-identical transcendentals on every platform.

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub(crate) fn hypot_slice(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

pub(crate) fn powi(x: f64, k: i32) -> f64 {
    let mut base = if k < 0 { 1.0 / x } else { x };
    let mut n = k.unsigned_abs();
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

pub const TWO_PI: f64 = core::f64::consts::TAU;

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut r = theta - TWO_PI * floor(theta / TWO_PI);
    if r >= TWO_PI {
        r -= TWO_PI;
    }
    if r < 0.0 {
        r += TWO_PI;
    }
    r
}

/// Signed circular distance in `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = wrap_angle(a - b);
    if d > core::f64::consts::PI {
        d -= TWO_PI;
    }
    d
}

/// Total-order wrapper so `f64` can sit inside `Ord` keys. Construction
/// asserts the value is finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct R64(pub f64);

impl R64 {
    pub fn new(x: f64) -> Self {
        debug_assert!(x.is_finite(), "R64 requires a finite value");
        R64(x)
    }
}

impl Eq for R64 {}

impl PartialOrd for R64 {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for R64 {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_naive() {
        for k in -6i32..=6 {
            let x = 1.37_f64;
            let mut expect = 1.0;
            for _ in 0..k.abs() {
                expect *= x;
            }
            if k < 0 {
                expect = 1.0 / expect;
            }
            assert!((powi(x, k) - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn wrap_angle_range() {
        for &t in &[-13.0, -0.1, 0.0, 3.0, 6.4, 100.0] {
            let w = wrap_angle(t);
            assert!((0.0..TWO_PI).contains(&w), "{t} wrapped to {w}");
            assert!(sin(w - t).abs() < 1e-9);
        }
    }
}
