//! Deterministic sampling: a SplitMix64 stream for pseudo-random draws and a
//! Halton sequence for quasi-random audit grids. Both are seed-stable across
//! platforms, which keeps every report byte-reproducible.

/// SplitMix64 pseudo-random generator.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(hi > lo);
        lo + (self.next_u64() % (hi - lo) as u64) as i64
    }
}

const HALTON_PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical-inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut frac = 1.0 / base as f64;
    while index > 0 {
        inv += (index % base) as f64 * frac;
        index /= base;
        frac /= base as f64;
    }
    inv
}

/// `point`-th element of the `dim`-dimensional Halton sequence, in `[0,1)^dim`.
/// The first 20 elements are skipped to avoid the degenerate prefix.
pub fn halton(point: usize, dim: usize, out: &mut [f64]) {
    debug_assert!(dim <= HALTON_PRIMES.len());
    let idx = (point + 21) as u64;
    for (d, slot) in out.iter_mut().take(dim).enumerate() {
        *slot = radical_inverse(idx, HALTON_PRIMES[d]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_seed_stable() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::new(7);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn halton_covers_box() {
        let mut mins = [1.0f64; 3];
        let mut maxs = [0.0f64; 3];
        let mut p = [0.0f64; 3];
        for i in 0..512 {
            halton(i, 3, &mut p);
            for d in 0..3 {
                mins[d] = mins[d].min(p[d]);
                maxs[d] = maxs[d].max(p[d]);
            }
        }
        for d in 0..3 {
            assert!(mins[d] < 0.05 && maxs[d] > 0.95);
        }
    }
}
