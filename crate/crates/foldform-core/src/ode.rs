//! Embedded Dormand-Prince 5(4) integration with adaptive step control, plus
//! a fixed-step drive used by the order-measurement tests.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real;

/// Autonomous right-hand side on a flat state vector.
pub trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> Rhs for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.1)(y, dy)
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
}

pub struct Integrator<'a, R: Rhs + ?Sized> {
    rhs: &'a R,
    pub tol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl<'a, R: Rhs + ?Sized> Integrator<'a, R> {
    pub fn new(rhs: &'a R, tol: f64) -> Self {
        Integrator {
            rhs,
            tol,
            h_max: 0.2,
            h_min: 1e-13,
        }
    }

    /// One embedded step from `y` with size `h`; returns (y5, error_norm).
    fn step(&self, y: &[f64], h: f64, k0: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = y.len();
        let mut k = vec![vec![0.0; n]; 7];
        k[0].copy_from_slice(k0);
        let mut stage = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            self.rhs.eval(&stage, &mut tail[0])?;
        }
        let mut y5 = vec![0.0; n];
        let mut err = 0.0f64;
        for i in 0..n {
            let mut v5 = 0.0;
            let mut v4 = 0.0;
            for s in 0..7 {
                v5 += B5[s] * k[s][i];
                v4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * v5;
            let sc = self.tol * (1.0 + real::abs(y[i]));
            let e = h * (v5 - v4) / sc;
            err += e * e;
        }
        Ok((y5, real::sqrt(err / n as f64)))
    }

    /// Integrate from `y0` over `[0, t_end]`, invoking `observe(t, y)` after
    /// the initial state and every accepted step.
    pub fn drive(
        &self,
        y0: &[f64],
        t_end: f64,
        observe: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<StepStats> {
        let mut y = y0.to_vec();
        let mut t = 0.0;
        let mut h = (self.h_max / 8.0).min(t_end.max(1e-6));
        let mut stats = StepStats {
            accepted: 0,
            rejected: 0,
        };
        observe(t, &y);
        let n = y.len();
        let mut k0 = vec![0.0; n];
        self.rhs.eval(&y, &mut k0)?;
        while t < t_end {
            let remaining = t_end - t;
            if remaining <= self.h_min.max(1e-14 * t_end.abs()) {
                break;
            }
            h = h.min(remaining).min(self.h_max);
            if h < self.h_min {
                return Err(Error::FlowFailure("step size underflow".to_string()));
            }
            let (y5, err) = self.step(&y, h, &k0)?;
            if !y5.iter().all(|v| v.is_finite()) {
                return Err(Error::FlowFailure("non-finite state".to_string()));
            }
            if err <= 1.0 {
                t += h;
                y = y5;
                self.rhs.eval(&y, &mut k0)?;
                observe(t, &y);
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
            let fac = if err > 0.0 {
                0.9 * libm::pow(err, -0.2)
            } else {
                5.0
            };
            h *= fac.clamp(0.2, 5.0);
        }
        Ok(stats)
    }

    /// Convenience: final state only.
    pub fn solve(&self, y0: &[f64], t_end: f64) -> Result<Vec<f64>> {
        let mut last = y0.to_vec();
        self.drive(y0, t_end, &mut |_, y| last.copy_from_slice(y))?;
        Ok(last)
    }

    /// Fixed-step drive with `steps` equal steps of the fifth-order scheme;
    /// used to measure convergence order.
    pub fn solve_fixed(&self, y0: &[f64], t_end: f64, steps: usize) -> Result<Vec<f64>> {
        let mut y = y0.to_vec();
        let h = t_end / steps as f64;
        let n = y.len();
        let mut k0 = vec![0.0; n];
        for _ in 0..steps {
            self.rhs.eval(&y, &mut k0)?;
            let (y5, _) = self.step(&y, h, &k0)?;
            y = y5;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Circle;
    impl Rhs for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[1];
            dy[1] = y[0];
            Ok(())
        }
    }

    #[test]
    fn full_turn_returns_to_start() {
        let integ = Integrator::new(&Circle, 1e-10);
        let y = integ.solve(&[1.0, 0.0], real::TWO_PI).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8, "{y:?}");
        assert!(y[1].abs() < 1e-8);
    }

    #[test]
    fn tighter_tolerance_means_smaller_error() {
        let loose = Integrator::new(&Circle, 1e-6)
            .solve(&[1.0, 0.0], real::TWO_PI)
            .unwrap();
        let tight = Integrator::new(&Circle, 1e-12)
            .solve(&[1.0, 0.0], real::TWO_PI)
            .unwrap();
        let e_loose = ((loose[0] - 1.0).powi(2) + loose[1].powi(2)).sqrt();
        let e_tight = ((tight[0] - 1.0).powi(2) + tight[1].powi(2)).sqrt();
        assert!(e_tight < e_loose);
    }

    #[test]
    fn fixed_step_order_is_about_five() {
        let integ = Integrator::new(&Circle, 1e-10);
        let mut errs = alloc::vec![];
        for &steps in &[60usize, 120, 240, 480] {
            let y = integ.solve_fixed(&[1.0, 0.0], real::TWO_PI, steps).unwrap();
            let e = ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt();
            errs.push((real::TWO_PI / steps as f64, e));
        }
        // least-squares slope of log err vs log h
        let lx: alloc::vec::Vec<f64> = errs.iter().map(|(h, _)| libm::log(*h)).collect();
        let ly: alloc::vec::Vec<f64> = errs.iter().map(|(_, e)| libm::log(*e)).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let slope = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!(slope > 4.0, "measured order {slope}");
    }

    #[test]
    fn zero_field_is_exact() {
        struct Still;
        impl Rhs for Still {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, _y: &[f64], dy: &mut [f64]) -> Result<()> {
                dy.fill(0.0);
                Ok(())
            }
        }
        let integ = Integrator::new(&Still, 1e-10);
        let y = integ.solve(&[0.3, -0.7, 2.0], 1.0).unwrap();
        assert_eq!(y, alloc::vec![0.3, -0.7, 2.0]);
    }
}
