//! Small dense linear algebra over f64: LU with partial pivoting, solves,
//! determinants, Pfaffians, and Gram-Schmidt frames. Dimensions here are at
//! most a chart dimension (<= 8), so simplicity beats cleverness.

use alloc::vec;
use alloc::vec::Vec;

use crate::real;

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Mat::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            debug_assert_eq!(r.len(), n);
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

/// LU factorization with partial pivoting, kept packed.
pub struct Lu {
    lu: Mat,
    piv: Vec<usize>,
    pub sign: f64,
    /// Ratio of largest to smallest absolute pivot; crude conditioning gauge.
    pub pivot_ratio: f64,
}

impl Lu {
    pub fn factor(m: &Mat) -> Option<Lu> {
        let n = m.n;
        let mut lu = m.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut min_piv = f64::INFINITY;
        let mut max_piv = 0.0f64;
        for k in 0..n {
            let mut p = k;
            let mut best = real::abs(lu[(k, k)]);
            for i in k + 1..n {
                let v = real::abs(lu[(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                piv.swap(k, p);
                sign = -sign;
            }
            min_piv = min_piv.min(best);
            max_piv = max_piv.max(best);
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Some(Lu {
            lu,
            piv,
            sign,
            pivot_ratio: if min_piv > 0.0 { max_piv / min_piv } else { f64::INFINITY },
        })
    }

    pub fn det(&self) -> f64 {
        let mut d = self.sign;
        for i in 0..self.lu.n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

pub fn det(m: &Mat) -> f64 {
    match Lu::factor(m) {
        Some(lu) => lu.det(),
        None => 0.0,
    }
}

/// Pfaffian of an antisymmetric matrix of even dimension, by recursive
/// expansion along the first row. Dimensions are tiny (<= 8).
pub fn pfaffian(m: &Mat) -> f64 {
    let n = m.n;
    debug_assert!(n.is_multiple_of(2));
    if n == 0 {
        return 1.0;
    }
    if n == 2 {
        return m[(0, 1)];
    }
    let mut acc = 0.0;
    for j in 1..n {
        let v = m[(0, j)];
        if v == 0.0 {
            continue;
        }
        // strike rows/cols 0 and j
        let keep: Vec<usize> = (1..n).filter(|&i| i != j).collect();
        let mut sub = Mat::zeros(n - 2);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &k) in keep.iter().enumerate() {
                sub[(r, c)] = m[(i, k)];
            }
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * v * pfaffian(&sub);
    }
    acc
}

/// `omega^n` evaluated on 2n frame vectors, given the pairing matrix
/// `omega[(i,j)] = omega(v_i, v_j)`: equals `n! * Pf(omega)`.
pub fn two_form_power(omega: &Mat) -> f64 {
    let n = omega.n / 2;
    let mut fact = 1.0;
    for i in 1..=n as u64 {
        fact *= i as f64;
    }
    fact * pfaffian(omega)
}

/// `(a ^ omega^n)` evaluated on 2n+1 frame vectors, from the values
/// `a[j] = a(v_j)` and the pairing matrix of `omega` on the same frame.
pub fn one_wedge_two_power(a: &[f64], omega: &Mat) -> f64 {
    let m = a.len();
    debug_assert_eq!(omega.n, m);
    debug_assert!(m % 2 == 1);
    let mut acc = 0.0;
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        let keep: Vec<usize> = (0..m).filter(|&i| i != j).collect();
        let mut sub = Mat::zeros(m - 1);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &k) in keep.iter().enumerate() {
                sub[(r, c)] = omega[(i, k)];
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * aj * two_form_power(&sub);
    }
    acc
}

/// Gram-Schmidt orthonormalization of `vectors` against the already
/// orthonormal `fixed` set, in order, dropping near-dependent vectors.
pub fn gram_schmidt(fixed: &[Vec<f64>], vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for u in fixed.iter().chain(out.iter()) {
            let d = dot(&w, u);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= d * ui;
            }
        }
        let norm = real::hypot_slice(&w);
        if norm > tol {
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            out.push(w);
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let m = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ]);
        let lu = Lu::factor(&m).unwrap();
        let x = lu.solve(&[3.0, 5.0, 5.0]);
        // residual check
        for i in 0..3 {
            let mut r = 0.0;
            for j in 0..3 {
                r += m[(i, j)] * x[j];
            }
            let b = [3.0, 5.0, 5.0][i];
            assert!((r - b).abs() < 1e-12);
        }
    }

    #[test]
    fn det_of_permutation() {
        let m = Mat::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        assert!((det(&m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(Lu::factor(&m).is_none());
    }

    #[test]
    fn pfaffian_of_symplectic_blocks() {
        // omega = dx1^dy1 + dx2^dy2 written on the basis (x1, y1, x2, y2)
        let mut m = Mat::zeros(4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        m[(2, 3)] = 1.0;
        m[(3, 2)] = -1.0;
        assert!((pfaffian(&m) - 1.0).abs() < 1e-14);
        // pf(A)^2 = det(A)
        let mut rng = crate::rng::Rng::new(5);
        let mut a = Mat::zeros(6);
        for i in 0..6 {
            for j in i + 1..6 {
                let v = rng.range(-1.0, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        let pf = pfaffian(&a);
        assert!((pf * pf - det(&a)).abs() < 1e-10);
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let frame = gram_schmidt(
            &[],
            &[
                vec![1.0, 1.0, 0.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 1.0], // dependent
            ],
            1e-8,
        );
        assert_eq!(frame.len(), 2);
        for u in &frame {
            assert!((real::hypot_slice(u) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&frame[0], &frame[1]).abs() < 1e-12);
    }
}
