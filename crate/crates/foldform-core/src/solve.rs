//! Closed-form solution of small symbolic linear systems by Cramer's rule,
//! with determinants computed by subset dynamic programming (cheap for the
//! sparse matrices that contact solves produce). Callers fall back to the
//! pointwise numeric path when expressions grow past the cap.

use alloc::vec::Vec;

use crate::expr::ScalarExpr;

const TERM_CAP: usize = 20_000;

fn term_count(e: &ScalarExpr) -> usize {
    // canonical representation: number of top-level monomials
    e.clone().canon_len()
}

impl ScalarExpr {
    pub(crate) fn canon_len(&self) -> usize {
        self.canon.terms.len()
    }
}

/// Determinant of a square matrix of expressions, or `None` when the
/// intermediate expressions exceed the size cap.
pub(crate) fn sym_det(rows: &[Vec<ScalarExpr>]) -> Option<ScalarExpr> {
    let n = rows.len();
    if n == 0 {
        return Some(ScalarExpr::one());
    }
    debug_assert!(rows.iter().all(|r| r.len() == n));
    // dp[mask] = det of submatrix (rows 0..popcount(mask), columns in mask)
    let mut dp: Vec<Option<ScalarExpr>> = alloc::vec![None; 1 << n];
    dp[0] = Some(ScalarExpr::one());
    for mask in 1usize..(1 << n) {
        let r = mask.count_ones() as usize - 1; // row being expanded
        let mut acc = ScalarExpr::zero();
        let mut pos = 0; // index of column j within the sorted mask
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let entry = &rows[r][j];
            if !entry.is_zero() {
                let sub = dp[mask & !(1 << j)].clone()?;
                let signed = if (r + pos).is_multiple_of(2) {
                    entry * &sub
                } else {
                    -(entry * &sub)
                };
                acc = acc + signed;
            }
            pos += 1;
        }
        if term_count(&acc) > TERM_CAP {
            return None;
        }
        dp[mask] = Some(acc);
    }
    dp[(1 << n) - 1].clone()
}

/// Solve `M x = b` symbolically. Returns `None` when the determinant work
/// exceeds the cap, `Some(None)` when the matrix is structurally singular,
/// and `Some(Some(x))` otherwise (components may carry exact quotients).
pub(crate) fn sym_solve(
    rows: &[Vec<ScalarExpr>],
    b: &[ScalarExpr],
) -> Option<Option<Vec<ScalarExpr>>> {
    let n = rows.len();
    let det = sym_det(rows)?;
    if det.is_zero() {
        return Some(None);
    }
    let mut out = Vec::with_capacity(n);
    for col in 0..n {
        let mut m = rows.to_vec();
        for (r, row) in m.iter_mut().enumerate() {
            row[col] = b[r].clone();
        }
        let di = sym_det(&m)?;
        out.push(di / det.clone());
    }
    Some(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarExpr {
        ScalarExpr::var("x")
    }

    #[test]
    fn det_2x2() {
        let rows = alloc::vec![
            alloc::vec![x(), ScalarExpr::one()],
            alloc::vec![ScalarExpr::one(), x()],
        ];
        let d = sym_det(&rows).unwrap();
        assert_eq!(d, x().powi(2) - ScalarExpr::one());
    }

    #[test]
    fn det_permutation_sign() {
        let z = ScalarExpr::zero;
        let o = ScalarExpr::one;
        let rows = alloc::vec![
            alloc::vec![z(), o(), z()],
            alloc::vec![z(), z(), o()],
            alloc::vec![o(), z(), z()],
        ];
        assert_eq!(sym_det(&rows).unwrap(), ScalarExpr::one());
    }

    #[test]
    fn solve_small_system() {
        // [2 1; 1 1] x = [3; 2] -> x = [1; 1]
        let rows = alloc::vec![
            alloc::vec![ScalarExpr::constant(2.0), ScalarExpr::one()],
            alloc::vec![ScalarExpr::one(), ScalarExpr::one()],
        ];
        let b = alloc::vec![ScalarExpr::constant(3.0), ScalarExpr::constant(2.0)];
        let x = sym_solve(&rows, &b).unwrap().unwrap();
        assert_eq!(x[0], ScalarExpr::one());
        assert_eq!(x[1], ScalarExpr::one());
    }

    #[test]
    fn singular_detected() {
        let rows = alloc::vec![
            alloc::vec![x(), x()],
            alloc::vec![x(), x()],
        ];
        let b = alloc::vec![ScalarExpr::one(), ScalarExpr::one()];
        assert!(sym_solve(&rows, &b).unwrap().is_none());
    }
}
