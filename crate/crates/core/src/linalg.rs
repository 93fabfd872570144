//! Gauss-Jordan elimination over the rationals, with an optional column of
//! polynomial right-hand sides carried along.

use num_traits::{One, Zero};

use crate::expr::{Expr, Rational};

/// A row of the reduced system: `x[column] + sum_k coeffs[k] x[k] = rhs`,
/// where `coeffs[column] == 1` and every other pivot column is zero.
#[derive(Debug, Clone)]
pub struct PivotRow {
    pub column: usize,
    pub coeffs: Vec<Rational>,
    pub rhs: Expr,
}

#[derive(Debug, Clone)]
pub struct Echelon {
    pub pivots: Vec<PivotRow>,
    /// Right-hand sides of rows whose coefficients eliminated to zero.
    pub zero_rows: Vec<Expr>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_pivot(&self, column: usize) -> bool {
        self.pivots.iter().any(|p| p.column == column)
    }
}

/// Reduced row echelon form of `rows`, each `(coefficients, rhs)` with
/// `ncols` coefficients.
pub fn gauss_jordan(mut rows: Vec<(Vec<Rational>, Expr)>, ncols: usize) -> Echelon {
    let mut rank = 0;
    let mut pivot_cols = Vec::new();
    for col in 0..ncols {
        let Some(found) = (rank..rows.len()).find(|&r| !rows[r].0[col].is_zero()) else {
            continue;
        };
        rows.swap(rank, found);
        let inv = rows[rank].0[col].recip();
        let (coeffs, rhs) = &mut rows[rank];
        for c in coeffs.iter_mut() {
            *c *= &inv;
        }
        *rhs = rhs.scale(&inv);
        let (pc, pr) = rows[rank].clone();
        for (r, (coeffs, rhs)) in rows.iter_mut().enumerate() {
            if r == rank || coeffs[col].is_zero() {
                continue;
            }
            let factor = coeffs[col].clone();
            for (c, p) in coeffs.iter_mut().zip(&pc) {
                *c -= &factor * p;
            }
            *rhs = &*rhs - pr.scale(&factor);
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let mut iter = rows.into_iter();
    let pivots = pivot_cols
        .into_iter()
        .map(|column| {
            let (coeffs, rhs) = iter.next().expect("pivot row");
            PivotRow { column, coeffs, rhs }
        })
        .collect();
    Echelon {
        pivots,
        zero_rows: iter.map(|(_, rhs)| rhs).collect(),
    }
}

/// Exact inverse of a square rational matrix, `None` if singular.
pub fn invert(matrix: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = matrix.len();
    let mut a: Vec<Vec<Rational>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n, "matrix must be square");
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let found = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, found);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot) {
                *x -= &factor * p;
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}
