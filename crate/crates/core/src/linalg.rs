//! Exact Gauss-Jordan elimination over the rationals.

use num_traits::Zero;

use crate::scalar::Rational;

/// Outcome of solving `A x = b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Unique(Vec<Rational>),
    /// Consistent with `nullity` free variables; `particular` sets every free
    /// variable to zero.
    Underdetermined {
        particular: Vec<Rational>,
        nullity: usize,
    },
    Inconsistent,
}

impl Solution {
    pub fn particular(&self) -> Option<&[Rational]> {
        match self {
            Solution::Unique(x) => Some(x),
            Solution::Underdetermined { particular, .. } => Some(particular),
            Solution::Inconsistent => None,
        }
    }
}

/// Solves `rows * x = rhs` where every row has `cols` entries.
pub fn solve(rows: &[Vec<Rational>], rhs: &[Rational], cols: usize) -> Solution {
    assert_eq!(rows.len(), rhs.len(), "row count mismatch");
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            assert_eq!(r.len(), cols, "row width mismatch");
            let mut row = r.clone();
            row.push(b.clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for v in m[rank].iter_mut().skip(col) {
            *v *= &inv;
        }
        let pivot_row = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == rank || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                *v -= &f * pv;
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if m[rank..].iter().any(|row| !row[cols].is_zero()) {
        return Solution::Inconsistent;
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][cols].clone();
    }
    if rank == cols {
        Solution::Unique(x)
    } else {
        Solution::Underdetermined {
            particular: x,
            nullity: cols - rank,
        }
    }
}
