//! Numerical rank by complete-pivot Gaussian elimination.
//!
//! Columns and then rows are scaled to unit max-norm first, so the largest
//! pivot is 1 and the cutoff `tol × largest pivot` is scale-free. Rows
//! whose entries differ by orders of magnitude (`sinh` at different
//! exponents) would otherwise swamp the threshold.

use thiserror::Error;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("ragged matrix: row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("tolerance {0} must lie in (0, 1)")]
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub rank: usize,
    pub rows: usize,
    pub cols: usize,
    pub tol: f64,
    /// Absolute pivots accepted and the first rejected one, in order.
    pub pivots: Vec<f64>,
}

impl RankResult {
    pub fn full_row_rank(&self) -> bool {
        self.rank == self.rows
    }
}

pub fn numerical_rank(rows: &[Vec<f64>], tol: f64) -> Result<RankResult, RankError> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(RankError::Tolerance(tol));
    }
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(RankError::Ragged {
                row: i,
                got: r.len(),
                expected: n,
            });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(RankError::NonFinite { row: i, col: j });
        }
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    equilibrate(&mut a, n);

    let mut pivots = Vec::new();
    let mut largest = 0.0f64;
    let mut rank = 0;
    for step in 0..m.min(n) {
        let (mut pi, mut pj, mut best) = (step, step, 0.0f64);
        for (i, row) in a.iter().enumerate().skip(step) {
            for (j, v) in row.iter().enumerate().skip(step) {
                if v.abs() > best {
                    best = v.abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        pivots.push(best);
        if step == 0 {
            largest = best;
        }
        if best == 0.0 || best <= tol * largest {
            break;
        }
        rank += 1;
        a.swap(step, pi);
        for row in a.iter_mut() {
            row.swap(step, pj);
        }
        let (top, rest) = a.split_at_mut(step + 1);
        let prow = &top[step];
        for row in rest.iter_mut() {
            let f = row[step] / prow[step];
            if f != 0.0 {
                for j in step..n {
                    row[j] -= f * prow[j];
                }
            }
        }
    }
    Ok(RankResult {
        rank,
        rows: m,
        cols: n,
        tol,
        pivots,
    })
}

fn equilibrate(a: &mut [Vec<f64>], n: usize) {
    for j in 0..n {
        let s = a.iter().map(|r| r[j].abs()).fold(0.0, f64::max);
        if s > 0.0 {
            for r in a.iter_mut() {
                r[j] /= s;
            }
        }
    }
    for r in a.iter_mut() {
        let s = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if s > 0.0 {
            r.iter_mut().for_each(|v| *v /= s);
        }
    }
}
