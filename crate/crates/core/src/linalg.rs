//! Growable Cholesky factor of `K + lambda I`.
//!
//! Rows can be appended in `O(n^2)` and an arbitrary row/column removed with
//! a rank-one update of the trailing block, so a sample store that gains one
//! sample and evicts one per period never needs a full refactorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots below this fraction of the ridge are treated as numerically
/// indefinite and replaced by the ridge itself.
const PIVOT_FLOOR: f64 = 1e-3;

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    /// Row `i` holds `L[i][0..=i]`.
    rows: Vec<Vec<f64>>,
    ridge: f64,
}

impl Cholesky {
    pub fn new(ridge: f64) -> Self {
        Self { rows: Vec::new(), ridge }
    }

    /// Factors `a` (symmetric, only the lower triangle is read).
    pub fn factor(a: &DMatrix<f64>, ridge: f64) -> Result<Self> {
        let mut chol = Self::new(ridge);
        for i in 0..a.nrows() {
            let column: Vec<f64> = (0..=i).map(|j| a[(i, j)]).collect();
            chol.push(&column)?;
        }
        Ok(chol)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.rows[i][i]
    }

    /// Appends a row/column. `column` holds the new entries against the
    /// existing rows followed by the new diagonal entry.
    pub fn push(&mut self, column: &[f64]) -> Result<()> {
        let n = self.rows.len();
        if column.len() != n + 1 {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n + 1, column.len())));
        }
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("non-finite matrix entry".into()));
        }
        let mut row = Vec::with_capacity(n + 1);
        for (i, li) in self.rows.iter().enumerate() {
            let d = dot(&li[..i], &row);
            row.push((column[i] - d) / li[i]);
        }
        let d = column[n] - dot(&row, &row);
        let d = if d < PIVOT_FLOOR * self.ridge { self.ridge } else { d };
        row.push(d.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Removes row/column `index`.
    pub fn remove(&mut self, index: usize) -> Result<()> {
        let n = self.rows.len();
        if index >= n {
            return Err(Error::Dimension(format!("index {index} out of {n}")));
        }
        self.rows.remove(index);
        let mut x: Vec<f64> = self.rows[index..].iter_mut().map(|row| row.remove(index)).collect();
        // L33 L33^T + x x^T, with L33 the trailing block now starting at `index`
        for k in 0..x.len() {
            let kk = index + k;
            let lkk = self.rows[kk][kk];
            let r = lkk.hypot(x[k]);
            let c = r / lkk;
            let s = x[k] / lkk;
            self.rows[kk][kk] = r;
            for i in (k + 1)..x.len() {
                let row = &mut self.rows[index + i];
                row[kk] = (row[kk] + s * x[i]) / c;
                x[i] = c * x[i] - s * row[kk];
            }
        }
        Ok(())
    }

    /// `L^{-1} b`.
    pub fn forward(&self, b: &[f64]) -> DVector<f64> {
        let mut y = vec![0.0; b.len()];
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = (b[i] - dot(&row[..i], &y[..i])) / row[i];
        }
        DVector::from_vec(y)
    }

    /// `L^{-T} y`.
    pub fn backward(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = y.len();
        let mut x = y.clone();
        for i in (0..n).rev() {
            x[i] /= self.rows[i][i];
            let xi = x[i];
            for j in 0..i {
                x[j] -= self.rows[i][j] * xi;
            }
        }
        x
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> DVector<f64> {
        self.backward(&self.forward(b))
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        self.log_det_range(0, self.len())
    }

    /// `log det` of the leading `k x k` block.
    pub fn log_det_prefix(&self, k: usize) -> f64 {
        self.log_det_range(0, k)
    }

    /// Sum of `2 ln L_ii` over `start..end`: the log-determinant of the
    /// Schur complement of the leading `start` rows within the leading `end`.
    pub fn log_det_range(&self, start: usize, end: usize) -> f64 {
        self.rows[start..end]
            .iter()
            .enumerate()
            .map(|(i, row)| 2.0 * row[start + i].ln())
            .sum()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.rows[i][j] } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn factor_reconstructs() {
        let a = spd(7, 1);
        let l = Cholesky::factor(&a, 1.0).unwrap().to_matrix();
        assert!((&l * l.transpose() - &a).norm() < 1e-10);
    }

    #[test]
    fn remove_matches_refactor() {
        let a = spd(9, 2);
        for idx in [0, 4, 8] {
            let mut chol = Cholesky::factor(&a, 1.0).unwrap();
            chol.remove(idx).unwrap();
            let keep: Vec<usize> = (0..9).filter(|&i| i != idx).collect();
            let sub = a.select_rows(&keep).select_columns(&keep);
            let l = chol.to_matrix();
            assert!((&l * l.transpose() - &sub).norm() < 1e-10);
        }
    }

    #[test]
    fn solve_and_log_det() {
        let a = spd(6, 3);
        let chol = Cholesky::factor(&a, 1.0).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let x = chol.solve(&b);
        assert!((&a * &x - DVector::from_row_slice(&b)).norm() < 1e-10);
        assert!((chol.log_det() - a.determinant().ln()).abs() < 1e-10);
        let lead = a.view((0, 0), (3, 3)).determinant().ln();
        assert!((chol.log_det_prefix(3) - lead).abs() < 1e-10);
    }

    #[test]
    fn non_finite_rejected() {
        let mut chol = Cholesky::new(1.0);
        assert!(chol.push(&[f64::NAN]).is_err());
    }
}
