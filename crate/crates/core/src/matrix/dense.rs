use serde::Serialize;

use crate::error::{Error, Result};

/// Row-major dense `f64` matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("rows have different lengths".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self[(i, j)])
    }

    /// `self · other`, each dot product accumulated with Neumaier summation.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                out[(i, j)] = compensated_sum((0..self.cols).map(|k| self[(i, k)] * other[(k, j)]));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| compensated_sum(self.row(i).iter().zip(v).map(|(a, b)| a * b)))
            .collect())
    }

    /// Largest deviation of a row sum from 1 and most negative entry, or an
    /// error when either exceeds `tol`.
    pub fn check_row_stochastic(&self, tol: f64) -> Result<()> {
        for i in 0..self.rows {
            let row = self.row(i);
            if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < -tol) {
                return Err(Error::NotStochastic(format!("row {i} has entry {x}")));
            }
            let sum = compensated_sum(row.iter().copied());
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Neumaier's variant of Kahan summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_identity() {
        let a = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        assert_eq!(a.mul(&Matrix::identity(2)).unwrap(), a);
        let sq = a.mul(&a).unwrap();
        assert!((sq[(0, 0)] - 0.375).abs() < 1e-15);
        assert!(sq.check_row_stochastic(1e-12).is_ok());
        assert!(a.mul(&Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(compensated_sum(v), 2e-16);
    }

    #[test]
    fn rejects_non_stochastic() {
        let bad = Matrix::from_rows(&[vec![0.6, 0.6], vec![1.0, 0.0]]).unwrap();
        assert!(bad.check_row_stochastic(1e-12).is_err());
        let neg = Matrix::from_rows(&[vec![1.5, -0.5]]).unwrap();
        assert!(neg.check_row_stochastic(1e-12).is_err());
    }
}
