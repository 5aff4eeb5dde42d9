use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.cols.max(1))
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖self - other‖_∞` for equally sized matrices.
    pub fn dist_inf(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let diff = Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        };
        diff.norm_inf()
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

/// Inverse by LU factorisation with partial pivoting.
///
/// Fails with [`Error::SingularMatrix`] as soon as a pivot magnitude drops to `1e-12`.
pub fn lu_invert(m: &Matrix) -> Result<Matrix> {
    let n = m.rows;
    if m.cols != n {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= PIVOT_EPS {
            return Err(Error::SingularMatrix { column: k, pivot });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let diag = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / diag;
            lu[(i, k)] = factor;
            for j in k + 1..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
        }
    }

    // Solve L U x = P eⱼ column by column.
    let mut inv = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = if perm[i] == j { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let s: f64 = (0..i).map(|k| lu[(i, k)] * col[k]).sum();
            col[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| lu[(i, k)] * col[k]).sum();
            col[i] = (col[i] - s) / lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_inverse() {
        let id = Matrix::identity(10);
        assert_eq!(lu_invert(&id).unwrap(), id);
    }

    #[test]
    fn diagonal_inverse() {
        let inv = lu_invert(&Matrix::diag(&[2.0, 4.0])).unwrap();
        assert_eq!(inv, Matrix::diag(&[0.5, 0.25]));
    }

    #[test]
    fn needs_pivoting() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let inv = lu_invert(&m).unwrap();
        let prod = m.matmul(&inv).unwrap();
        assert!(prod.dist_inf(&Matrix::identity(2)) < 1e-15);
    }

    #[test]
    fn singular_is_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(lu_invert(&m), Err(Error::SingularMatrix { column: 1, .. })));
        let z = Matrix::zeros(3, 3);
        assert!(matches!(lu_invert(&z), Err(Error::SingularMatrix { column: 0, .. })));
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(
            lu_invert(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    fn well_conditioned(n: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |mut data| {
            // Strict diagonal dominance keeps the condition number small.
            for i in 0..n {
                data[i * n + i] += if data[i * n + i] >= 0.0 { n as f64 } else { -(n as f64) };
            }
            Matrix::from_row_major(n, n, data).unwrap()
        })
    }

    proptest! {
        #[test]
        fn double_inverse_roundtrip(m in (1usize..8).prop_flat_map(well_conditioned)) {
            let back = lu_invert(&lu_invert(&m).unwrap()).unwrap();
            prop_assert!(back.dist_inf(&m) <= 1e-10);
        }

        #[test]
        fn residual_is_small(m in (1usize..8).prop_flat_map(well_conditioned)) {
            let inv = lu_invert(&m).unwrap();
            let id = Matrix::identity(m.rows());
            prop_assert!(m.matmul(&inv).unwrap().dist_inf(&id) <= 1e-12);
        }
    }
}
