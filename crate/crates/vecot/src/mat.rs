//! Small dense row-major matrix used throughout the crate.

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from nested rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &Mat, alpha: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, alpha: f64) -> Mat {
        let data = self.data.iter().map(|a| a * alpha).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Entrywise (Frobenius) inner product of two equally shaped matrices.
pub fn frobenius_dot(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.cols, b.cols);
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the dense square system `A x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve_dense(a: &Mat, b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (best_row, best_val) = (col..n)
            .map(|r| (r, m.get(r, col).abs()))
            .fold((col, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        if best_val <= pivot_tol {
            return None;
        }
        if best_row != col {
            for k in 0..n {
                let tmp = m.get(col, k);
                m.set(col, k, m.get(best_row, k));
                m.set(best_row, k, tmp);
            }
            rhs.swap(col, best_row);
            perm.swap(col, best_row);
        }
        let pivot = m.get(col, col);
        for r in col + 1..n {
            let factor = m.get(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                let v = m.get(r, k) - factor * m.get(col, k);
                m.set(r, k, v);
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for k in r + 1..n {
            acc -= m.get(r, k) * x[k];
        }
        x[r] = acc / m.get(r, r);
    }
    Some(x)
}

/// Least-squares residual of projecting `b` onto the column space of `a`
/// (normal equations; fine for the small systems this crate builds).
pub fn lstsq_residual(a: &Mat, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(m, b.len());
    // normal matrix AtA (n x n) and rhs Atb
    let mut ata = Mat::zeros(n, n);
    let mut atb = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..m {
                s += a.get(r, i) * a.get(r, j);
            }
            ata.set(i, j, s);
        }
        for r in 0..m {
            atb[i] += a.get(r, i) * b[r];
        }
    }
    // Ridge fallback keeps the projection defined when columns are dependent.
    let x = solve_dense(&ata, &atb, 1e-14).unwrap_or_else(|| {
        let mut reg = ata.clone();
        for i in 0..n {
            reg.add_to(i, i, 1e-12);
        }
        solve_dense(&reg, &atb, 0.0).expect("regularized normal equations")
    });
    let mut resid = b.to_vec();
    for (r, item) in resid.iter_mut().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            *item -= a.get(r, j) * xj;
        }
    }
    resid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = solve_dense(&a, &[5.0, 10.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve_dense(&a, &[1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn lstsq_residual_orthogonal_component() {
        // col space = span{(1,1,1)}; b = (0,1,2) has residual (-1,0,1)
        let a = Mat::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let r = lstsq_residual(&a, &[0.0, 1.0, 2.0]);
        assert!((r[0] + 1.0).abs() < 1e-9);
        assert!(r[1].abs() < 1e-9);
        assert!((r[2] - 1.0).abs() < 1e-9);
    }
}
