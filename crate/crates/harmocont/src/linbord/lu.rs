use super::Mat;
use crate::error::{Error, Result};

/// Pivot magnitudes below `SINGULARITY_FACTOR * max initial column norm` are
/// treated as exact zeros.
const SINGULARITY_FACTOR: f64 = 1e-14;

/// LU factorization with partial pivoting, stored packed (L below the
/// diagonal with unit diagonal implied, U on and above).
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

pub fn lu_factor(a: &Mat) -> Result<LuFactors> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
            context: "LU factorization needs a square matrix",
        });
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;

    let mut max_col_norm = 0.0f64;
    for j in 0..n {
        let norm: f64 = (0..n).map(|i| lu[(i, j)].abs()).sum();
        max_col_norm = max_col_norm.max(norm);
    }
    let tiny = SINGULARITY_FACTOR * max_col_norm.max(f64::MIN_POSITIVE);

    for k in 0..n {
        let mut piv = k;
        let mut piv_val = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > piv_val {
                piv_val = v;
                piv = i;
            }
        }
        if piv_val <= tiny {
            return Err(Error::Singular { pivot: k });
        }
        if piv != k {
            perm.swap(k, piv);
            sign = -sign;
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor != 0.0 {
                // row_i -= factor * row_k on the trailing block
                let (row_k, row_i) = {
                    let (head, tail) = lu.data.split_at_mut(i * n);
                    (
                        &head[k * n + k + 1..k * n + n],
                        &mut tail[k + 1..n],
                    )
                };
                for (ri, rk) in row_i.iter_mut().zip(row_k.iter()) {
                    *ri -= factor * rk;
                }
            }
        }
    }
    Ok(LuFactors { lu, perm, sign })
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward substitution (unit lower)
        for i in 1..n {
            let row = self.lu.row(i);
            let mut sum = x[i];
            for j in 0..i {
                sum -= row[j] * x[j];
            }
            x[i] = sum;
        }
        // back substitution
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut sum = x[i];
            for j in i + 1..n {
                sum -= row[j] * x[j];
            }
            x[i] = sum / row[i];
        }
        x
    }

    pub fn determinant(&self) -> f64 {
        let n = self.lu.rows();
        (0..n).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }
}

/// Convenience: factor and solve in one call.
pub fn lu_solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
            context: "linear-solve right-hand side",
        });
    }
    Ok(lu_factor(a)?.solve(b))
}
