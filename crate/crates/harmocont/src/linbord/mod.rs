//! Dense linear algebra for the continuation engine: LU factorization with
//! partial pivoting, bordered-system solves, and eigenvalues of small real
//! matrices.
//!
//! Everything here operates on a flat row-major `Mat` type. Problem sizes are
//! desk scale (a few hundred unknowns for the discretized boundary value
//! problem, n <= ~10 for Jacobian spectra), so no banded or sparse structure
//! is exploited.

mod eig;
mod lu;

pub use eig::{eigenvalues, solve_complex, Spectrum};
pub use lu::{lu_factor, lu_solve, LuFactors};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Newton linear system of a discretized BVP augmented by constraint rows and
/// free-parameter columns.
///
/// Layout of the assembled square system (`n_core + n_rows` equations in
/// `n_core + n_cols` unknowns, solvable when `n_rows == n_cols`):
///
/// ```text
/// [ core    cols ] [ state  ]   [ rhs_core ]
/// [ rows  corner ] [ params ] = [ rhs_rows ]
/// ```
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    /// Core matrix, `n_core x n_core`.
    pub core: Mat,
    /// Border columns, `n_core x m`.
    pub cols: Mat,
    /// Border rows, `m' x n_core`.
    pub rows: Mat,
    /// Corner block, `m' x m`.
    pub corner: Mat,
    /// Right-hand side of length `n_core + m'`.
    pub rhs: Vec<f64>,
}

impl BorderedSystem {
    pub fn n_core(&self) -> usize {
        self.core.rows()
    }

    pub fn n_border_cols(&self) -> usize {
        self.cols.cols()
    }

    pub fn n_border_rows(&self) -> usize {
        self.rows.rows()
    }

    /// Assembles the full dense `(n_core + m') x (n_core + m)` matrix.
    pub fn assemble(&self) -> Mat {
        let n = self.n_core();
        let m = self.n_border_cols();
        let mp = self.n_border_rows();
        let mut full = Mat::zeros(n + mp, n + m);
        for i in 0..n {
            full.row_mut(i)[..n].copy_from_slice(self.core.row(i));
            full.row_mut(i)[n..].copy_from_slice(self.cols.row(i));
        }
        for i in 0..mp {
            full.row_mut(n + i)[..n].copy_from_slice(self.rows.row(i));
            full.row_mut(n + i)[n..].copy_from_slice(self.corner.row(i));
        }
        full
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.n_core();
        if self.core.cols() != n {
            return Err(Error::Contract("bordered core must be square".into()));
        }
        if self.cols.rows() != n || self.rows.cols() != n {
            return Err(Error::Contract(
                "border blocks must conform with the core".into(),
            ));
        }
        if self.corner.rows() != self.n_border_rows() || self.corner.cols() != self.n_border_cols()
        {
            return Err(Error::Contract("corner block shape mismatch".into()));
        }
        if self.n_border_rows() != self.n_border_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_border_cols(),
                got: self.n_border_rows(),
                context: "bordered system needs as many constraint rows as parameter columns",
            });
        }
        if self.rhs.len() != n + self.n_border_rows() {
            return Err(Error::DimensionMismatch {
                expected: n + self.n_border_rows(),
                got: self.rhs.len(),
                context: "bordered right-hand side",
            });
        }
        Ok(())
    }
}

/// Solves the assembled bordered system.
///
/// The core block of a periodic-orbit BVP is structurally singular (the
/// phase-shift direction lies in its kernel), so the solve factorizes the
/// fully assembled matrix with partial pivoting instead of eliminating the
/// core block first.
pub fn solve_bordered(sys: &BorderedSystem) -> Result<Vec<f64>> {
    sys.check_shape()?;
    let full = sys.assemble();
    lu_solve(&full, &sys.rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        m
    }

    fn diagonally_dominant(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        let mut m = random_mat(rng, n, n);
        for i in 0..n {
            m[(i, i)] += n as f64;
        }
        m
    }

    /// Independent route: eliminate the core block first, then solve the
    /// small Schur-complement system in the border unknowns. Valid only for
    /// nonsingular cores, which the random instances below guarantee.
    fn solve_by_block_elimination(sys: &BorderedSystem) -> Vec<f64> {
        let n = sys.n_core();
        let m = sys.n_border_cols();
        let factors = lu_factor(&sys.core).expect("core factorization");
        let y = factors.solve(&sys.rhs[..n]).to_vec();
        let mut core_inv_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let col: Vec<f64> = (0..n).map(|i| sys.cols[(i, j)]).collect();
            core_inv_cols.push(factors.solve(&col));
        }
        // Schur complement S = corner - rows * core^{-1} * cols.
        let mut schur = Mat::zeros(m, m);
        let mut srhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += sys.rows[(i, k)] * core_inv_cols[j][k];
                }
                schur[(i, j)] = sys.corner[(i, j)] - dot;
            }
            let mut dot = 0.0;
            for k in 0..n {
                dot += sys.rows[(i, k)] * y[k];
            }
            srhs[i] = sys.rhs[n + i] - dot;
        }
        let params = lu_solve(&schur, &srhs).expect("schur solve");
        let mut state = y;
        for (k, s) in state.iter_mut().enumerate() {
            for j in 0..m {
                *s -= core_inv_cols[j][k] * params[j];
            }
        }
        state.extend_from_slice(&params);
        state
    }

    #[test]
    fn lu_identity_returns_rhs() {
        let a = Mat::identity(4);
        let b = vec![1.0, -2.0, 3.5, 0.0];
        let x = lu_solve(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn lu_diagonal_2x2() {
        let a = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let x = lu_solve(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn lu_random_50x50_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = diagonally_dominant(&mut rng, 50);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = lu_solve(&a, &b).unwrap();
        let ax = a.mul_vec(&x);
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        let bnorm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res / bnorm < 1e-12, "relative residual {}", res / bnorm);
    }

    #[test]
    fn lu_singular_reports_pivot() {
        let a = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 1.0, 1.0]]);
        match lu_solve(&a, &[1.0, 2.0, 3.0]) {
            Err(Error::Singular { pivot }) => assert!(pivot < 3),
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn bordered_zero_borders_decouples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let core = diagonally_dominant(&mut rng, 6);
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = vec![0.5, -0.25];
        let mut rhs = b.clone();
        rhs.extend_from_slice(&c);
        let sys = BorderedSystem {
            core: core.clone(),
            cols: Mat::zeros(6, 2),
            rows: Mat::zeros(2, 6),
            corner: Mat::identity(2),
            rhs,
        };
        let z = solve_bordered(&sys).unwrap();
        let x = lu_solve(&core, &b).unwrap();
        for i in 0..6 {
            assert!((z[i] - x[i]).abs() < 1e-13);
        }
        assert!((z[6] - 0.5).abs() < 1e-14);
        assert!((z[7] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn bordered_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let core = diagonally_dominant(&mut rng, 20);
        let cols = random_mat(&mut rng, 20, 1);
        let rows = random_mat(&mut rng, 1, 20);
        let corner = Mat::from_rows(&[&[3.0]]);
        let rhs: Vec<f64> = (0..21).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = BorderedSystem {
            core,
            cols,
            rows,
            corner,
            rhs,
        };
        let z = solve_bordered(&sys).unwrap();
        let dense = lu_solve(&sys.assemble(), &sys.rhs).unwrap();
        for (a, b) in z.iter().zip(&dense) {
            let denom = b.abs().max(1.0);
            assert!((a - b).abs() / denom < 1e-10);
        }
    }

    #[test]
    fn bordered_degenerate_core_is_pure_corner() {
        let sys = BorderedSystem {
            core: Mat::zeros(0, 0),
            cols: Mat::zeros(0, 2),
            rows: Mat::zeros(2, 0),
            corner: Mat::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]),
            rhs: vec![2.0, 8.0],
        };
        let z = solve_bordered(&sys).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-14);
        assert!((z[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bordered_row_col_mismatch_rejected() {
        let sys = BorderedSystem {
            core: Mat::identity(3),
            cols: Mat::zeros(3, 2),
            rows: Mat::zeros(1, 3),
            corner: Mat::zeros(1, 2),
            rhs: vec![0.0; 4],
        };
        assert!(solve_bordered(&sys).is_err());
    }

    #[test]
    fn bordered_block_elimination_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..25 {
            let n = 3 + (trial % 8);
            let m = 1 + (trial % 3);
            let core = diagonally_dominant(&mut rng, n);
            let cols = random_mat(&mut rng, n, m);
            let rows = random_mat(&mut rng, m, n);
            let mut corner = random_mat(&mut rng, m, m);
            for i in 0..m {
                corner[(i, i)] += 4.0;
            }
            let rhs: Vec<f64> = (0..n + m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sys = BorderedSystem {
                core,
                cols,
                rows,
                corner,
                rhs,
            };
            let direct = solve_bordered(&sys).unwrap();
            let block = solve_by_block_elimination(&sys);
            for (a, b) in direct.iter().zip(&block) {
                let denom = b.abs().max(1.0);
                assert!(
                    (a - b).abs() / denom < 1e-10,
                    "trial {trial}: {a} vs {b}"
                );
            }
        }
    }
}
