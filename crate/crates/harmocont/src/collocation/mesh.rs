//! Collocation meshes on the unit interval: breakpoints, Gauss-Legendre
//! nodes and weights, and Lagrange basis tables for the piecewise-polynomial
//! representation.
//!
//! Each mesh interval carries a polynomial of degree `m` parameterized by
//! its values at `m + 1` equally spaced points (both interval endpoints
//! included, shared between neighbours). Collocation is enforced at the `m`
//! Gauss points of each interval; the same rule also drives all integral
//! quadrature.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on (0, 1). Weights sum to 1.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let nf = m as f64;
    for i in 0..m.div_ceil(2) {
        // initial guess on [-1, 1], then Newton on P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = -p / d;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Lagrange basis over the equally spaced nodes `0, 1/m, ..., 1`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
}

impl LagrangeBasis {
    pub fn equispaced(m: usize) -> Self {
        let nodes = (0..=m).map(|j| j as f64 / m as f64).collect();
        LagrangeBasis { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `L_j(rho)`.
    pub fn value(&self, j: usize, rho: f64) -> f64 {
        let xj = self.nodes[j];
        let mut prod = 1.0;
        for (i, &xi) in self.nodes.iter().enumerate() {
            if i != j {
                prod *= (rho - xi) / (xj - xi);
            }
        }
        prod
    }

    /// `L_j'(rho)`.
    pub fn deriv(&self, j: usize, rho: f64) -> f64 {
        let xj = self.nodes[j];
        let mut sum = 0.0;
        for (k, &xk) in self.nodes.iter().enumerate() {
            if k == j {
                continue;
            }
            let mut prod = 1.0 / (xj - xk);
            for (i, &xi) in self.nodes.iter().enumerate() {
                if i != j && i != k {
                    prod *= (rho - xi) / (xj - xi);
                }
            }
            sum += prod;
        }
        sum
    }

    /// Coefficient of `rho^m` in `L_j`, times `m!` — i.e. the constant m-th
    /// derivative of the basis polynomial.
    pub fn mth_derivative(&self, j: usize) -> f64 {
        let xj = self.nodes[j];
        let mut denom = 1.0;
        for (i, &xi) in self.nodes.iter().enumerate() {
            if i != j {
                denom *= xj - xi;
            }
        }
        factorial(self.nodes.len() - 1) / denom
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A collocation mesh: breakpoints on [0, 1], polynomial degree, and the
/// Gauss/Lagrange tables shared by residual assembly and quadrature.
#[derive(Debug, Clone)]
pub struct Mesh {
    breakpoints: Vec<f64>,
    degree: usize,
    gauss_nodes: Vec<f64>,
    gauss_weights: Vec<f64>,
    /// `basis_at_gauss[l][j] = L_j(zeta_l)`
    basis_at_gauss: Vec<Vec<f64>>,
    /// `dbasis_at_gauss[l][j] = L_j'(zeta_l)`
    dbasis_at_gauss: Vec<Vec<f64>>,
    basis: LagrangeBasis,
}

impl Mesh {
    pub fn uniform(n_intervals: usize, degree: usize) -> Result<Self> {
        let breakpoints = (0..=n_intervals)
            .map(|i| i as f64 / n_intervals as f64)
            .collect();
        Mesh::from_breakpoints(breakpoints, degree)
    }

    pub fn from_breakpoints(breakpoints: Vec<f64>, degree: usize) -> Result<Self> {
        if !(2..=7).contains(&degree) {
            return Err(Error::Config(format!(
                "collocation degree must lie in 2..=7, got {degree}"
            )));
        }
        if breakpoints.len() < 3 {
            return Err(Error::Config("mesh needs at least 2 intervals".into()));
        }
        if (breakpoints[0]).abs() > 1e-15 || (breakpoints[breakpoints.len() - 1] - 1.0).abs() > 1e-15
        {
            return Err(Error::Config("mesh must span [0, 1]".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("breakpoints must increase strictly".into()));
        }
        let mut breakpoints = breakpoints;
        breakpoints[0] = 0.0;
        let last = breakpoints.len() - 1;
        breakpoints[last] = 1.0;

        let (gauss_nodes, gauss_weights) = gauss_legendre_unit(degree);
        let basis = LagrangeBasis::equispaced(degree);
        let basis_at_gauss = gauss_nodes
            .iter()
            .map(|&z| (0..=degree).map(|j| basis.value(j, z)).collect())
            .collect();
        let dbasis_at_gauss = gauss_nodes
            .iter()
            .map(|&z| (0..=degree).map(|j| basis.deriv(j, z)).collect())
            .collect();
        Ok(Mesh {
            breakpoints,
            degree,
            gauss_nodes,
            gauss_weights,
            basis_at_gauss,
            dbasis_at_gauss,
            basis,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interval_length(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Representation points per state component: `N m + 1`.
    pub fn n_points(&self) -> usize {
        self.n_intervals() * self.degree + 1
    }

    /// Global coordinate of representation point `(interval, local node)`.
    pub fn point_coord(&self, interval: usize, local: usize) -> f64 {
        self.breakpoints[interval]
            + self.interval_length(interval) * local as f64 / self.degree as f64
    }

    /// Flat index of representation point `(interval, local node)`.
    pub fn point_index(&self, interval: usize, local: usize) -> usize {
        interval * self.degree + local
    }

    pub fn gauss_nodes(&self) -> &[f64] {
        &self.gauss_nodes
    }

    pub fn gauss_weights(&self) -> &[f64] {
        &self.gauss_weights
    }

    pub fn basis_at_gauss(&self, l: usize) -> &[f64] {
        &self.basis_at_gauss[l]
    }

    pub fn dbasis_at_gauss(&self, l: usize) -> &[f64] {
        &self.dbasis_at_gauss[l]
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Gauss abscissa `s` of node `l` in interval `i`.
    pub fn gauss_coord(&self, i: usize, l: usize) -> f64 {
        self.breakpoints[i] + self.interval_length(i) * self.gauss_nodes[l]
    }

    /// Quadrature weight of node `l` in interval `i` (weights per interval
    /// sum to the interval length).
    pub fn gauss_weight(&self, i: usize, l: usize) -> f64 {
        self.interval_length(i) * self.gauss_weights[l]
    }

    /// Locates the interval containing `s` and its local coordinate.
    pub fn locate(&self, s: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Contract(format!(
                "orbit evaluation outside [0, 1]: s = {s}"
            )));
        }
        let n = self.n_intervals();
        let i = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&s).unwrap())
        {
            Ok(k) => k.min(n - 1),
            Err(k) => k - 1,
        };
        let i = i.min(n - 1);
        let rho = (s - self.breakpoints[i]) / self.interval_length(i);
        Ok((i, rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_nodes_match_reference_m4() {
        // 4-point Gauss-Legendre on (0,1)
        let (nodes, weights) = gauss_legendre_unit(4);
        let ref_nodes = [
            0.06943184420297371,
            0.33000947820757187,
            0.6699905217924281,
            0.9305681557970262,
        ];
        let ref_weights = [
            0.17392742256872692,
            0.3260725774312731,
            0.3260725774312731,
            0.17392742256872692,
        ];
        for i in 0..4 {
            assert!((nodes[i] - ref_nodes[i]).abs() < 1e-14);
            assert!((weights[i] - ref_weights[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_rule_exact_for_polynomials() {
        // m-point rule integrates degree 2m-1 exactly
        for m in 2..=7 {
            let (nodes, weights) = gauss_legendre_unit(m);
            for deg in 0..2 * m {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (quad - exact).abs() < 1e-13,
                    "m = {m}, degree {deg}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn lagrange_partition_of_unity_and_interpolation() {
        let basis = LagrangeBasis::equispaced(4);
        for &rho in &[0.0, 0.21, 0.5, 0.77, 1.0] {
            let sum: f64 = (0..5).map(|j| basis.value(j, rho)).sum();
            assert!((sum - 1.0).abs() < 1e-13);
            let dsum: f64 = (0..5).map(|j| basis.deriv(j, rho)).sum();
            assert!(dsum.abs() < 1e-12);
        }
        // Kronecker property at the nodes
        for j in 0..5 {
            for i in 0..5 {
                let v = basis.value(j, i as f64 / 4.0);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lagrange_derivative_matches_fd() {
        let basis = LagrangeBasis::equispaced(4);
        let h = 1e-6;
        for j in 0..5 {
            for &rho in &[0.13, 0.48, 0.92] {
                let fd = (basis.value(j, rho + h) - basis.value(j, rho - h)) / (2.0 * h);
                assert!((basis.deriv(j, rho) - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mesh_validation() {
        assert!(Mesh::uniform(10, 4).is_ok());
        assert!(Mesh::uniform(10, 1).is_err());
        assert!(Mesh::from_breakpoints(vec![0.0, 0.5, 0.4, 1.0], 4).is_err());
        assert!(Mesh::from_breakpoints(vec![0.1, 0.5, 1.0], 4).is_err());
    }

    #[test]
    fn locate_endpoints_and_interior() {
        let mesh = Mesh::uniform(8, 4).unwrap();
        let (i, rho) = mesh.locate(0.0).unwrap();
        assert_eq!((i, rho), (0, 0.0));
        let (i, rho) = mesh.locate(1.0).unwrap();
        assert_eq!(i, 7);
        assert!((rho - 1.0).abs() < 1e-14);
        let (i, rho) = mesh.locate(0.3).unwrap();
        assert_eq!(i, 2);
        assert!((rho - 0.4).abs() < 1e-12);
        assert!(mesh.locate(1.2).is_err());
        assert!(mesh.locate(-0.1).is_err());
    }
}
