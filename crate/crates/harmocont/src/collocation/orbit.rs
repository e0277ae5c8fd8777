//! The discretized 1-periodic orbit: piecewise-polynomial states on a
//! collocation mesh plus the true period and the system parameters.

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// A periodic orbit rescaled to the unit interval. `states` holds the
/// representation-point values point-major: point `k` (of `mesh.n_points()`)
/// occupies `states[k*n .. (k+1)*n]`. Point `N m` is the value at `s = 1`,
/// tied to point 0 by the periodicity condition of a converged orbit.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub mesh: Mesh,
    pub n: usize,
    pub states: Vec<f64>,
    /// True period in model time units.
    pub period: f64,
    /// Full system parameter vector.
    pub params: Vec<f64>,
}

impl PeriodicOrbit {
    /// Builds an orbit by sampling `f(s)` at the representation points.
    pub fn from_fn(
        mesh: Mesh,
        n: usize,
        period: f64,
        params: Vec<f64>,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Self {
        let n_pts = mesh.n_points();
        let mut states = Vec::with_capacity(n_pts * n);
        let m = mesh.degree();
        for interval in 0..mesh.n_intervals() {
            for local in 0..m {
                let s = mesh.point_coord(interval, local);
                let x = f(s);
                debug_assert_eq!(x.len(), n);
                states.extend_from_slice(&x);
            }
        }
        states.extend_from_slice(&f(1.0));
        PeriodicOrbit {
            mesh,
            n,
            states,
            period,
            params,
        }
    }

    pub fn n_points(&self) -> usize {
        self.mesh.n_points()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.states[k * self.n..(k + 1) * self.n]
    }

    /// Interpolant value at `s` in [0, 1].
    pub fn eval(&self, s: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) -> Result<()> {
        let (interval, rho) = self.mesh.locate(s)?;
        let m = self.mesh.degree();
        let basis = self.mesh.basis();
        out.fill(0.0);
        for j in 0..=m {
            let w = basis.value(j, rho);
            let pt = self.point(self.mesh.point_index(interval, j));
            for (o, v) in out.iter_mut().zip(pt) {
                *o += w * v;
            }
        }
        Ok(())
    }

    /// Interpolant derivative `dx/ds` at `s`.
    pub fn eval_deriv(&self, s: f64) -> Result<Vec<f64>> {
        let (interval, rho) = self.mesh.locate(s)?;
        let m = self.mesh.degree();
        let h = self.mesh.interval_length(interval);
        let basis = self.mesh.basis();
        let mut out = vec![0.0; self.n];
        for j in 0..=m {
            let w = basis.deriv(j, rho) / h;
            let pt = self.point(self.mesh.point_index(interval, j));
            for (o, v) in out.iter_mut().zip(pt) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Periodicity defect `max_j |x_j(0) - x_j(1)|`.
    pub fn periodicity_defect(&self) -> f64 {
        let first = self.point(0);
        let last = self.point(self.n_points() - 1);
        first
            .iter()
            .zip(last)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Per-component magnitude `max_s |x_j(s)|` over the representation
    /// points.
    pub fn component_magnitudes(&self) -> Vec<f64> {
        let mut mags = vec![0.0f64; self.n];
        for k in 0..self.n_points() {
            for (m, v) in mags.iter_mut().zip(self.point(k)) {
                *m = m.max(v.abs());
            }
        }
        mags
    }

    /// Re-interpolates the orbit onto another mesh (same degree family not
    /// required).
    pub fn resample(&self, mesh: Mesh) -> Result<PeriodicOrbit> {
        let n = self.n;
        let m = mesh.degree();
        let n_pts = mesh.n_points();
        let mut states = Vec::with_capacity(n_pts * n);
        let mut buf = vec![0.0; n];
        for interval in 0..mesh.n_intervals() {
            for local in 0..m {
                let s = mesh.point_coord(interval, local);
                self.eval_into(s, &mut buf)?;
                states.extend_from_slice(&buf);
            }
        }
        self.eval_into(1.0, &mut buf)?;
        states.extend_from_slice(&buf);
        Ok(PeriodicOrbit {
            mesh,
            n,
            states,
            period: self.period,
            params: self.params.clone(),
        })
    }

    /// Composite Gauss quadrature of `f(s, x(s))` over [0, 1], evaluated
    /// from the same tables the collocation residual uses.
    pub fn quadrature(&self, mut f: impl FnMut(f64, &[f64]) -> f64) -> f64 {
        let mesh = &self.mesh;
        let m = mesh.degree();
        let mut x = vec![0.0; self.n];
        let mut total = 0.0;
        for i in 0..mesh.n_intervals() {
            for l in 0..m {
                let basis = mesh.basis_at_gauss(l);
                x.fill(0.0);
                for j in 0..=m {
                    let w = basis[j];
                    let pt = self.point(mesh.point_index(i, j));
                    for (o, v) in x.iter_mut().zip(pt) {
                        *o += w * v;
                    }
                }
                total += mesh.gauss_weight(i, l) * f(mesh.gauss_coord(i, l), &x);
            }
        }
        total
    }

    /// State at the initial point `s = 0`.
    pub fn initial_state(&self) -> &[f64] {
        self.point(0)
    }

    /// Checked constructor for deserialized data.
    pub fn from_parts(
        mesh: Mesh,
        n: usize,
        states: Vec<f64>,
        period: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        if states.len() != mesh.n_points() * n {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_points() * n,
                got: states.len(),
                context: "orbit state storage",
            });
        }
        if period <= 0.0 {
            return Err(Error::Contract("orbit period must be positive".into()));
        }
        Ok(PeriodicOrbit {
            mesh,
            n,
            states,
            period,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_orbit(n_intervals: usize) -> PeriodicOrbit {
        let mesh = Mesh::uniform(n_intervals, 4).unwrap();
        PeriodicOrbit::from_fn(mesh, 2, std::f64::consts::TAU, vec![], |s| {
            vec![(std::f64::consts::TAU * s).cos(), (std::f64::consts::TAU * s).sin()]
        })
    }

    #[test]
    fn eval_reproduces_representation_points() {
        let orbit = circle_orbit(6);
        let mesh = &orbit.mesh;
        for interval in 0..mesh.n_intervals() {
            for local in 0..=mesh.degree() {
                let s = mesh.point_coord(interval, local);
                let x = orbit.eval(s).unwrap();
                let stored = orbit.point(mesh.point_index(interval, local));
                for (a, b) in x.iter().zip(stored) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eval_interpolates_smoothly() {
        let orbit = circle_orbit(20);
        for k in 0..50 {
            let s = k as f64 / 50.0;
            let x = orbit.eval(s).unwrap();
            assert!((x[0] - (std::f64::consts::TAU * s).cos()).abs() < 1e-7);
            assert!((x[1] - (std::f64::consts::TAU * s).sin()).abs() < 1e-7);
        }
        // quarter turn: (cos, sin) pattern at s = 0.25
        let x = orbit.eval(0.25).unwrap();
        assert!(x[0].abs() < 1e-8);
        assert!((x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn endpoints_agree_for_periodic_data() {
        let orbit = circle_orbit(6);
        let a = orbit.eval(0.0).unwrap();
        let b = orbit.eval(1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(orbit.periodicity_defect() < 1e-12);
    }

    #[test]
    fn derivative_matches_analytic() {
        let orbit = circle_orbit(20);
        let tau = std::f64::consts::TAU;
        for &s in &[0.1, 0.37, 0.81] {
            let d = orbit.eval_deriv(s).unwrap();
            assert!((d[0] + tau * (tau * s).sin()).abs() < 1e-5);
            assert!((d[1] - tau * (tau * s).cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn out_of_range_rejected() {
        let orbit = circle_orbit(4);
        assert!(orbit.eval(-0.01).is_err());
        assert!(orbit.eval(1.01).is_err());
    }

    #[test]
    fn quadrature_of_product_exact_for_polynomials() {
        let mesh = Mesh::uniform(5, 4).unwrap();
        let orbit = PeriodicOrbit::from_fn(mesh, 1, 1.0, vec![], |s| vec![s * s]);
        // integral of s^2 * s over [0,1] = 1/4
        let v = orbit.quadrature(|s, x| x[0] * s);
        assert!((v - 0.25).abs() < 1e-13);
    }

    #[test]
    fn resample_preserves_values() {
        let orbit = circle_orbit(8);
        let finer = orbit.resample(Mesh::uniform(16, 4).unwrap()).unwrap();
        for k in 0..30 {
            let s = k as f64 / 30.0;
            let a = orbit.eval(s).unwrap();
            let b = finer.eval(s).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }
}
