//! Dynamical-system abstraction: vector fields with parameters, analytic or
//! finite-difference Jacobians, and autonomization of sinusoidally forced
//! systems through an auxiliary oscillator.

use crate::error::{Error, Result};
use crate::linbord::Mat;
use std::sync::Arc;

/// `dx/dt = g(x, t; p)`.
type RhsFn = dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync;
/// `d g / d x` as a dense matrix.
type JacXFn = dyn Fn(&[f64], f64, &[f64], &mut Mat) + Send + Sync;
/// `d g / d p` for a single parameter index.
type JacPFn = dyn Fn(&[f64], f64, &[f64], usize, &mut [f64]) + Send + Sync;

/// Central finite differences use step `EPS_FD * max(1, |x_j|)`;
/// `EPS_FD = (machine epsilon)^(1/3)` is the standard second-order choice.
pub const EPS_FD: f64 = 6.055454452393343e-6;

/// A vector field with parameters. Immutable after construction; all
/// evaluators are pure functions, so values can be shared across threads.
///
/// The parameter vector passed to the evaluators is explicit; `defaults()`
/// carries the nominal values a model was registered with.
#[derive(Clone)]
pub struct DynSystem {
    name: String,
    dim: usize,
    param_names: Vec<String>,
    defaults: Vec<f64>,
    rhs: Arc<RhsFn>,
    jac_x: Option<Arc<JacXFn>>,
    jac_p: Option<Arc<JacPFn>>,
    autonomous: bool,
}

impl std::fmt::Debug for DynSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.param_names)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl DynSystem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        params: Vec<(&str, f64)>,
        autonomous: bool,
        rhs: impl Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        let (param_names, defaults) = params
            .into_iter()
            .map(|(n, v)| (n.to_string(), v))
            .unzip();
        DynSystem {
            name: name.into(),
            dim,
            param_names,
            defaults,
            rhs: Arc::new(rhs),
            jac_x: None,
            jac_p: None,
            autonomous,
        }
    }

    pub fn with_jacobian_x(
        mut self,
        jac: impl Fn(&[f64], f64, &[f64], &mut Mat) + Send + Sync + 'static,
    ) -> Self {
        self.jac_x = Some(Arc::new(jac));
        self
    }

    pub fn with_jacobian_p(
        mut self,
        jac: impl Fn(&[f64], f64, &[f64], usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jac_p = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Nominal parameter values the system was registered with.
    pub fn defaults(&self) -> &[f64] {
        &self.defaults
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown parameter '{name}' for system '{}' (have: {})",
                    self.name,
                    self.param_names.join(", ")
                ))
            })
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac_x.is_some()
    }

    fn check_args(&self, x: &[f64], p: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context: "state vector",
            });
        }
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
                context: "parameter vector",
            });
        }
        Ok(())
    }

    /// Evaluates `g(x, t; p)`.
    pub fn eval_rhs(&self, x: &[f64], t: f64, p: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, p)?;
        let mut out = vec![0.0; self.dim];
        (self.rhs)(x, t, p, &mut out);
        Ok(out)
    }

    /// Evaluates `g` into a caller-provided buffer (hot path).
    pub fn eval_rhs_into(&self, x: &[f64], t: f64, p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.rhs)(x, t, p, out);
    }

    /// State Jacobian: analytic if registered, otherwise central finite
    /// differences.
    pub fn jacobian_x(&self, x: &[f64], t: f64, p: &[f64]) -> Result<Mat> {
        self.check_args(x, p)?;
        let mut jac = Mat::zeros(self.dim, self.dim);
        if let Some(f) = &self.jac_x {
            f(x, t, p, &mut jac);
        } else {
            self.fd_jacobian_x_into(x, t, p, &mut jac);
        }
        Ok(jac)
    }

    pub fn jacobian_x_into(&self, x: &[f64], t: f64, p: &[f64], jac: &mut Mat) {
        if let Some(f) = &self.jac_x {
            f(x, t, p, jac);
        } else {
            self.fd_jacobian_x_into(x, t, p, jac);
        }
    }

    /// Finite-difference state Jacobian, always available as a cross-check.
    pub fn fd_jacobian_x(&self, x: &[f64], t: f64, p: &[f64]) -> Result<Mat> {
        self.check_args(x, p)?;
        let mut jac = Mat::zeros(self.dim, self.dim);
        self.fd_jacobian_x_into(x, t, p, &mut jac);
        Ok(jac)
    }

    fn fd_jacobian_x_into(&self, x: &[f64], t: f64, p: &[f64], jac: &mut Mat) {
        let n = self.dim;
        let mut xp = x.to_vec();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for j in 0..n {
            let h = EPS_FD * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            (self.rhs)(&xp, t, p, &mut plus);
            xp[j] = x[j] - h;
            (self.rhs)(&xp, t, p, &mut minus);
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }

    /// Parameter derivative `d g / d p_k`: analytic if registered, otherwise
    /// central finite differences.
    pub fn jacobian_p(&self, x: &[f64], t: f64, p: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_args(x, p)?;
        if k >= self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: k,
                context: "parameter index",
            });
        }
        let mut out = vec![0.0; self.dim];
        if let Some(f) = &self.jac_p {
            f(x, t, p, k, &mut out);
        } else {
            let mut pp = p.to_vec();
            let h = EPS_FD * p[k].abs().max(1.0);
            let mut plus = vec![0.0; self.dim];
            let mut minus = vec![0.0; self.dim];
            pp[k] = p[k] + h;
            (self.rhs)(x, t, &pp, &mut plus);
            pp[k] = p[k] - h;
            (self.rhs)(x, t, &pp, &mut minus);
            for i in 0..self.dim {
                out[i] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(out)
    }

    /// Checks the autonomy flag by evaluating at two distinct times on a few
    /// deterministic pseudo-random states.
    pub fn validate_autonomy(&self, p: &[f64]) -> Result<()> {
        if !self.autonomous {
            return Ok(());
        }
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..5 {
            let x: Vec<f64> = (0..self.dim).map(|_| next()).collect();
            let a = self.eval_rhs(&x, 0.3, p)?;
            let b = self.eval_rhs(&x, 17.9, p)?;
            if a != b {
                return Err(Error::Contract(format!(
                    "system '{}' is flagged autonomous but depends on t",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// The auxiliary oscillator appended by [`autonomize`]:
///
/// ```text
/// v' =  alpha v + beta w - v (v^2 + w^2)
/// w' = -beta v + alpha w - w (v^2 + w^2)
/// ```
///
/// For `alpha < 0` trajectories converge to the origin; for `alpha > 0` the
/// stable solution is `v = sqrt(alpha) sin(beta t + phi)`,
/// `w = sqrt(alpha) cos(beta t + phi)`, so at `alpha = 1` the `w` component
/// reproduces a unit-amplitude cosine forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxOscillator {
    pub alpha: f64,
    pub beta: f64,
}

impl AuxOscillator {
    pub fn rhs(&self, v: f64, w: f64) -> (f64, f64) {
        let r2 = v * v + w * w;
        (
            self.alpha * v + self.beta * w - v * r2,
            -self.beta * v + self.alpha * w - w * r2,
        )
    }
}

/// Which auxiliary component feeds a forcing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingChannel {
    /// `v`, the sine component.
    V,
    /// `w`, the cosine component.
    W,
}

/// Coupling gain of a forcing binding, either a fixed value or proportional
/// to a model parameter (e.g. `A/m` with the forcing amplitude `A`
/// continuable).
#[derive(Debug, Clone, Copy)]
pub enum Gain {
    Const(f64),
    ParamScaled { index: usize, factor: f64 },
}

impl Gain {
    pub fn value(&self, p: &[f64]) -> f64 {
        match *self {
            Gain::Const(c) => c,
            Gain::ParamScaled { index, factor } => factor * p[index],
        }
    }
}

/// Couples `gain * v` or `gain * w` into one state equation of the original
/// system.
#[derive(Debug, Clone, Copy)]
pub struct ForcingBinding {
    /// Index of the target state equation in the unforced system.
    pub target: usize,
    /// Coupling gain, in the units of the target equation.
    pub gain: Gain,
    pub channel: ForcingChannel,
}

/// Recasts a sinusoidally forced system as an `(n+2)`-dimensional autonomous
/// one by appending the auxiliary oscillator and adding `gain * v` or
/// `gain * w` per binding. The input `rhs` must already have the explicit
/// forcing stripped; the parameter vector gains `alpha` and `beta`.
pub fn autonomize(system: &DynSystem, bindings: &[ForcingBinding], beta: f64) -> Result<DynSystem> {
    if bindings.is_empty() {
        return Err(Error::Config(
            "autonomization needs at least one forcing binding".into(),
        ));
    }
    let n = system.dim();
    for b in bindings {
        if b.target >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.target,
                context: "forcing binding target index",
            });
        }
    }
    let n_aux = n + 2;
    let alpha_idx = system.n_params();
    let beta_idx = alpha_idx + 1;
    let mut params: Vec<(&str, f64)> = system
        .param_names()
        .iter()
        .map(String::as_str)
        .zip(system.defaults().iter().copied())
        .collect();
    // alpha starts on the stable side so the Hopf at alpha = 0 can be found
    // by continuation; beta is the forcing angular frequency.
    params.push(("alpha", -0.5));
    params.push(("beta", beta));

    let inner = system.clone();
    let binds: Vec<ForcingBinding> = bindings.to_vec();
    let rhs = move |x: &[f64], t: f64, p: &[f64], out: &mut [f64]| {
        let (phys, aux_state) = x.split_at(n);
        let (v, w) = (aux_state[0], aux_state[1]);
        inner.eval_rhs_into(phys, t, &p[..alpha_idx], &mut out[..n]);
        for b in &binds {
            let src = match b.channel {
                ForcingChannel::V => v,
                ForcingChannel::W => w,
            };
            out[b.target] += b.gain.value(p) * src;
        }
        let aux = AuxOscillator {
            alpha: p[alpha_idx],
            beta: p[beta_idx],
        };
        let (dv, dw) = aux.rhs(v, w);
        out[n] = dv;
        out[n + 1] = dw;
    };

    let mut result = DynSystem::new(format!("{}+aux", system.name()), n_aux, params, true, rhs);

    if system.has_analytic_jacobian() {
        let inner = system.clone();
        let binds: Vec<ForcingBinding> = bindings.to_vec();
        let jac = move |x: &[f64], t: f64, p: &[f64], out: &mut Mat| {
            let (phys, aux_state) = x.split_at(n);
            let (v, w) = (aux_state[0], aux_state[1]);
            let mut jphys = Mat::zeros(n, n);
            inner.jacobian_x_into(phys, t, &p[..alpha_idx], &mut jphys);
            for i in 0..n_aux {
                for j in 0..n_aux {
                    out[(i, j)] = 0.0;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = jphys[(i, j)];
                }
            }
            for b in &binds {
                let col = match b.channel {
                    ForcingChannel::V => n,
                    ForcingChannel::W => n + 1,
                };
                out[(b.target, col)] += b.gain.value(p);
            }
            let (alpha, beta) = (p[alpha_idx], p[beta_idx]);
            let r2 = v * v + w * w;
            out[(n, n)] = alpha - r2 - 2.0 * v * v;
            out[(n, n + 1)] = beta - 2.0 * v * w;
            out[(n + 1, n)] = -beta - 2.0 * v * w;
            out[(n + 1, n + 1)] = alpha - r2 - 2.0 * w * w;
        };
        result = result.with_jacobian_x(jac);
    }

    let inner = system.clone();
    let binds: Vec<ForcingBinding> = bindings.to_vec();
    let jac_p = move |x: &[f64], t: f64, p: &[f64], k: usize, out: &mut [f64]| {
        out.fill(0.0);
        let (phys, aux_state) = x.split_at(n);
        let (v, w) = (aux_state[0], aux_state[1]);
        if k == alpha_idx {
            out[n] = v;
            out[n + 1] = w;
        } else if k == beta_idx {
            out[n] = w;
            out[n + 1] = -v;
        } else {
            // inner parameter: analytic if the inner system provides one,
            // central differences otherwise
            let dp = inner
                .jacobian_p(phys, t, &p[..alpha_idx], k)
                .expect("inner parameter derivative");
            out[..n].copy_from_slice(&dp);
            for b in &binds {
                if let Gain::ParamScaled { index, factor } = b.gain {
                    if index == k {
                        let src = match b.channel {
                            ForcingChannel::V => v,
                            ForcingChannel::W => w,
                        };
                        out[b.target] += factor * src;
                    }
                }
            }
        }
    };
    result = result.with_jacobian_p(jac_p);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_system(m: [[f64; 2]; 2]) -> DynSystem {
        DynSystem::new("linear", 2, vec![], true, move |x, _t, _p: &[f64], out| {
            out[0] = m[0][0] * x[0] + m[0][1] * x[1];
            out[1] = m[1][0] * x[0] + m[1][1] * x[1];
        })
        .with_jacobian_x(move |_x, _t, _p, jac| {
            jac[(0, 0)] = m[0][0];
            jac[(0, 1)] = m[0][1];
            jac[(1, 0)] = m[1][0];
            jac[(1, 1)] = m[1][1];
        })
    }

    #[test]
    fn linear_jacobian_exact_and_fd() {
        let m = [[1.5, -2.0], [0.25, 3.0]];
        let sys = linear_system(m);
        let x = [0.7, -1.3];
        let jac = sys.jacobian_x(&x, 0.0, &[]).unwrap();
        let fd = sys.fd_jacobian_x(&x, 0.0, &[]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(jac[(i, j)], m[i][j]);
                assert!((fd[(i, j)] - m[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rhs_is_referentially_transparent() {
        let sys = linear_system([[0.0, -1.0], [1.0, 0.0]]);
        let x = [0.123456789, -0.987654321];
        let a = sys.eval_rhs(&x, 0.0, &[]).unwrap();
        let b = sys.eval_rhs(&x, 0.0, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sys = linear_system([[0.0, -1.0], [1.0, 0.0]]);
        assert!(matches!(
            sys.eval_rhs(&[1.0], 0.0, &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn aux_oscillator_exact_solution_at_alpha_one() {
        let beta = 3.0;
        let aux = AuxOscillator { alpha: 1.0, beta };
        for k in 0..20 {
            let t = 0.37 * k as f64;
            let (v, w) = ((beta * t).sin(), (beta * t).cos());
            let (dv, dw) = aux.rhs(v, w);
            assert!((dv - beta * (beta * t).cos()).abs() < 1e-12);
            assert!((dw + beta * (beta * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn autonomize_rejects_empty_bindings() {
        let sys = linear_system([[0.0, -1.0], [1.0, 0.0]]);
        assert!(autonomize(&sys, &[], 1.0).is_err());
    }

    #[test]
    fn autonomize_adds_coupling_and_params() {
        let sys = DynSystem::new("decay", 1, vec![("k", 0.7)], false, |x, _t, p, out| {
            out[0] = -p[0] * x[0];
        });
        let binding = ForcingBinding {
            target: 0,
            gain: Gain::Const(2.5),
            channel: ForcingChannel::W,
        };
        let aut = autonomize(&sys, &[binding], 4.0).unwrap();
        assert_eq!(aut.dim(), 3);
        assert_eq!(aut.n_params(), 3);
        assert!(aut.is_autonomous());
        let x = [1.0, 0.25, -0.5];
        let p = [0.7, 1.0, 4.0];
        let out = aut.eval_rhs(&x, 0.0, &p).unwrap();
        assert!((out[0] - (-0.7 * 1.0 + 2.5 * (-0.5))).abs() < 1e-14);
        let r2 = 0.25f64 * 0.25 + 0.5 * 0.5;
        assert!((out[1] - (1.0 * 0.25 + 4.0 * (-0.5) - 0.25 * r2)).abs() < 1e-14);
        assert!((out[2] - (-4.0 * 0.25 + 1.0 * (-0.5) - (-0.5) * r2)).abs() < 1e-14);
        aut.validate_autonomy(&p).unwrap();
    }

    #[test]
    fn autonomize_param_derivatives() {
        let sys = linear_system([[0.0, -1.0], [1.0, 0.0]]);
        let binding = ForcingBinding {
            target: 0,
            gain: Gain::Const(1.0),
            channel: ForcingChannel::V,
        };
        let aut = autonomize(&sys, &[binding], 2.0).unwrap();
        let x = [0.3, -0.2, 0.6, 0.8];
        let p = [0.5, 2.0];
        // d rhs / d alpha = (0, 0, v, w)
        let da = aut.jacobian_p(&x, 0.0, &p, 0).unwrap();
        assert_eq!(da, vec![0.0, 0.0, 0.6, 0.8]);
        // d rhs / d beta = (0, 0, w, -v)
        let db = aut.jacobian_p(&x, 0.0, &p, 1).unwrap();
        assert_eq!(db, vec![0.0, 0.0, 0.8, -0.6]);
    }
}
