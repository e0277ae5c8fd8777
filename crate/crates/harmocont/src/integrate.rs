//! Adaptive Dormand-Prince 5(4) time integration.
//!
//! This is the independent oracle used to cross-check continuation results:
//! converged orbits are re-integrated over one period and compared against
//! the collocation representation. Accuracy defaults are deliberately tight.

use crate::dynsys::DynSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Integration aborts with [`Error::Contract`] once the state infinity
    /// norm exceeds this bound (divergence guard).
    pub state_bound: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
            state_bound: 1e8,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

struct Stepper<'a> {
    system: &'a DynSystem,
    p: &'a [f64],
    opts: IntegratorOptions,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    err: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(system: &'a DynSystem, p: &'a [f64], opts: IntegratorOptions) -> Self {
        let n = system.dim();
        Stepper {
            system,
            p,
            opts,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// One attempted step from `(t, x)` with size `h`. On acceptance writes
    /// the new state into `x` and returns `(true, h_next)`.
    fn try_step(&mut self, t: f64, x: &mut [f64], h: f64) -> (bool, f64) {
        let n = x.len();
        let sys = self.system;
        sys.eval_rhs_into(x, t, self.p, &mut self.k[0]);

        for i in 0..n {
            self.tmp[i] = x[i] + h * A21 * self.k[0][i];
        }
        sys.eval_rhs_into(&self.tmp, t + C2 * h, self.p, &mut self.k[1]);
        for i in 0..n {
            self.tmp[i] = x[i] + h * (A31 * self.k[0][i] + A32 * self.k[1][i]);
        }
        sys.eval_rhs_into(&self.tmp, t + C3 * h, self.p, &mut self.k[2]);
        for i in 0..n {
            self.tmp[i] =
                x[i] + h * (A41 * self.k[0][i] + A42 * self.k[1][i] + A43 * self.k[2][i]);
        }
        sys.eval_rhs_into(&self.tmp, t + C4 * h, self.p, &mut self.k[3]);
        for i in 0..n {
            self.tmp[i] = x[i]
                + h * (A51 * self.k[0][i]
                    + A52 * self.k[1][i]
                    + A53 * self.k[2][i]
                    + A54 * self.k[3][i]);
        }
        sys.eval_rhs_into(&self.tmp, t + C5 * h, self.p, &mut self.k[4]);
        for i in 0..n {
            self.tmp[i] = x[i]
                + h * (A61 * self.k[0][i]
                    + A62 * self.k[1][i]
                    + A63 * self.k[2][i]
                    + A64 * self.k[3][i]
                    + A65 * self.k[4][i]);
        }
        sys.eval_rhs_into(&self.tmp, t + h, self.p, &mut self.k[5]);
        for i in 0..n {
            self.tmp[i] = x[i]
                + h * (B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i]);
        }
        sys.eval_rhs_into(&self.tmp, t + h, self.p, &mut self.k[6]);

        let mut err_norm = 0.0f64;
        for i in 0..n {
            self.err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let scale = self.opts.atol + self.opts.rtol * x[i].abs().max(self.tmp[i].abs());
            err_norm += (self.err[i] / scale) * (self.err[i] / scale);
        }
        err_norm = (err_norm / n as f64).sqrt();

        let safety = 0.9;
        let factor = if err_norm > 0.0 {
            (safety * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        if err_norm <= 1.0 {
            x.copy_from_slice(&self.tmp);
            (true, h * factor)
        } else {
            (false, h * factor)
        }
    }
}

/// Integrates from `t0` to `t1`, returning the final state.
pub fn integrate_to(
    system: &DynSystem,
    p: &[f64],
    x0: &[f64],
    t0: f64,
    t1: f64,
    opts: IntegratorOptions,
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    integrate_span(system, p, &mut x, t0, t1, opts)?;
    Ok(x)
}

fn integrate_span(
    system: &DynSystem,
    p: &[f64],
    x: &mut [f64],
    t0: f64,
    t1: f64,
    opts: IntegratorOptions,
) -> Result<()> {
    if t1 == t0 {
        return Ok(());
    }
    let span = t1 - t0;
    let mut stepper = Stepper::new(system, p, opts);
    let mut t = t0;
    let mut h = span / 100.0;
    let mut steps = 0;
    while (span > 0.0 && t < t1) || (span < 0.0 && t > t1) {
        if steps >= opts.max_steps {
            return Err(Error::Contract(format!(
                "integrator exceeded {} steps at t = {t:.6e}",
                opts.max_steps
            )));
        }
        if (span > 0.0 && t + h > t1) || (span < 0.0 && t + h < t1) {
            h = t1 - t;
        }
        let (accepted, h_next) = stepper.try_step(t, x, h);
        if accepted {
            t += h;
            if x.iter().any(|v| !v.is_finite() || v.abs() > opts.state_bound) {
                return Err(Error::Contract(format!(
                    "trajectory diverged at t = {t:.6e}"
                )));
            }
        }
        if h_next.abs() < 1e-14 * span.abs() {
            return Err(Error::Contract(format!(
                "integrator step underflow at t = {t:.6e}"
            )));
        }
        h = h_next;
        steps += 1;
    }
    Ok(())
}

/// Integrates over `[t0, t0 + span]` and returns `n_samples` states at
/// uniformly spaced times (the first sample is `x0` itself; the sample at
/// `t0 + span` is not included, matching a periodic sampling grid).
pub fn integrate_sampled(
    system: &DynSystem,
    p: &[f64],
    x0: &[f64],
    t0: f64,
    span: f64,
    n_samples: usize,
    opts: IntegratorOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut samples = Vec::with_capacity(n_samples);
    let mut x = x0.to_vec();
    samples.push(x.clone());
    let dt = span / n_samples as f64;
    for k in 1..n_samples {
        let ta = t0 + dt * (k - 1) as f64;
        let tb = t0 + dt * k as f64;
        integrate_span(system, p, &mut x, ta, tb, opts)?;
        samples.push(x.clone());
    }
    Ok(samples)
}
