//! Pseudo-arclength continuation of equilibrium points in one parameter,
//! with a Hopf test function monitored along the branch and bisection/secant
//! localization of Hopf points.

use crate::collocation::{BranchPoint, ContinuationBranch, Label, StepPolicy};
use crate::dynsys::DynSystem;
use crate::error::{Error, Result};
use crate::linbord::{
    eigenvalues, lu_solve, solve_bordered, solve_complex, BorderedSystem, Mat, Spectrum,
};
use num_complex::Complex64;

/// `|Re lambda|` tolerance for a localized Hopf point.
pub const TOL_HOPF: f64 = 1e-10;
/// Residual tolerance for accepted equilibria (relative to the rhs scale).
pub const TOL_EQ: f64 = 1e-10;
/// Cap applied to the sentinel returned by [`hopf_test`] when the spectrum
/// has no complex pair.
const SENTINEL_CAP: f64 = 1.0;

/// An equilibrium `g(x*; p) = 0` with the spectrum of its Jacobian.
#[derive(Debug, Clone)]
pub struct EquilibriumPoint {
    pub state: Vec<f64>,
    pub params: Vec<f64>,
    pub spectrum: Spectrum,
}

/// A localized Andronov-Hopf point.
#[derive(Debug, Clone)]
pub struct HopfPoint {
    pub equilibrium: EquilibriumPoint,
    /// Positive imaginary part of the critical pair.
    pub omega: f64,
    /// Critical eigenvector of `J - i omega I`, unit norm, largest component
    /// rotated to the positive real axis.
    pub eigenvector: Vec<Complex64>,
}

impl HopfPoint {
    /// Emerging-orbit period `T = 2 pi / omega`.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    /// Exactly one conjugate pair within [`TOL_HOPF`] of the axis and no
    /// other eigenvalue within ten times that distance.
    pub fn regularity_ok(&self) -> bool {
        let spectrum = &self.equilibrium.spectrum;
        let near_pairs = spectrum
            .complex_pairs()
            .iter()
            .filter(|v| v.re.abs() < TOL_HOPF)
            .count();
        let other_near = spectrum
            .values()
            .iter()
            .filter(|v| v.im == 0.0 && v.re.abs() < 10.0 * TOL_HOPF)
            .count();
        near_pairs == 1 && other_near == 0
    }
}

/// Hopf test function: the real part of the complex pair closest to the
/// imaginary axis. Without any complex pair a capped sentinel with the sign
/// of the least-stable real eigenvalue is returned, so that sign changes can
/// still only fire on genuine pair crossings (pair existence is re-checked
/// before localization).
pub fn hopf_test(spectrum: &Spectrum) -> f64 {
    match spectrum.pair_closest_to_axis(0.0) {
        Some((pair, _)) => pair.re,
        None => {
            let re = spectrum.max_real_part();
            re.signum() * re.abs().min(SENTINEL_CAP)
        }
    }
}

/// Settings for one equilibrium continuation run.
#[derive(Debug, Clone)]
pub struct EquilibriumRun {
    pub free_param: usize,
    /// +1 or -1: initial direction of the free parameter.
    pub direction: f64,
    pub param_min: f64,
    pub param_max: f64,
    pub policy: StepPolicy,
    /// Localize Hopf sign changes and insert labeled points.
    pub detect_hopf: bool,
}

struct EqProblem<'a> {
    system: &'a DynSystem,
    params: Vec<f64>,
    free: usize,
}

impl<'a> EqProblem<'a> {
    fn n(&self) -> usize {
        self.system.dim()
    }

    fn residual(&mut self, x: &[f64], p: f64) -> Vec<f64> {
        self.params[self.free] = p;
        self.system.eval_rhs(x, 0.0, &self.params).expect("rhs")
    }

    fn jac_x(&mut self, x: &[f64], p: f64) -> Mat {
        self.params[self.free] = p;
        self.system.jacobian_x(x, 0.0, &self.params).expect("jac")
    }

    fn jac_p(&mut self, x: &[f64], p: f64) -> Vec<f64> {
        self.params[self.free] = p;
        self.system
            .jacobian_p(x, 0.0, &self.params, self.free)
            .expect("jac_p")
    }

    fn spectrum(&mut self, x: &[f64], p: f64) -> Result<Spectrum> {
        let jac = self.jac_x(x, p);
        eigenvalues(&jac)
    }

    /// Newton at fixed parameter value. Returns the corrected state.
    fn correct_at_fixed_param(
        &mut self,
        x0: &[f64],
        p: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let mut x = x0.to_vec();
        let mut last_res = f64::INFINITY;
        for _ in 0..max_iter {
            let r = self.residual(&x, p);
            let rnorm = inf_norm(&r);
            if rnorm < tol {
                return Ok(x);
            }
            if rnorm > 1e4 * last_res.max(1.0) {
                break;
            }
            last_res = rnorm;
            let jac = self.jac_x(&x, p);
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = lu_solve(&jac, &neg)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            if inf_norm(&dx) < tol {
                let r = self.residual(&x, p);
                if inf_norm(&r) < tol {
                    return Ok(x);
                }
            }
        }
        let res = inf_norm(&self.residual(&x, p));
        Err(Error::ConvergenceFailure {
            iterations: max_iter,
            residual: res,
        })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Scaled inner product used for tangents and arclength equations. The
/// scales are running per-component magnitude estimates, so tolerances act
/// relatively.
#[derive(Debug, Clone)]
struct Scaling {
    scales: Vec<f64>,
}

impl Scaling {
    fn from_point(z: &[f64]) -> Self {
        Scaling {
            scales: z.iter().map(|v| v.abs().max(1.0)).collect(),
        }
    }

    fn update(&mut self, z: &[f64]) {
        for (s, v) in self.scales.iter_mut().zip(z) {
            *s = s.max(v.abs());
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.scales)
            .map(|((x, y), s)| x * y / (s * s))
            .sum()
    }

    fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    fn scaled_inf(&self, a: &[f64]) -> f64 {
        a.iter()
            .zip(&self.scales)
            .fold(0.0f64, |acc, (x, s)| acc.max(x.abs() / s))
    }
}

/// Continues a branch of equilibria in one parameter with pseudo-arclength
/// stepping. `x0` must be an equilibrium at `p0` within Newton reach; it is
/// corrected before stepping.
pub fn continue_equilibria(
    system: &DynSystem,
    p0: &[f64],
    x0: &[f64],
    run: &EquilibriumRun,
) -> Result<ContinuationBranch<EquilibriumPoint>> {
    let n = system.dim();
    let mut prob = EqProblem {
        system,
        params: p0.to_vec(),
        free: run.free_param,
    };
    let policy = run.policy;
    let p_start = p0[run.free_param];

    let x_first = prob
        .correct_at_fixed_param(x0, p_start, policy.newton_tol, policy.newton_max_iter)
        .map_err(|e| match e {
            Error::ConvergenceFailure { residual, .. } => Error::InvalidStart { residual },
            other => other,
        })?;

    let param_name = system.param_names()[run.free_param].clone();
    let mut branch = ContinuationBranch::new(format!("eq_{param_name}"));

    // augmented point (x, p) and its scaling
    let mut z: Vec<f64> = x_first.iter().copied().chain([p_start]).collect();
    let mut scaling = Scaling::from_point(&z);

    accept_point(&mut prob, &mut branch, &param_name, &z, 0.0, 0, None)?;

    // initial tangent: nullspace of [J  g_p] oriented along the requested
    // parameter direction, computed from a bordered solve whose last row is
    // the unit parameter direction
    let mut tangent = {
        let jac = prob.jac_x(&x_first, p_start);
        let gp = prob.jac_p(&x_first, p_start);
        let mut cols = Mat::zeros(n, 1);
        for i in 0..n {
            cols[(i, 0)] = gp[i];
        }
        let rows = Mat::zeros(1, n);
        let mut corner = Mat::zeros(1, 1);
        corner[(0, 0)] = 1.0;
        let mut rhs = vec![0.0; n + 1];
        rhs[n] = 1.0;
        let sys = BorderedSystem {
            core: jac,
            cols,
            rows,
            corner,
            rhs,
        };
        let mut t = solve_bordered(&sys)?;
        let norm = scaling.norm(&t);
        for v in &mut t {
            *v /= norm;
        }
        if t[n] * run.direction < 0.0 {
            for v in &mut t {
                *v = -*v;
            }
        }
        t
    };

    let mut ds = policy.ds0;
    let mut steps = 0usize;
    'outer: while steps < policy.max_steps {
        steps += 1;
        let mut halvings = 0usize;
        let accepted = loop {
            match newton_arclength(&mut prob, &z, &tangent, ds, &scaling, &policy) {
                Ok(ok) => break Some(ok),
                Err(_) => {
                    halvings += 1;
                    if halvings > policy.max_halvings {
                        break None;
                    }
                    ds *= 0.5;
                }
            }
        };
        let Some((z_new, iters)) = accepted else {
            branch.stalled = true;
            break 'outer;
        };

        // stop bounds on the free parameter
        let p_new = z_new[n];
        if p_new < run.param_min || p_new > run.param_max {
            let bound = if p_new < run.param_min {
                run.param_min
            } else {
                run.param_max
            };
            if let Ok(xb) = prob.correct_at_fixed_param(
                &z_new[..n],
                bound,
                policy.newton_tol,
                policy.newton_max_iter,
            ) {
                let mut zb = xb;
                zb.push(bound);
                let label = Label::Endpoint {
                    monitor: param_name.clone(),
                    target: bound,
                };
                accept_point(&mut prob, &mut branch, &param_name, &zb, ds, iters, Some(label))?;
                branch.step_history.push(ds);
            }
            break 'outer;
        }

        let ht_prev = branch.last().and_then(|q| q.monitor("hopf_test")).unwrap();
        let pair_prev = branch.last().and_then(|q| q.monitor("has_pair")).unwrap() > 0.5;
        let p_prev = z[n];
        let x_prev = z[..n].to_vec();

        let ht_new =
            accept_point(&mut prob, &mut branch, &param_name, &z_new, ds, iters, None)?;
        branch.step_history.push(ds);
        let pair_new = branch.last().and_then(|q| q.monitor("has_pair")).unwrap() > 0.5;

        if run.detect_hopf && pair_prev && pair_new && ht_prev * ht_new < 0.0 {
            let hopf = locate_hopf(
                system,
                &prob.params,
                run.free_param,
                (p_prev, &x_prev),
                (z_new[n], &z_new[..n]),
            )?;
            let idx = branch.points.len() - 1;
            let p_h = hopf.equilibrium.params[run.free_param];
            let label_point = BranchPoint {
                solution: hopf.equilibrium.clone(),
                free_values: vec![(param_name.clone(), p_h)],
                monitors: vec![
                    (param_name.clone(), p_h),
                    ("hopf_test".into(), 0.0),
                    ("has_pair".into(), 1.0),
                ],
                label: Some(Label::Hopf { omega: hopf.omega }),
                arclength: branch.points[idx].arclength,
                ds: 0.0,
                newton_iters: 0,
            };
            branch.points.insert(idx, label_point);
        }

        // update tangent by secant
        let mut t_new: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let norm = scaling.norm(&t_new);
        if norm > 0.0 {
            for v in &mut t_new {
                *v /= norm;
            }
            if scaling.dot(&t_new, &tangent) < 0.0 {
                for v in &mut t_new {
                    *v = -*v;
                }
            }
            tangent = t_new;
        }
        z = z_new;
        scaling.update(&z);

        if iters <= policy.grow_threshold {
            ds = (ds * policy.grow).min(policy.ds_max);
        }
    }

    Ok(branch)
}

fn accept_point(
    prob: &mut EqProblem,
    branch: &mut ContinuationBranch<EquilibriumPoint>,
    param_name: &str,
    z: &[f64],
    ds: f64,
    iters: usize,
    label: Option<Label>,
) -> Result<f64> {
    let n = prob.n();
    let (x, p) = (&z[..n], z[n]);
    let spectrum = prob.spectrum(x, p)?;
    let ht = hopf_test(&spectrum);
    let has_pair = !spectrum.complex_pairs().is_empty();
    let arclength = branch.last().map(|q| q.arclength).unwrap_or(0.0) + ds;
    let mut params = prob.params.clone();
    params[prob.free] = p;
    branch.points.push(BranchPoint {
        solution: EquilibriumPoint {
            state: x.to_vec(),
            params,
            spectrum,
        },
        free_values: vec![(param_name.to_string(), p)],
        monitors: vec![
            (param_name.to_string(), p),
            ("hopf_test".into(), ht),
            ("has_pair".into(), if has_pair { 1.0 } else { 0.0 }),
        ],
        label,
        arclength,
        ds,
        newton_iters: iters,
    });
    Ok(ht)
}

/// One pseudo-arclength Newton correction: solves `g(x; p) = 0` plus the
/// arclength equation anchored at `z_prev` with step `ds` along `tangent`.
fn newton_arclength(
    prob: &mut EqProblem,
    z_prev: &[f64],
    tangent: &[f64],
    ds: f64,
    scaling: &Scaling,
    policy: &StepPolicy,
) -> Result<(Vec<f64>, usize)> {
    let n = prob.n();
    let mut z: Vec<f64> = z_prev
        .iter()
        .zip(tangent)
        .map(|(a, t)| a + ds * t)
        .collect();
    let mut prev_res = f64::INFINITY;
    let mut grew = 0usize;
    for iter in 0..policy.newton_max_iter {
        let (x, p) = z.split_at(n);
        let g = prob.residual(x, p[0]);
        let delta: Vec<f64> = z.iter().zip(z_prev).map(|(a, b)| a - b).collect();
        let arc = scaling.dot(&delta, tangent) - ds;
        let res = inf_norm(&g).max(arc.abs());
        if res > prev_res * 1.001 {
            grew += 1;
            if grew >= 2 {
                return Err(Error::ConvergenceFailure {
                    iterations: iter,
                    residual: res,
                });
            }
        } else {
            grew = 0;
        }
        prev_res = res;

        let jac = prob.jac_x(x, p[0]);
        let gp = prob.jac_p(x, p[0]);
        let mut cols = Mat::zeros(n, 1);
        let mut rows = Mat::zeros(1, n);
        let mut corner = Mat::zeros(1, 1);
        for i in 0..n {
            cols[(i, 0)] = gp[i];
            rows[(0, i)] = tangent[i] / (scaling.scales[i] * scaling.scales[i]);
        }
        corner[(0, 0)] = tangent[n] / (scaling.scales[n] * scaling.scales[n]);
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        rhs.push(-arc);
        let sys = BorderedSystem {
            core: jac,
            cols,
            rows,
            corner,
            rhs,
        };
        let dz = solve_bordered(&sys)?;
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        if scaling.scaled_inf(&dz) < policy.newton_tol {
            let (x, p) = z.split_at(n);
            let g = prob.residual(x, p[0]);
            if inf_norm(&g) < policy.newton_tol {
                return Ok((z, iter + 1));
            }
        }
    }
    let (x, p) = z.split_at(n);
    let res = inf_norm(&prob.residual(x, p[0]));
    Err(Error::ConvergenceFailure {
        iterations: policy.newton_max_iter,
        residual: res,
    })
}

/// Localizes a Hopf point inside a bracketing pair of branch points by
/// secant iteration with bisection fallback on the free parameter, until
/// the critical pair satisfies `|Re lambda| < TOL_HOPF`.
pub fn locate_hopf(
    system: &DynSystem,
    params: &[f64],
    free_param: usize,
    a: (f64, &[f64]),
    b: (f64, &[f64]),
) -> Result<HopfPoint> {
    let mut prob = EqProblem {
        system,
        params: params.to_vec(),
        free: free_param,
    };
    let tol_newton = 1e-12;
    let max_newton = 20;

    let eval = |prob: &mut EqProblem,
                p: f64,
                x_guess: &[f64]|
     -> Result<(f64, Vec<f64>, Spectrum)> {
        let x = prob.correct_at_fixed_param(x_guess, p, tol_newton, max_newton)?;
        let spec = prob.spectrum(&x, p)?;
        if spec.complex_pairs().is_empty() {
            return Err(Error::LocalizationFailure {
                reason: format!("complex pair lost at parameter {p}"),
            });
        }
        Ok((hopf_test(&spec), x, spec))
    };

    let (mut pa, mut pb) = (a.0, b.0);
    let (mut fa, mut xa, _) = eval(&mut prob, pa, a.1)?;
    let (mut fb, mut xb, _) = eval(&mut prob, pb, b.1)?;
    if fa.abs() < TOL_HOPF {
        let (_, x, spec) = eval(&mut prob, pa, a.1)?;
        return finish_hopf(system, &prob.params, free_param, pa, x, spec);
    }
    if fb.abs() < TOL_HOPF {
        let (_, x, spec) = eval(&mut prob, pb, b.1)?;
        return finish_hopf(system, &prob.params, free_param, pb, x, spec);
    }
    if fa * fb > 0.0 {
        return Err(Error::LocalizationFailure {
            reason: format!("test function does not change sign on [{pa}, {pb}]"),
        });
    }

    let mut best: Option<(f64, Vec<f64>, Spectrum)> = None;
    for _ in 0..120 {
        // secant proposal clamped into the bracket, bisection fallback
        let mut p_mid = if fb != fa {
            pb - fb * (pb - pa) / (fb - fa)
        } else {
            0.5 * (pa + pb)
        };
        let lo = pa.min(pb);
        let hi = pa.max(pb);
        if !(p_mid > lo && p_mid < hi) {
            p_mid = 0.5 * (pa + pb);
        }
        let guess = if (p_mid - pa).abs() < (p_mid - pb).abs() {
            xa.clone()
        } else {
            xb.clone()
        };
        let (fm, xm, spec) = eval(&mut prob, p_mid, &guess)?;
        if fm.abs() < TOL_HOPF {
            best = Some((p_mid, xm, spec));
            break;
        }
        if fa * fm <= 0.0 {
            pb = p_mid;
            fb = fm;
            xb = xm;
        } else {
            pa = p_mid;
            fa = fm;
            xa = xm;
        }
        if (pb - pa).abs() < f64::EPSILON * pa.abs().max(pb.abs()).max(1.0) {
            best = Some((p_mid, xb.clone(), spec));
            break;
        }
    }
    let (p_h, x_h, spectrum) = best.ok_or_else(|| Error::LocalizationFailure {
        reason: "secant/bisection did not reach |Re lambda| < 1e-10".into(),
    })?;
    let mut full = prob.params;
    full[free_param] = p_h;
    finish_hopf(system, &full, free_param, p_h, x_h, spectrum)
}

fn finish_hopf(
    system: &DynSystem,
    params: &[f64],
    free_param: usize,
    p_h: f64,
    x_h: Vec<f64>,
    spectrum: Spectrum,
) -> Result<HopfPoint> {
    let (pair, ties) =
        spectrum
            .pair_closest_to_axis(TOL_HOPF)
            .ok_or_else(|| Error::LocalizationFailure {
                reason: "complex pair vanished at the localized point".into(),
            })?;
    if ties > 1 {
        return Err(Error::LocalizationFailure {
            reason: "two complex pairs are equally close to the axis".into(),
        });
    }
    let omega = pair.im;
    let mut full_params = params.to_vec();
    full_params[free_param] = p_h;
    let jac = system.jacobian_x(&x_h, 0.0, &full_params)?;
    let eigenvector = critical_eigenvector(&jac, omega)?;
    Ok(HopfPoint {
        equilibrium: EquilibriumPoint {
            state: x_h,
            params: full_params,
            spectrum,
        },
        omega,
        eigenvector,
    })
}

/// Inverse iteration for the eigenvector of `J` at eigenvalue `i omega`.
fn critical_eigenvector(jac: &Mat, omega: f64) -> Result<Vec<Complex64>> {
    let n = jac.rows();
    // slightly off-axis shift keeps the shifted matrix nonsingular
    let shift = Complex64::new(1e-10, omega);
    let mut q: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.3 * i as f64, 0.1 * (i as f64 + 1.0)))
        .collect();
    normalize_complex(&mut q);
    for _ in 0..6 {
        q = solve_complex(jac, shift, &q)?;
        normalize_complex(&mut q);
    }
    let mut residual = 0.0f64;
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += Complex64::new(jac[(i, j)], 0.0) * q[j];
        }
        acc -= Complex64::new(0.0, omega) * q[i];
        residual = residual.max(acc.norm());
    }
    if residual > 1e-8 {
        return Err(Error::LocalizationFailure {
            reason: format!("eigenvector residual {residual:.3e} exceeds 1e-8"),
        });
    }
    Ok(q)
}

fn normalize_complex(q: &mut [Complex64]) {
    let norm: f64 = q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for v in q.iter_mut() {
        *v /= norm;
    }
    // rotate so the component of largest modulus lies on the positive real axis
    let (idx, _) = q
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap();
    let phase = q[idx] / q[idx].norm();
    for v in q.iter_mut() {
        *v /= phase;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{colpitts_system, ndo_autonomous_system, ColpittsParams, NdoParams};

    fn colpitts_run(direction: f64) -> EquilibriumRun {
        EquilibriumRun {
            free_param: 0,
            direction,
            param_min: 0.5,
            param_max: 2.5,
            policy: StepPolicy {
                max_steps: 400,
                ds_max: 0.1,
                ..StepPolicy::default()
            },
            detect_hopf: true,
        }
    }

    #[test]
    fn hopf_test_examples() {
        let jac = Mat::from_rows(&[&[-1.0, 0.0, 0.0], &[0.0, 0.0, 2.0], &[0.0, -2.0, 0.0]]);
        let spec = eigenvalues(&jac).unwrap();
        assert!(hopf_test(&spec).abs() < 1e-12);

        let jac = Mat::from_rows(&[&[-1.0, 0.0, 0.0], &[0.0, 0.3, 2.0], &[0.0, -2.0, 0.3]]);
        let spec = eigenvalues(&jac).unwrap();
        assert!((hopf_test(&spec) - 0.3).abs() < 1e-12);

        // no complex pair: capped sentinel with the sign of the least-stable
        // real eigenvalue
        let spec = eigenvalues(&Mat::from_rows(&[&[-3.0, 0.0], &[0.0, -2.0]])).unwrap();
        assert_eq!(hopf_test(&spec), -1.0);
    }

    #[test]
    fn colpitts_hopf_test_changes_sign_across_g_one() {
        let sys = colpitts_system(&ColpittsParams::default()).unwrap();
        let mut signs = Vec::new();
        for g in [0.9, 1.1] {
            let jac = sys.jacobian_x(&[0.0; 3], 0.0, &[g, 0.8, 0.5, 1.0]).unwrap();
            signs.push(hopf_test(&eigenvalues(&jac).unwrap()));
        }
        assert!(signs[0] * signs[1] < 0.0, "signs {signs:?}");
    }

    #[test]
    fn colpitts_branch_origin_persists_and_hopf_at_one() {
        let sys = colpitts_system(&ColpittsParams::default()).unwrap();
        let p0 = [2.0, 0.8, 0.5, 1.0];
        let branch = continue_equilibria(&sys, &p0, &[0.0; 3], &colpitts_run(-1.0)).unwrap();
        assert!(branch.points.len() > 5);
        for pt in &branch.points {
            assert!(
                pt.solution.state.iter().all(|v| v.abs() < 1e-9),
                "origin persists along the branch"
            );
        }
        let hopf: Vec<_> = branch
            .points
            .iter()
            .filter(|p| matches!(p.label, Some(Label::Hopf { .. })))
            .collect();
        assert_eq!(hopf.len(), 1, "exactly one Hopf label");
        let g_h = hopf[0].free_value("G").unwrap();
        assert!((g_h - 1.0).abs() < 1e-6, "G_H = {g_h}");
    }

    #[test]
    fn colpitts_locate_hopf_high_accuracy() {
        let sys = colpitts_system(&ColpittsParams::default()).unwrap();
        let p = [2.0, 0.8, 0.5, 1.0];
        let x = [0.0; 3];
        let hopf = locate_hopf(&sys, &p, 0, (0.9, &x), (1.1, &x)).unwrap();
        let g_h = hopf.equilibrium.params[0];
        assert!((g_h - 1.0).abs() < 1e-8, "G_H = {g_h}");
        assert!((hopf.omega - 1.0).abs() < 1e-8, "omega = {}", hopf.omega);
        assert!(hopf.regularity_ok());
        assert!((hopf.period() - std::f64::consts::TAU).abs() < 1e-7);
    }

    #[test]
    fn ndo_hopf_at_alpha_zero_with_omega_beta() {
        let params = NdoParams::default();
        let sys = ndo_autonomous_system(&params).unwrap();
        let p = [params.a, -0.2, params.omega];
        let x = [0.0; 4];
        let hopf = locate_hopf(&sys, &p, 1, (-0.1, &x), (0.1, &x)).unwrap();
        let alpha_h = hopf.equilibrium.params[1];
        assert!(alpha_h.abs() < 1e-8, "alpha_H = {alpha_h}");
        assert!(
            (hopf.omega - params.omega).abs() < 1e-8,
            "omega_H = {} vs beta = {}",
            hopf.omega,
            params.omega
        );
    }

    #[test]
    fn normal_form_hopf_localization() {
        // x' = mu x - omega y + quadratic, y' = omega x + mu y
        let omega = 1.7;
        let sys = DynSystem::new(
            "normal_form",
            2,
            vec![("mu", -0.5)],
            true,
            move |x, _t, p, out| {
                out[0] = p[0] * x[0] - omega * x[1] + 0.1 * x[0] * x[0];
                out[1] = omega * x[0] + p[0] * x[1] - 0.2 * x[0] * x[1];
            },
        );
        let hopf = locate_hopf(&sys, &[-0.5], 0, (-0.1, &[0.0, 0.0]), (0.1, &[0.0, 0.0])).unwrap();
        assert!(hopf.equilibrium.params[0].abs() < 1e-10);
        assert!((hopf.omega - omega).abs() < 1e-10);
    }

    #[test]
    fn branch_reversal_returns_to_start() {
        let sys = colpitts_system(&ColpittsParams::default()).unwrap();
        let p0 = [2.0, 0.8, 0.5, 1.0];
        let mut run = colpitts_run(-1.0);
        run.detect_hopf = false;
        run.policy.max_steps = 40;
        run.param_min = 0.2;
        let fwd = continue_equilibria(&sys, &p0, &[0.0; 3], &run).unwrap();
        let end = fwd.last().unwrap();
        let g_end = end.free_value("G").unwrap();

        let mut p_end = p0;
        p_end[0] = g_end;
        let mut back = run.clone();
        back.direction = 1.0;
        back.param_max = 2.0;
        back.policy.max_steps = 200;
        let rev = continue_equilibria(&sys, &p_end, &end.solution.state, &back).unwrap();
        let last = rev.last().unwrap();
        let dg = (last.free_value("G").unwrap() - 2.0).abs();
        assert!(dg < 1e-6, "returned to G = 2 within {dg}");
        for v in &last.solution.state {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_start_detected() {
        let sys = DynSystem::new("shift", 1, vec![("p", 0.0)], true, |x, _t, _p, out| {
            out[0] = x[0] * x[0] + 1.0; // no real equilibrium
        });
        let run = EquilibriumRun {
            free_param: 0,
            direction: 1.0,
            param_min: -1.0,
            param_max: 1.0,
            policy: StepPolicy::default(),
            detect_hopf: false,
        };
        match continue_equilibria(&sys, &[0.0], &[0.0], &run) {
            Err(Error::InvalidStart { .. }) => {}
            other => panic!("expected InvalidStart, got {other:?}"),
        }
    }

    #[test]
    fn accepted_points_satisfy_tolerance() {
        let sys = colpitts_system(&ColpittsParams::default()).unwrap();
        let p0 = [2.0, 0.8, 0.5, 1.0];
        let branch = continue_equilibria(&sys, &p0, &[0.0; 3], &colpitts_run(-1.0)).unwrap();
        for pt in &branch.points {
            let g = sys
                .eval_rhs(&pt.solution.state, 0.0, &pt.solution.params)
                .unwrap();
            assert!(inf_norm(&g) < TOL_EQ);
        }
    }
}
