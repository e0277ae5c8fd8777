//! Pseudo-arclength predictor/corrector loop for the extended periodic BVP,
//! with secant tangents, adaptive steps, user-value labels, fold labels and
//! endpoint refinement.

use super::adapt::adapt_mesh;
use super::branch::{BranchPoint, ContinuationBranch, Label, StepPolicy, StopBound};
use super::{
    tangent_dot, tangent_norm, ArcSpec, CycleProblem, CycleState, Scaling, TangentVec, TOL_LABEL,
};
use crate::error::{Error, Result};
use crate::collocation::PeriodicOrbit;

/// Settings of one cycle-continuation run.
#[derive(Debug, Clone)]
pub struct CycleRun {
    pub name: String,
    pub policy: StepPolicy,
    /// Stop bounds on monitors; the endpoint is refined onto the bound.
    pub bounds: Vec<StopBound>,
    /// User-value labels: monitor name and requested values.
    pub user_labels: Vec<(String, Vec<f64>)>,
    /// Refine onto these targets and stop there (e.g. a homotopy endpoint).
    pub stop_at: Vec<(String, f64)>,
    /// Free-unknown name watched for folds (sign change of its arclength
    /// derivative).
    pub fold_monitor: Option<String>,
    /// Redistribute the mesh every this many accepted steps (0 = off).
    pub adapt_every: usize,
    /// Free-unknown name and sign orienting the first tangent.
    pub orient: (String, f64),
    /// Replay mode: use exactly these step sizes.
    pub step_schedule: Option<Vec<f64>>,
}

impl CycleRun {
    pub fn new(name: impl Into<String>, orient: (&str, f64)) -> Self {
        CycleRun {
            name: name.into(),
            policy: StepPolicy::default(),
            bounds: Vec::new(),
            user_labels: Vec::new(),
            stop_at: Vec::new(),
            fold_monitor: None,
            adapt_every: 0,
            orient: (orient.0.to_string(), orient.1),
            step_schedule: None,
        }
    }
}

/// Monitored scalars of a state: free unknowns first (in problem order),
/// then the period, every constrained coefficient, and K_REF.
pub fn monitor_row(problem: &CycleProblem, state: &CycleState) -> Vec<(String, f64)> {
    let mut row: Vec<(String, f64)> = problem
        .free_names()
        .into_iter()
        .zip(problem.gather(state))
        .collect();
    if !row.iter().any(|(n, _)| n == "T") {
        row.push(("T".into(), state.orbit.period));
    }
    for (key, value) in &state.coefs {
        let name = key.name();
        if !row.iter().any(|(n, _)| n == &name) {
            row.push((name, *value));
        }
    }
    if problem.kref_kind.is_some() && !row.iter().any(|(n, _)| n == "K") {
        row.push(("K".into(), state.kref));
    }
    row
}

fn monitor_value(problem: &CycleProblem, state: &CycleState, name: &str) -> Result<f64> {
    monitor_row(problem, state)
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v)
        .or_else(|| {
            // fall back to any system parameter by name
            problem
                .system
                .param_index(name)
                .ok()
                .map(|i| state.orbit.params[i])
        })
        .ok_or_else(|| Error::Config(format!("unknown monitor '{name}'")))
}

struct Engine<'a, 'b> {
    problem: &'b CycleProblem<'a>,
    run: &'b CycleRun,
    scaling: Scaling,
    phase_ref: PeriodicOrbit,
    tangent: TangentVec,
    anchor: CycleState,
    fold_value: Option<f64>,
}

impl<'a, 'b> Engine<'a, 'b> {
    fn free_index(&self, name: &str) -> Result<usize> {
        self.problem
            .free_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("'{name}' is not a free unknown of this run")))
    }

    /// Newton-corrects the predictor `anchor + ds * tangent`.
    fn correct_step(&self, ds: f64) -> Result<(CycleState, usize)> {
        let mut cand = self.anchor.clone();
        for (v, t) in cand.orbit.states.iter_mut().zip(&self.tangent.states) {
            *v += ds * t;
        }
        let scaled: Vec<f64> = self.tangent.free.iter().map(|t| ds * t).collect();
        self.problem.scatter_add(&mut cand, &scaled);
        let arc = ArcSpec {
            anchor: &self.anchor,
            tangent: &self.tangent,
            ds,
        };
        let iters = self.problem.newton_correct(
            &mut cand,
            &self.phase_ref,
            Some(&arc),
            &self.scaling,
            &self.run.policy,
        )?;
        Ok((cand, iters))
    }

    /// Fold test value at a state: the designated component of the
    /// nullspace tangent (oriented by the stepping tangent through the
    /// normalization row).
    fn fold_test(&self, state: &CycleState) -> Result<f64> {
        let idx = self.free_index(self.run.fold_monitor.as_deref().unwrap())?;
        let t = self.problem.nullspace_tangent(
            state,
            &self.phase_ref,
            &self.tangent,
            &self.scaling,
        )?;
        Ok(t.free[idx])
    }

    /// Regula-falsi (Illinois) refinement of `monitor == target` on the
    /// current step segment `(0, ds_hi]`. Returns the step length and the
    /// corrected state.
    fn refine_on_segment(
        &self,
        ds_hi: f64,
        eval: &dyn Fn(&Engine, &CycleState) -> Result<f64>,
        f_lo_init: f64,
        f_hi_init: f64,
    ) -> Result<(f64, CycleState, usize)> {
        let (mut lo, mut hi) = (0.0f64, ds_hi);
        let (mut f_lo, mut f_hi) = (f_lo_init, f_hi_init);
        let mut side = 0i8;
        for _ in 0..40 {
            let ds = if (f_hi - f_lo).abs() > 0.0 {
                (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            } else {
                0.5 * (lo + hi)
            };
            let ds = if ds <= lo || ds >= hi {
                0.5 * (lo + hi)
            } else {
                ds
            };
            let (cand, iters) = self.correct_step(ds)?;
            let f = eval(self, &cand)?;
            if f.abs() < TOL_LABEL {
                return Ok((ds, cand, iters));
            }
            if f_lo * f <= 0.0 {
                hi = ds;
                f_hi = f;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            } else {
                lo = ds;
                f_lo = f;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::LocalizationFailure {
            reason: "label refinement did not converge within 40 corrections".into(),
        })
    }
}

/// Runs a full cycle continuation from a converged start state.
pub fn continue_cycle(
    problem: &CycleProblem,
    start: CycleState,
    run: &CycleRun,
) -> Result<ContinuationBranch<CycleState>> {
    let n = problem.system.dim();
    let policy = run.policy;
    let mut branch = ContinuationBranch::new(run.name.clone());

    let mut scaling = Scaling::from_state(problem, &start);
    let phase_ref = start.orbit.clone();

    // unit direction on the orientation unknown, used to anchor the initial
    // correction and to normalize the first nullspace solve
    let orient_idx = problem
        .free_names()
        .iter()
        .position(|nm| *nm == run.orient.0)
        .ok_or_else(|| {
            Error::Config(format!(
                "orientation unknown '{}' is not free in this run",
                run.orient.0
            ))
        })?;
    let mut unit = TangentVec {
        states: vec![0.0; start.orbit.states.len()],
        free: vec![0.0; problem.n_free()],
    };
    unit.free[orient_idx] = 1.0;

    // correct the start point onto the solution manifold (with the
    // orientation unknown held fixed through a zero-length arclength row)
    let mut state = start;
    {
        let anchor = state.clone();
        let arc = ArcSpec {
            anchor: &anchor,
            tangent: &unit,
            ds: 0.0,
        };
        problem
            .newton_correct(&mut state, &phase_ref, Some(&arc), &scaling, &policy)
            .map_err(|e| match e {
                Error::ConvergenceFailure { residual, .. } => Error::InvalidStart { residual },
                other => other,
            })?;
    }

    let mut engine = Engine {
        problem,
        run,
        scaling: scaling.clone(),
        phase_ref: state.orbit.clone(),
        tangent: unit.clone(),
        anchor: state.clone(),
        fold_value: None,
    };

    // first tangent from the nullspace, oriented as requested
    let mut tangent =
        problem.nullspace_tangent(&state, &engine.phase_ref, &unit, &engine.scaling)?;
    if tangent.free[orient_idx].abs() < 1e-12 {
        return Err(Error::Config(format!(
            "branch is not parameterizable by '{}' at the start point",
            run.orient.0
        )));
    }
    if tangent.free[orient_idx] * run.orient.1 < 0.0 {
        flip(&mut tangent);
    }
    engine.tangent = tangent;

    // first accepted point
    push_point(problem, &mut branch, &state, 0.0, 0, None);
    if run.fold_monitor.is_some() {
        engine.fold_value = Some(engine.fold_test(&state)?);
    }

    let mut ds = policy.ds0;
    let mut steps = 0usize;
    'outer: while steps < policy.max_steps {
        if let Some(schedule) = &run.step_schedule {
            if steps >= schedule.len() {
                break;
            }
            ds = schedule[steps];
        }
        steps += 1;

        let mut halvings = 0usize;
        let (state_new, iters) = loop {
            match engine.correct_step(ds) {
                Ok(ok) => break ok,
                Err(_) if run.step_schedule.is_none() => {
                    halvings += 1;
                    if halvings > policy.max_halvings {
                        branch.stalled = true;
                        break 'outer;
                    }
                    ds *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };

        let monitors_prev = monitor_row(problem, &engine.anchor);
        let monitors_new = monitor_row(problem, &state_new);
        let lookup = |row: &[(String, f64)], name: &str| -> f64 {
            row.iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        };

        // pending labeled points on this segment, keyed by step length
        let mut inserts: Vec<(f64, CycleState, usize, Label)> = Vec::new();
        let mut stop_after: Option<(f64, CycleState, usize, Label)> = None;

        if run.step_schedule.is_none() {
            // stop targets and bounds
            let mut bound_hits: Vec<(String, f64)> = Vec::new();
            for (name, target) in &run.stop_at {
                let a = lookup(&monitors_prev, name) - target;
                let b = lookup(&monitors_new, name) - target;
                if a.is_finite() && b.is_finite() && a * b <= 0.0 && a != b {
                    bound_hits.push((name.clone(), *target));
                }
            }
            for bound in &run.bounds {
                let value = lookup(&monitors_new, &bound.monitor);
                if value.is_finite() {
                    if let Some(limit) = bound.crossed(value) {
                        bound_hits.push((bound.monitor.clone(), limit));
                    }
                }
            }
            if let Some((name, target)) = bound_hits.into_iter().next() {
                let f_lo = lookup(&monitors_prev, &name) - target;
                let f_hi = lookup(&monitors_new, &name) - target;
                if f_lo * f_hi <= 0.0 && f_lo != 0.0 {
                    let nm = name.clone();
                    let eval = move |e: &Engine, s: &CycleState| {
                        monitor_value(e.problem, s, &nm).map(|v| v - target)
                    };
                    let (ds_star, refined, it) = engine.refine_on_segment(ds, &eval, f_lo, f_hi)?;
                    stop_after = Some((
                        ds_star,
                        refined,
                        it,
                        Label::Endpoint {
                            monitor: name,
                            target,
                        },
                    ));
                } else {
                    // already past the bound at the anchor: stop where we are
                    stop_after = Some((
                        ds,
                        state_new.clone(),
                        iters,
                        Label::Endpoint {
                            monitor: name,
                            target,
                        },
                    ));
                }
            }

            // user-value labels
            if stop_after.is_none() {
                for (name, targets) in &run.user_labels {
                    let a0 = lookup(&monitors_prev, name);
                    let b0 = lookup(&monitors_new, name);
                    if !(a0.is_finite() && b0.is_finite()) {
                        continue;
                    }
                    for &target in targets {
                        let (fa, fb) = (a0 - target, b0 - target);
                        if fa * fb < 0.0 {
                            let nm = name.clone();
                            let eval = move |e: &Engine, s: &CycleState| {
                                monitor_value(e.problem, s, &nm).map(|v| v - target)
                            };
                            let (ds_star, refined, it) =
                                engine.refine_on_segment(ds, &eval, fa, fb)?;
                            inserts.push((
                                ds_star,
                                refined,
                                it,
                                Label::UserValue {
                                    monitor: name.clone(),
                                    target,
                                },
                            ));
                        }
                    }
                }
            }

            // folds: sign change of the nullspace-tangent component
            if let Some(fold_name) = &run.fold_monitor {
                if stop_after.is_none() {
                    let phi_new = engine.fold_test(&state_new)?;
                    if let Some(phi_prev) = engine.fold_value {
                        if phi_prev * phi_new < 0.0 {
                            let eval =
                                move |e: &Engine, s: &CycleState| e.fold_test(s);
                            let (ds_star, refined, it) =
                                engine.refine_on_segment(ds, &eval, phi_prev, phi_new)?;
                            inserts.push((
                                ds_star,
                                refined,
                                it,
                                Label::Fold {
                                    param: fold_name.clone(),
                                },
                            ));
                        }
                    }
                    engine.fold_value = Some(phi_new);
                }
            }
        }

        inserts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let base_arc = branch.last().map(|p| p.arclength).unwrap_or(0.0);
        for (ds_star, refined, it, label) in inserts {
            let pt = make_point(problem, &refined, base_arc + ds_star, ds_star, it, Some(label));
            branch.points.push(pt);
        }

        if let Some((ds_star, refined, it, label)) = stop_after {
            let pt = make_point(problem, &refined, base_arc + ds_star, ds_star, it, Some(label));
            branch.points.push(pt);
            branch.step_history.push(ds_star);
            break 'outer;
        }

        push_point(problem, &mut branch, &state_new, ds, iters, None);
        branch.step_history.push(ds);

        // secant tangent for the next step
        let mut t_new = TangentVec {
            states: state_new
                .orbit
                .states
                .iter()
                .zip(&engine.anchor.orbit.states)
                .map(|(a, b)| a - b)
                .collect(),
            free: problem
                .gather(&state_new)
                .iter()
                .zip(problem.gather(&engine.anchor))
                .map(|(a, b)| a - b)
                .collect(),
        };
        let norm = tangent_norm(&state_new.orbit.mesh, n, &t_new, &engine.scaling);
        if norm > 0.0 {
            for v in t_new.states.iter_mut() {
                *v /= norm;
            }
            for v in t_new.free.iter_mut() {
                *v /= norm;
            }
            if tangent_dot(
                &state_new.orbit.mesh,
                n,
                &t_new,
                &engine.tangent,
                &engine.scaling,
            ) < 0.0
            {
                flip(&mut t_new);
            }
            engine.tangent = t_new;
        }

        engine.phase_ref = state_new.orbit.clone();
        engine.anchor = state_new;
        scaling.update(problem, &engine.anchor);
        engine.scaling = scaling.clone();

        if run.step_schedule.is_none() && iters <= policy.grow_threshold {
            ds = (ds * policy.grow).min(policy.ds_max);
        }

        // mesh adaptation
        if run.adapt_every > 0 && steps % run.adapt_every == 0 {
            match adapt_mesh(problem, &engine.anchor, &engine.phase_ref, &policy) {
                Ok(adapted) => {
                    engine.phase_ref = adapted.orbit.clone();
                    engine.anchor = adapted;
                    // tangent lives on the old mesh; rebuild from nullspace
                    let mut t_unit = TangentVec {
                        states: vec![0.0; engine.anchor.orbit.states.len()],
                        free: vec![0.0; problem.n_free()],
                    };
                    t_unit.free[orient_idx] = 1.0;
                    let mut t = problem.nullspace_tangent(
                        &engine.anchor,
                        &engine.phase_ref,
                        &t_unit,
                        &engine.scaling,
                    )?;
                    // keep heading: compare the free parts
                    let dot: f64 = t
                        .free
                        .iter()
                        .zip(&engine.tangent.free)
                        .zip(&engine.scaling.free)
                        .map(|((a, b), s)| a * b / (s * s))
                        .sum();
                    if dot < 0.0 {
                        flip(&mut t);
                    }
                    engine.tangent = t;
                }
                Err(e) => {
                    log::warn!("mesh adaptation skipped: {e}");
                }
            }
        }
    }

    Ok(branch)
}

fn flip(t: &mut TangentVec) {
    for v in t.states.iter_mut() {
        *v = -*v;
    }
    for v in t.free.iter_mut() {
        *v = -*v;
    }
}

fn make_point(
    problem: &CycleProblem,
    state: &CycleState,
    arclength: f64,
    ds: f64,
    iters: usize,
    label: Option<Label>,
) -> BranchPoint<CycleState> {
    let monitors = monitor_row(problem, state);
    let free_values: Vec<(String, f64)> = problem
        .free_names()
        .into_iter()
        .zip(problem.gather(state))
        .collect();
    BranchPoint {
        solution: state.clone(),
        free_values,
        monitors,
        label,
        arclength,
        ds,
        newton_iters: iters,
    }
}

fn push_point(
    problem: &CycleProblem,
    branch: &mut ContinuationBranch<CycleState>,
    state: &CycleState,
    ds: f64,
    iters: usize,
    label: Option<Label>,
) {
    let arclength = branch.last().map(|p| p.arclength).unwrap_or(0.0) + ds;
    let pt = make_point(problem, state, arclength, ds, iters, label);
    branch.points.push(pt);
}
