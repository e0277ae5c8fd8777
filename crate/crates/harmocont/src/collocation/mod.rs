//! The extended periodic boundary value problem and its continuation engine.
//!
//! A periodic orbit is rescaled to the unit interval (`x' = T g(x, s; p)`)
//! and discretized by piecewise-polynomial orthogonal collocation at Gauss
//! points. The Newton system is bordered: extra rows are the periodicity
//! condition, the integral phase condition, the Fourier-coefficient
//! conditions, the K_REF condition and the pseudo-arclength equation; extra
//! columns are the free parameters (system parameters, the period, the
//! monitored coefficients and K_REF). With `n_a + n_b` monitored
//! coefficients there are `n_a + n_b + 2` integral conditions and, adding the
//! pseudo-arclength equation, `n_a + n_b + 3` free continuation parameters.

pub mod branch;
pub mod mesh;
pub mod orbit;

pub use branch::{BranchPoint, ContinuationBranch, Label, StepPolicy, StopBound};
pub use mesh::{gauss_legendre_unit, LagrangeBasis, Mesh};
pub use orbit::PeriodicOrbit;

use crate::dynsys::DynSystem;
use crate::error::{Error, Result};
use crate::harmonic::{kref_gradient, kref_value_from, CoefKey, KRefKind, Trig};
use crate::linbord::{solve_bordered, BorderedSystem, Mat};
use std::collections::BTreeMap;

/// Residual and update tolerance of the collocation Newton corrector.
pub const TOL_BVP: f64 = 1e-10;
/// Refinement tolerance for user-value, fold and endpoint labels.
pub const TOL_LABEL: f64 = 1e-8;

/// One integral condition of the boundary value problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// `int_0^1 <x(s), x_old'(s)> ds = 0` against the previous accepted
    /// point.
    Phase,
    /// `int_0^1 (2 x_j(s) sin(2 pi k s) - a_kj) ds = 0`.
    FourierSin { k: usize, j: usize },
    /// `int_0^1 (2 x_j(s) cos(2 pi k s) - b_kj) ds = 0`.
    FourierCos { k: usize, j: usize },
    /// `f(S_a, S_b, T, K_REF) = 0` (the integrand is constant in `s`).
    KRef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralConstraint {
    pub kind: ConstraintKind,
}

impl IntegralConstraint {
    pub fn phase() -> Self {
        IntegralConstraint {
            kind: ConstraintKind::Phase,
        }
    }

    pub fn fourier(key: CoefKey) -> Self {
        IntegralConstraint {
            kind: match key.trig {
                Trig::Sin => ConstraintKind::FourierSin { k: key.k, j: key.j },
                Trig::Cos => ConstraintKind::FourierCos { k: key.k, j: key.j },
            },
        }
    }

    pub fn kref() -> Self {
        IntegralConstraint {
            kind: ConstraintKind::KRef,
        }
    }

    /// The fixed weight function of the Fourier conditions, where one
    /// exists.
    pub fn weight(&self, s: f64) -> Option<f64> {
        match &self.kind {
            ConstraintKind::FourierSin { k, .. } => {
                Some(2.0 * (std::f64::consts::TAU * *k as f64 * s).sin())
            }
            ConstraintKind::FourierCos { k, .. } => {
                Some(2.0 * (std::f64::consts::TAU * *k as f64 * s).cos())
            }
            _ => None,
        }
    }

    fn coef_key(&self) -> Option<CoefKey> {
        match &self.kind {
            ConstraintKind::FourierSin { k, j } => Some(CoefKey::sin(*k, *j)),
            ConstraintKind::FourierCos { k, j } => Some(CoefKey::cos(*k, *j)),
            _ => None,
        }
    }
}

/// A free continuation parameter (a border column of the Newton system).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreeUnknown {
    /// Index into the system parameter vector.
    SystemParam(usize),
    Period,
    Coef(CoefKey),
    KRef,
}

/// Current iterate of the extended BVP: the discretized orbit (which owns
/// the period and the full system parameter vector) plus the coefficient
/// unknowns and the K_REF value.
#[derive(Debug, Clone)]
pub struct CycleState {
    pub orbit: PeriodicOrbit,
    pub coefs: BTreeMap<CoefKey, f64>,
    pub kref: f64,
}

impl CycleState {
    pub fn coef(&self, key: &CoefKey) -> Option<f64> {
        self.coefs.get(key).copied()
    }
}

/// The extended boundary value problem: system, integral conditions and
/// free parameters. Constructed by [`CycleProblem::new`], which enforces the
/// free-parameter count rule.
#[derive(Debug, Clone)]
pub struct CycleProblem<'a> {
    pub system: &'a DynSystem,
    pub constraints: Vec<IntegralConstraint>,
    pub free: Vec<FreeUnknown>,
    pub kref_kind: Option<KRefKind>,
    with_arclength: bool,
}

impl<'a> CycleProblem<'a> {
    /// A problem for pseudo-arclength continuation:
    /// `free.len() == constraints.len() + 1`.
    pub fn new(
        system: &'a DynSystem,
        constraints: Vec<IntegralConstraint>,
        free: Vec<FreeUnknown>,
        kref_kind: Option<KRefKind>,
    ) -> Result<Self> {
        let required = constraints.len() + 1;
        if free.len() != required {
            return Err(Error::CountRule {
                constraints: constraints.len(),
                required,
                got: free.len(),
            });
        }
        let p = CycleProblem {
            system,
            constraints,
            free,
            kref_kind,
            with_arclength: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// A square corrector problem (no pseudo-arclength equation):
    /// `free.len() == constraints.len()`. Used by the orbit starter and by
    /// post-adaptation corrections.
    pub fn new_square(
        system: &'a DynSystem,
        constraints: Vec<IntegralConstraint>,
        free: Vec<FreeUnknown>,
        kref_kind: Option<KRefKind>,
    ) -> Result<Self> {
        if free.len() != constraints.len() {
            return Err(Error::Config(format!(
                "square corrector needs as many free parameters as constraints, got {} vs {}",
                free.len(),
                constraints.len()
            )));
        }
        let p = CycleProblem {
            system,
            constraints,
            free,
            kref_kind,
            with_arclength: false,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let n = self.system.dim();
        let mut constraint_keys = Vec::new();
        let mut kref_rows = 0usize;
        for c in &self.constraints {
            if let Some(key) = c.coef_key() {
                if key.j == 0 || key.j > n {
                    return Err(Error::Config(format!(
                        "constraint state index {} outside 1..={n}",
                        key.j
                    )));
                }
                if constraint_keys.contains(&key) {
                    return Err(Error::Config(format!(
                        "duplicate Fourier condition for {}",
                        key.name()
                    )));
                }
                constraint_keys.push(key);
            }
            if c.kind == ConstraintKind::KRef {
                kref_rows += 1;
            }
        }
        if kref_rows > 1 {
            return Err(Error::Config("at most one K_REF condition".into()));
        }
        if kref_rows == 1 && self.kref_kind.is_none() {
            return Err(Error::Config("K_REF condition without a kind".into()));
        }
        for f in &self.free {
            match f {
                FreeUnknown::Coef(key) => {
                    if !constraint_keys.contains(key) {
                        return Err(Error::Config(format!(
                            "free coefficient {} has no defining integral condition",
                            key.name()
                        )));
                    }
                }
                FreeUnknown::KRef => {
                    if kref_rows == 0 {
                        return Err(Error::Config(
                            "free K_REF without its integral condition".into(),
                        ));
                    }
                }
                FreeUnknown::SystemParam(i) => {
                    if *i >= self.system.n_params() {
                        return Err(Error::Config(format!(
                            "free system parameter index {i} out of range"
                        )));
                    }
                }
                FreeUnknown::Period => {}
            }
        }
        if let Some(kind) = &self.kref_kind {
            for key in kind.required_keys() {
                if !constraint_keys.contains(&key) {
                    return Err(Error::Config(format!(
                        "K_REF reads {} which has no integral condition",
                        key.name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free
            .iter()
            .map(|f| match f {
                FreeUnknown::SystemParam(i) => self.system.param_names()[*i].clone(),
                FreeUnknown::Period => "T".to_string(),
                FreeUnknown::Coef(key) => key.name(),
                FreeUnknown::KRef => "K".to_string(),
            })
            .collect()
    }

    /// Gathers the current values of the free unknowns.
    pub fn gather(&self, state: &CycleState) -> Vec<f64> {
        self.free
            .iter()
            .map(|f| match f {
                FreeUnknown::SystemParam(i) => state.orbit.params[*i],
                FreeUnknown::Period => state.orbit.period,
                FreeUnknown::Coef(key) => state.coefs[key],
                FreeUnknown::KRef => state.kref,
            })
            .collect()
    }

    /// Adds `delta` to the free unknowns of `state`.
    pub fn scatter_add(&self, state: &mut CycleState, delta: &[f64]) {
        for (f, d) in self.free.iter().zip(delta) {
            match f {
                FreeUnknown::SystemParam(i) => state.orbit.params[*i] += d,
                FreeUnknown::Period => state.orbit.period += d,
                FreeUnknown::Coef(key) => *state.coefs.get_mut(key).unwrap() += d,
                FreeUnknown::KRef => state.kref += d,
            }
        }
    }

    fn kref_residual(&self, state: &CycleState) -> Result<f64> {
        let kind = self.kref_kind.as_ref().expect("kref kind");
        let value = kref_value_from(
            kind,
            &|key| state.coefs.get(key).copied(),
            state.orbit.period,
        )?;
        Ok(value - state.kref)
    }
}

/// Pseudo-arclength data for one corrector run: the anchor point, the
/// normalized tangent, and the step length.
pub struct ArcSpec<'s> {
    pub anchor: &'s CycleState,
    pub tangent: &'s TangentVec,
    pub ds: f64,
}

/// A direction in the unknown space (state part on the orbit mesh plus free
/// part), used for tangents and deltas.
#[derive(Debug, Clone)]
pub struct TangentVec {
    pub states: Vec<f64>,
    pub free: Vec<f64>,
}

/// Running per-component magnitude scales: state components share one scale
/// per component, each free unknown has its own. All norms and inner
/// products divide by these, so tolerances act relatively.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub comp: Vec<f64>,
    pub free: Vec<f64>,
}

impl Scaling {
    pub fn from_state(problem: &CycleProblem, state: &CycleState) -> Self {
        let comp = state
            .orbit
            .component_magnitudes()
            .iter()
            .map(|v| v.max(1.0))
            .collect();
        let free = problem
            .gather(state)
            .iter()
            .map(|v| v.abs().max(1.0))
            .collect();
        Scaling { comp, free }
    }

    pub fn update(&mut self, problem: &CycleProblem, state: &CycleState) {
        for (s, v) in self.comp.iter_mut().zip(state.orbit.component_magnitudes()) {
            *s = s.max(v);
        }
        for (s, v) in self.free.iter_mut().zip(problem.gather(state)) {
            *s = s.max(v.abs());
        }
    }
}

/// Scaled inner product of two directions on the same mesh: the state parts
/// are integrated as interpolant products by the mesh's Gauss rule, the free
/// parts use a plain weighted dot product.
pub fn tangent_dot(mesh: &Mesh, n: usize, a: &TangentVec, b: &TangentVec, scaling: &Scaling) -> f64 {
    let m = mesh.degree();
    let mut total = 0.0;
    let mut xa = vec![0.0; n];
    let mut xb = vec![0.0; n];
    for i in 0..mesh.n_intervals() {
        for l in 0..m {
            let basis = mesh.basis_at_gauss(l);
            xa.fill(0.0);
            xb.fill(0.0);
            for j in 0..=m {
                let w = basis[j];
                let base = mesh.point_index(i, j) * n;
                for c in 0..n {
                    xa[c] += w * a.states[base + c];
                    xb[c] += w * b.states[base + c];
                }
            }
            let wq = mesh.gauss_weight(i, l);
            for c in 0..n {
                total += wq * xa[c] * xb[c] / (scaling.comp[c] * scaling.comp[c]);
            }
        }
    }
    for ((x, y), s) in a.free.iter().zip(&b.free).zip(&scaling.free) {
        total += x * y / (s * s);
    }
    total
}

pub fn tangent_norm(mesh: &Mesh, n: usize, a: &TangentVec, scaling: &Scaling) -> f64 {
    tangent_dot(mesh, n, a, a, scaling).sqrt()
}

/// Residual magnitudes of one assembly, for convergence decisions.
#[derive(Debug, Clone, Copy)]
pub struct ResidualInfo {
    /// Collocation + periodicity residual, scaled by `max(1, max |T g|)`.
    pub core_scaled: f64,
    /// Largest unscaled integral-constraint (and arclength) residual.
    pub constraints: f64,
}

impl ResidualInfo {
    pub fn max(&self) -> f64 {
        self.core_scaled.max(self.constraints)
    }
}

impl<'a> CycleProblem<'a> {
    /// Assembles the bordered Newton system at `state`.
    ///
    /// `phase_ref` is the previous accepted orbit (the `x_old` of the phase
    /// condition); `arc` adds the pseudo-arclength row when the problem was
    /// built with one.
    pub fn discretize(
        &self,
        state: &CycleState,
        phase_ref: &PeriodicOrbit,
        arc: Option<&ArcSpec>,
        scaling: &Scaling,
    ) -> Result<(BorderedSystem, ResidualInfo)> {
        let orbit = &state.orbit;
        let mesh = &orbit.mesh;
        let n = self.system.dim();
        if orbit.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: orbit.n,
                context: "orbit state dimension",
            });
        }
        if self.with_arclength != arc.is_some() {
            return Err(Error::Contract(
                "arclength data must match the problem mode".into(),
            ));
        }
        let m = mesh.degree();
        let n_pts = mesh.n_points();
        let core_size = n_pts * n;
        let nf = self.free.len();
        let n_rows = self.constraints.len() + usize::from(self.with_arclength);

        let mut core = Mat::zeros(core_size, core_size);
        let mut cols = Mat::zeros(core_size, nf);
        let mut rows = Mat::zeros(n_rows, core_size);
        let mut corner = Mat::zeros(n_rows, nf);
        let mut rhs = vec![0.0; core_size + n_rows];

        let period = orbit.period;
        let params = &orbit.params;

        // positions of special free unknowns
        let idx_period = self.free.iter().position(|f| *f == FreeUnknown::Period);
        let idx_kref = self.free.iter().position(|f| *f == FreeUnknown::KRef);
        let sys_param_cols: Vec<(usize, usize)> = self
            .free
            .iter()
            .enumerate()
            .filter_map(|(c, f)| match f {
                FreeUnknown::SystemParam(i) => Some((c, *i)),
                _ => None,
            })
            .collect();
        let coef_col = |key: &CoefKey| -> Option<usize> {
            self.free.iter().position(|f| matches!(f, FreeUnknown::Coef(k) if k == key))
        };

        // tangent / anchor interpolants at Gauss points are rebuilt cheaply
        // from the basis tables inside the loop below
        let mut x_gauss = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut jac = Mat::zeros(n, n);
        let mut g_scale = 1.0f64;
        let mut arc_residual = 0.0f64;

        for i in 0..mesh.n_intervals() {
            let h = mesh.interval_length(i);
            for l in 0..m {
                let basis = mesh.basis_at_gauss(l);
                let dbasis = mesh.dbasis_at_gauss(l);
                let s = mesh.gauss_coord(i, l);
                let wq = mesh.gauss_weight(i, l);

                x_gauss.fill(0.0);
                for j in 0..=m {
                    let w = basis[j];
                    let pt = orbit.point(mesh.point_index(i, j));
                    for c in 0..n {
                        x_gauss[c] += w * pt[c];
                    }
                }
                self.system.eval_rhs_into(&x_gauss, s, params, &mut g);
                self.system.jacobian_x_into(&x_gauss, s, params, &mut jac);

                let row_base = (i * m + l) * n;
                // residual: sum_j L_j'/h u_j - T g
                for c in 0..n {
                    let mut deriv = 0.0;
                    for j in 0..=m {
                        deriv += dbasis[j] / h * orbit.point(mesh.point_index(i, j))[c];
                    }
                    rhs[row_base + c] = -(deriv - period * g[c]);
                    g_scale = g_scale.max((period * g[c]).abs());
                }
                // core block
                for j in 0..=m {
                    let col_base = mesh.point_index(i, j) * n;
                    let lv = basis[j];
                    let ld = dbasis[j] / h;
                    for r in 0..n {
                        let row = row_base + r;
                        for c in 0..n {
                            let mut v = -period * lv * jac[(r, c)];
                            if r == c {
                                v += ld;
                            }
                            core[(row, col_base + c)] += v;
                        }
                    }
                }
                // period column
                if let Some(cp) = idx_period {
                    for r in 0..n {
                        cols[(row_base + r, cp)] = -g[r];
                    }
                }
                // free system-parameter columns
                for &(col, pidx) in &sys_param_cols {
                    let gp = self.system.jacobian_p(&x_gauss, s, params, pidx)?;
                    for r in 0..n {
                        cols[(row_base + r, col)] = -period * gp[r];
                    }
                }

                // constraint rows: quadrature contributions
                for (ci, con) in self.constraints.iter().enumerate() {
                    match &con.kind {
                        ConstraintKind::Phase => {
                            let dref = phase_ref.eval_deriv(s)?;
                            let mut acc = 0.0;
                            for c in 0..n {
                                acc += x_gauss[c] * dref[c];
                            }
                            rhs[core_size + ci] -= wq * acc;
                            for j in 0..=m {
                                let col_base = mesh.point_index(i, j) * n;
                                for c in 0..n {
                                    rows[(ci, col_base + c)] += wq * basis[j] * dref[c];
                                }
                            }
                        }
                        ConstraintKind::FourierSin { k, j: state_j }
                        | ConstraintKind::FourierCos { k, j: state_j } => {
                            let w = match con.kind {
                                ConstraintKind::FourierSin { .. } => {
                                    2.0 * (std::f64::consts::TAU * *k as f64 * s).sin()
                                }
                                _ => 2.0 * (std::f64::consts::TAU * *k as f64 * s).cos(),
                            };
                            let c = state_j - 1;
                            rhs[core_size + ci] -= wq * w * x_gauss[c];
                            for j in 0..=m {
                                let col_base = mesh.point_index(i, j) * n;
                                rows[(ci, col_base + c)] += wq * basis[j] * w;
                            }
                        }
                        ConstraintKind::KRef => {}
                    }
                }
            }
        }

        // arclength row: interpolant products against the tangent, plus the
        // free-unknown part
        if let Some(arc) = arc {
            let arc_row = self.constraints.len();
            let mut xt = vec![0.0; n];
            let mut xd = vec![0.0; n];
            for i in 0..mesh.n_intervals() {
                for l in 0..m {
                    let basis = mesh.basis_at_gauss(l);
                    let wq = mesh.gauss_weight(i, l);
                    xt.fill(0.0);
                    xd.fill(0.0);
                    for j in 0..=m {
                        let w = basis[j];
                        let base = mesh.point_index(i, j) * n;
                        for c in 0..n {
                            xt[c] += w * arc.tangent.states[base + c];
                            xd[c] += w
                                * (orbit.states[base + c] - arc.anchor.orbit.states[base + c]);
                        }
                    }
                    for c in 0..n {
                        let sc = scaling.comp[c] * scaling.comp[c];
                        arc_residual += wq * xd[c] * xt[c] / sc;
                    }
                    for j in 0..=m {
                        let w = basis[j];
                        let col_base = mesh.point_index(i, j) * n;
                        for c in 0..n {
                            let sc = scaling.comp[c] * scaling.comp[c];
                            rows[(arc_row, col_base + c)] += wq * w * xt[c] / sc;
                        }
                    }
                }
            }
            let free_now = self.gather(state);
            let free_anchor = self.gather(arc.anchor);
            for (fidx, ((now, anch), t)) in free_now
                .iter()
                .zip(&free_anchor)
                .zip(&arc.tangent.free)
                .enumerate()
            {
                let sf = scaling.free[fidx] * scaling.free[fidx];
                arc_residual += (now - anch) * t / sf;
                corner[(arc_row, fidx)] = t / sf;
            }
            arc_residual -= arc.ds;
            rhs[core_size + arc_row] = -arc_residual;
        }

        // periodicity rows
        let per_base = mesh.n_intervals() * m * n;
        let last_base = (n_pts - 1) * n;
        for c in 0..n {
            core[(per_base + c, last_base + c)] += 1.0;
            core[(per_base + c, c)] -= 1.0;
            rhs[per_base + c] = -(orbit.states[last_base + c] - orbit.states[c]);
        }

        // coefficient columns of the Fourier rows, and the K_REF row
        for (ci, con) in self.constraints.iter().enumerate() {
            if let Some(key) = con.coef_key() {
                let value = state.coefs.get(&key).copied().ok_or_else(|| {
                    Error::Config(format!("state carries no value for {}", key.name()))
                })?;
                rhs[core_size + ci] += value; // residual gets "- a_kj"
                if let Some(col) = coef_col(&key) {
                    corner[(ci, col)] = -1.0;
                }
            }
            if con.kind == ConstraintKind::KRef {
                let res = self.kref_residual(state)?;
                rhs[core_size + ci] = -res;
                let kind = self.kref_kind.as_ref().unwrap();
                let grad = kref_gradient(kind, &|key| state.coefs.get(key).copied())?;
                for (key, d) in grad {
                    if let Some(col) = coef_col(&key) {
                        corner[(ci, col)] += d;
                    }
                }
                if let Some(ck) = idx_kref {
                    corner[(ci, ck)] -= 1.0;
                }
            }
        }

        let mut core_res = 0.0f64;
        for v in rhs.iter().take(core_size) {
            core_res = core_res.max(v.abs());
        }
        let mut con_res = 0.0f64;
        for v in rhs.iter().skip(core_size) {
            con_res = con_res.max(v.abs());
        }

        Ok((
            BorderedSystem {
                core,
                cols,
                rows,
                corner,
                rhs,
            },
            ResidualInfo {
                core_scaled: core_res / g_scale,
                constraints: con_res,
            },
        ))
    }

    /// Newton correction of `state` in place. Returns the iteration count.
    pub fn newton_correct(
        &self,
        state: &mut CycleState,
        phase_ref: &PeriodicOrbit,
        arc: Option<&ArcSpec>,
        scaling: &Scaling,
        policy: &StepPolicy,
    ) -> Result<usize> {
        let n = self.system.dim();
        let core_size = state.orbit.mesh.n_points() * n;
        let mut prev_res = f64::INFINITY;
        let mut growth_count = 0usize;
        for iter in 0..policy.newton_max_iter {
            let (sys, info) = self.discretize(state, phase_ref, arc, scaling)?;
            let res = info.max();
            if res > prev_res * 1.0001 {
                growth_count += 1;
                if growth_count >= 2 {
                    return Err(Error::ConvergenceFailure {
                        iterations: iter,
                        residual: res,
                    });
                }
            } else {
                growth_count = 0;
            }
            prev_res = res;

            let delta = solve_bordered(&sys)?;
            let mut update = 0.0f64;
            for (k, d) in delta.iter().take(core_size).enumerate() {
                let c = k % n;
                state.orbit.states[k] += d;
                update = update.max(d.abs() / scaling.comp[c]);
            }
            self.scatter_add(state, &delta[core_size..]);
            for (fidx, d) in delta[core_size..].iter().enumerate() {
                update = update.max(d.abs() / scaling.free[fidx]);
            }

            if update < policy.newton_tol {
                let (_, info) = self.discretize(state, phase_ref, arc, scaling)?;
                if info.max() < policy.newton_tol.max(TOL_BVP) {
                    return Ok(iter + 1);
                }
            }
        }
        let (_, info) = self.discretize(state, phase_ref, arc, scaling)?;
        if info.max() < policy.newton_tol.max(TOL_BVP) {
            return Ok(policy.newton_max_iter);
        }
        Err(Error::ConvergenceFailure {
            iterations: policy.newton_max_iter,
            residual: info.max(),
        })
    }

    /// Nullspace tangent at a converged point: solve the system whose last
    /// row is the previous tangent (normalization) with unit right-hand
    /// side, then normalize and orient along `orient`.
    pub fn nullspace_tangent(
        &self,
        state: &CycleState,
        phase_ref: &PeriodicOrbit,
        normalization: &TangentVec,
        scaling: &Scaling,
    ) -> Result<TangentVec> {
        if !self.with_arclength {
            return Err(Error::Contract(
                "nullspace tangent needs an arclength-mode problem".into(),
            ));
        }
        let n = self.system.dim();
        let mesh = &state.orbit.mesh;
        let core_size = mesh.n_points() * n;
        let arc = ArcSpec {
            anchor: state,
            tangent: normalization,
            ds: 0.0,
        };
        let (mut sys, _) = self.discretize(state, phase_ref, Some(&arc), scaling)?;
        // zero all residuals, demand unit arclength response
        for v in sys.rhs.iter_mut() {
            *v = 0.0;
        }
        let last = sys.rhs.len() - 1;
        sys.rhs[last] = 1.0;
        let z = solve_bordered(&sys)?;
        let mut t = TangentVec {
            states: z[..core_size].to_vec(),
            free: z[core_size..].to_vec(),
        };
        let norm = tangent_norm(mesh, n, &t, scaling);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Contract("degenerate nullspace tangent".into()));
        }
        for v in t.states.iter_mut() {
            *v /= norm;
        }
        for v in t.free.iter_mut() {
            *v /= norm;
        }
        Ok(t)
    }
}
