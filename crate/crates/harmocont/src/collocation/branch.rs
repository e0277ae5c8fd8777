//! Branch bookkeeping shared by the equilibrium and periodic-orbit
//! continuation engines: accepted points with monitored scalars, event
//! labels, and the adaptive step policy.

use serde::{Deserialize, Serialize};

/// Event labels attached to branch points. The two-letter tags follow the
/// AUTO convention in output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    /// Hopf bifurcation with angular frequency `omega`.
    Hopf { omega: f64 },
    /// Fold (limit point) in the named free parameter.
    Fold { param: String },
    /// User-requested value of a monitored scalar.
    UserValue { monitor: String, target: f64 },
    /// Endpoint refined onto a stop bound.
    Endpoint { monitor: String, target: f64 },
}

impl Label {
    pub fn tag(&self) -> &'static str {
        match self {
            Label::Hopf { .. } => "HB",
            Label::Fold { .. } => "LP",
            Label::UserValue { .. } => "UZ",
            Label::Endpoint { .. } => "EP",
        }
    }
}

/// One accepted continuation point carrying its solution object.
#[derive(Debug, Clone)]
pub struct BranchPoint<S> {
    pub solution: S,
    /// Free-parameter values in engine order, `(name, value)`.
    pub free_values: Vec<(String, f64)>,
    /// Monitored scalars in a fixed per-branch order, `(name, value)`.
    pub monitors: Vec<(String, f64)>,
    pub label: Option<Label>,
    /// Cumulative pseudo-arclength.
    pub arclength: f64,
    /// Accepted step from the previous point (0 for the first).
    pub ds: f64,
    pub newton_iters: usize,
}

impl<S> BranchPoint<S> {
    pub fn monitor(&self, name: &str) -> Option<f64> {
        self.monitors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn free_value(&self, name: &str) -> Option<f64> {
        self.free_values
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Ordered sequence of accepted points from one continuation run.
#[derive(Debug, Clone)]
pub struct ContinuationBranch<S> {
    pub name: String,
    pub points: Vec<BranchPoint<S>>,
    /// Set when the run ended in a step underflow rather than a stop
    /// criterion; the partial branch is still returned.
    pub stalled: bool,
    /// Accepted step sizes in order, for replaying a run in reverse.
    pub step_history: Vec<f64>,
}

impl<S> ContinuationBranch<S> {
    pub fn new(name: impl Into<String>) -> Self {
        ContinuationBranch {
            name: name.into(),
            points: Vec::new(),
            stalled: false,
            step_history: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&BranchPoint<S>> {
        self.points.last()
    }

    pub fn labeled(&self) -> impl Iterator<Item = &BranchPoint<S>> {
        self.points.iter().filter(|p| p.label.is_some())
    }
}

/// Adaptive pseudo-arclength step policy: start at `ds0`, halve on Newton
/// failure (up to `max_halvings`, then the branch stalls), grow by `grow`
/// when the corrector converges in at most `grow_threshold` iterations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepPolicy {
    pub ds0: f64,
    pub ds_max: f64,
    pub grow: f64,
    pub grow_threshold: usize,
    pub max_halvings: usize,
    pub max_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            ds0: 1e-2,
            ds_max: 0.25,
            grow: 1.3,
            grow_threshold: 3,
            max_halvings: 10,
            max_steps: 1000,
            newton_tol: 1e-10,
            newton_max_iter: 10,
        }
    }
}

/// A stop bound on a monitored scalar (usually a free parameter). When a
/// step crosses the bound the engine refines the endpoint onto it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StopBound {
    pub monitor: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl StopBound {
    pub fn range(monitor: impl Into<String>, min: f64, max: f64) -> Self {
        StopBound {
            monitor: monitor.into(),
            min: Some(min),
            max: Some(max),
        }
    }

    /// Returns the violated bound value, if any.
    pub fn crossed(&self, value: f64) -> Option<f64> {
        if let Some(lo) = self.min {
            if value < lo {
                return Some(lo);
            }
        }
        if let Some(hi) = self.max {
            if value > hi {
                return Some(hi);
            }
        }
        None
    }
}
