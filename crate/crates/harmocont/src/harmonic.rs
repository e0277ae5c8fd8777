//! The harmonic layer: Fourier coefficient extraction on collocation
//! orbits, the K_REF test function in its iso-harmonic / iso-ratio /
//! iso-energy variants, the Hopf starter, and the high-level continuation
//! drivers.
//!
//! Index convention: `(k, j)` pairs use `k >= 1` for the harmonic number
//! and 1-based `j` for the state component, matching the `a_{kj}` notation
//! of the underlying signal expansion
//! `x_j(t) = a_{0j} + sum_k [a_{kj} sin(k w t) + b_{kj} cos(k w t)]`.

use crate::collocation::PeriodicOrbit;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Denominator amplitudes below this bound make a Ratio test function
/// degenerate.
pub const EPS_RATIO: f64 = 1e-8;

/// Sine/cosine selector for a single Fourier coefficient unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Trig {
    Sin,
    Cos,
}

/// Key of one monitored coefficient: harmonic `k >= 1`, state `j` (1-based),
/// sine or cosine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoefKey {
    pub k: usize,
    pub j: usize,
    pub trig: Trig,
}

impl CoefKey {
    pub fn sin(k: usize, j: usize) -> Self {
        CoefKey { k, j, trig: Trig::Sin }
    }

    pub fn cos(k: usize, j: usize) -> Self {
        CoefKey { k, j, trig: Trig::Cos }
    }

    /// Monitor/column name, e.g. `a_1_2` for the sine coefficient of the
    /// first harmonic of state 2.
    pub fn name(&self) -> String {
        match self.trig {
            Trig::Sin => format!("a_{}_{}", self.k, self.j),
            Trig::Cos => format!("b_{}_{}", self.k, self.j),
        }
    }
}

/// The K_REF test-function variants. All amplitudes refer to
/// `A_k = sqrt(a_{kj}^2 + b_{kj}^2)` of the state component `j`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum KRefKind {
    /// `A_k` of one harmonic.
    Harmonic { k: usize, j: usize },
    /// `A_p / A_q` of two harmonics of the same state.
    Ratio { k_num: usize, k_den: usize, j: usize },
    /// `sum A_k^2` over a harmonic set of one state.
    Energy { ks: Vec<usize>, j: usize },
}

impl KRefKind {
    /// The `(k, j)` sine/cosine coefficients this kind reads.
    pub fn required_keys(&self) -> Vec<CoefKey> {
        let mut keys = Vec::new();
        match self {
            KRefKind::Harmonic { k, j } => {
                keys.push(CoefKey::sin(*k, *j));
                keys.push(CoefKey::cos(*k, *j));
            }
            KRefKind::Ratio { k_num, k_den, j } => {
                for k in [k_num, k_den] {
                    keys.push(CoefKey::sin(*k, *j));
                    keys.push(CoefKey::cos(*k, *j));
                }
            }
            KRefKind::Energy { ks, j } => {
                for k in ks {
                    keys.push(CoefKey::sin(*k, *j));
                    keys.push(CoefKey::cos(*k, *j));
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }
}

/// The index sets of monitored sine/cosine coefficients plus the K_REF
/// kind. `s_a` and `s_b` are kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpec {
    s_a: Vec<(usize, usize)>,
    s_b: Vec<(usize, usize)>,
    pub kref: Option<KRefKind>,
}

impl FourierSpec {
    pub fn new(
        mut s_a: Vec<(usize, usize)>,
        mut s_b: Vec<(usize, usize)>,
        kref: Option<KRefKind>,
        state_dim: usize,
    ) -> Result<Self> {
        s_a.sort();
        s_b.sort();
        for set in [&s_a, &s_b] {
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config("duplicate (k, j) pair in Fourier spec".into()));
            }
            for &(k, j) in set.iter() {
                if k == 0 {
                    return Err(Error::Config(
                        "Fourier constraint sets range over k >= 1; the mean a_0j is computed, \
                         never constrained"
                            .into(),
                    ));
                }
                if j == 0 || j > state_dim {
                    return Err(Error::Config(format!(
                        "state index j = {j} outside 1..={state_dim}"
                    )));
                }
            }
        }
        let spec = FourierSpec { s_a, s_b, kref };
        if let Some(kind) = &spec.kref {
            if let KRefKind::Energy { ks, .. } = kind {
                if ks.is_empty() {
                    return Err(Error::Config("empty harmonic set in K_REF Energy kind".into()));
                }
            }
            for key in kind.required_keys() {
                let present = match key.trig {
                    Trig::Sin => spec.s_a.contains(&(key.k, key.j)),
                    Trig::Cos => spec.s_b.contains(&(key.k, key.j)),
                };
                if !present {
                    return Err(Error::Config(format!(
                        "K_REF reads {} which is not in the monitored sets",
                        key.name()
                    )));
                }
            }
        }
        Ok(spec)
    }

    /// Plain spec monitoring a single harmonic `(k, j)` with an amplitude
    /// K_REF.
    pub fn single_harmonic(k: usize, j: usize, state_dim: usize) -> Result<Self> {
        FourierSpec::new(
            vec![(k, j)],
            vec![(k, j)],
            Some(KRefKind::Harmonic { k, j }),
            state_dim,
        )
    }

    pub fn s_a(&self) -> &[(usize, usize)] {
        &self.s_a
    }

    pub fn s_b(&self) -> &[(usize, usize)] {
        &self.s_b
    }

    pub fn n_a(&self) -> usize {
        self.s_a.len()
    }

    pub fn n_b(&self) -> usize {
        self.s_b.len()
    }

    /// All coefficient unknowns in deterministic order (sines then cosines).
    pub fn coef_keys(&self) -> Vec<CoefKey> {
        self.s_a
            .iter()
            .map(|&(k, j)| CoefKey::sin(k, j))
            .chain(self.s_b.iter().map(|&(k, j)| CoefKey::cos(k, j)))
            .collect()
    }
}

/// Extracted Fourier data of one orbit: coefficient map, per-state means,
/// and the fundamental period.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    /// `(k, j) -> (a_kj, b_kj)`, `k >= 1`, `j` 1-based.
    pub map: BTreeMap<(usize, usize), (f64, f64)>,
    /// `j -> a_0j` mean values.
    pub means: BTreeMap<usize, f64>,
    pub period: f64,
}

impl HarmonicCoefficients {
    pub fn get(&self, k: usize, j: usize) -> Option<(f64, f64)> {
        self.map.get(&(k, j)).copied()
    }

    pub fn value(&self, key: &CoefKey) -> Option<f64> {
        self.map.get(&(key.k, key.j)).map(|(a, b)| match key.trig {
            Trig::Sin => *a,
            Trig::Cos => *b,
        })
    }

    /// Amplitude `A_k = sqrt(a^2 + b^2)` of `(k, j)`.
    pub fn amplitude(&self, k: usize, j: usize) -> Option<f64> {
        self.get(k, j).map(|(a, b)| a.hypot(b))
    }
}

/// Fourier coefficients of state `j` (1-based) at harmonic `k` on the unit
/// interval, by the same composite Gauss quadrature the collocation uses:
///
/// `a_kj = int_0^1 2 x_j(s) sin(2 pi k s) ds`,
/// `b_kj = int_0^1 2 x_j(s) cos(2 pi k s) ds`;
/// `k = 0` returns `(mean, 0)`.
pub fn fourier_coefficient(orbit: &PeriodicOrbit, k: usize, j: usize) -> Result<(f64, f64)> {
    if j == 0 || j > orbit.n {
        return Err(Error::DimensionMismatch {
            expected: orbit.n,
            got: j,
            context: "fourier coefficient state index (1-based)",
        });
    }
    let c = j - 1;
    if k == 0 {
        let mean = orbit.quadrature(|_s, x| x[c]);
        return Ok((mean, 0.0));
    }
    let kf = k as f64 * std::f64::consts::TAU;
    let a = orbit.quadrature(|s, x| 2.0 * x[c] * (kf * s).sin());
    let b = orbit.quadrature(|s, x| 2.0 * x[c] * (kf * s).cos());
    Ok((a, b))
}

/// Extracts all coefficients demanded by `spec` (plus the means of every
/// referenced state) from a converged orbit.
pub fn extract_coefficients(
    orbit: &PeriodicOrbit,
    spec: &FourierSpec,
    max_extra_k: usize,
) -> Result<HarmonicCoefficients> {
    let mut map = BTreeMap::new();
    let mut js: Vec<usize> = spec
        .s_a
        .iter()
        .chain(spec.s_b.iter())
        .map(|&(_, j)| j)
        .collect();
    js.sort_unstable();
    js.dedup();
    for &(k, j) in spec.s_a.iter().chain(spec.s_b.iter()) {
        map.entry((k, j))
            .or_insert(fourier_coefficient(orbit, k, j)?);
    }
    for &j in &js {
        for k in 1..=max_extra_k {
            map.entry((k, j))
                .or_insert(fourier_coefficient(orbit, k, j)?);
        }
    }
    let mut means = BTreeMap::new();
    for &j in &js {
        means.insert(j, fourier_coefficient(orbit, 0, j)?.0);
    }
    Ok(HarmonicCoefficients {
        map,
        means,
        period: orbit.period,
    })
}

/// Scalar K_REF test value for a coefficient lookup. The lookup is any
/// `(key) -> value` view (free-parameter vector, extracted coefficients...).
pub fn kref_value_from(
    kind: &KRefKind,
    lookup: &dyn Fn(&CoefKey) -> Option<f64>,
    _period: f64,
) -> Result<f64> {
    let amp = |k: usize, j: usize| -> Result<f64> {
        let a = lookup(&CoefKey::sin(k, j)).ok_or_else(|| {
            Error::Config(format!("missing coefficient a_{k}_{j} for K_REF"))
        })?;
        let b = lookup(&CoefKey::cos(k, j)).ok_or_else(|| {
            Error::Config(format!("missing coefficient b_{k}_{j} for K_REF"))
        })?;
        Ok(a.hypot(b))
    };
    match kind {
        KRefKind::Harmonic { k, j } => amp(*k, *j),
        KRefKind::Ratio { k_num, k_den, j } => {
            let denom = amp(*k_den, *j)?;
            if denom < EPS_RATIO {
                return Err(Error::DegenerateRatio {
                    amplitude: denom,
                    threshold: EPS_RATIO,
                });
            }
            Ok(amp(*k_num, *j)? / denom)
        }
        KRefKind::Energy { ks, j } => {
            let mut sum = 0.0;
            for k in ks {
                let a = amp(*k, *j)?;
                sum += a * a;
            }
            Ok(sum)
        }
    }
}

/// K_REF from extracted coefficients.
pub fn kref_value(coeffs: &HarmonicCoefficients, kind: &KRefKind, period: f64) -> Result<f64> {
    kref_value_from(kind, &|key| coeffs.value(key), period)
}

/// Gradient of the K_REF value with respect to the coefficients it reads,
/// as `(key, d value / d key)` pairs.
pub fn kref_gradient(
    kind: &KRefKind,
    lookup: &dyn Fn(&CoefKey) -> Option<f64>,
) -> Result<Vec<(CoefKey, f64)>> {
    let fetch = |key: CoefKey| -> Result<f64> {
        lookup(&key).ok_or_else(|| Error::Config(format!("missing coefficient {}", key.name())))
    };
    let mut grad = Vec::new();
    match kind {
        KRefKind::Harmonic { k, j } => {
            let a = fetch(CoefKey::sin(*k, *j))?;
            let b = fetch(CoefKey::cos(*k, *j))?;
            let r = a.hypot(b).max(EPS_RATIO);
            grad.push((CoefKey::sin(*k, *j), a / r));
            grad.push((CoefKey::cos(*k, *j), b / r));
        }
        KRefKind::Ratio { k_num, k_den, j } => {
            let ap = fetch(CoefKey::sin(*k_num, *j))?;
            let bp = fetch(CoefKey::cos(*k_num, *j))?;
            let aq = fetch(CoefKey::sin(*k_den, *j))?;
            let bq = fetch(CoefKey::cos(*k_den, *j))?;
            let rp = ap.hypot(bp).max(EPS_RATIO);
            let rq = aq.hypot(bq);
            if rq < EPS_RATIO {
                return Err(Error::DegenerateRatio {
                    amplitude: rq,
                    threshold: EPS_RATIO,
                });
            }
            grad.push((CoefKey::sin(*k_num, *j), ap / (rp * rq)));
            grad.push((CoefKey::cos(*k_num, *j), bp / (rp * rq)));
            grad.push((CoefKey::sin(*k_den, *j), -rp * aq / (rq * rq * rq)));
            grad.push((CoefKey::cos(*k_den, *j), -rp * bq / (rq * rq * rq)));
        }
        KRefKind::Energy { ks, j } => {
            for k in ks {
                let a = fetch(CoefKey::sin(*k, *j))?;
                let b = fetch(CoefKey::cos(*k, *j))?;
                grad.push((CoefKey::sin(*k, *j), 2.0 * a));
                grad.push((CoefKey::cos(*k, *j), 2.0 * b));
            }
        }
    }
    Ok(grad)
}
