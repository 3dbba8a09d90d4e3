//! Forward orbits of `f` with a certified error ledger.
//!
//! Orbits are stored in drift coordinates: `fⁿ(z₀) = z₀ + n + dₙ` with
//! `dₙ₊₁ = dₙ + e(fⁿ(z₀))`, which is the telescoping identity
//! `fⁿ(z) − (z + n) = Σ_{k<n} e(f^k(z))` evaluated term by term. Keeping `dₙ`
//! separate avoids cancellation when `|fⁿ(z₀)|` is large and `dₙ` tiny.

use num_complex::Complex64;
use thiserror::Error;

use crate::complexmap::{BoundInterval, MapModel, ModelError, UNIT_ROUNDOFF};

/// How often [`abel`] re-evaluates its tail bound.
const ABEL_CHECK_EVERY: usize = 64;
/// Hard cap on the number of steps [`abel`] may take.
pub const ABEL_MAX_STEPS: usize = 4_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("start point {z} is {distance} from the extended pole set; orbits need at least {required}")]
    NotInVTilde {
        z: Complex64,
        distance: f64,
        required: f64,
    },
    #[error("orbit came within {distance} of a pole at step {index}")]
    Truncated { index: usize, distance: f64 },
    #[error("Abel series tail still {tail:e} after {steps} steps (tolerance {tol:e})")]
    NotConverged { steps: usize, tail: f64, tol: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where an orbit stopped because it came too close to a pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Index of the offending point; the orbit keeps points `0..=index`.
    pub index: usize,
    pub point: Complex64,
    pub distance: f64,
}

/// A finite forward orbit `fⁿ(z₀)`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub start: Complex64,
    pub points: Vec<Complex64>,
    /// `fⁿ(z₀) − z₀ − n`.
    pub drift: Vec<Complex64>,
    /// Bound on `|computed drift − true drift|`.
    pub eval_err: Vec<f64>,
    /// Certified `dist(fⁿ(z₀), 𝒫̃) ≥ ε`.
    pub in_v: Vec<bool>,
    /// Set when the orbit stopped early near a pole.
    pub truncation: Option<Truncation>,
}

impl Orbit {
    /// Number of stored points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bound on `|points[n] − fⁿ(z₀)|`.
    pub fn point_err(&self, n: usize) -> f64 {
        self.eval_err[n] + 4.0 * UNIT_ROUNDOFF * self.points[n].norm()
    }
}

fn require_v_tilde(model: &MapModel, z: Complex64) -> Result<(), OrbitError> {
    let (_, d_ext) = model.dist_to_poles(z);
    if d_ext >= model.delta() {
        Ok(())
    } else {
        Err(OrbitError::NotInVTilde {
            z,
            distance: d_ext,
            required: model.delta(),
        })
    }
}

/// Streams the orbit of `z0` without storing it.
struct Stepper<'a> {
    model: &'a MapModel,
    start: Complex64,
    n: usize,
    drift: Complex64,
    err: f64,
}

struct StepState {
    point: Complex64,
    d_p: f64,
    d_ext: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a MapModel, start: Complex64) -> Self {
        Stepper {
            model,
            start,
            n: 0,
            drift: Complex64::new(0.0, 0.0),
            err: 0.0,
        }
    }

    fn point(&self) -> Complex64 {
        Complex64::new(self.start.re + self.n as f64, self.start.im) + self.drift
    }

    fn state(&self) -> StepState {
        let point = self.point();
        let (d_p, d_ext) = self.model.dist_to_poles(point);
        StepState { point, d_p, d_ext }
    }

    /// Returns `e` at the current point, then advances; `None` near a pole.
    fn advance(&mut self, state: &StepState) -> Result<Option<Complex64>, ModelError> {
        if state.d_p < 0.5 * self.model.epsilon() {
            return Ok(None);
        }
        let e = self.model.eval_e(state.point)?;
        let point_err = self.err + 4.0 * UNIT_ROUNDOFF * state.point.norm();
        // The true point lies in the disk of radius point_err around the computed one.
        let lipschitz = self.model.lipschitz_near(state.point, point_err);
        self.drift += e.value;
        self.err = self.err + e.err + lipschitz * point_err + 2.0 * UNIT_ROUNDOFF * self.drift.norm();
        self.n += 1;
        Ok(Some(e.value))
    }
}

/// Iterates `f` from `z0 ∈ Ṽ` for `steps` steps.
///
/// If an iterate comes within `ε/2` of a pole the orbit stops there and
/// [`Orbit::truncation`] records where.
pub fn iterate(model: &MapModel, z0: Complex64, steps: usize) -> Result<Orbit, OrbitError> {
    require_v_tilde(model, z0)?;
    let mut orbit = Orbit {
        start: z0,
        points: Vec::with_capacity(steps + 1),
        drift: Vec::with_capacity(steps + 1),
        eval_err: Vec::with_capacity(steps + 1),
        in_v: Vec::with_capacity(steps + 1),
        truncation: None,
    };
    let mut stepper = Stepper::new(model, z0);
    loop {
        let state = stepper.state();
        let n = stepper.n;
        orbit.points.push(state.point);
        orbit.drift.push(stepper.drift);
        orbit.eval_err.push(stepper.err);
        orbit.in_v.push(state.d_ext - orbit.point_err(n) >= model.epsilon());
        if n == steps {
            break;
        }
        if stepper.advance(&state)?.is_none() {
            orbit.truncation = Some(Truncation {
                index: n,
                point: state.point,
                distance: state.d_p,
            });
            break;
        }
    }
    Ok(orbit)
}

/// Outcome of a successful drift certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Report {
    /// `min_n (ε/2 − eval_err[n] − |drift[n]|)`, positive on success.
    pub worst_margin: f64,
    pub worst_index: usize,
    pub max_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lemma2Violation {
    Drift { drift: f64, allowed: f64 },
    LeftV,
    Truncated { distance: f64 },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("drift certification failed at step {index}: {violation:?}")]
pub struct Lemma2Failure {
    pub index: usize,
    pub violation: Lemma2Violation,
}

/// Checks `|drift[n]| < ε/2 − eval_err[n]` and `fⁿ(z₀) ∈ V` along the whole orbit.
pub fn lemma2_check(orbit: &Orbit, model: &MapModel) -> Result<Lemma2Report, Lemma2Failure> {
    let half = 0.5 * model.epsilon();
    let mut report = Lemma2Report {
        worst_margin: f64::INFINITY,
        worst_index: 0,
        max_drift: 0.0,
        steps: orbit.len().saturating_sub(1),
    };
    for (n, (&d, &err)) in orbit.drift.iter().zip(&orbit.eval_err).enumerate() {
        let size = d.norm();
        let margin = half - err - size;
        if !(margin > 0.0) {
            return Err(Lemma2Failure {
                index: n,
                violation: Lemma2Violation::Drift {
                    drift: size,
                    allowed: half - err,
                },
            });
        }
        if !orbit.in_v[n] {
            return Err(Lemma2Failure {
                index: n,
                violation: Lemma2Violation::LeftV,
            });
        }
        report.max_drift = report.max_drift.max(size);
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_index = n;
        }
    }
    if let Some(t) = orbit.truncation {
        return Err(Lemma2Failure {
            index: t.index,
            violation: Lemma2Violation::Truncated { distance: t.distance },
        });
    }
    Ok(report)
}

/// `ψ(z)` with its certified error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbelValue {
    pub value: Complex64,
    /// Bound on the omitted `Σ_{k>K} |e(f^k(z))|`.
    pub tail_bound: f64,
    /// Accumulated evaluation error of the partial sum.
    pub eval_err: f64,
    /// Number of series terms used, `K + 1`.
    pub terms: usize,
}

impl AbelValue {
    pub fn total_err(&self) -> f64 {
        self.tail_bound + self.eval_err
    }
}

/// `Σ_{k≥0} g(t + k)` for `g(s) = 1/max(m, |s| − h)²`, bounded from above.
///
/// `g` is even and non-increasing in `|s|`, so a unit-spaced sum is at most the
/// integral plus the largest sampled value.
fn unimodal_tail(t: f64, m: f64, h: f64) -> f64 {
    let knee = m + h;
    let g = |s: f64| {
        let r = (s.abs() - h).max(m);
        1.0 / (r * r)
    };
    // ∫_a^∞ g for a ≥ 0.
    let upper_integral = |a: f64| {
        if a >= knee {
            1.0 / (a - h)
        } else {
            (knee - a) / (m * m) + 1.0 / m
        }
    };
    if t >= 0.0 {
        g(t) + upper_integral(t)
    } else {
        let whole = 2.0 * upper_integral(0.0) - upper_integral(-t);
        1.0 / (m * m) + whole
    }
}

/// Bound on `Σ_{k≥j} |e(f^k(z))|` for `z ∈ Ṽ`, using `|fᵏ(z) − z − k| < ε/2`.
struct AbelTail {
    start: Complex64,
    near: Vec<(Complex64, f64)>,
    far: f64,
    m_floor: f64,
    half: f64,
}

impl AbelTail {
    fn new(model: &MapModel, start: Complex64, tol: f64) -> Self {
        let eps = model.epsilon();
        let half = 0.5 * eps;
        // Orbit points stay ≥ 2ε − ε/2 from every pole.
        let m_floor = 1.5 * eps;
        let knee = m_floor + half;
        let per_pole_cap = 1.0 / (m_floor * m_floor) + 2.0 * (knee / (m_floor * m_floor) + 1.0 / m_floor);
        let case = model.case();
        let mut radius = 8usize;
        while model.amplitude() * case.tail_weight(radius, model.decay()) * per_pole_cap > 0.125 * tol
            && radius < 4096
        {
            radius *= 2;
        }
        let far = model.amplitude() * case.tail_weight(radius, model.decay()) * per_pole_cap;
        let mut near = Vec::new();
        for s in 0..=radius {
            let a = model.shell_weight(s);
            if a > 0.0 {
                case.for_each_in_shell(s, |p| near.push((p, a)));
            }
        }
        AbelTail {
            start,
            near,
            far,
            m_floor,
            half,
        }
    }

    /// Bound on the terms with index `≥ first`.
    fn bound_from(&self, first: usize) -> f64 {
        let mut total = self.far;
        for &(p, a) in &self.near {
            let w = self.start - p;
            let m = (w.im.abs() - self.half).max(self.m_floor);
            total += a * unimodal_tail(w.re + first as f64, m, self.half);
        }
        total
    }
}

/// Abel function `ψ(z) = z + Σ_{k≥0} e(fᵏ(z))`, which satisfies `ψ∘f = ψ + 1`.
///
/// The series is cut once the certified tail drops below `tol`.
pub fn abel(model: &MapModel, z: Complex64, tol: f64) -> Result<AbelValue, OrbitError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OrbitError::BadTolerance(tol));
    }
    require_v_tilde(model, z)?;
    if model.amplitude() == 0.0 {
        return Ok(AbelValue {
            value: z,
            tail_bound: 0.0,
            eval_err: 0.0,
            terms: 0,
        });
    }
    let tail = AbelTail::new(model, z, tol);
    let mut stepper = Stepper::new(model, z);
    let mut bound = f64::INFINITY;
    while stepper.n < ABEL_MAX_STEPS {
        if stepper.n.is_multiple_of(ABEL_CHECK_EVERY) {
            bound = tail.bound_from(stepper.n);
            if bound <= tol {
                return Ok(AbelValue {
                    value: z + stepper.drift,
                    tail_bound: bound,
                    eval_err: stepper.err,
                    terms: stepper.n,
                });
            }
        }
        let state = stepper.state();
        if stepper.advance(&state)?.is_none() {
            return Err(OrbitError::Truncated {
                index: stepper.n,
                distance: state.d_p,
            });
        }
    }
    Err(OrbitError::NotConverged {
        steps: stepper.n,
        tail: bound,
        tol,
    })
}

/// Enclosures of `sₙ = |fⁿ⁺¹(z₀) − fⁿ(z₀)| / dist(fⁿ(z₀), ∂U)` along an orbit.
///
/// Entry `n` covers the step from `points[n]` to `points[n + 1]`. An entry whose
/// distance enclosure touches zero has upper end `+∞`.
pub fn step_ratio_series(model: &MapModel, orbit: &Orbit) -> Vec<BoundInterval> {
    step_ratio_with(orbit, |_, z| model.boundary_interval_unchecked(z))
}

/// [`step_ratio_series`] with a caller-supplied distance enclosure at each computed point.
pub fn step_ratio_with(orbit: &Orbit, dist: impl Fn(usize, Complex64) -> BoundInterval) -> Vec<BoundInterval> {
    let steps = orbit.len().saturating_sub(1);
    (0..steps)
        .map(|n| {
            let delta_drift = orbit.drift[n + 1] - orbit.drift[n];
            let step = (Complex64::new(1.0, 0.0) + delta_drift).norm();
            let step_err = orbit.eval_err[n] + orbit.eval_err[n + 1] + 4.0 * UNIT_ROUNDOFF * (step + 1.0);
            let d = dist(n, orbit.points[n]).widen(orbit.point_err(n));
            ratio_enclosure(step, step_err, d)
        })
        .collect()
}

fn ratio_enclosure(step: f64, step_err: f64, d: BoundInterval) -> BoundInterval {
    let num_lo = (step - step_err).max(0.0);
    let num_hi = step + step_err;
    let lower = if d.upper.is_finite() { num_lo / d.upper } else { 0.0 };
    let upper = if d.lower > 0.0 { num_hi / d.lower } else { f64::INFINITY };
    BoundInterval::new(lower.min(upper), upper)
}
