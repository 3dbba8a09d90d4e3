//! The lattice-pole map family `f(z) = z + 1 + Σ_{p∈𝒫} a_p / (z − p)²`.
//!
//! A [`MapModel`] fixes the pole configuration, the orbit tolerance `ε`, and a
//! geometric coefficient scheme `a_p = A·r^{‖p‖₁}` whose total mass stays below
//! [`coefficient_budget`]. Under that budget every orbit started at distance
//! `≥ 2ε` from the extended pole set `𝒫̃ = ⋃_{j≥0} (𝒫 − j)` drifts less than
//! `ε/2` from the pure translation `z + n`, so the complement of the δ-disks
//! (`δ = 2ε`) around `𝒫̃` lies in one invariant Baker domain `U`.
//!
//! Series evaluation is truncated by `ℓ¹`-shells around the origin. The tail is
//! bounded in closed form from the geometric coefficient decay, so every value
//! comes with a certified error.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit roundoff of `f64` (half the machine epsilon).
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Largest admissible `ε`.
pub const MAX_EPSILON: f64 = 0.5;

/// Default relative truncation tolerance of the pole series.
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

/// Smallest truncation tolerance that still dominates the rounding of the summation.
pub const MIN_TAIL_TOL: f64 = 40.0 * UNIT_ROUNDOFF;

const MAX_RADIUS: usize = 2048;
// Relative rounding of one term a / (z − p)² computed through conj(w)²/|w|⁴.
const TERM_ROUNDING: f64 = 12.0 * UNIT_ROUNDOFF;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("epsilon must lie in (0, 1/2], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("coefficient decay must lie in (0, 1), got {0}")]
    DecayOutOfRange(f64),
    #[error("safety factor must lie in (0, 1), got {0}")]
    SafetyOutOfRange(f64),
    #[error("coefficient amplitude must be finite and non-negative, got {0}")]
    InvalidAmplitude(f64),
    #[error("coefficient mass {mass:e} exceeds the budget {budget:e}")]
    BudgetExceeded { mass: f64, budget: f64 },
    #[error("tail tolerance must lie in [{min:e}, 1e-2], got {tol:e}")]
    TailToleranceOutOfRange { tol: f64, min: f64 },
    #[error("decay {decay} needs a truncation radius above {max} for tail tolerance {tol:e}")]
    TruncationTooDeep { decay: f64, tol: f64, max: usize },
    #[error("{0} is a pole of the map")]
    Singular(Complex64),
    #[error("{z} is only {distance} from the extended pole set; certification needs {required}")]
    NotCertified {
        z: Complex64,
        distance: f64,
        required: f64,
    },
    #[error("unknown pole case '{0}' (expected i, ii, ii+ or iii)")]
    UnknownCase(String),
}

/// Pole configuration of the map family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoleCase {
    /// Case (i): poles on the imaginary axis, `𝒫 = iℤ`.
    #[serde(rename = "i")]
    ImaginaryAxis,
    /// Case (ii): poles at the integers, `𝒫 = ℤ`.
    #[serde(rename = "ii")]
    Integers,
    /// Case (ii), one-sided variant: `𝒫 = {1, 2, 3, ...}`.
    #[serde(rename = "ii+")]
    PositiveIntegers,
    /// Case (iii): poles at the Gaussian integers, `𝒫 = ℤ + iℤ`.
    #[serde(rename = "iii")]
    GaussianLattice,
}

impl PoleCase {
    pub const ALL: [PoleCase; 4] = [
        PoleCase::ImaginaryAxis,
        PoleCase::Integers,
        PoleCase::PositiveIntegers,
        PoleCase::GaussianLattice,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PoleCase::ImaginaryAxis => "i",
            PoleCase::Integers => "ii",
            PoleCase::PositiveIntegers => "ii+",
            PoleCase::GaussianLattice => "iii",
        }
    }

    /// Number of poles with `‖p‖₁ = s`.
    pub fn shell_count(self, s: usize) -> usize {
        match (self, s) {
            (PoleCase::PositiveIntegers, 0) => 0,
            (_, 0) => 1,
            (PoleCase::ImaginaryAxis | PoleCase::Integers, _) => 2,
            (PoleCase::PositiveIntegers, _) => 1,
            (PoleCase::GaussianLattice, _) => 4 * s,
        }
    }

    /// Calls `visit` on every pole with `‖p‖₁ = s`.
    #[inline]
    pub fn for_each_in_shell(self, s: usize, mut visit: impl FnMut(Complex64)) {
        let sf = s as f64;
        match self {
            PoleCase::ImaginaryAxis => {
                visit(Complex64::new(0.0, sf));
                if s > 0 {
                    visit(Complex64::new(0.0, -sf));
                }
            }
            PoleCase::Integers => {
                visit(Complex64::new(sf, 0.0));
                if s > 0 {
                    visit(Complex64::new(-sf, 0.0));
                }
            }
            PoleCase::PositiveIntegers => {
                if s > 0 {
                    visit(Complex64::new(sf, 0.0));
                }
            }
            PoleCase::GaussianLattice => {
                if s == 0 {
                    visit(Complex64::new(0.0, 0.0));
                    return;
                }
                let si = s as i64;
                for j in -si..=si {
                    let m = si - j.abs();
                    visit(Complex64::new(j as f64, m as f64));
                    if m != 0 {
                        visit(Complex64::new(j as f64, -(m as f64)));
                    }
                }
            }
        }
    }

    /// `Σ_{p∈𝒫} r^{‖p‖₁}` in closed form.
    pub fn normalizer(self, r: f64) -> f64 {
        let line = (1.0 + r) / (1.0 - r);
        match self {
            PoleCase::ImaginaryAxis | PoleCase::Integers => line,
            PoleCase::PositiveIntegers => r / (1.0 - r),
            PoleCase::GaussianLattice => line * line,
        }
    }

    /// `Σ_{‖p‖₁ > radius} r^{‖p‖₁}` in closed form.
    pub fn tail_weight(self, radius: usize, r: f64) -> f64 {
        let first = r.powi(radius as i32 + 1);
        match self {
            PoleCase::ImaginaryAxis | PoleCase::Integers => 2.0 * first / (1.0 - r),
            PoleCase::PositiveIntegers => first / (1.0 - r),
            PoleCase::GaussianLattice => {
                let q = 1.0 - r;
                4.0 * ((radius as f64 + 1.0) * first / q + first * r / (q * q))
            }
        }
    }

    /// Lower bound on `|p| / ‖p‖₁` over the pole set.
    fn euclid_per_l1(self) -> f64 {
        match self {
            PoleCase::GaussianLattice => 1.0 / SQRT_2,
            _ => 1.0,
        }
    }

    /// Whether `p` (assumed a lattice point) belongs to `𝒫`.
    pub fn is_pole(self, p: Complex64) -> bool {
        let integral = |x: f64| x == x.round();
        match self {
            PoleCase::ImaginaryAxis => p.re == 0.0 && integral(p.im),
            PoleCase::Integers => p.im == 0.0 && integral(p.re),
            PoleCase::PositiveIntegers => p.im == 0.0 && integral(p.re) && p.re >= 1.0,
            PoleCase::GaussianLattice => integral(p.re) && integral(p.im),
        }
    }

    /// Pole of `𝒫` nearest to `z` (ties broken by rounding half away from zero).
    pub fn nearest_pole(self, z: Complex64) -> Complex64 {
        match self {
            PoleCase::ImaginaryAxis => Complex64::new(0.0, z.im.round()),
            PoleCase::Integers => Complex64::new(z.re.round(), 0.0),
            PoleCase::PositiveIntegers => Complex64::new(z.re.round().max(1.0), 0.0),
            PoleCase::GaussianLattice => Complex64::new(z.re.round(), z.im.round()),
        }
    }

    /// Point of `𝒫̃` nearest to `z`.
    pub fn nearest_extended(self, z: Complex64) -> Complex64 {
        match self {
            PoleCase::ImaginaryAxis => {
                let x = if z.re >= 0.0 { 0.0 } else { z.re.round().min(0.0) };
                Complex64::new(x, z.im.round())
            }
            // Left translates of ℤ or ℤ₊ cover ℤ.
            PoleCase::Integers | PoleCase::PositiveIntegers => Complex64::new(z.re.round(), 0.0),
            PoleCase::GaussianLattice => Complex64::new(z.re.round(), z.im.round()),
        }
    }

    /// A second pole at unit distance from the pole `p`.
    pub fn adjacent_pole(self, p: Complex64) -> Complex64 {
        match self {
            PoleCase::ImaginaryAxis => p + Complex64::new(0.0, 1.0),
            _ => p + 1.0,
        }
    }

    /// Points of `𝒫̃` in the closed rectangle `[x_min, x_max] × [y_min, y_max]`.
    pub fn extended_points_in(self, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Vec<Complex64> {
        let xs = |lo: f64, hi: f64| -> Vec<f64> {
            let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
            (a..=b).map(|k| k as f64).collect()
        };
        let mut out = Vec::new();
        match self {
            PoleCase::ImaginaryAxis => {
                if x_min <= 0.0 {
                    for x in xs(x_min, x_max.min(0.0)) {
                        for y in xs(y_min, y_max) {
                            out.push(Complex64::new(x, y));
                        }
                    }
                }
            }
            PoleCase::Integers | PoleCase::PositiveIntegers => {
                if y_min <= 0.0 && 0.0 <= y_max {
                    out.extend(xs(x_min, x_max).into_iter().map(|x| Complex64::new(x, 0.0)));
                }
            }
            PoleCase::GaussianLattice => {
                for x in xs(x_min, x_max) {
                    for y in xs(y_min, y_max) {
                        out.push(Complex64::new(x, y));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for PoleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PoleCase {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(PoleCase::ImaginaryAxis),
            "ii" | "2" => Ok(PoleCase::Integers),
            "ii+" | "2+" => Ok(PoleCase::PositiveIntegers),
            "iii" | "3" => Ok(PoleCase::GaussianLattice),
            other => Err(ModelError::UnknownCase(other.to_string())),
        }
    }
}

/// Certified enclosure `[lower, upper]` of a non-negative quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInterval {
    pub lower: f64,
    pub upper: f64,
}

impl BoundInterval {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower >= 0.0 && lower <= upper, "bad interval [{lower}, {upper}]");
        BoundInterval { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Widens by `r` on both sides, clamping the lower end at zero.
    pub fn widen(&self, r: f64) -> Self {
        BoundInterval::new((self.lower - r).max(0.0), self.upper + r)
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), ModelError> {
    if epsilon > 0.0 && epsilon <= MAX_EPSILON {
        Ok(())
    } else {
        Err(ModelError::EpsilonOutOfRange(epsilon))
    }
}

/// Upper bound `B(case, ε)` on `Σ|a_p|` under which orbits from `Ṽ` drift less than `ε/2`.
///
/// Per pole, the orbit terms are bounded by `4/ε²` at the closest approach and by
/// `c/ε² · 1/k²` elsewhere, with `c = 16` on a line of poles and `c = 64` on the
/// lattice; the sum over `k` contributes `Σ_{k≠0} 1/k² = π²/3`. Requiring the
/// total to stay below `ε/2` gives `ε³ / (8(1 + (c/4)·π²/3))`. The imaginary-axis
/// case is the lattice argument restricted to one column and keeps its constant.
pub fn coefficient_budget(case: PoleCase, epsilon: f64) -> Result<f64, ModelError> {
    check_epsilon(epsilon)?;
    let zeta2 = PI * PI / 3.0;
    let ratio = match case {
        PoleCase::Integers | PoleCase::PositiveIntegers => 4.0,
        PoleCase::ImaginaryAxis | PoleCase::GaussianLattice => 16.0,
    };
    Ok(epsilon.powi(3) / (8.0 * (1.0 + ratio * zeta2)))
}

/// Builds the geometric-coefficient model using a fraction `safety` of the budget.
pub fn build_map(case: PoleCase, epsilon: f64, decay: f64, safety: f64) -> Result<MapModel, ModelError> {
    check_epsilon(epsilon)?;
    if !(decay > 0.0 && decay < 1.0) {
        return Err(ModelError::DecayOutOfRange(decay));
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(ModelError::SafetyOutOfRange(safety));
    }
    let amplitude = safety * coefficient_budget(case, epsilon)? / case.normalizer(decay);
    MapModel::with_amplitude(case, epsilon, decay, amplitude, DEFAULT_TAIL_TOL)
}

/// Evaluation of the pole series with its certified error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub err: f64,
    /// Last `ℓ¹`-shell included in the partial sum.
    pub radius: usize,
}

/// A fully specified member of the map family.
#[derive(Debug, Clone, Serialize)]
pub struct MapModel {
    case: PoleCase,
    epsilon: f64,
    delta: f64,
    amplitude: f64,
    decay: f64,
    tail_tol: f64,
    #[serde(skip)]
    shell_weights: Arc<[f64]>,
    /// `A · Σ_{‖p‖₁ > R} r^{‖p‖₁}` for `R` up to the truncation radius.
    #[serde(skip)]
    tail_weights: Arc<[f64]>,
}

impl MapModel {
    /// Model with an explicit amplitude `A`; `A = 0` gives the pure translation `z + 1`.
    pub fn with_amplitude(
        case: PoleCase,
        epsilon: f64,
        decay: f64,
        amplitude: f64,
        tail_tol: f64,
    ) -> Result<MapModel, ModelError> {
        check_epsilon(epsilon)?;
        if !(decay > 0.0 && decay < 1.0) {
            return Err(ModelError::DecayOutOfRange(decay));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(ModelError::InvalidAmplitude(amplitude));
        }
        let budget = coefficient_budget(case, epsilon)?;
        let mass = amplitude * case.normalizer(decay);
        if mass >= budget {
            return Err(ModelError::BudgetExceeded { mass, budget });
        }
        Self::unchecked(case, epsilon, decay, amplitude, tail_tol)
    }

    fn unchecked(
        case: PoleCase,
        epsilon: f64,
        decay: f64,
        amplitude: f64,
        tail_tol: f64,
    ) -> Result<MapModel, ModelError> {
        if !(MIN_TAIL_TOL..=1e-2).contains(&tail_tol) {
            return Err(ModelError::TailToleranceOutOfRange {
                tol: tail_tol,
                min: MIN_TAIL_TOL,
            });
        }
        // Radius at which the tail is small relative to the full coefficient mass
        // for every z; no evaluation needs to go further.
        let norm = case.normalizer(decay);
        let mut radius = 0;
        while case.tail_weight(radius, decay) > 0.5 * tail_tol * norm {
            radius += 1;
            if radius > MAX_RADIUS {
                return Err(ModelError::TruncationTooDeep {
                    decay,
                    tol: tail_tol,
                    max: MAX_RADIUS,
                });
            }
        }
        let shell_weights: Arc<[f64]> = (0..=2 * radius)
            .map(|s| amplitude * decay.powi(s as i32))
            .collect();
        let tail_weights: Arc<[f64]> = (0..=radius)
            .map(|s| amplitude * case.tail_weight(s, decay))
            .collect();
        Ok(MapModel {
            case,
            epsilon,
            delta: 2.0 * epsilon,
            amplitude,
            decay,
            tail_tol,
            shell_weights,
            tail_weights,
        })
    }

    /// Model that skips the budget check; only for exercising failure paths in tests.
    #[cfg(test)]
    pub(crate) fn over_budget_for_tests(case: PoleCase, epsilon: f64, decay: f64, amplitude: f64) -> MapModel {
        Self::unchecked(case, epsilon, decay, amplitude, DEFAULT_TAIL_TOL).unwrap()
    }

    pub fn with_tail_tol(&self, tail_tol: f64) -> Result<MapModel, ModelError> {
        Self::unchecked(self.case, self.epsilon, self.decay, self.amplitude, tail_tol)
    }

    pub fn case(&self) -> PoleCase {
        self.case
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Radius of the excluded disks around `𝒫̃`, `δ = 2ε`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// `Σ_{p∈𝒫} |a_p|`, in closed form.
    pub fn coefficient_sum(&self) -> f64 {
        self.amplitude * self.case.normalizer(self.decay)
    }

    /// Coefficient shared by all poles with `‖p‖₁ = s`.
    #[inline]
    pub fn shell_weight(&self, s: usize) -> f64 {
        match self.shell_weights.get(s) {
            Some(&w) => w,
            None => self.amplitude * self.decay.powi(s as i32),
        }
    }

    /// The coefficient `a_p`, zero off the pole set.
    pub fn coefficient(&self, p: Complex64) -> f64 {
        if !self.case.is_pole(p) {
            return 0.0;
        }
        let l1 = (p.re.abs() + p.im.abs()) as usize;
        self.shell_weight(l1)
    }

    /// Exact Euclidean distances `(dist(z, 𝒫), dist(z, 𝒫̃))`.
    pub fn dist_to_poles(&self, z: Complex64) -> (f64, f64) {
        let d_p = (z - self.case.nearest_pole(z)).norm();
        let d_ext = (z - self.case.nearest_extended(z)).norm();
        (d_p, d_ext)
    }

    /// Whether `z ∈ Ṽ`, i.e. `dist(z, 𝒫̃) ≥ 2ε`.
    pub fn in_v_tilde(&self, z: Complex64) -> bool {
        self.dist_to_poles(z).1 >= self.delta
    }

    /// Enclosure of `dist(z, ∂U)` for `z` at distance at least `δ` from `𝒫̃`.
    ///
    /// `ℂ ∖ U` lies in the closed δ-disks around `𝒫̃`, and every pole lies outside `U`.
    pub fn dist_to_boundary_interval(&self, z: Complex64) -> Result<BoundInterval, ModelError> {
        let (_, d_ext) = self.dist_to_poles(z);
        if d_ext < self.delta {
            return Err(ModelError::NotCertified {
                z,
                distance: d_ext,
                required: self.delta,
            });
        }
        Ok(self.boundary_interval_unchecked(z))
    }

    /// Same enclosure for a point already known to lie in `U` (e.g. an orbit point);
    /// the lower end degrades to zero inside the δ-disks.
    pub fn boundary_interval_unchecked(&self, z: Complex64) -> BoundInterval {
        let (d_p, d_ext) = self.dist_to_poles(z);
        BoundInterval::new((d_ext - self.delta).max(0.0).min(d_p), d_p)
    }

    fn check_regular(&self, z: Complex64, d_p: f64) -> Result<(), ModelError> {
        if !(d_p > 8.0 * UNIT_ROUNDOFF * z.norm().max(1.0)) {
            return Err(ModelError::Singular(z));
        }
        Ok(())
    }

    /// Certified bound on the contribution of the shells beyond `radius`.
    fn tail_bound(&self, z: Complex64, radius: usize, d_p: f64) -> f64 {
        let reach = (radius as f64 + 1.0) * self.case.euclid_per_l1() - z.norm();
        let d_tail = d_p.max(reach);
        let weight = match self.tail_weights.get(radius) {
            Some(&w) => w,
            None => self.amplitude * self.case.tail_weight(radius, self.decay),
        };
        weight / (d_tail * d_tail)
    }

    #[inline]
    fn add_shell(&self, z: Complex64, s: usize, acc: &mut SeriesAccumulator) {
        let a = self.shell_weight(s);
        if a == 0.0 {
            return;
        }
        self.case.for_each_in_shell(s, |p| {
            let x = z.re - p.re;
            let y = z.im - p.im;
            let n2 = x * x + y * y;
            let inv = 1.0 / n2;
            let modulus = a * inv;
            let scale = modulus * inv;
            acc.add(scale * (x * x - y * y), -2.0 * scale * x * y, modulus);
        });
    }

    /// Partial sum of `e(z)` over the shells `‖p‖₁ ≤ radius`, without error control.
    pub fn partial_e(&self, z: Complex64, radius: usize) -> Complex64 {
        let mut acc = SeriesAccumulator::default();
        for s in 0..=radius {
            self.add_shell(z, s, &mut acc);
        }
        acc.value()
    }

    /// `e(z) = Σ_{p∈𝒫} a_p / (z − p)²` with a certified error bound.
    pub fn eval_e(&self, z: Complex64) -> Result<Evaluation, ModelError> {
        let (d_p, _) = self.dist_to_poles(z);
        self.check_regular(z, d_p)?;
        if self.amplitude == 0.0 {
            return Ok(Evaluation {
                value: Complex64::new(0.0, 0.0),
                err: 0.0,
                radius: 0,
            });
        }
        // |e(z)| is typically of order Σa_p/d_P², so the tail is measured against that.
        // The constructor's radius always meets the target since d_tail ≥ d_P.
        let target = 0.5 * self.tail_tol * self.coefficient_sum() / (d_p * d_p);
        let last = self.tail_weights.len() - 1;
        let mut radius = 0;
        let mut tail = self.tail_bound(z, radius, d_p);
        while tail > target && radius < last {
            radius += 1;
            tail = self.tail_bound(z, radius, d_p);
        }
        let mut acc = SeriesAccumulator::default();
        for s in 0..=radius {
            self.add_shell(z, s, &mut acc);
        }
        let value = acc.value();
        let err = tail + TERM_ROUNDING * acc.magnitude + acc.rounding_bound();
        Ok(Evaluation { value, err, radius })
    }

    /// `f(z) = z + 1 + e(z)` with a certified error bound.
    pub fn eval_f(&self, z: Complex64) -> Result<Evaluation, ModelError> {
        let e = self.eval_e(z)?;
        let value = z + 1.0 + e.value;
        let err = e.err + 2.0 * UNIT_ROUNDOFF * (value.norm() + 1.0);
        Ok(Evaluation {
            value,
            err,
            radius: e.radius,
        })
    }

    /// Bound `2Σa_p/(dist(z, 𝒫) − radius)³` on `|e'|` over the disk of the given
    /// radius around `z`; infinite if the disk reaches a pole.
    pub fn lipschitz_near(&self, z: Complex64, radius: f64) -> f64 {
        let (d_p, _) = self.dist_to_poles(z);
        let gap = d_p - radius;
        if !(gap > 0.0) {
            return f64::INFINITY;
        }
        2.0 * self.coefficient_sum() / (gap * gap * gap) * (1.0 + 8.0 * UNIT_ROUNDOFF)
    }
}

/// Neumaier-compensated complex sum that also tracks `Σ|term|`.
#[derive(Debug, Default, Clone, Copy)]
struct SeriesAccumulator {
    re: f64,
    re_comp: f64,
    im: f64,
    im_comp: f64,
    magnitude: f64,
    terms: usize,
}

impl SeriesAccumulator {
    /// Adds the term `re + i·im`, whose modulus is `modulus`.
    #[inline]
    fn add(&mut self, re: f64, im: f64, modulus: f64) {
        neumaier_add(&mut self.re, &mut self.re_comp, re);
        neumaier_add(&mut self.im, &mut self.im_comp, im);
        self.magnitude += modulus;
        self.terms += 1;
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_comp, self.im + self.im_comp)
    }

    fn rounding_bound(&self) -> f64 {
        let n = self.terms as f64;
        2.0 * UNIT_ROUNDOFF * self.value().norm() + 4.0 * n * UNIT_ROUNDOFF * UNIT_ROUNDOFF * self.magnitude
    }
}

#[inline]
fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}
