//! Bounds for the hyperbolic metric of the Baker domain `U` (curvature −1).
//!
//! Upper bounds come from disks inside `U`: the comparison with a disk of radius
//! `L` gives `ρ_U(z) ≤ 2/L` and `ρ_U(z, w) ≤ −2 ln(1 − |z − w|/L)`.
//! Lower bounds come from `U ⊂ ℂ ∖ {p, q}` for two poles `p, q` and the
//! Schwarz–Pick lemma.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::complexmap::{BoundInterval, MapModel, ModelError, UNIT_ROUNDOFF};

/// `Γ(1/4)`.
const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;

/// Subsegments of the fallback segment integral.
const SEGMENT_PIECES: usize = 64;

/// `K = Γ(1/4)⁴ / (4π²)`, the constant of the density estimate
/// `ρ_{ℂ∖{0,1}}(u) ≥ 1 / (|u| (K + |ln|u||))`.
pub fn punctured_plane_constant() -> f64 {
    GAMMA_QUARTER.powi(4) / (4.0 * PI * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    DensityUpper,
    DistanceUpper,
    DistanceLower,
}

/// A one-sided bound on a hyperbolic quantity, tagged with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricBound {
    pub kind: MetricKind,
    pub value: f64,
    pub basis: &'static str,
}

impl MetricBound {
    /// True for an upper bound that carries no information.
    pub fn is_trivial(&self) -> bool {
        self.value.is_infinite()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("segment from {z} to {w} is not certified inside the domain")]
    SegmentNotCertified { z: Complex64, w: Complex64 },
    #[error("punctures coincide at {0}")]
    DegeneratePunctures(Complex64),
    #[error("{0} is one of the punctures")]
    AtPuncture(Complex64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `2 / lower` from a boundary-distance enclosure; `+∞` when `lower = 0`.
pub fn density_from_interval(dist: BoundInterval) -> MetricBound {
    let value = if dist.lower > 0.0 {
        2.0 / dist.lower * (1.0 + 2.0 * UNIT_ROUNDOFF)
    } else {
        f64::INFINITY
    };
    MetricBound {
        kind: MetricKind::DensityUpper,
        value,
        basis: "disk comparison: 2/dist",
    }
}

/// Upper bound on `ρ_U(z)`.
pub fn density_upper(model: &MapModel, z: Complex64) -> Result<MetricBound, ModelError> {
    Ok(density_from_interval(model.dist_to_boundary_interval(z)?))
}

/// `−2 ln(1 − r/L)` when `r < L`: the distance bound inside a disk of radius `L`.
pub fn disk_distance_upper(r: f64, radius: f64) -> Option<f64> {
    if r < radius {
        let v = -2.0 * (-r / radius).ln_1p();
        Some(v * (1.0 + 8.0 * UNIT_ROUNDOFF) + 4.0 * UNIT_ROUNDOFF * r / radius)
    } else {
        None
    }
}

/// Upper bound on `ρ_U(z, w)`.
///
/// Uses the disk comparison at every endpoint whose disk reaches the other point
/// and keeps the larger value, so the bound dominates the disk bound seen from
/// either end. Only if neither disk reaches the other point does it fall back to
/// summing `2/dist` over pieces of the segment.
pub fn hyp_distance_upper(model: &MapModel, z: Complex64, w: Complex64) -> Result<MetricBound, MetricError> {
    // Canonical order so the result is symmetric bit for bit.
    let (a, b) = if (z.re, z.im) <= (w.re, w.im) { (z, w) } else { (w, z) };
    let r = (a - b).norm();
    let la = model.boundary_interval_unchecked(a).lower;
    let lb = model.boundary_interval_unchecked(b).lower;
    let endpoint = [disk_distance_upper(r, la), disk_distance_upper(r, lb)]
        .into_iter()
        .flatten()
        .reduce(f64::max);
    if let Some(value) = endpoint {
        return Ok(MetricBound {
            kind: MetricKind::DistanceUpper,
            value,
            basis: "disk comparison at an endpoint",
        });
    }
    let h = r / SEGMENT_PIECES as f64;
    let mut total = 0.0;
    for j in 0..SEGMENT_PIECES {
        let mid = a + (b - a) * ((j as f64 + 0.5) / SEGMENT_PIECES as f64);
        let clearance = model.boundary_interval_unchecked(mid).lower - 0.5 * h;
        if !(clearance > 0.0) {
            return Err(MetricError::SegmentNotCertified { z, w });
        }
        total += 2.0 * h / clearance;
    }
    Ok(MetricBound {
        kind: MetricKind::DistanceUpper,
        value: total * (1.0 + 4.0 * SEGMENT_PIECES as f64 * UNIT_ROUNDOFF),
        basis: "segment integral of 2/dist",
    })
}

/// `sgn(ln|u|) · ln(1 + |ln|u||/K)`, 1-Lipschitz for the metric of `ℂ ∖ {0, 1}`.
fn potential(u: Complex64, k: f64) -> f64 {
    let l = u.norm().ln();
    l.signum() * (l.abs() / k).ln_1p()
}

/// The three potentials obtained by composing with automorphisms of `ℂ ∖ {0, 1}`.
fn potentials(u: Complex64, k: f64) -> [f64; 3] {
    let one = Complex64::new(1.0, 0.0);
    [potential(u, k), potential(one - u, k), potential(u / (u - one), k)]
}

/// Lower bound on `ρ_{ℂ∖{p,q}}(z, w)`, hence on `ρ_U(z, w)` whenever `p, q ∉ U`.
///
/// After the affine normalization `u = (z − p)/(q − p)` each potential `Φ` has
/// `|∇Φ| ≤ ρ_{ℂ∖{0,1}}`, so `|Φ(u_w) − Φ(u_z)|` bounds the distance along every path.
pub fn hyp_distance_lower_two_punctures(
    z: Complex64,
    w: Complex64,
    p: Complex64,
    q: Complex64,
) -> Result<MetricBound, MetricError> {
    if p == q {
        return Err(MetricError::DegeneratePunctures(p));
    }
    for x in [z, w] {
        if x == p || x == q {
            return Err(MetricError::AtPuncture(x));
        }
    }
    let k = punctured_plane_constant();
    let scale = q - p;
    let uz = (z - p) / scale;
    let uw = (w - p) / scale;
    let (fz, fw) = (potentials(uz, k), potentials(uw, k));
    let raw = (0..3).map(|i| (fw[i] - fz[i]).abs()).fold(0.0, f64::max);
    // Rounding of the normalization and logarithms, relative to the gradient size.
    let grad = |u: Complex64| 2.0 / (k * u.norm().min((u - 1.0).norm()));
    let slack = 16.0 * UNIT_ROUNDOFF * (grad(uz) * uz.norm().max(1.0) + grad(uw) * uw.norm().max(1.0) + 1.0);
    Ok(MetricBound {
        kind: MetricKind::DistanceLower,
        value: (raw - slack).max(0.0),
        basis: "twice-punctured plane potential",
    })
}

/// Result of [`hyperbolic_one_step_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneStepReport {
    /// Lower bound on `ρ_U(z, f(z))` per sample.
    pub lower_bounds: Vec<f64>,
    pub min_lower: f64,
    pub argmin: Complex64,
}

/// Lower bounds on `ρ_U(z, f(z))` using the nearest pole and a neighbouring pole
/// as punctures.
pub fn hyperbolic_one_step_test(model: &MapModel, samples: &[Complex64]) -> Result<OneStepReport, MetricError> {
    let case = model.case();
    let mut lower_bounds = Vec::with_capacity(samples.len());
    let mut min_lower = f64::INFINITY;
    let mut argmin = Complex64::new(f64::NAN, f64::NAN);
    for &z in samples {
        model.dist_to_boundary_interval(z)?;
        let f = model.eval_f(z)?;
        let p = case.nearest_pole(z);
        let q = case.adjacent_pole(p);
        let raw = hyp_distance_lower_two_punctures(z, f.value, p, q)?.value;
        // Move from the computed image to the true one.
        let scale = (q - p).norm();
        let u = (f.value - p) / (q - p);
        let near = (u.norm().min((u - 1.0).norm()) - f.err / scale).max(0.0);
        let k = punctured_plane_constant();
        let correction = if near > 0.0 {
            2.0 * f.err / (scale * k * near)
        } else {
            f64::INFINITY
        };
        let bound = (raw - correction).max(0.0);
        if bound < min_lower {
            min_lower = bound;
            argmin = z;
        }
        lower_bounds.push(bound);
    }
    Ok(OneStepReport {
        lower_bounds,
        min_lower,
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexmap::{build_map, PoleCase, DEFAULT_TAIL_TOL};
    use crate::orbit::iterate;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_matches_gamma_function() {
        let g = statrs::function::gamma::gamma(0.25);
        assert!((g - GAMMA_QUARTER).abs() < 1e-13);
        assert!((punctured_plane_constant() - 4.376_879_230_452_95).abs() < 1e-12);
    }

    #[test]
    fn density_examples() {
        let unit = density_from_interval(BoundInterval::new(1.0, 3.0));
        assert!((unit.value - 2.0).abs() < 1e-14);
        assert!(density_from_interval(BoundInterval::new(0.0, 3.0)).is_trivial());
        let m = build_map(PoleCase::ImaginaryAxis, 0.1, 0.25, 0.9).unwrap();
        assert!(density_upper(&m, c(10.5, 0.0)).unwrap().value < 2.0 / 9.0);
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let v = density_from_interval(BoundInterval::new(k as f64 * 0.1, 10.0)).value;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn disk_bound_examples() {
        let v = disk_distance_upper(0.5, 1.0).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(disk_distance_upper(1e-12, 1.0).unwrap() < 3e-12);
        assert!(disk_distance_upper(1.0, 1.0).is_none());
    }

    #[test]
    fn upper_distance_along_case_i_orbit() {
        let m = build_map(PoleCase::ImaginaryAxis, 0.1, 0.25, 0.9).unwrap();
        let orbit = iterate(&m, c(1.0, 0.0), 500).unwrap();
        for n in [50usize, 200, 499] {
            let d = hyp_distance_upper(&m, orbit.points[n], orbit.points[n + 1]).unwrap();
            let paper = 2.0 * (1.0 / (1.0 - 2.0 / n as f64)).ln();
            assert!(d.value < paper, "{n}: {} vs {paper}", d.value);
        }
    }

    #[test]
    fn upper_distance_falls_back_to_segment() {
        let m = build_map(PoleCase::ImaginaryAxis, 0.1, 0.25, 0.9).unwrap();
        // Every point of Re z = 3 has lower distance 2.8, shorter than the segment.
        let d = hyp_distance_upper(&m, c(3.0, 0.0), c(3.0, 10.0)).unwrap();
        assert_eq!(d.basis, "segment integral of 2/dist");
        let exact_integral = 20.0 / 2.8;
        assert!(d.value >= exact_integral && d.value < 1.05 * exact_integral);
        assert!(hyp_distance_upper(&m, c(3.0, 0.1), c(-3.0, 0.1)).is_err());
    }

    /// Composite Simpson rule for `∫ dt / (t (K + |ln t|))` over `[a, b] ⊂ (0, ∞)`,
    /// split at `t = 1`.
    fn radial_integral(a: f64, b: f64, k: f64) -> f64 {
        let g = |t: f64| 1.0 / (t * (k + t.ln().abs()));
        let simpson = |lo: f64, hi: f64| {
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let mut s = g(lo) + g(hi);
            for i in 1..n {
                s += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        if a < 1.0 && b > 1.0 {
            simpson(a, 1.0) + simpson(1.0, b)
        } else {
            simpson(a, b)
        }
    }

    #[test]
    fn two_puncture_example_matches_quadrature() {
        let k = punctured_plane_constant();
        let bound = hyp_distance_lower_two_punctures(c(-1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
            .unwrap()
            .value;
        // u/(u − 1) maps −1 ↦ 1/2 and 2 ↦ 2; the radial density integrates between them.
        let oracle = radial_integral(0.5, 2.0, k);
        assert!((bound - oracle).abs() < 1e-9, "{bound} vs {oracle}");
        assert!(bound > 0.29 && bound < 0.3);
    }

    #[test]
    fn two_puncture_degenerate_cases() {
        let p = c(0.0, 0.0);
        let q = c(1.0, 0.0);
        assert_eq!(hyp_distance_lower_two_punctures(c(0.3, 0.2), c(0.3, 0.2), p, q).unwrap().value, 0.0);
        assert!(matches!(
            hyp_distance_lower_two_punctures(c(0.3, 0.2), c(0.4, 0.2), p, p),
            Err(MetricError::DegeneratePunctures(_))
        ));
        assert!(matches!(
            hyp_distance_lower_two_punctures(q, c(0.4, 0.2), p, q),
            Err(MetricError::AtPuncture(_))
        ));
        let far = hyp_distance_lower_two_punctures(c(1e6, 0.0), c(1e6 + 1.0, 0.0), p, q).unwrap();
        assert!(far.value < 1e-6);
    }

    #[test]
    fn one_step_test_examples() {
        let m3 = build_map(PoleCase::GaussianLattice, 0.1, 0.25, 0.9).unwrap();
        let samples: Vec<_> = (0..10)
            .flat_map(|i| (0..10).map(move |j| c(7.0 + (i as f64 + 0.5) / 10.0, -3.0 + (j as f64 + 0.5) / 10.0)))
            .filter(|&z| m3.in_v_tilde(z))
            .collect();
        let report = hyperbolic_one_step_test(&m3, &samples).unwrap();
        assert!(report.min_lower > 0.0);

        let m1 = build_map(PoleCase::ImaginaryAxis, 0.1, 0.25, 0.9).unwrap();
        let far = hyperbolic_one_step_test(&m1, &[c(1000.0, 0.3), c(1000.5, 7.1)]).unwrap();
        assert!(far.min_lower < 1e-3);

        let flat = MapModel::with_amplitude(PoleCase::Integers, 0.1, 0.25, 0.0, DEFAULT_TAIL_TOL).unwrap();
        let z = c(1e6, 0.5);
        let fz = flat.eval_f(z).unwrap().value;
        let d = hyp_distance_lower_two_punctures(z, fz, c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(d.value < 1e-6);
    }

    fn model(case_index: usize) -> MapModel {
        build_map(PoleCase::ALL[case_index], 0.1, 0.25, 0.9).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn upper_bound_is_symmetric_and_consistent(
            case_index in 0usize..4,
            re in -15.0f64..15.0,
            im in -15.0f64..15.0,
            angle in 0.0f64..std::f64::consts::TAU,
            frac in 0.0f64..0.99,
        ) {
            let m = model(case_index);
            let z = c(re, im);
            let Ok(iv) = m.dist_to_boundary_interval(z) else { return Ok(()); };
            prop_assume!(iv.lower > 0.0);
            let w = z + Complex64::from_polar(frac * iv.lower, angle);
            let a = hyp_distance_upper(&m, z, w).unwrap();
            let b = hyp_distance_upper(&m, w, z).unwrap();
            prop_assert_eq!(a.value, b.value);
            let r = (z - w).norm();
            prop_assert!(1.0 - (-a.value / 2.0).exp() >= r / iv.upper * (1.0 - 1e-12));
        }

        #[test]
        fn lower_bound_is_affine_invariant_and_below_upper(
            re in -6.0f64..6.0,
            im in -6.0f64..6.0,
            step_re in -0.3f64..0.3,
            step_im in -0.3f64..0.3,
            a_re in -3.0f64..3.0,
            a_im in -3.0f64..3.0,
            b_re in 0.5f64..3.0,
            b_im in -1.0f64..1.0,
        ) {
            let m = model(3);
            let z = c(re, im);
            let w = z + c(step_re, step_im);
            prop_assume!(m.in_v_tilde(z) && m.boundary_interval_unchecked(z).lower > (z - w).norm());
            let p = m.case().nearest_pole(z);
            let q = p + 1.0;
            let lower = hyp_distance_lower_two_punctures(z, w, p, q).unwrap().value;
            let upper = hyp_distance_upper(&m, z, w).unwrap().value;
            prop_assert!(lower <= upper);
            let swapped = hyp_distance_lower_two_punctures(w, z, p, q).unwrap().value;
            prop_assert_eq!(lower, swapped);
            let (sa, sb) = (c(a_re, a_im), c(b_re, b_im));
            let t = |x: Complex64| sa + sb * x;
            let moved = hyp_distance_lower_two_punctures(t(z), t(w), t(p), t(q)).unwrap().value;
            prop_assert!((moved - lower).abs() < 1e-9);
        }
    }
}
