//! Closed polylines pushed forward by `f`, their winding numbers, and homotopy in `U`.
//!
//! `ℂ ∖ U` lies in the closed δ-disks around `𝒫̃`. A loop whose every point is
//! more than `δ` from `𝒫̃` therefore winds the same way around all of a disk as
//! around its centre, which reduces contractibility to windings about `𝒫̃`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::complexmap::{MapModel, ModelError};

/// Refinement gives up beyond this many vertices.
pub const VERTEX_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("a loop needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("max_gap must be positive and finite, got {0}")]
    BadGap(f64),
    #[error("refinement exceeded {VERTEX_CAP} vertices")]
    VertexCap,
    #[error("vertex {z} is within {distance} of a pole")]
    NearPole { z: Complex64, distance: f64 },
    #[error("winding about {v} is ambiguous: an edge passes within {distance}")]
    Ambiguous { v: Complex64, distance: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A closed polyline; the edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopPath {
    pub vertices: Vec<Complex64>,
    pub max_gap: f64,
}

impl LoopPath {
    pub fn new(vertices: Vec<Complex64>, max_gap: f64) -> Result<Self, LoopError> {
        if vertices.len() < 3 {
            return Err(LoopError::TooFewVertices(vertices.len()));
        }
        if !(max_gap > 0.0 && max_gap.is_finite()) {
            return Err(LoopError::BadGap(max_gap));
        }
        Ok(LoopPath { vertices, max_gap })
    }

    /// Counter-clockwise boundary of the axis-parallel square with the given centre.
    pub fn square(center: Complex64, half_side: f64, max_gap: f64) -> Result<Self, LoopError> {
        let h = half_side;
        let corners = [
            Complex64::new(-h, -h),
            Complex64::new(h, -h),
            Complex64::new(h, h),
            Complex64::new(-h, h),
        ];
        Self::new(corners.iter().map(|&c| center + c).collect(), max_gap)
    }

    /// Regular `n`-gon inscribed in a circle, counter-clockwise.
    pub fn polygon(center: Complex64, radius: f64, n: usize, max_gap: f64) -> Result<Self, LoopError> {
        let vertices = (0..n)
            .map(|k| center + Complex64::from_polar(radius, TAU * k as f64 / n as f64))
            .collect();
        Self::new(vertices, max_gap)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn reversed(&self) -> LoopPath {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        LoopPath {
            vertices,
            max_gap: self.max_gap,
        }
    }

    pub fn max_edge(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).fold(0.0, f64::max)
    }

    /// `(x_min, x_max, y_min, y_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), z| (a.min(z.re), b.max(z.re), c.min(z.im), d.max(z.im)),
        )
    }

    /// Distance from `v` to the polyline.
    pub fn distance_to(&self, v: Complex64) -> f64 {
        self.edges().map(|(a, b)| segment_distance(v, a, b)).fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(v: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        ((v - a).re * d.re + (v - a).im * d.im) / len2
    } else {
        0.0
    };
    (v - (a + d * t.clamp(0.0, 1.0))).norm()
}

fn checked_image(model: &MapModel, z: Complex64) -> Result<Complex64, LoopError> {
    let (d_p, _) = model.dist_to_poles(z);
    if d_p < 0.5 * model.epsilon() {
        return Err(LoopError::NearPole { z, distance: d_p });
    }
    Ok(model.eval_f(z)?.value)
}

/// Refined loop together with the image of every vertex.
fn refine_with_images(model: &MapModel, path: &LoopPath) -> Result<(Vec<Complex64>, Vec<Complex64>), LoopError> {
    let gap = path.max_gap;
    let first: Vec<Complex64> = path
        .vertices
        .iter()
        .map(|&z| checked_image(model, z))
        .collect::<Result<_, _>>()?;
    let n = path.vertices.len();
    let mut points = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    // Depth-first bisection of each edge, emitting vertices in order.
    let mut stack: Vec<(Complex64, Complex64, Complex64, Complex64)> = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        stack.push((path.vertices[i], first[i], path.vertices[j], first[j]));
        while let Some((a, fa, b, fb)) = stack.pop() {
            if (b - a).norm() <= gap && (fb - fa).norm() <= gap {
                points.push(a);
                images.push(fa);
                if points.len() > VERTEX_CAP {
                    return Err(LoopError::VertexCap);
                }
            } else {
                let m = (a + b) * 0.5;
                let fm = checked_image(model, m)?;
                stack.push((m, fm, b, fb));
                stack.push((a, fa, m, fm));
            }
        }
    }
    Ok((points, images))
}

/// Bisects edges until both the loop's edges and their images under `f` are at most `max_gap`.
pub fn refine_loop(model: &MapModel, path: &LoopPath) -> Result<LoopPath, LoopError> {
    let (vertices, _) = refine_with_images(model, path)?;
    Ok(LoopPath {
        vertices,
        max_gap: path.max_gap,
    })
}

/// The image polyline `f(γ)` through the images of the refined vertices.
pub fn push_forward(model: &MapModel, path: &LoopPath) -> Result<LoopPath, LoopError> {
    let (_, images) = refine_with_images(model, path)?;
    Ok(LoopPath {
        vertices: images,
        max_gap: path.max_gap,
    })
}

/// Winding number of the polyline about `v`, by summing signed angle increments.
pub fn winding(path: &LoopPath, v: Complex64) -> Result<i64, LoopError> {
    let distance = path.distance_to(v);
    if distance < path.max_gap {
        return Err(LoopError::Ambiguous { v, distance });
    }
    Ok(winding_unchecked(path, v))
}

fn winding_unchecked(path: &LoopPath, v: Complex64) -> i64 {
    let total: f64 = path.edges().map(|(a, b)| ((b - v) / (a - v)).arg()).sum();
    (total / TAU).round() as i64
}

/// Winding about one point of `𝒫̃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointWinding {
    pub point: Complex64,
    /// Whether the point is a pole of `f` (and so certainly outside `U`).
    pub is_pole: bool,
    /// `None` when the loop passes too close to decide.
    pub winding: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingReport {
    /// Windings about every point of `𝒫̃` in the loop's bounding box padded by 1.
    pub windings: Vec<PointWinding>,
    /// `Some(true)`: null-homotopic in `U`; `Some(false)`: winds about a pole;
    /// `None`: undecided.
    pub contractible: Option<bool>,
    /// Whether every point of the loop is more than `δ` from `𝒫̃`.
    pub certified: bool,
}

impl WindingReport {
    pub fn winding_about(&self, p: Complex64) -> Option<i64> {
        self.windings.iter().find(|w| w.point == p).and_then(|w| w.winding)
    }
}

fn clearance(model: &MapModel, path: &LoopPath) -> f64 {
    path.edges()
        .map(|(a, b)| model.dist_to_poles((a + b) * 0.5).1 - 0.5 * (b - a).norm())
        .fold(f64::INFINITY, f64::min)
}

fn extended_points_near(model: &MapModel, paths: &[&LoopPath]) -> Vec<Complex64> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for path in paths {
        let (a, b, c, d) = path.bounding_box();
        x0 = x0.min(a);
        x1 = x1.max(b);
        y0 = y0.min(c);
        y1 = y1.max(d);
    }
    model.case().extended_points_in(x0 - 1.0, x1 + 1.0, y0 - 1.0, y1 + 1.0)
}

/// Decides whether the loop is null-homotopic in `U` from windings about `𝒫̃`.
pub fn contractibility(model: &MapModel, path: &LoopPath) -> WindingReport {
    let certified = clearance(model, path) > model.delta();
    let case = model.case();
    let windings: Vec<PointWinding> = extended_points_near(model, &[path])
        .into_iter()
        .map(|p| PointWinding {
            point: p,
            is_pole: case.is_pole(p),
            winding: winding(path, p).ok(),
        })
        .collect();
    let contractible = if !certified {
        None
    } else if windings.iter().all(|w| w.winding == Some(0)) {
        Some(true)
    } else if windings.iter().any(|w| w.is_pole && matches!(w.winding, Some(k) if k != 0)) {
        Some(false)
    } else {
        None
    };
    WindingReport {
        windings,
        contractible,
        certified,
    }
}

/// One step `fⁿ(γ) → fⁿ⁺¹(γ)` of [`persistence_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceStep {
    pub n: usize,
    pub vertices: usize,
    /// `|fⁿ⁺¹(z) − fⁿ(z)| < ½ dist(fⁿ(z), ∂U)` certified at every vertex.
    pub condition_holds: bool,
    pub failing_vertices: usize,
    /// Up to eight vertices where the condition failed.
    pub failure_sample: Vec<Complex64>,
    /// Points of `𝒫̃` whose winding changed although the condition held.
    pub violations: Vec<Complex64>,
    pub report: WindingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceReport {
    pub steps: Vec<PersistenceStep>,
    /// First `n` from which the condition holds at every later checked step.
    pub n0: Option<usize>,
    pub total_violations: usize,
    /// Winding report of the final image `f^{n_max}(γ)`.
    pub final_report: WindingReport,
}

/// Pushes `γ` forward `n_max` times, checking that windings about `𝒫̃` persist
/// wherever consecutive images move less than half the boundary distance.
pub fn persistence_check(model: &MapModel, path: &LoopPath, n_max: usize) -> Result<PersistenceReport, LoopError> {
    let mut current = path.clone();
    let mut steps = Vec::with_capacity(n_max);
    for n in 0..n_max {
        let (points, images) = refine_with_images(model, &current)?;
        let refined = LoopPath {
            vertices: points,
            max_gap: path.max_gap,
        };
        let mut failing = Vec::new();
        for (&z, &fz) in refined.vertices.iter().zip(&images) {
            let f = model.eval_f(z)?;
            let lower = model.boundary_interval_unchecked(z).lower;
            if !((fz - z).norm() + f.err < 0.5 * lower) {
                failing.push(z);
            }
        }
        let next = LoopPath {
            vertices: images,
            max_gap: path.max_gap,
        };
        let report = contractibility(model, &refined);
        let mut violations = Vec::new();
        if failing.is_empty() {
            for p in extended_points_near(model, &[&refined, &next]) {
                let before = winding_unchecked(&refined, p);
                let after = winding_unchecked(&next, p);
                if before != after {
                    violations.push(p);
                }
            }
        }
        steps.push(PersistenceStep {
            n,
            vertices: refined.len(),
            condition_holds: failing.is_empty(),
            failing_vertices: failing.len(),
            failure_sample: failing.into_iter().take(8).collect(),
            violations,
            report,
        });
        current = next;
    }
    let n0 = match steps.iter().rposition(|s| !s.condition_holds) {
        None => Some(0),
        Some(last) if last + 1 < steps.len() => Some(last + 1),
        Some(_) => None,
    };
    let total_violations = steps.iter().map(|s| s.violations.len()).sum();
    let final_report = contractibility(model, &current);
    Ok(PersistenceReport {
        steps,
        n0,
        total_violations,
        final_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexmap::{build_map, PoleCase, DEFAULT_TAIL_TOL};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(case: PoleCase) -> MapModel {
        build_map(case, 0.1, 0.25, 0.9).unwrap()
    }

    fn translation() -> MapModel {
        MapModel::with_amplitude(PoleCase::Integers, 0.1, 0.25, 0.0, DEFAULT_TAIL_TOL).unwrap()
    }

    fn unit_square() -> LoopPath {
        LoopPath::square(c(0.0, 0.0), 0.5, 0.05).unwrap()
    }

    /// Crossings of the ray `v + t`, `t > 0`, counted with orientation.
    fn ray_crossings(path: &LoopPath, v: Complex64) -> i64 {
        let mut count = 0;
        for (a, b) in path.edges() {
            let (a, b) = (a - v, b - v);
            if (a.im <= 0.0) != (b.im <= 0.0) {
                let x = a.re + (b.re - a.re) * (-a.im) / (b.im - a.im);
                if x > 0.0 {
                    count += if b.im > a.im { 1 } else { -1 };
                }
            }
        }
        count
    }

    #[test]
    fn refinement_of_translated_square() {
        let sq = LoopPath::square(c(0.0, 0.0), 0.5, 0.1).unwrap();
        let r = refine_loop(&translation(), &sq).unwrap();
        assert!(r.len() >= 40);
        assert!(r.max_edge() <= 0.1);
        let again = refine_loop(&translation(), &r).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn refined_image_edges_are_short() {
        let m = model(PoleCase::Integers);
        let img = push_forward(&m, &unit_square()).unwrap();
        assert!(img.max_edge() <= 0.05);
    }

    #[test]
    fn translation_pushes_by_one() {
        let sq = unit_square();
        let img = push_forward(&translation(), &sq).unwrap();
        let refined = refine_loop(&translation(), &sq).unwrap();
        for (a, b) in refined.vertices.iter().zip(&img.vertices) {
            assert_eq!(*b, *a + 1.0);
        }
    }

    #[test]
    fn case_ii_push_stays_near_translated_square() {
        let m = model(PoleCase::Integers);
        let img = push_forward(&m, &unit_square()).unwrap();
        let target = LoopPath::square(c(1.0, 0.0), 0.5, 0.05).unwrap();
        for z in &img.vertices {
            assert!(target.distance_to(*z) < 0.05);
        }
    }

    #[test]
    fn repeated_push_is_composition() {
        let m = model(PoleCase::GaussianLattice);
        let a = push_forward(&m, &push_forward(&m, &unit_square()).unwrap()).unwrap();
        let b = persistence_check(&m, &unit_square(), 2).unwrap();
        let report = contractibility(&m, &a);
        assert_eq!(report, b.final_report);
    }

    #[test]
    fn winding_examples() {
        let circle = LoopPath::polygon(c(0.0, 0.0), 1.0, 32, 0.01).unwrap();
        assert_eq!(winding(&circle, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding(&circle, c(5.0, 0.0)).unwrap(), 0);
        assert_eq!(winding(&circle.reversed(), c(0.0, 0.0)).unwrap(), -1);
        assert!(matches!(winding(&circle, c(1.0, 0.0)), Err(LoopError::Ambiguous { .. })));
    }

    #[test]
    fn figure_eight_has_zero_winding_between_lobes() {
        // Left lobe counter-clockwise, right lobe clockwise, joined at the origin.
        let mut v = Vec::new();
        for k in 0..32 {
            let t = TAU * k as f64 / 32.0;
            v.push(c(-1.0, 0.0) + Complex64::from_polar(1.0, t));
        }
        for k in 0..32 {
            let t = TAU * k as f64 / 32.0;
            v.push(c(1.0, 0.0) - Complex64::from_polar(1.0, -t));
        }
        let eight = LoopPath::new(v, 0.01).unwrap();
        for p in [c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.5), c(3.0, 0.0)] {
            assert_eq!(winding(&eight, p).unwrap(), ray_crossings(&eight, p));
        }
        assert_eq!(winding(&eight, c(-1.0, 0.0)).unwrap(), 1);
        assert_eq!(winding(&eight, c(1.0, 0.0)).unwrap(), -1);
        assert_eq!(winding(&eight, c(-1.0, 0.0)).unwrap() + winding(&eight, c(1.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn case_ii_images_wind_around_the_marching_pole() {
        let m = model(PoleCase::Integers);
        let mut path = unit_square();
        for n in 1..=20 {
            path = push_forward(&m, &path).unwrap();
            let report = contractibility(&m, &path);
            assert!(report.certified);
            assert_eq!(report.winding_about(c(n as f64, 0.0)), Some(1));
            assert_eq!(report.contractible, Some(false));
        }
    }

    #[test]
    fn case_i_images_become_contractible() {
        let m = model(PoleCase::ImaginaryAxis);
        let report = persistence_check(&m, &unit_square(), 20).unwrap();
        assert_eq!(report.steps[0].report.contractible, Some(false));
        let n0 = report.n0.unwrap();
        assert!(n0 <= 10, "n0 = {n0}");
        for s in &report.steps[n0.max(1)..] {
            assert_eq!(s.report.contractible, Some(true));
        }
        assert_eq!(report.total_violations, 0);
    }

    #[test]
    fn case_ii_condition_fails_near_poles() {
        let m = model(PoleCase::Integers);
        let report = persistence_check(&m, &unit_square(), 10).unwrap();
        assert!(report.steps.iter().all(|s| !s.condition_holds));
        assert_eq!(report.n0, None);
    }

    #[test]
    fn translation_far_loop_keeps_windings() {
        let sq = LoopPath::square(c(0.5, 10.5), 0.25, 0.05).unwrap();
        let report = persistence_check(&translation(), &sq, 5).unwrap();
        assert!(report.steps.iter().all(|s| s.condition_holds));
        assert_eq!(report.n0, Some(0));
        assert_eq!(report.total_violations, 0);
    }

    #[test]
    fn small_far_square_is_contractible() {
        let m = model(PoleCase::GaussianLattice);
        let sq = LoopPath::square(c(3.5, 2.5), 0.1, 0.02).unwrap();
        let report = contractibility(&m, &sq);
        assert!(report.certified);
        assert_eq!(report.contractible, Some(true));
    }

    #[test]
    fn loop_through_pole_errors() {
        let m = model(PoleCase::Integers);
        let sq = LoopPath::square(c(0.0, 0.0), 1.0, 0.05).unwrap();
        assert!(matches!(refine_loop(&m, &sq), Err(LoopError::NearPole { .. })));
        let tiny = LoopPath::square(c(2.3, 0.0), 0.3, 0.05).unwrap();
        let report = contractibility(&m, &tiny);
        assert!(!report.certified);
        assert_eq!(report.contractible, None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn winding_invariant_under_refinement_and_reversal(
            n in 3usize..12,
            radius in 0.5f64..3.0,
            cx in -2.0f64..2.0,
            cy in -2.0f64..2.0,
            vx in -5.0f64..5.0,
            vy in -5.0f64..5.0,
        ) {
            // Kept well above the real axis, where the translation model's poles sit.
            let shift = c(0.0, 20.0);
            let path = LoopPath::polygon(c(cx, cy) + shift, radius, n, 0.05).unwrap();
            let v = c(vx, vy) + shift;
            prop_assume!(path.distance_to(v) > 0.1);
            let w = winding(&path, v).unwrap();
            let refined = refine_loop(&translation(), &path).unwrap();
            prop_assert_eq!(winding(&refined, v).unwrap(), w);
            prop_assert_eq!(winding(&path.reversed(), v).unwrap(), -w);
            prop_assert_eq!(w, ray_crossings(&path, v));
        }
    }
}
