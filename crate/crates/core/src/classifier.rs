//! Type verdicts from step-ratio enclosures.
//!
//! For each seed the orbit is split into the windows `W1 = [N/4, N/2)` and
//! `W2 = [N/2, N)`. With `τ₀ < τ₊` the rules are:
//!
//! * `PARABOLIC_I`: every seed has `max_{W2} upper(sₙ) < τ₀` and that maximum is
//!   below `3/4` of the `W1` maximum (the ratio is still decaying).
//! * `HYPERBOLIC`: every seed has `lower(sₙ) > τ₊` for all `n`, and the seeds show
//!   no escaping family (below).
//! * `PARABOLIC_II_SIGNATURE`: no seed is decaying, some seed has
//!   `min_{W2} lower(sₙ) > τ₊`, and there is an escaping family: seeds `a`, `b` with
//!   `b` at least `max(1, 4·dist_a)` from `∂U` over `W2` while its windowed maximum
//!   ratio is at most a quarter of `a`'s. Ratios that stay positive on each orbit
//!   but shrink as seeds move away from the boundary point at an infimum of zero
//!   over the domain.
//!
//! The rules are mutually exclusive, and tightening `τ₀` or `τ₊` can only switch a
//! verdict off.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::complexmap::{BoundInterval, MapModel};
use crate::hypmetric::hyp_distance_upper;
use crate::orbit::{iterate, lemma2_check, step_ratio_series, OrbitError};

/// Smallest orbit length accepted by [`classify`].
pub const MIN_STEPS: usize = 100;

const DECAY_FACTOR: f64 = 0.75;
const FAMILY_RATIO: f64 = 0.25;
const FAMILY_DISTANCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    #[serde(rename = "PARABOLIC_I")]
    ParabolicI,
    #[serde(rename = "PARABOLIC_II_SIGNATURE")]
    ParabolicIISignature,
    Hyperbolic,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::ParabolicI => "PARABOLIC_I",
            Verdict::ParabolicIISignature => "PARABOLIC_II_SIGNATURE",
            Verdict::Hyperbolic => "HYPERBOLIC",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Windowed statistics of one seed's ratio enclosures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedEvidence {
    pub seed: Complex64,
    /// Why the seed was left out, if it was.
    pub excluded: Option<String>,
    pub w1_max_upper: f64,
    /// Proxy for `limsup sₙ`.
    pub w2_max_upper: f64,
    /// Proxy for `liminf sₙ`.
    pub w2_min_lower: f64,
    pub min_lower: f64,
    pub max_upper: f64,
    pub w2_min_lower_dist: f64,
    pub w2_max_upper_dist: f64,
    /// Largest certified upper bound on `ρ_U(fⁿ(z), fⁿ⁺¹(z))` over `W2`; supplementary.
    pub w2_max_rho_upper: Option<f64>,
}

impl SeedEvidence {
    fn excluded(seed: Complex64, reason: String) -> Self {
        SeedEvidence {
            seed,
            excluded: Some(reason),
            w1_max_upper: f64::NAN,
            w2_max_upper: f64::NAN,
            w2_min_lower: f64::NAN,
            min_lower: f64::NAN,
            max_upper: f64::NAN,
            w2_min_lower_dist: f64::NAN,
            w2_max_upper_dist: f64::NAN,
            w2_max_rho_upper: None,
        }
    }

    fn decaying(&self) -> bool {
        self.w2_max_upper < DECAY_FACTOR * self.w1_max_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeVerdict {
    pub verdict: Verdict,
    /// Which rule fired, or why none did.
    pub reason: String,
    pub tau_zero: f64,
    pub tau_pos: f64,
    pub steps: usize,
    pub evidence: Vec<SeedEvidence>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("orbit length {0} is below the minimum {MIN_STEPS}")]
    TooFewSteps(usize),
    #[error("thresholds need 0 < tau_zero < tau_pos, got tau_zero = {tau_zero}, tau_pos = {tau_pos}")]
    BadThresholds { tau_zero: f64, tau_pos: f64 },
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Default thresholds `(10/N, 0.05)`.
pub fn default_thresholds(steps: usize) -> (f64, f64) {
    (10.0 / steps as f64, 0.05)
}

/// Windowed summary of ratio enclosures and matching distance enclosures.
pub fn summarize(seed: Complex64, ratios: &[BoundInterval], dists: &[BoundInterval]) -> SeedEvidence {
    let n = ratios.len();
    if let Some(k) = ratios.iter().position(|r| !r.upper.is_finite()) {
        return SeedEvidence::excluded(seed, format!("unbounded ratio enclosure at step {k}"));
    }
    let w1 = n / 4..n / 2;
    let w2 = n / 2..n;
    let max_upper = |r: &[BoundInterval]| r.iter().map(|x| x.upper).fold(f64::NEG_INFINITY, f64::max);
    let min_lower = |r: &[BoundInterval]| r.iter().map(|x| x.lower).fold(f64::INFINITY, f64::min);
    SeedEvidence {
        seed,
        excluded: None,
        w1_max_upper: max_upper(&ratios[w1]),
        w2_max_upper: max_upper(&ratios[w2.clone()]),
        w2_min_lower: min_lower(&ratios[w2.clone()]),
        min_lower: min_lower(ratios),
        max_upper: max_upper(ratios),
        w2_min_lower_dist: min_lower(&dists[w2.clone()]),
        w2_max_upper_dist: max_upper(&dists[w2]),
        w2_max_rho_upper: None,
    }
}

fn seed_evidence(model: &MapModel, seed: Complex64, steps: usize) -> Result<SeedEvidence, ClassifyError> {
    let orbit = iterate(model, seed, steps)?;
    if let Err(failure) = lemma2_check(&orbit, model) {
        return Ok(SeedEvidence::excluded(seed, failure.to_string()));
    }
    let ratios = step_ratio_series(model, &orbit);
    let dists: Vec<_> = (0..ratios.len())
        .map(|n| model.boundary_interval_unchecked(orbit.points[n]).widen(orbit.point_err(n)))
        .collect();
    let mut ev = summarize(seed, &ratios, &dists);
    if ev.excluded.is_none() {
        ev.w2_max_rho_upper = (steps / 2..steps)
            .map(|n| hyp_distance_upper(model, orbit.points[n], orbit.points[n + 1]).map(|b| b.value))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
            .ok();
    }
    Ok(ev)
}

/// Applies the decision rules to per-seed evidence.
pub fn decide(evidence: &[SeedEvidence], tau_zero: f64, tau_pos: f64) -> (Verdict, String) {
    let used: Vec<&SeedEvidence> = evidence.iter().filter(|e| e.excluded.is_none()).collect();
    if used.is_empty() {
        return (Verdict::Inconclusive, "every seed was excluded".into());
    }
    if used.iter().all(|e| e.w2_max_upper < tau_zero && e.decaying()) {
        return (
            Verdict::ParabolicI,
            format!("all {} seeds decay below tau_zero over the late window", used.len()),
        );
    }
    let family = escaping_family(&used);
    if family.is_none() && used.iter().all(|e| e.min_lower > tau_pos) {
        return (Verdict::Hyperbolic, "every ratio enclosure stays above tau_pos".into());
    }
    let steady = used.iter().all(|e| !e.decaying());
    let positive = used.iter().any(|e| e.w2_min_lower > tau_pos);
    match family {
        Some((a, b)) if steady && positive => (
            Verdict::ParabolicIISignature,
            format!("per-orbit ratios steady, shrinking from seed {a} to seed {b} as boundary distance grows"),
        ),
        _ => (Verdict::Inconclusive, "no decision rule fired".into()),
    }
}

/// Indices `(a, b)` of a pair witnessing ratio decay along seeds escaping from `∂U`.
fn escaping_family(used: &[&SeedEvidence]) -> Option<(usize, usize)> {
    for (a, ea) in used.iter().enumerate() {
        for (b, eb) in used.iter().enumerate() {
            let far = eb.w2_min_lower_dist >= (FAMILY_DISTANCE * ea.w2_max_upper_dist).max(1.0);
            if far && eb.w2_max_upper <= FAMILY_RATIO * ea.w2_max_upper {
                return Some((a, b));
            }
        }
    }
    None
}

/// Classifies the Baker domain from orbits of `seeds` of length `steps`.
pub fn classify(
    model: &MapModel,
    seeds: &[Complex64],
    steps: usize,
    tau_zero: f64,
    tau_pos: f64,
) -> Result<TypeVerdict, ClassifyError> {
    if seeds.is_empty() {
        return Err(ClassifyError::NoSeeds);
    }
    if steps < MIN_STEPS {
        return Err(ClassifyError::TooFewSteps(steps));
    }
    if !(tau_zero > 0.0 && tau_zero < tau_pos && tau_pos.is_finite()) {
        return Err(ClassifyError::BadThresholds { tau_zero, tau_pos });
    }
    let evidence = seeds
        .par_iter()
        .map(|&z| seed_evidence(model, z, steps))
        .collect::<Result<Vec<_>, _>>()?;
    let (verdict, reason) = decide(&evidence, tau_zero, tau_pos);
    Ok(TypeVerdict {
        verdict,
        reason,
        tau_zero,
        tau_pos,
        steps,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexmap::{build_map, PoleCase};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(case: PoleCase) -> MapModel {
        build_map(case, 0.1, 0.25, 0.9).unwrap()
    }

    #[test]
    fn case_i_is_parabolic_one() {
        let (t0, tp) = default_thresholds(1000);
        let v = classify(&model(PoleCase::ImaginaryAxis), &[c(1.0, 0.0), c(2.0, 1.0)], 1000, t0, tp).unwrap();
        assert_eq!(v.verdict, Verdict::ParabolicI, "{}", v.reason);
        assert!(v.evidence.iter().all(|e| e.w2_max_rho_upper.unwrap() < 0.01));
    }

    #[test]
    fn case_iii_is_hyperbolic() {
        let m = model(PoleCase::GaussianLattice);
        let seeds: Vec<_> = (0..6)
            .flat_map(|i| (0..6).map(move |j| c(3.0 + (i as f64 + 0.5) / 6.0, (j as f64 + 0.5) / 6.0)))
            .filter(|&z| m.in_v_tilde(z))
            .collect();
        let (t0, tp) = default_thresholds(1000);
        let v = classify(&m, &seeds, 1000, t0, tp).unwrap();
        assert_eq!(v.verdict, Verdict::Hyperbolic, "{}", v.reason);
    }

    #[test]
    fn case_ii_shows_the_type_two_signature() {
        let seeds: Vec<_> = (1..=20).map(|k| c(0.0, k as f64)).collect();
        let (t0, tp) = default_thresholds(1000);
        let v = classify(&model(PoleCase::Integers), &seeds, 1000, t0, tp).unwrap();
        assert_eq!(v.verdict, Verdict::ParabolicIISignature, "{}", v.reason);
        let first = &v.evidence[0];
        let last = &v.evidence[19];
        assert!(last.w2_max_upper < 0.25 * first.w2_max_upper);
    }

    #[test]
    fn input_validation() {
        let m = model(PoleCase::Integers);
        assert_eq!(classify(&m, &[], 1000, 0.01, 0.05), Err(ClassifyError::NoSeeds));
        assert_eq!(classify(&m, &[c(0.0, 1.0)], 50, 0.01, 0.05), Err(ClassifyError::TooFewSteps(50)));
        assert!(matches!(
            classify(&m, &[c(0.0, 1.0)], 1000, 0.1, 0.05),
            Err(ClassifyError::BadThresholds { .. })
        ));
        assert!(matches!(
            classify(&m, &[c(0.05, 0.0)], 1000, 0.01, 0.05),
            Err(ClassifyError::Orbit(OrbitError::NotInVTilde { .. }))
        ));
    }

    #[test]
    fn unbounded_enclosures_exclude_the_seed() {
        let ratios = vec![BoundInterval::new(0.5, f64::INFINITY); 8];
        let ev = summarize(c(0.0, 0.0), &ratios, &ratios);
        assert!(ev.excluded.is_some());
        assert_eq!(decide(&[ev], 0.01, 0.05).0, Verdict::Inconclusive);
    }

    fn synthetic(seed: f64, w1: f64, w2: f64, lower: f64, dist: f64) -> SeedEvidence {
        SeedEvidence {
            seed: c(0.0, seed),
            excluded: None,
            w1_max_upper: w1,
            w2_max_upper: w2,
            w2_min_lower: lower,
            min_lower: lower,
            max_upper: w1.max(w2),
            w2_min_lower_dist: dist,
            w2_max_upper_dist: dist,
            w2_max_rho_upper: None,
        }
    }

    fn rank(v: Verdict) -> u8 {
        match v {
            Verdict::Inconclusive => 0,
            _ => 1,
        }
    }

    proptest! {
        #[test]
        fn verdicts_only_weaken_under_stricter_thresholds(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.1f64..30.0), 1..6),
            t0 in 0.001f64..0.2,
            gap in 0.001f64..0.3,
            shrink in 0.1f64..1.0,
            grow in 1.0f64..3.0,
        ) {
            let ev: Vec<_> = raw
                .iter()
                .enumerate()
                .map(|(i, &(a, b, l, d))| synthetic(i as f64, a, b, l * b, d))
                .collect();
            let tp = t0 + gap;
            let (before, _) = decide(&ev, t0, tp);
            let (after, _) = decide(&ev, t0 * shrink, tp * grow);
            prop_assert!(after == before || after == Verdict::Inconclusive);
            prop_assert!(rank(after) <= rank(before));
        }
    }
}
