//! Runs configured experiments and writes their artifacts.

use std::path::{Path, PathBuf};

use bakerlab_core::classifier::{classify, default_thresholds, Verdict, MIN_STEPS};
use bakerlab_core::complexmap::{build_map, coefficient_budget, DEFAULT_TAIL_TOL};
use bakerlab_core::hypmetric::{hyperbolic_one_step_test, OneStepReport};
use bakerlab_core::loops::{contractibility, persistence_check, push_forward, LoopPath, PersistenceReport, PointWinding};
use bakerlab_core::orbit::{abel, iterate, lemma2_check, step_ratio_series, Lemma2Failure, Lemma2Report, Orbit};
use bakerlab_core::{BoundInterval, Complex64, MapModel, PoleCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AbsorbSection, ExperimentConfig, LoopSection};
use crate::output::{orbit_csv, write_json, write_text, SCHEMA_VERSION};
use crate::render::{render_region, Image, Viewport, COLLAR, CERTIFIED, INSIDE_EPSILON, LOOP, ORBIT};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Orbit,
    Abel,
    Classify,
    Loop,
    Persist,
    Render,
    Absorb,
    OneStep,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Orbit,
        Task::Abel,
        Task::Classify,
        Task::Loop,
        Task::Persist,
        Task::Render,
        Task::Absorb,
        Task::OneStep,
    ];
}

/// An orbit with its ratio enclosures and drift certification.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: Complex64,
    pub orbit: Orbit,
    pub ratios: Vec<BoundInterval>,
    pub lemma: Result<Lemma2Report, Lemma2Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub case: PoleCase,
    pub epsilon: f64,
    pub delta: f64,
    pub decay: f64,
    pub safety: f64,
    pub amplitude: f64,
    pub coefficient_sum: f64,
    pub budget: f64,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: Complex64,
    pub steps: usize,
    pub max_drift: f64,
    pub worst_margin: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbelRow {
    pub seed: Complex64,
    pub psi: Option<Complex64>,
    pub residual: Option<f64>,
    pub bound: Option<f64>,
    pub terms: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SquareReport {
    pub center: Complex64,
    pub points: usize,
    pub entered: usize,
    pub stayed: usize,
    pub max_entry_step: usize,
    /// Whether the last checked step is late enough for the drift bound to keep
    /// every orbit in the half-plane from then on.
    pub horizon_sufficient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbReport {
    pub half_plane: String,
    pub squares: Vec<SquareReport>,
    pub all_absorbed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopSummary {
    pub n0: Option<usize>,
    pub total_violations: usize,
    pub final_contractible: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OneStepSummary {
    pub samples: usize,
    pub min_lower: f64,
    pub argmin: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderSummary {
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub inside_epsilon: usize,
    pub collar: usize,
    pub certified: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub model: ModelSummary,
    pub seeds: Option<Vec<SeedSummary>>,
    pub verdict: Option<Verdict>,
    pub abel: Option<Vec<AbelRow>>,
    pub loops: Option<LoopSummary>,
    pub absorb: Option<AbsorbReport>,
    pub one_step: Option<OneStepSummary>,
    pub render: Option<RenderSummary>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Serialize)]
struct VerdictDoc<'a> {
    schema_version: u32,
    case: PoleCase,
    #[serde(flatten)]
    verdict: &'a bakerlab_core::classifier::TypeVerdict,
}

#[derive(Debug, Clone, Serialize)]
struct ImageDoc {
    n: usize,
    /// Vertices of the refined loop; unknown for the last image, which is not refined.
    vertices: Option<usize>,
    contractible: Option<bool>,
    certified: bool,
    windings: Vec<PointWinding>,
}

#[derive(Debug, Clone, Serialize)]
struct StepDoc {
    n: usize,
    condition_holds: bool,
    failing_vertices: usize,
    failure_sample: Vec<Complex64>,
    violations: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
struct LoopsDoc {
    schema_version: u32,
    case: PoleCase,
    center: Complex64,
    half_side: f64,
    max_gap: f64,
    n_max: usize,
    n0: Option<usize>,
    total_violations: usize,
    images: Vec<ImageDoc>,
    steps: Vec<StepDoc>,
}

#[derive(Debug, Clone, Serialize)]
struct AbelDoc<'a> {
    schema_version: u32,
    case: PoleCase,
    tol: f64,
    rows: &'a [AbelRow],
}

/// A validated configuration with its model.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: MapModel,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let m = &config.model;
        let mut model = build_map(m.case, m.epsilon, m.decay, m.safety).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(tol) = m.tail_tol {
            model = model.with_tail_tol(tol).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if config.orbit.seeds.is_empty() {
            return Err(CliError::Config("[orbit] seeds must not be empty".into()));
        }
        if config.orbit.steps == 0 {
            return Err(CliError::Config("[orbit] steps must be positive".into()));
        }
        if !(config.orbit.abel_tol > 0.0 && config.orbit.abel_tol.is_finite()) {
            return Err(CliError::Config("[orbit] abel_tol must be positive".into()));
        }
        for seed in config.seeds() {
            if !model.in_v_tilde(seed) {
                return Err(CliError::Config(format!(
                    "seed {seed} is closer than 2*epsilon to the extended pole set"
                )));
            }
        }
        if let Some(l) = &config.loop_spec {
            if !(l.half_side > 0.0 && l.max_gap > 0.0 && l.max_gap.is_finite()) {
                return Err(CliError::Config("[loop] half_side and max_gap must be positive".into()));
            }
        }
        if let Some(a) = &config.absorb {
            validate_absorb(&model, a)?;
        }
        if let Some(r) = &config.render {
            Viewport::from_array(r.viewport)?;
            if r.width == 0 || r.height == 0 {
                return Err(CliError::Config("[render] width and height must be positive".into()));
            }
        }
        Ok(Experiment { config, model })
    }

    pub fn model_summary(&self) -> ModelSummary {
        let m = &self.model;
        ModelSummary {
            case: m.case(),
            epsilon: m.epsilon(),
            delta: m.delta(),
            decay: m.decay(),
            safety: self.config.model.safety,
            amplitude: m.amplitude(),
            coefficient_sum: m.coefficient_sum(),
            budget: coefficient_budget(m.case(), m.epsilon()).expect("validated"),
            tail_tol: m.tail_tol(),
        }
    }

    /// Orbits of all seeds, computed in parallel and returned in seed order.
    pub fn orbits(&self) -> Result<Vec<SeedRun>, CliError> {
        let steps = self.config.orbit.steps;
        self.config
            .seeds()
            .par_iter()
            .map(|&seed| {
                let orbit = iterate(&self.model, seed, steps).map_err(certification)?;
                let ratios = step_ratio_series(&self.model, &orbit);
                let lemma = lemma2_check(&orbit, &self.model);
                Ok(SeedRun {
                    seed,
                    orbit,
                    ratios,
                    lemma,
                })
            })
            .collect()
    }

    pub fn abel_rows(&self) -> Result<Vec<AbelRow>, CliError> {
        let tol = self.config.orbit.abel_tol;
        self.config
            .seeds()
            .par_iter()
            .map(|&z| {
                let f = self.model.eval_f(z).map_err(certification)?;
                if !self.model.in_v_tilde(f.value) {
                    return Ok(AbelRow {
                        seed: z,
                        psi: None,
                        residual: None,
                        bound: None,
                        terms: None,
                        note: Some("image of the seed lies outside the certified region".into()),
                    });
                }
                let a = abel(&self.model, z, tol).map_err(certification)?;
                let b = abel(&self.model, f.value, tol).map_err(certification)?;
                Ok(AbelRow {
                    seed: z,
                    psi: Some(a.value),
                    residual: Some((b.value - a.value - 1.0).norm()),
                    bound: Some(a.total_err() + b.total_err() + 2.0 * f.err),
                    terms: Some(a.terms),
                    note: None,
                })
            })
            .collect()
    }

    pub fn persistence(&self, spec: &LoopSection) -> Result<PersistenceReport, CliError> {
        let path = LoopPath::square(spec.center.0, spec.half_side, spec.max_gap).map_err(certification)?;
        persistence_check(&self.model, &path, spec.n_max).map_err(certification)
    }

    pub fn absorb(&self, spec: &AbsorbSection) -> Result<AbsorbReport, CliError> {
        let eps = self.model.epsilon();
        let squares = spec
            .squares
            .par_iter()
            .enumerate()
            .map(|(i, center)| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed.wrapping_add(i as u64));
                let h = spec.half_side;
                let points: Vec<Complex64> = (0..spec.points)
                    .map(|_| center.0 + Complex64::new(rng.random_range(-h..=h), rng.random_range(-h..=h)))
                    .collect();
                let mut report = SquareReport {
                    center: center.0,
                    points: points.len(),
                    entered: 0,
                    stayed: 0,
                    max_entry_step: 0,
                    horizon_sufficient: true,
                };
                for z in points {
                    let orbit = iterate(&self.model, z, spec.max_steps).map_err(certification)?;
                    if lemma2_check(&orbit, &self.model).is_err() {
                        continue;
                    }
                    let inside = |n: usize| orbit.points[n].re - orbit.point_err(n) > 1.0;
                    let Some(entry) = (0..orbit.len()).find(|&n| inside(n)) else { continue };
                    report.entered += 1;
                    report.max_entry_step = report.max_entry_step.max(entry);
                    if (entry..orbit.len()).all(inside) {
                        report.stayed += 1;
                    }
                    // |fⁿ(z) − z − n| < ε/2 keeps Re fⁿ(z) > 1 once Re z + n − ε/2 > 1.
                    if z.re + spec.max_steps as f64 - 0.5 * eps <= 1.0 {
                        report.horizon_sufficient = false;
                    }
                }
                Ok(report)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let all_absorbed = squares
            .iter()
            .all(|s| s.entered == s.points && s.stayed == s.points && s.horizon_sufficient);
        Ok(AbsorbReport {
            half_plane: "Re z > 1".into(),
            squares,
            all_absorbed,
        })
    }

    /// Grid samples of the unit cell with the given lower-left corner, restricted to `Ṽ`.
    pub fn cell_samples(&self, corner: Complex64, per_side: usize) -> Vec<Complex64> {
        let g = per_side as f64;
        (0..per_side)
            .flat_map(|i| (0..per_side).map(move |j| corner + Complex64::new((i as f64 + 0.5) / g, (j as f64 + 0.5) / g)))
            .filter(|&z| self.model.in_v_tilde(z))
            .collect()
    }

    pub fn one_step(&self) -> Result<Option<(usize, OneStepReport)>, CliError> {
        let Some(corner) = self.config.classify.one_step_cell else {
            return Ok(None);
        };
        let samples = self.cell_samples(corner.0, self.config.classify.one_step_grid);
        if samples.is_empty() {
            return Err(CliError::Config("[classify] one-step cell has no samples in the certified region".into()));
        }
        let report = hyperbolic_one_step_test(&self.model, &samples).map_err(certification)?;
        Ok(Some((samples.len(), report)))
    }

    pub fn render(&self, runs: Option<&[SeedRun]>) -> Result<Option<Image>, CliError> {
        let Some(spec) = &self.config.render else {
            return Ok(None);
        };
        let viewport = Viewport::from_array(spec.viewport)?;
        let mut image = render_region(&self.model, viewport, spec.width, spec.height)?;
        if spec.overlay_orbits {
            if let Some(runs) = runs {
                for run in runs {
                    image.overlay(run.orbit.points.iter().copied(), ORBIT);
                }
            }
        }
        if spec.overlay_loop {
            if let Some(l) = &self.config.loop_spec {
                let mut path = LoopPath::square(l.center.0, l.half_side, l.max_gap).map_err(certification)?;
                image.overlay(path.vertices.clone(), LOOP);
                for _ in 0..l.n_max {
                    path = push_forward(&self.model, &path).map_err(certification)?;
                    image.overlay(path.vertices.clone(), LOOP);
                }
            }
        }
        Ok(Some(image))
    }
}

fn thresholds(config: &ExperimentConfig) -> (f64, f64) {
    let (dz, dp) = default_thresholds(config.orbit.steps.max(1));
    (config.classify.tau_zero.unwrap_or(dz), config.classify.tau_pos.unwrap_or(dp))
}

fn validate_absorb(model: &MapModel, a: &AbsorbSection) -> Result<(), CliError> {
    if a.points == 0 || !(a.half_side > 0.0) {
        return Err(CliError::Config("[absorb] points and half_side must be positive".into()));
    }
    for c in &a.squares {
        let (_, d) = model.dist_to_poles(c.0);
        if d - a.half_side * std::f64::consts::SQRT_2 < model.delta() {
            return Err(CliError::Config(format!("[absorb] square around {c} is not inside the certified region")));
        }
    }
    Ok(())
}

fn certification(e: impl std::fmt::Display) -> CliError {
    CliError::Certification(e.to_string())
}

fn seed_summaries(runs: &[SeedRun]) -> Vec<SeedSummary> {
    runs.iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            steps: r.orbit.len() - 1,
            max_drift: r.orbit.drift.iter().map(|d| d.norm()).fold(0.0, f64::max),
            worst_margin: r.lemma.as_ref().ok().map(|l| l.worst_margin),
            failure: r.lemma.as_ref().err().map(|f| f.to_string()),
        })
        .collect()
}

/// Quantitative checks that the case-specific statements should pass.
fn case_checks(exp: &Experiment, runs: &[SeedRun], loops: Option<&PersistenceReport>, verdict: Option<Verdict>) -> Vec<Check> {
    let case = exp.model.case();
    let mut checks = Vec::new();
    let expected = match case {
        PoleCase::ImaginaryAxis => Verdict::ParabolicI,
        PoleCase::Integers | PoleCase::PositiveIntegers => Verdict::ParabolicIISignature,
        PoleCase::GaussianLattice => Verdict::Hyperbolic,
    };
    if let Some(v) = verdict {
        checks.push(Check::new(
            "expected_verdict",
            v == expected,
            format!("got {}, expected {}", v.label(), expected.label()),
        ));
    }
    match case {
        PoleCase::ImaginaryAxis => {
            if let Some(run) = runs.iter().find(|r| r.seed == Complex64::new(1.0, 0.0)) {
                let worst = (10..run.ratios.len())
                    .map(|n| run.ratios[n].upper * n as f64 / 2.0)
                    .fold(0.0, f64::max);
                checks.push(Check::new(
                    "ratio_below_2_over_n",
                    worst < 1.0,
                    format!("max over n >= 10 of upper(s_n) * n / 2 = {worst:.6}"),
                ));
            }
            if let Some(rep) = loops {
                let from = rep.n0.unwrap_or(usize::MAX).max(1);
                let ok = rep.n0.is_some_and(|n0| n0 <= 10)
                    && rep.steps.iter().skip(from).all(|s| s.report.contractible == Some(true))
                    && rep.final_report.contractible == Some(true);
                checks.push(Check::new("loop_becomes_contractible", ok, format!("n0 = {:?}", rep.n0)));
            }
        }
        PoleCase::Integers | PoleCase::PositiveIntegers | PoleCase::GaussianLattice => {
            if case != PoleCase::GaussianLattice {
                let mut bad = 0;
                for run in runs.iter().filter(|r| r.seed.re == 0.0 && r.seed.im >= 1.0) {
                    let k = run.seed.im;
                    bad += run
                        .ratios
                        .iter()
                        .filter(|r| !(r.lower > 1.0 / (4.0 * k) && r.upper < 4.0 / k))
                        .count();
                }
                checks.push(Check::new(
                    "ratio_band_for_seeds_ik",
                    bad == 0,
                    format!("{bad} enclosures outside (1/(4k), 4/k)"),
                ));
            } else {
                let min_lower = runs
                    .iter()
                    .flat_map(|r| r.ratios.iter().map(|x| x.lower))
                    .fold(f64::INFINITY, f64::min);
                checks.push(Check::new(
                    "ratio_bounded_below",
                    min_lower > 0.5,
                    format!("min lower(s_n) = {min_lower:.6}"),
                ));
            }
            if let Some(rep) = loops {
                let images = image_reports(rep);
                let bad: Vec<usize> = images
                    .iter()
                    .filter(|(n, _)| *n >= 1)
                    .filter(|(n, r)| {
                        r.winding_about(Complex64::new(*n as f64, 0.0)) != Some(1) || r.contractible != Some(false)
                    })
                    .map(|(n, _)| *n)
                    .collect();
                checks.push(Check::new(
                    "loop_winds_once_around_pole_n",
                    bad.is_empty(),
                    format!("failing images: {bad:?}"),
                ));
            }
        }
    }
    checks
}

fn image_reports(rep: &PersistenceReport) -> Vec<(usize, &bakerlab_core::loops::WindingReport)> {
    let mut out: Vec<_> = rep.steps.iter().map(|s| (s.n, &s.report)).collect();
    out.push((rep.steps.len(), &rep.final_report));
    out
}

fn loops_doc(exp: &Experiment, spec: &LoopSection, rep: &PersistenceReport) -> LoopsDoc {
    let images = image_reports(rep)
        .into_iter()
        .map(|(n, r)| ImageDoc {
            n,
            vertices: rep.steps.get(n).map(|s| s.vertices),
            contractible: r.contractible,
            certified: r.certified,
            windings: r.windings.clone(),
        })
        .collect();
    let steps = rep
        .steps
        .iter()
        .map(|s| StepDoc {
            n: s.n,
            condition_holds: s.condition_holds,
            failing_vertices: s.failing_vertices,
            failure_sample: s.failure_sample.clone(),
            violations: s.violations.clone(),
        })
        .collect();
    LoopsDoc {
        schema_version: SCHEMA_VERSION,
        case: exp.model.case(),
        center: spec.center.0,
        half_side: spec.half_side,
        max_gap: spec.max_gap,
        n_max: spec.n_max,
        n0: rep.n0,
        total_violations: rep.total_violations,
        images,
        steps,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs `tasks`, writes their artifacts under the configured output directory and
/// returns the summary (also written as `summary.json`).
///
/// With `expect_case` the case-specific checks are added as well.
pub fn run_experiment(
    config: &ExperimentConfig,
    command: &str,
    tasks: &[Task],
    expect_case: bool,
) -> Result<Summary, CliError> {
    let exp = Experiment::new(config.clone())?;
    let dir: PathBuf = config.output.dir.clone();
    let wants = |t: Task| tasks.contains(&t);
    if wants(Task::Classify) {
        if config.orbit.steps < MIN_STEPS {
            return Err(CliError::Config(format!("classification needs at least {MIN_STEPS} steps")));
        }
        let (tz, tp) = thresholds(config);
        if !(tz > 0.0 && tz < tp && tp.is_finite()) {
            return Err(CliError::Config(format!("need 0 < tau_zero < tau_pos, got {tz} and {tp}")));
        }
    }
    ensure_dir(&dir)?;
    let mut checks = Vec::new();
    let mut files = Vec::new();

    let overlay_orbits = wants(Task::Render) && config.render.as_ref().is_some_and(|r| r.overlay_orbits);
    let runs = if wants(Task::Orbit) || overlay_orbits {
        Some(exp.orbits()?)
    } else {
        None
    };
    let mut seeds = None;
    if let (true, Some(runs)) = (wants(Task::Orbit), &runs) {
        write_text(&dir.join("orbit.csv"), orbit_csv(runs).as_bytes())?;
        files.push("orbit.csv".to_string());
        let failed = runs.iter().filter(|r| r.lemma.is_err()).count();
        checks.push(Check::new(
            "drift_certified",
            failed == 0,
            format!("{failed} of {} orbits failed drift certification", runs.len()),
        ));
        seeds = Some(seed_summaries(runs));
    }

    let mut abel_rows = None;
    if wants(Task::Abel) {
        let rows = exp.abel_rows()?;
        let doc = AbelDoc {
            schema_version: SCHEMA_VERSION,
            case: exp.model.case(),
            tol: config.orbit.abel_tol,
            rows: &rows,
        };
        write_json(&dir.join("abel.json"), &doc)?;
        files.push("abel.json".to_string());
        let bad = rows
            .iter()
            .filter(|r| matches!((r.residual, r.bound), (Some(res), Some(b)) if res > b))
            .count();
        checks.push(Check::new(
            "abel_equation",
            bad == 0,
            format!("{bad} seeds with |psi(f(z)) - psi(z) - 1| above the certified budget"),
        ));
        abel_rows = Some(rows);
    }

    let mut verdict = None;
    if wants(Task::Classify) {
        let (tz, tp) = thresholds(config);
        let v = classify(&exp.model, &config.seeds(), config.orbit.steps, tz, tp).map_err(certification)?;
        write_json(
            &dir.join("verdict.json"),
            &VerdictDoc {
                schema_version: SCHEMA_VERSION,
                case: exp.model.case(),
                verdict: &v,
            },
        )?;
        files.push("verdict.json".to_string());
        verdict = Some(v.verdict);
    }

    let mut loop_report = None;
    let mut loops = None;
    if wants(Task::Loop) || wants(Task::Persist) {
        let spec = config
            .loop_spec
            .as_ref()
            .ok_or_else(|| CliError::Config("a [loop] section is required".into()))?;
        let rep = exp.persistence(spec)?;
        write_json(&dir.join("loops.json"), &loops_doc(&exp, spec, &rep))?;
        files.push("loops.json".to_string());
        if wants(Task::Loop) {
            let uncertified = image_reports(&rep).iter().filter(|(_, r)| !r.certified).count();
            checks.push(Check::new(
                "loop_images_certified",
                uncertified == 0,
                format!("{uncertified} images come within delta of the extended pole set"),
            ));
        }
        if wants(Task::Persist) {
            checks.push(Check::new(
                "winding_persistence",
                rep.total_violations == 0,
                format!("{} violations, n0 = {:?}", rep.total_violations, rep.n0),
            ));
        }
        loops = Some(LoopSummary {
            n0: rep.n0,
            total_violations: rep.total_violations,
            final_contractible: rep.final_report.contractible,
        });
        loop_report = Some(rep);
    }

    let mut absorb = None;
    if wants(Task::Absorb) {
        if let Some(spec) = &config.absorb {
            let rep = exp.absorb(spec)?;
            checks.push(Check::new(
                "absorbing_half_plane",
                rep.all_absorbed,
                "every sampled orbit enters Re z > 1 and stays",
            ));
            absorb = Some(rep);
        }
    }

    let mut one_step = None;
    if wants(Task::OneStep) {
        if let Some((samples, rep)) = exp.one_step()? {
            checks.push(Check::new(
                "one_step_lower_bound_positive",
                rep.min_lower > 0.0,
                format!("min lower bound on rho(z, f(z)) = {:.6e}", rep.min_lower),
            ));
            one_step = Some(OneStepSummary {
                samples,
                min_lower: rep.min_lower,
                argmin: rep.argmin,
            });
        }
    }

    let mut render = None;
    if wants(Task::Render) {
        if let Some(image) = exp.render(runs.as_deref())? {
            let spec = config.render.as_ref().expect("render section");
            image.write_ppm(&dir.join(&spec.file))?;
            files.push(spec.file.clone());
            let plain = render_region(&exp.model, Viewport::from_array(spec.viewport)?, spec.width, spec.height)?;
            render = Some(RenderSummary {
                file: spec.file.clone(),
                width: image.width,
                height: image.height,
                inside_epsilon: plain.count(INSIDE_EPSILON),
                collar: plain.count(COLLAR),
                certified: plain.count(CERTIFIED),
            });
        }
    }

    if expect_case {
        checks.extend(case_checks(
            &exp,
            runs.as_deref().unwrap_or(&[]),
            loop_report.as_ref(),
            verdict,
        ));
    }

    files.push("summary.json".to_string());
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        model: exp.model_summary(),
        seeds,
        verdict,
        abel: abel_rows,
        loops,
        absorb,
        one_step,
        render,
        checks,
        files,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Coefficient budget report for the `budget` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub case: PoleCase,
    pub epsilon: f64,
    pub budget: f64,
    pub decay: Option<f64>,
    pub safety: Option<f64>,
    pub amplitude: Option<f64>,
    pub tail_tol: f64,
}

pub fn budget_report(case: PoleCase, epsilon: f64, decay: Option<f64>, safety: Option<f64>) -> Result<BudgetReport, CliError> {
    let budget = coefficient_budget(case, epsilon).map_err(|e| CliError::Config(e.to_string()))?;
    let amplitude = match (decay, safety) {
        (Some(r), Some(s)) => Some(build_map(case, epsilon, r, s).map_err(|e| CliError::Config(e.to_string()))?.amplitude()),
        (None, None) => None,
        _ => return Err(CliError::Config("--decay and --safety must be given together".into())),
    };
    Ok(BudgetReport {
        case,
        epsilon,
        budget,
        decay,
        safety,
        amplitude,
        tail_tol: DEFAULT_TAIL_TOL,
    })
}

/// Whether the loop section describes a loop inside the certified region.
pub fn loop_is_certified(model: &MapModel, spec: &LoopSection) -> bool {
    LoopPath::square(spec.center.0, spec.half_side, spec.max_gap)
        .map(|p| contractibility(model, &p).certified)
        .unwrap_or(false)
}
