//! Experiment configuration files (TOML, one flat table per section).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bakerlab_core::{Complex64, PoleCase};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// A complex number written as a string such as `"2-0.5i"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point(pub Complex64);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Complex64::from_str(text.trim())
            .map(Point)
            .map_err(|_| serde::de::Error::custom(format!("'{text}' is not a complex number")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub case: PoleCase,
    pub epsilon: f64,
    pub decay: f64,
    pub safety: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    pub seeds: Vec<Point>,
    pub steps: usize,
    /// Tolerance of the Abel series tail.
    #[serde(default = "default_abel_tol")]
    pub abel_tol: f64,
}

fn default_abel_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_pos: Option<f64>,
    /// Lower-left corner of a unit cell sampled by the one-step hyperbolicity test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_step_cell: Option<Point>,
    /// Samples per side of that cell.
    #[serde(default = "default_one_step_grid")]
    pub one_step_grid: usize,
}

fn default_one_step_grid() -> usize {
    32
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            tau_zero: None,
            tau_pos: None,
            one_step_cell: None,
            one_step_grid: default_one_step_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub center: Point,
    pub half_side: f64,
    pub max_gap: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbSection {
    /// Centres of the sampled squares.
    pub squares: Vec<Point>,
    pub half_side: f64,
    pub points: usize,
    pub max_steps: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    /// `[x_min, x_max, y_min, y_max]`.
    pub viewport: [f64; 4],
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_render_file")]
    pub file: String,
    #[serde(default)]
    pub overlay_orbits: bool,
    #[serde(default)]
    pub overlay_loop: bool,
}

fn default_render_file() -> String {
    "render.ppm".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("bakerlab-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub orbit: OrbitSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(rename = "loop", default, skip_serializing_if = "Option::is_none")]
    pub loop_spec: Option<LoopSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorb: Option<AbsorbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seeds(&self) -> Vec<Complex64> {
        self.orbit.seeds.iter().map(|p| p.0).collect()
    }

    /// Built-in configuration reproducing the three model cases.
    pub fn builtin(case: PoleCase) -> Self {
        let c = |re: f64, im: f64| Point(Complex64::new(re, im));
        let (seeds, classify, absorb, viewport) = match case {
            PoleCase::ImaginaryAxis => (
                vec![c(1.0, 0.0), c(2.0, 1.0)],
                ClassifySection::default(),
                Some(AbsorbSection {
                    squares: vec![c(-2.5, 0.5), c(0.5, 3.5), c(-7.5, -4.5)],
                    half_side: 0.25,
                    points: 50,
                    max_steps: 100,
                    rng_seed: 20_240_601,
                }),
                [-3.0, 5.0, -4.0, 4.0],
            ),
            PoleCase::Integers | PoleCase::PositiveIntegers => (
                (1..=20).map(|k| c(0.0, k as f64)).collect(),
                ClassifySection::default(),
                None,
                [-2.0, 6.0, -4.0, 4.0],
            ),
            PoleCase::GaussianLattice => (
                (1..4)
                    .flat_map(|i| (1..4).map(move |j| c(3.0 + i as f64 / 4.0, j as f64 / 4.0)))
                    .collect(),
                ClassifySection {
                    one_step_cell: Some(c(0.0, 0.0)),
                    ..ClassifySection::default()
                },
                None,
                [-2.0, 2.0, -2.0, 2.0],
            ),
        };
        ExperimentConfig {
            model: ModelSection {
                case,
                epsilon: 0.1,
                decay: 0.25,
                safety: 0.9,
                tail_tol: None,
            },
            orbit: OrbitSection {
                seeds,
                steps: 1000,
                abel_tol: default_abel_tol(),
            },
            classify,
            loop_spec: Some(LoopSection {
                center: c(0.0, 0.0),
                half_side: 0.5,
                max_gap: 0.05,
                n_max: 20,
            }),
            absorb,
            render: Some(RenderSection {
                viewport,
                width: 400,
                height: 400,
                file: default_render_file(),
                overlay_orbits: true,
                overlay_loop: true,
            }),
            output: OutputSection {
                dir: PathBuf::from(format!("thm51-{}", case.label().replace('+', "plus"))),
            },
        }
    }
}
