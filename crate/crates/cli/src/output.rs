//! Artifact writers. Every file layout is described in `schema/outputs.md`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::experiment::SeedRun;
use crate::CliError;

/// Version of the artifact layout; bump together with `schema/outputs.md`.
pub const SCHEMA_VERSION: u32 = 1;

pub const ORBIT_CSV_HEADER: &str = "seed,n,re,im,drift_abs,eval_err,ratio_lower,ratio_upper";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One row per orbit point; the ratio columns describe the step to the next point
/// and are empty on each orbit's last row.
pub fn orbit_csv(runs: &[SeedRun]) -> String {
    let mut out = String::with_capacity(160 * runs.iter().map(|r| r.orbit.len()).sum::<usize>());
    out.push_str(ORBIT_CSV_HEADER);
    out.push('\n');
    for (s, run) in runs.iter().enumerate() {
        let orbit = &run.orbit;
        for n in 0..orbit.len() {
            let z = orbit.points[n];
            let _ = write!(
                out,
                "{s},{n},{},{},{},{}",
                fmt_num(z.re),
                fmt_num(z.im),
                fmt_num(orbit.drift[n].norm()),
                fmt_num(orbit.eval_err[n])
            );
            match run.ratios.get(n) {
                Some(r) => {
                    let _ = writeln!(out, ",{},{}", fmt_num(r.lower), fmt_num(r.upper));
                }
                None => out.push_str(",,\n"),
            }
        }
    }
    out
}

pub fn write_text(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, to_json(value).as_bytes())
}
