use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bakerlab::output::{ORBIT_CSV_HEADER, SCHEMA_VERSION};

const SMALL: &str = r#"
[model]
case = "ii"
epsilon = 0.1
decay = 0.25
safety = 0.9

[orbit]
seeds = ["1i", "0+2i", "0+5i"]
steps = 400

[loop]
center = "0"
half_side = 0.5
max_gap = 0.1
n_max = 3

[render]
viewport = [-1.0, 3.0, -2.0, 2.0]
width = 16
height = 16
overlay_orbits = true
overlay_loop = true
"#;

fn bakerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bakerlab"))
        .args(args)
        .env_remove("BAKERLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_config(cmd: &str, config: &Path, out: &Path) -> Output {
    bakerlab(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn budget_prints_json() {
    let out = bakerlab(&["budget", "--case", "iii", "--epsilon", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["case"], "iii");
    assert!(v["budget"].as_f64().unwrap() > 0.0);
    assert!(v["amplitude"].is_null());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bakerlab(&["budget", "--case", "i", "--epsilon", "0.9"]).status.code(), Some(2));
    assert_eq!(
        bakerlab(&["budget", "--case", "i", "--epsilon", "0.1", "--decay", "0.3"]).status.code(),
        Some(2)
    );

    let empty = write_config(tmp.path(), &SMALL.replace(r#"["1i", "0+2i", "0+5i"]"#, "[]"));
    let out = run_config("orbit", &empty, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());

    let near_pole = write_config(tmp.path(), &SMALL.replace(r#""1i""#, r#""1.1+0.05i""#));
    assert_eq!(run_config("orbit", &near_pole, &tmp.path().join("o")).status.code(), Some(2));

    let unknown = write_config(tmp.path(), &format!("{SMALL}\n[extra]\nx = 1\n"));
    assert_eq!(run_config("orbit", &unknown, &tmp.path().join("o")).status.code(), Some(2));

    let short = write_config(tmp.path(), &SMALL.replace("steps = 400", "steps = 50"));
    assert_eq!(run_config("classify", &short, &tmp.path().join("o")).status.code(), Some(2));

    let cfg = write_config(tmp.path(), SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_bakerlab"))
        .args(["orbit", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("t").to_str().unwrap()])
        .env("BAKERLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    // The right edge passes 0.15 from the pole 1, inside the collar.
    let cfg = write_config(tmp.path(), &SMALL.replace(r#"center = "0""#, r#"center = "0.35""#));
    let out = run_config("loop", &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL loop_images_certified"));
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(run_config("orbit", &missing, &tmp.path().join("o")).status.code(), Some(4));

    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert_eq!(run_config("orbit", &cfg, &blocker.join("sub")).status.code(), Some(4));
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reproduce_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let out = Command::new(env!("CARGO_BIN_EXE_bakerlab"))
            .args(["reproduce-thm51", "--case", "iii", "--out", dir.to_str().unwrap()])
            .env("BAKERLAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        outputs.push(dir_contents(&dir));
    }
    assert_eq!(outputs[0].len(), 5);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn print_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bakerlab(&["reproduce-thm51", "--case", "ii+", "--print-config"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = write_config(tmp.path(), &String::from_utf8(out.stdout).unwrap());
    let parsed = bakerlab::ExperimentConfig::load(&cfg).unwrap();
    assert_eq!(parsed, bakerlab::ExperimentConfig::builtin(bakerlab_core::PoleCase::PositiveIntegers));
}

/// Runs every config subcommand on the small config into one directory.
fn small_run(dir: &Path) {
    let cfg = write_config(dir, SMALL);
    let out = dir.join("out");
    for cmd in ["orbit", "classify", "loop", "render", "abel"] {
        let sub = out.join(cmd);
        let res = run_config(cmd, &cfg, &sub);
        assert!(
            matches!(res.status.code(), Some(0) | Some(3)),
            "{cmd}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
}

#[test]
fn golden_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    small_run(tmp.path());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let files = [
        ("orbit", "orbit.csv"),
        ("classify", "verdict.json"),
        ("loop", "loops.json"),
        ("render", "render.ppm"),
        ("render", "summary.json"),
    ];
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (cmd, name) in files {
        let got = fs::read(tmp.path().join("out").join(cmd).join(name)).unwrap();
        let path = golden.join(format!("{cmd}-{name}"));
        if update {
            fs::create_dir_all(&golden).unwrap();
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read(&path).unwrap_or_else(|_| panic!("missing {}; rerun with UPDATE_GOLDEN=1", path.display()));
        assert!(got == want, "{} differs from golden copy", path.display());
    }
}

fn json_keys(v: &serde_json::Value, out: &mut BTreeSet<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                out.insert(k.clone());
                json_keys(v, out);
            }
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| json_keys(v, out)),
        _ => {}
    }
}

#[test]
fn schema_documents_every_key() {
    let schema = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/outputs.md")).unwrap();
    assert_eq!(schema.lines().next(), Some(format!("VERSION {SCHEMA_VERSION}").as_str()));
    let documented = |key: &str| schema.contains(&format!("`{key}`"));

    for column in ORBIT_CSV_HEADER.split(',') {
        assert!(documented(column), "orbit.csv column {column} undocumented");
    }

    let tmp = tempfile::tempdir().unwrap();
    small_run(tmp.path());
    let out = bakerlab(&["reproduce-thm51", "--case", "i", "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut keys = BTreeSet::new();
    let mut jsons = vec![tmp.path().join("r")];
    jsons.extend(["orbit", "classify", "loop", "render", "abel"].map(|c| tmp.path().join("out").join(c)));
    for dir in jsons {
        for (name, bytes) in dir_contents(&dir) {
            if name.ends_with(".json") {
                assert!(bytes.ends_with(b"}\n"), "{name} lacks trailing newline");
                let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                assert_eq!(v["schema_version"], SCHEMA_VERSION);
                json_keys(&v, &mut keys);
            }
        }
    }
    let budget: serde_json::Value =
        serde_json::from_slice(&bakerlab(&["budget", "--case", "i", "--epsilon", "0.1", "--decay", "0.25", "--safety", "0.9"]).stdout)
            .unwrap();
    json_keys(&budget, &mut keys);
    let missing: Vec<_> = keys.iter().filter(|k| !documented(k)).collect();
    assert!(missing.is_empty(), "undocumented keys: {missing:?}");
}
