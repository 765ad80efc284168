use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn rigscat(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigscat"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RIGSCAT_OUT_DIR")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Run `config` into `<tmp>/<out>` and return the manifest path.
fn run_ok(tmp: &Path, config: &str, out: &str, extra: &[&str]) -> PathBuf {
    let cfg = write(tmp, &format!("{out}.toml"), config);
    let out_dir = tmp.join(out);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = rigscat(&args, tmp);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out_dir.join("manifest.json")
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV artifact as strings, header dropped.
fn rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join(name))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn friedrichs_at_one_over_pi_gives_minus_i() {
    let tmp = TempDir::new().unwrap();
    let coupling = 1.0 / std::f64::consts::PI;
    let m = run_ok(
        tmp.path(),
        &format!("preset = \"friedrichs\"\n[perturbation]\ncoupling = {coupling:?}\n"),
        "fpi",
        &[],
    );
    let dir = m.parent().unwrap();
    let row = rows(dir, "s_matrix.csv")
        .into_iter()
        .find(|r| r[0].parse::<f64>().unwrap() == 0.5)
        .expect("0.5 on the grid");
    assert!(row[3].parse::<f64>().unwrap().abs() < 1e-6);
    assert!((row[4].parse::<f64>().unwrap() + 1.0).abs() < 1e-6);

    let man = manifest(&m);
    assert_eq!(man["passed"], Value::Bool(true));
    for (name, art) in man["artifacts"].as_object().unwrap() {
        let bytes = fs::read(dir.join(art["path"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(art["sha256"].as_str().unwrap(), digest, "{name}");
    }
    for key in ["config", "tolerances", "diagnostics", "input_sha256", "checks"] {
        assert!(!man[key].is_null(), "{key}");
    }
}

#[test]
fn zero_coupling_on_the_lattice_is_trivial() {
    let tmp = TempDir::new().unwrap();
    let m = run_ok(tmp.path(), "preset = \"lattice\"\n[perturbation]\ncoupling = 0.0\n", "l0", &[]);
    let s = rows(m.parent().unwrap(), "s_matrix.csv");
    assert_eq!(s.len(), 25 * 4);
    for r in s {
        let want = if r[1] == r[2] { 1.0 } else { 0.0 };
        assert!((r[3].parse::<f64>().unwrap() - want).abs() < 1e-12);
        assert!(r[4].parse::<f64>().unwrap().abs() < 1e-12);
    }
    for r in rows(m.parent().unwrap(), "transmission.csv") {
        assert!((r[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    for (i, text) in ["preset = \"friedrichs\"\n[grid]\npoints = \"x\"\n", "[[[", "preset = \"bogus\"\n"]
        .iter()
        .enumerate()
    {
        let cfg = write(tmp.path(), &format!("bad{i}.toml"), text);
        let out = tmp.path().join(format!("out{i}"));
        let o = rigscat(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(2));
        assert!(!out.exists());
    }
    let o = rigscat(&["run", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invariant_failure_exits_1_and_names_the_check() {
    let tmp = TempDir::new().unwrap();
    // Box too small for the packets to fly.
    let cfg = write(
        tmp.path(),
        "small.toml",
        "preset = \"timecheck\"\n[timecheck]\nradius = 200\noverlap = false\n",
    );
    let out = tmp.path().join("small");
    let o = rigscat(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("failed checks: transmission"), "{err}");
    assert_eq!(manifest(&out.join("manifest.json"))["passed"], Value::Bool(false));
}

#[test]
fn runs_are_bit_reproducible() {
    let tmp = TempDir::new().unwrap();
    let text = "preset = \"chain\"\n[rigging]\nrank = 3\n";
    let a = run_ok(tmp.path(), text, "a", &[]);
    let b = run_ok(tmp.path(), text, "b", &["--threads", "1"]);
    for f in ["s_matrix.csv", "boundary_values.csv", "residuals.csv", "fiber_ranks.csv", "eigenphases.csv"] {
        assert_eq!(
            fs::read(a.parent().unwrap().join(f)).unwrap(),
            fs::read(b.parent().unwrap().join(f)).unwrap(),
            "{f}"
        );
    }
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["artifacts"], mb["artifacts"]);
    assert_eq!(ma["input_sha256"], mb["input_sha256"]);
}

#[test]
fn output_directory_resolution() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "f.toml", "preset = \"friedrichs\"\n[grid]\npoints = 3\n");
    let env_dir = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_rigscat"))
        .args(["run", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("RIGSCAT_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("manifest.json").exists());

    let flag_dir = tmp.path().join("from_flag");
    let o = Command::new(env!("CARGO_BIN_EXE_rigscat"))
        .args(["--out", flag_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("RIGSCAT_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("manifest.json").exists());

    let o = rigscat(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("rigscat-out/f/manifest.json").exists());
}

fn compare(tmp: &Path, a: &Path, b: &Path) -> (Option<i32>, Value) {
    let out = tmp.join(format!("cmp-{}", rand_suffix(a, b)));
    let o = rigscat(
        &["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()],
        tmp,
    );
    let report = fs::read_to_string(out.join("compare.json")).map(|t| serde_json::from_str(&t).unwrap());
    (o.status.code(), report.unwrap_or(Value::Null))
}

fn rand_suffix(a: &Path, b: &Path) -> String {
    let name = |p: &Path| p.parent().unwrap().file_name().unwrap().to_string_lossy().into_owned();
    format!("{}-{}", name(a), name(b))
}

fn deviation(report: &Value, artifact: &str) -> f64 {
    report
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["artifact"] == artifact)
        .unwrap()["max_deviation"]
        .as_f64()
        .unwrap()
}

#[test]
fn comparing_runs() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let base = "preset = \"friedrichs\"\n";
    let a = run_ok(t, base, "same1", &[]);
    let b = run_ok(t, base, "same2", &[]);
    let (code, report) = compare(t, &a, &b);
    assert_eq!(code, Some(0));
    for d in report.as_array().unwrap() {
        assert_eq!(d["max_deviation"].as_f64().unwrap(), 0.0);
    }

    // Truncation sweep with a coupling vector that decays fast enough for
    // the dropped coordinates to be negligible.
    let sweep = |m: usize| {
        format!("preset = \"friedrichs\"\n[rigging]\nrank = {m}\n[perturbation]\nshape = \"geometric\"\nratio = 0.05\ncoupling = 0.8\n")
    };
    let m6 = run_ok(t, &sweep(6), "m6", &[]);
    let m10 = run_ok(t, &sweep(10), "m10", &[]);
    let (code, report) = compare(t, &m6, &m10);
    assert_eq!(code, Some(0));
    assert!(deviation(&report, "s_matrix") <= 1e-6, "{report}");

    let n = |nodes: usize| format!("preset = \"friedrichs\"\n[rigging]\nrank = 3\n[model]\nnodes = {nodes}\n");
    let n64 = run_ok(t, &n(64), "n64", &[]);
    let n128 = run_ok(t, &n(128), "n128", &[]);
    let (_, report) = compare(t, &n64, &n128);
    assert!(deviation(&report, "boundary_values") <= 1e-7, "{report}");

    let other = run_ok(t, "preset = \"friedrichs\"\n[grid]\npoints = 11\n", "other", &[]);
    let (code, _) = compare(t, &a, &other);
    assert_eq!(code, Some(2));
}

fn plot(manifest: &Path, quantity: &str) -> (Option<i32>, Option<String>) {
    let o = rigscat(&["plotdata", manifest.to_str().unwrap(), quantity], manifest.parent().unwrap());
    let path = String::from_utf8_lossy(&o.stdout).trim().to_string();
    (o.status.code(), fs::read_to_string(path).ok())
}

fn columns(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn plot_data_files() {
    let tmp = TempDir::new().unwrap();
    let f = run_ok(tmp.path(), "preset = \"friedrichs\"\n", "f", &[]);
    let (code, text) = plot(&f, "eigenphases");
    assert_eq!(code, Some(0));
    let phases: Vec<f64> = columns(&text.unwrap()).iter().map(|r| r[1]).collect();
    assert_eq!(phases.len(), 25);
    assert!(phases.windows(2).all(|w| w[1] < w[0]), "{phases:?}");

    let l = run_ok(tmp.path(), "preset = \"lattice\"\n", "l", &[]);
    let (_, text) = plot(&l, "fiber_rank");
    let ranks = columns(&text.unwrap());
    assert_eq!(ranks.len(), 25);
    assert!(ranks.iter().all(|r| r[1] == 2.0));
    let (_, text) = plot(&l, "transmission");
    assert!(columns(&text.unwrap()).iter().all(|r| r[1] > 0.0 && r[1] <= 1.0));
    let (_, text) = plot(&l, "residuals");
    assert!(text.unwrap().starts_with("# lambda identity unitarity"));

    assert_eq!(plot(&l, "temperature").0, Some(2));
    assert_eq!(plot(&f, "transmission").0, Some(2));
    let empty = write(tmp.path(), "empty.json", "");
    assert_eq!(plot(&empty, "eigenphases").0, Some(2));
}
