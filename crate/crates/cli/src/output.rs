//! CSV artifacts and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::pipeline::{Check, PointDiagnostics, RunOutput, Tolerances};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Full double precision: 17 significant digits, round-trips exactly.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// File name relative to the manifest.
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: Config,
    pub input_sha256: String,
    pub tolerances: Tolerances,
    pub threads: Option<usize>,
    pub diagnostics: Vec<PointDiagnostics>,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Artifact name (e.g. `s_matrix`) to file.
    pub artifacts: BTreeMap<String, Artifact>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(CliError::Manifest(format!("{} is empty", path.display())));
        }
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn artifact_path(&self, manifest: &Path, name: &str) -> Option<PathBuf> {
        let a = self.artifacts.get(name)?;
        Some(manifest.parent().unwrap_or(Path::new(".")).join(&a.path))
    }
}

struct Table {
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    fn render(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

fn tables(run: &RunOutput) -> Vec<(&'static str, Table)> {
    let mut s_rows = Vec::new();
    let mut t_rows = Vec::new();
    let mut phase_rows = Vec::new();
    let mut res_rows = Vec::new();
    let mut trans_rows = Vec::new();
    for p in &run.points {
        let lam = float(p.lambda);
        for ((i, j), z) in p.s.iter().enumerate().map(|(k, z)| ((k % p.s.nrows(), k / p.s.nrows()), z)) {
            s_rows.push(format!("{lam},{i},{j},{},{}", float(z.re), float(z.im)));
        }
        for ((i, j), z) in p.t0.iter().enumerate().map(|(k, z)| ((k % p.t0.nrows(), k / p.t0.nrows()), z)) {
            t_rows.push(format!("{lam},{i},{j},{},{}", float(z.re), float(z.im)));
        }
        for (k, phase) in p.eigenphases.iter().enumerate() {
            phase_rows.push(format!("{lam},{k},{}", float(*phase)));
        }
        for (name, v) in &p.residuals {
            res_rows.push(format!("{lam},{name},{}", float(*v)));
        }
        if let Some(t) = p.transmission {
            trans_rows.push(format!("{lam},{}", float(t)));
        }
    }
    let rank_rows = run
        .diagnostics
        .iter()
        .map(|d| {
            let r = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
            format!("{},{},{},{}", float(d.lambda), u8::from(d.regular), r(d.rank0), r(d.rank1))
        })
        .collect();
    let mut out = vec![
        (
            "s_matrix",
            Table {
                header: "lambda,row,col,re,im",
                rows: s_rows,
            },
        ),
        (
            "boundary_values",
            Table {
                header: "lambda,row,col,re,im",
                rows: t_rows,
            },
        ),
        (
            "eigenphases",
            Table {
                header: "lambda,index,phase",
                rows: phase_rows,
            },
        ),
        (
            "fiber_ranks",
            Table {
                header: "lambda,regular,rank0,rank1",
                rows: rank_rows,
            },
        ),
        (
            "residuals",
            Table {
                header: "lambda,check,value",
                rows: res_rows,
            },
        ),
    ];
    if !run.flights.is_empty() {
        let rows = run
            .flights
            .iter()
            .map(|f| {
                format!(
                    "{},{},{},{}",
                    float(f.lambda),
                    float(f.stationary),
                    float(f.flight),
                    f.overlap.map(float).unwrap_or_default()
                )
            })
            .collect();
        out.push((
            "transmission",
            Table {
                header: "lambda,stationary,flight,overlap",
                rows,
            },
        ));
    } else if !trans_rows.is_empty() {
        out.push((
            "transmission",
            Table {
                header: "lambda,stationary",
                rows: trans_rows,
            },
        ));
    }
    out
}

/// Write every artifact and the manifest into `dir`; returns the manifest
/// path.
pub fn write_run(
    dir: &Path,
    cfg: &Config,
    input: &[u8],
    tolerances: &Tolerances,
    threads: Option<usize>,
    run: &RunOutput,
) -> Result<(PathBuf, RunManifest), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut artifacts = BTreeMap::new();
    for (name, table) in tables(run) {
        let text = table.render();
        let file = format!("{name}.csv");
        fs::write(dir.join(&file), &text).map_err(io)?;
        artifacts.insert(
            name.to_string(),
            Artifact {
                path: file,
                sha256: sha256_hex(text.as_bytes()),
                rows: table.rows.len(),
            },
        );
    }
    let manifest = RunManifest {
        tool: format!("rigscat {}", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        input_sha256: sha256_hex(input),
        tolerances: tolerances.clone(),
        threads,
        diagnostics: run.diagnostics.clone(),
        checks: run.checks.clone(),
        passed: run.checks.iter().all(|c| c.passed),
        artifacts,
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(io)?;
    Ok((path, manifest))
}

/// A parsed CSV artifact: header plus string cells.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_csv(path: &Path) -> Result<Csv, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Manifest(format!("{} has no header", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok(Csv { header, rows })
}
