//! Entrywise comparison of two runs and plot-data extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::output::{float, read_csv, Csv, RunManifest};
use crate::CliError;

/// Columns holding numbers to compare; every other column is part of the
/// row key.
const VALUE_COLUMNS: &[&str] = &[
    "re",
    "im",
    "phase",
    "value",
    "stationary",
    "flight",
    "overlap",
    "regular",
    "rank0",
    "rank1",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactDiff {
    pub artifact: String,
    pub shared_rows: usize,
    pub only_a: usize,
    pub only_b: usize,
    pub max_deviation: f64,
}

fn keyed(csv: &Csv) -> BTreeMap<Vec<String>, Vec<Option<f64>>> {
    let is_value: Vec<bool> = csv.header.iter().map(|h| VALUE_COLUMNS.contains(&h.as_str())).collect();
    csv.rows
        .iter()
        .map(|row| {
            let key = row.iter().zip(&is_value).filter(|(_, &v)| !v).map(|(c, _)| c.clone()).collect();
            let values = row
                .iter()
                .zip(&is_value)
                .filter(|(_, &v)| v)
                .map(|(c, _)| c.parse::<f64>().ok())
                .collect();
            (key, values)
        })
        .collect()
}

fn grid_of(manifest: &RunManifest) -> Vec<u64> {
    manifest.diagnostics.iter().map(|d| d.lambda.to_bits()).collect()
}

/// Max deviation over the rows both runs share, per shared artifact.
/// Runs on different energy grids are incompatible.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Vec<ArtifactDiff>, CliError> {
    let (ma, mb) = (RunManifest::load(a)?, RunManifest::load(b)?);
    let (ga, gb) = (grid_of(&ma), grid_of(&mb));
    if ga != gb {
        let at = ga.iter().zip(&gb).position(|(x, y)| x != y).unwrap_or(ga.len().min(gb.len()));
        return Err(CliError::Incompatible(format!(
            "energy grids differ at point {at} ({} vs {} points)",
            ga.len(),
            gb.len()
        )));
    }
    let mut out = Vec::new();
    for name in ma.artifacts.keys().filter(|k| mb.artifacts.contains_key(*k)) {
        let ca = read_csv(&ma.artifact_path(a, name).expect("listed artifact"))?;
        let cb = read_csv(&mb.artifact_path(b, name).expect("listed artifact"))?;
        if ca.header != cb.header {
            return Err(CliError::Incompatible(format!("{name}: column layouts differ")));
        }
        let (ka, kb) = (keyed(&ca), keyed(&cb));
        let mut diff = ArtifactDiff {
            artifact: name.clone(),
            shared_rows: 0,
            only_a: ka.keys().filter(|k| !kb.contains_key(*k)).count(),
            only_b: kb.keys().filter(|k| !ka.contains_key(*k)).count(),
            max_deviation: 0.0,
        };
        for (key, va) in &ka {
            let Some(vb) = kb.get(key) else { continue };
            diff.shared_rows += 1;
            for (x, y) in va.iter().zip(vb) {
                let d = match (x, y) {
                    (Some(x), Some(y)) if x == y => 0.0,
                    (Some(x), Some(y)) => (x - y).abs(),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                diff.max_deviation = diff.max_deviation.max(d);
            }
        }
        out.push(diff);
    }
    Ok(out)
}

pub const QUANTITIES: &[&str] = &["eigenphases", "transmission", "fiber_rank", "residuals"];

fn artifact_for(quantity: &str) -> Option<&'static str> {
    match quantity {
        "eigenphases" => Some("eigenphases"),
        "transmission" => Some("transmission"),
        "fiber_rank" => Some("fiber_ranks"),
        "residuals" => Some("residuals"),
        _ => None,
    }
}

/// Pivot `(lambda, label, value)` rows into one line per λ, one column per
/// label, in order of first appearance.
fn pivot(rows: impl Iterator<Item = (String, String, String)>) -> (Vec<String>, Vec<(String, Vec<String>)>) {
    let mut labels: Vec<String> = Vec::new();
    let mut lines: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (lam, label, value) in rows {
        if !labels.contains(&label) {
            labels.push(label.clone());
        }
        match lines.last_mut() {
            Some((l, m)) if *l == lam => {
                m.insert(label, value);
            }
            _ => lines.push((lam, BTreeMap::from([(label, value)]))),
        }
    }
    let body = lines
        .into_iter()
        .map(|(lam, m)| {
            let cells = labels.iter().map(|l| m.get(l).cloned().unwrap_or_else(|| "nan".into())).collect();
            (lam, cells)
        })
        .collect();
    (labels, body)
}

/// Write `<quantity>.dat` (whitespace separated, `#` header) into `dir`.
pub fn emit_plot_data(manifest: &Path, quantity: &str, dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let artifact = artifact_for(quantity).ok_or_else(|| {
        CliError::UnknownQuantity(format!("{quantity} (expected one of {})", QUANTITIES.join(", ")))
    })?;
    let m = RunManifest::load(manifest)?;
    if m.artifacts.is_empty() {
        return Err(CliError::Manifest(format!("{} lists no artifacts", manifest.display())));
    }
    let path = m
        .artifact_path(manifest, artifact)
        .ok_or_else(|| CliError::UnknownQuantity(format!("{quantity} is not part of this run")))?;
    let csv = read_csv(&path)?;
    let col = |name: &str| csv.header.iter().position(|h| h == name);
    let (labels, body): (Vec<String>, Vec<(String, Vec<String>)>) = match quantity {
        "eigenphases" => {
            let (i, p) = (col("index").unwrap(), col("phase").unwrap());
            let (l, b) = pivot(csv.rows.iter().map(|r| (r[0].clone(), r[i].clone(), r[p].clone())));
            (l.iter().map(|k| format!("phase{k}")).collect(), b)
        }
        "residuals" => {
            let (k, v) = (col("check").unwrap(), col("value").unwrap());
            pivot(csv.rows.iter().map(|r| (r[0].clone(), r[k].clone(), r[v].clone())))
        }
        "fiber_rank" => {
            let (reg, r0) = (col("regular").unwrap(), col("rank0").unwrap());
            let body = csv
                .rows
                .iter()
                .filter(|r| r[reg] == "1" && !r[r0].is_empty())
                .map(|r| (r[0].clone(), vec![r[r0].clone()]))
                .collect();
            (vec!["rank".into()], body)
        }
        _ => {
            let labels = csv.header[1..].iter().filter(|h| *h != "overlap").cloned().collect::<Vec<_>>();
            let idx: Vec<usize> = labels.iter().map(|l| col(l).unwrap()).collect();
            let body = csv
                .rows
                .iter()
                .map(|r| (r[0].clone(), idx.iter().map(|&i| r[i].clone()).collect()))
                .collect();
            (labels, body)
        }
    };
    if body.is_empty() {
        return Err(CliError::Manifest(format!("{quantity}: no data rows")));
    }
    let mut text = format!("# lambda {}\n", labels.join(" "));
    for (lam, cells) in body {
        text.push_str(&lam);
        for c in cells {
            text.push(' ');
            text.push_str(&c);
        }
        text.push('\n');
    }
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let out = dir.join(format!("{quantity}.dat"));
    fs::write(&out, text).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(out)
}

pub fn render_diffs(diffs: &[ArtifactDiff]) -> String {
    let names: BTreeSet<_> = diffs.iter().map(|d| d.artifact.len()).collect();
    let w = names.last().copied().unwrap_or(8).max(8);
    let mut out = format!("{:<w$}  {:>6}  {:>6}  {:>6}  max_deviation\n", "artifact", "shared", "only_a", "only_b");
    for d in diffs {
        out.push_str(&format!(
            "{:<w$}  {:>6}  {:>6}  {:>6}  {}\n",
            d.artifact,
            d.shared_rows,
            d.only_a,
            d.only_b,
            float(d.max_deviation)
        ));
    }
    out
}
