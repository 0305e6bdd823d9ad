//! Run merging and plot emission. CSVs are merged by file name with
//! duplicate rows collapsed; config hashes must agree. Plots are simple
//! deterministic SVG polylines — the CSVs remain the contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::csvio::{parse_csv, CsvWriter};
use super::HarnessError;

pub struct ReportOutcome {
    pub merged: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<ReportOutcome, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    // Collect CSVs by file name across run dirs.
    let mut by_name: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for dir in run_dirs {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                let name = path.file_name().unwrap().to_string_lossy().to_string();
                by_name.entry(name).or_default().push(path);
            }
        }
    }
    let mut merged_files = Vec::new();
    let mut plots = Vec::new();
    for (name, paths) in by_name {
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut hashes: Vec<String> = Vec::new();
        for p in &paths {
            let text = std::fs::read_to_string(p)?;
            let (h, r) = parse_csv(&text)?;
            match &header {
                None => header = Some(h.clone()),
                Some(existing) => {
                    if *existing != h {
                        return Err(HarnessError::Schema(format!(
                            "{name}: column mismatch across runs"
                        )));
                    }
                }
            }
            if let Some(ci) = h.iter().position(|c| c == "config") {
                for row in &r {
                    if !hashes.contains(&row[ci]) {
                        hashes.push(row[ci].clone());
                    }
                }
            }
            rows.extend(r);
        }
        let header = header.ok_or_else(|| HarnessError::Schema(format!("{name}: empty")))?;
        if !header.iter().any(|c| c == "config") {
            return Err(HarnessError::Schema(format!("{name}: missing config column")));
        }
        if hashes.len() > 1 {
            return Err(HarnessError::ConflictingHashes { file: name.clone(), hashes });
        }
        // Idempotent merge: drop exact duplicates, keep first-seen order.
        let mut seen = std::collections::HashSet::new();
        let mut unique = Vec::new();
        for r in rows {
            let key = r.join("\u{1}");
            if seen.insert(key) {
                unique.push(r);
            }
        }
        let out_path = out_dir.join(&name);
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut w = CsvWriter::create(&out_path, &header_refs)?;
        for r in &unique {
            w.row(r)?;
        }
        w.finish()?;

        if let Some(plot) = plot_for(&name, &header, &unique, out_dir)? {
            plots.push(plot);
        }
        merged_files.push(out_path);
    }
    Ok(ReportOutcome { merged: merged_files, plots })
}

/// Emit a small SVG for the tables that have a natural x/y. Output bytes
/// are a pure function of the rows.
fn plot_for(
    name: &str,
    header: &[String],
    rows: &[Vec<String>],
    out_dir: &Path,
) -> Result<Option<PathBuf>, HarnessError> {
    let spec: Option<(&str, &str)> = match name {
        "sensing_roc.csv" => Some(("fa", "md")),
        "sensing_fa_md.csv" => Some(("snr_db", "md")),
        "recovery_mse.csv" => Some(("r", "mean_mse")),
        _ => None,
    };
    let Some((xcol, ycol)) = spec else { return Ok(None) };
    let xi = header.iter().position(|c| c == xcol);
    let yi = header.iter().position(|c| c == ycol);
    let (Some(xi), Some(yi)) = (xi, yi) else { return Ok(None) };
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let x: f64 = r[xi].parse().ok()?;
            let y: f64 = r[yi].parse().ok()?;
            if x.is_finite() && y.is_finite() {
                Some((x, y))
            } else {
                None
            }
        })
        .collect();
    if pts.len() < 2 {
        return Ok(None);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (w, h, pad) = (480.0, 320.0, 40.0);
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let xs = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-30) * (w - 2.0 * pad);
    let ys = |y: f64| h - pad - (y - ymin) / (ymax - ymin).max(1e-30) * (h - 2.0 * pad);
    let mut path = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        path.push_str(&format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, xs(*x), ys(*y)));
    }
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<path d=\"{path}\" fill=\"none\" stroke=\"#2a6fdb\" stroke-width=\"1.5\"/>\n",
            "<text x=\"{tx}\" y=\"{ty}\" font-size=\"12\" fill=\"#333\">{label}</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        path = path,
        tx = pad,
        ty = 16.0,
        label = format!("{xcol} vs {ycol} — {name}"),
    );
    let plot_path = out_dir.join(format!("{}.svg", name.trim_end_matches(".csv")));
    std::fs::write(&plot_path, svg)?;
    Ok(Some(plot_path))
}
