use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::cell_name;
use super::{EvalReport, Experiment};
use crate::error::{Error, Result};
use crate::knn::{SimilarityHistogram, K_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `accuracy_vs_k.tsv` and `semantic_match_vs_k.tsv`, one column per
    /// setup.
    AccuracyVsK,
    /// `scatter.tsv`: recall with same-type against different-type
    /// negatives, one row per encoder.
    Scatter,
    /// One `hist_<cell>.tsv` per conditional cell.
    Histograms,
    /// `cells.tsv`: every cell and metric, long format.
    Cells,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::AccuracyVsK, PlotKind::Scatter, PlotKind::Histograms, PlotKind::Cells];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "accuracy-vs-k" => PlotKind::AccuracyVsK,
            "scatter" => PlotKind::Scatter,
            "histograms" => PlotKind::Histograms,
            "cells" => PlotKind::Cells,
            _ => return Err(Error::Validation(format!("unknown plot kind `{s}`"))),
        })
    }
}

/// Formats with six significant digits, like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NA".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade, e.g. 999999.7
    let exp = if format!("{:.5e}", x.abs()).ends_with(&format!("e{}", exp + 1)) { exp + 1 } else { exp };
    if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mant, e) = s.split_once('e').unwrap();
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().unwrap();
        return format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write(dir: &Path, name: &str, body: String) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn absent(what: &str) -> Error {
    Error::Validation(format!("report has no {what}"))
}

/// Writes TSV plot data of the given kind into `dir`.
pub fn export_plot_data(report: &EvalReport, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match kind {
        PlotKind::AccuracyVsK => {
            if !matches!(report.config.experiment, Experiment::Knn(_)) {
                return Err(absent("kNN accuracy curves"));
            }
            let mut out = Vec::new();
            for (metric, file) in [("accuracy", "accuracy_vs_k.tsv"), ("semantic_match", "semantic_match_vs_k.tsv")] {
                let mut s = String::from("k");
                for a in &report.aggregates {
                    write!(s, "\t{}", a.group).unwrap();
                }
                s.push('\n');
                for k in K_GRID {
                    write!(s, "{k}").unwrap();
                    for a in &report.aggregates {
                        let v = a.metrics.get(&format!("{metric}@{k}")).copied();
                        write!(s, "\t{}", v.map(format_sig6).unwrap_or_else(|| "NA".into())).unwrap();
                    }
                    s.push('\n');
                }
                out.push(write(dir, file, s)?);
            }
            Ok(out)
        }
        PlotKind::Scatter => {
            let scatter = report
                .extras
                .get("scatter")
                .and_then(|v| v.as_array())
                .ok_or_else(|| absent("retrieval scatter data"))?;
            let k = report.extras.get("k").and_then(|v| v.as_u64()).unwrap_or(1);
            let mut s = format!("encoder\trecall@{k}_same\trecall@{k}_different\n");
            for p in scatter {
                let get = |m: &str| p["recall"].get(m).and_then(|v| v.as_f64()).map(format_sig6).unwrap_or_else(|| "NA".into());
                writeln!(s, "{}\t{}\t{}", p["encoder"].as_str().unwrap_or(""), get("same"), get("different")).unwrap();
            }
            let mut out = vec![write(dir, "scatter.tsv", s)?];
            if let Some(per_query) = report.extras.get("per_query").and_then(|v| v.as_array()) {
                let mut s = String::from("encoder\tmode\tquery_id\tquery_type\tpositive_rank\n");
                for block in per_query {
                    for q in block["queries"].as_array().into_iter().flatten() {
                        writeln!(
                            s,
                            "{}\t{}\t{}\t{}\t{}",
                            block["encoder"].as_str().unwrap_or(""),
                            block["mode"].as_str().unwrap_or(""),
                            q["query_id"].as_str().unwrap_or(""),
                            q["query_type"].as_str().unwrap_or(""),
                            q["positive_rank"]
                        )
                        .unwrap();
                    }
                }
                out.push(write(dir, "retrieval_queries.tsv", s)?);
            }
            Ok(out)
        }
        PlotKind::Histograms => {
            let hist: SimilarityHistogram = report
                .extras
                .get("histogram")
                .map(|v| serde_json::from_value(v.clone()))
                .transpose()?
                .ok_or_else(|| absent("similarity histogram"))?;
            let mut out = Vec::new();
            for cell in &hist.cells {
                let mut s = String::from("bin_low\tbin_high\tcount\tdensity\n");
                for (i, (&n, &d)) in cell.counts.iter().zip(&cell.density).enumerate() {
                    writeln!(
                        s,
                        "{}\t{}\t{n}\t{}",
                        format_sig6(hist.bin_edges[i]),
                        format_sig6(hist.bin_edges[i + 1]),
                        format_sig6(d)
                    )
                    .unwrap();
                }
                let name = format!("hist_{}.tsv", cell_name(cell.same_semantic, cell.same_meta));
                out.push(write(dir, &name, s)?);
            }
            Ok(out)
        }
        PlotKind::Cells => {
            if report.cells.is_empty() {
                return Err(absent("cells"));
            }
            let mut s = String::from("group\tlabel\tmetric\tvalue\n");
            for c in &report.cells {
                for (m, v) in &c.metrics {
                    writeln!(s, "{}\t{}\t{m}\t{}", c.group, c.label, format_sig6(*v)).unwrap();
                }
            }
            Ok(vec![write(dir, "cells.tsv", s)?])
        }
    }
}
