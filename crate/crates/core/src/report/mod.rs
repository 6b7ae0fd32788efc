//! Experiment configs, orchestration and structured reports.

mod config;
mod export;
mod run;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{
    AcquisitionProbeExperiment, Experiment, HistogramExperiment, KnnExperiment, MatchRateExperiment,
    ProcessingProbeExperiment, RetrievalExperiment, RunConfig,
};
pub use export::{export_plot_data, format_sig6, PlotKind};
pub use run::run_experiment;

pub const REPORT_SCHEMA: &str = "metatrace.report/1";

/// Largest tolerated gap between an aggregate and the mean of its cells.
pub const AGGREGATE_TOLERANCE: f64 = 1e-12;

/// One grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub group: String,
    pub label: String,
    #[serde(default)]
    pub params: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
}

/// Mean of every metric over the cells of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub cells: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub config_hash: String,
    /// SHA-256 of every input file, keyed by the path as configured.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub toolkit_version: String,
    pub config: RunConfig,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    /// Protocol-specific detail: trial logs, histograms, split audits,
    /// per-query results, neighbor dumps.
    #[serde(default)]
    pub extras: serde_json::Value,
    pub provenance: Provenance,
    pub wall_clock_secs: f64,
}

/// Groups in first-appearance order, each averaged metric by metric.
/// Metrics missing from some cells of a group are averaged over the cells
/// that have them.
pub fn aggregate(cells: &[Cell]) -> Vec<Aggregate> {
    let mut order: Vec<&str> = Vec::new();
    let mut sums: BTreeMap<&str, (usize, BTreeMap<&str, (f64, usize)>)> = BTreeMap::new();
    for c in cells {
        let entry = sums.entry(&c.group).or_insert_with(|| {
            order.push(&c.group);
            (0, BTreeMap::new())
        });
        entry.0 += 1;
        for (k, &v) in &c.metrics {
            let s = entry.1.entry(k).or_insert((0.0, 0));
            s.0 += v;
            s.1 += 1;
        }
    }
    order
        .into_iter()
        .map(|g| {
            let (n, metrics) = &sums[g];
            Aggregate {
                group: g.to_owned(),
                cells: *n,
                metrics: metrics
                    .iter()
                    .map(|(k, (s, c))| (k.to_string(), s / *c as f64))
                    .collect(),
            }
        })
        .collect()
}

impl EvalReport {
    /// Checks the schema tag and that aggregates equal the means of their
    /// cells.
    pub fn verify(&self) -> Result<()> {
        if self.schema != REPORT_SCHEMA {
            return Err(Error::Validation(format!("unsupported report schema `{}`", self.schema)));
        }
        let expected = aggregate(&self.cells);
        if expected.len() != self.aggregates.len() {
            return Err(Error::Validation(format!(
                "report has {} aggregates for {} cell groups",
                self.aggregates.len(),
                expected.len()
            )));
        }
        for (want, have) in expected.iter().zip(&self.aggregates) {
            if want.group != have.group || want.cells != have.cells {
                return Err(Error::Validation(format!(
                    "aggregate `{}` does not match cell group `{}`",
                    have.group, want.group
                )));
            }
            for (k, &v) in &want.metrics {
                let got = have.metrics.get(k).copied().unwrap_or(f64::NAN);
                if !((got - v).abs() <= AGGREGATE_TOLERANCE) {
                    return Err(Error::Validation(format!(
                        "aggregate {}/{k} is {got}, mean of cells is {v}",
                        have.group
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn aggregate(&self, group: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.group == group)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        report.verify()?;
        Ok(report)
    }

    /// JSON with the wall-clock field zeroed, for comparing runs.
    pub fn to_json_without_clock(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_secs = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    /// Writes `report.json` plus plot data into a fresh
    /// `<out>/<config hash>/run-NNN/` directory and returns its path.
    /// Existing runs are never touched.
    pub fn write_run(&self, out_dir: &Path) -> Result<PathBuf> {
        let parent = out_dir.join(&self.provenance.config_hash[..16]);
        std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let dir = (1..)
            .map(|i| parent.join(format!("run-{i:03}")))
            .find_map(|d| match std::fs::create_dir(&d) {
                Ok(()) => Some(Ok(d)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => None,
                Err(e) => Some(Err(Error::io(&d, e))),
            })
            .expect("unbounded search")?;
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        for kind in PlotKind::ALL {
            match export_plot_data(self, kind, &dir) {
                Ok(_) | Err(Error::Validation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(dir)
    }
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(group: &str, acc: f64) -> Cell {
        Cell {
            group: group.into(),
            label: String::new(),
            params: serde_json::Value::Null,
            metrics: [("accuracy@10".to_owned(), acc)].into(),
        }
    }

    #[test]
    fn aggregates_are_cell_means() {
        let cells = vec![cell("a", 0.1), cell("b", 0.5), cell("a", 0.2), cell("a", 0.6)];
        let agg = aggregate(&cells);
        assert_eq!(agg[0].group, "a");
        assert_eq!(agg[0].cells, 3);
        assert!((agg[0].metrics["accuracy@10"] - 0.3).abs() < 1e-15);
        assert_eq!(agg[1].metrics["accuracy@10"], 0.5);
    }
}
