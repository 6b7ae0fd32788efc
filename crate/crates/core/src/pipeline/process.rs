//! Batch processing of a manifest into per-class variant files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_center_mask, sample_jitters, MaskSpec, Processed, ProcessingClass, RgbImage};
use crate::data::{Family, SampleRecord};
use crate::error::{ensure, Error, Result};

/// One written variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_index: Option<usize>,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ratio: Option<f64>,
}

pub struct ProcessRequest<'a> {
    pub records: &'a [SampleRecord],
    /// Processing family to expand; `None` writes one masked copy per image.
    pub family: Option<Family>,
    pub out_dir: &'a Path,
    pub seed: u64,
    /// Applied before the family transform.
    pub mask: Option<MaskSpec>,
    /// Base for relative `source_path`s.
    pub base_dir: Option<&'a Path>,
}

fn check_id(id: &str) -> Result<()> {
    ensure!(
        !id.is_empty() && !id.contains(['/', '\\']) && !id.starts_with('.'),
        "sample id `{id}` cannot be used in a file name"
    );
    Ok(())
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .map_err(|e| Error::Image(format!("cannot read {}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

fn mask_name(spec: MaskSpec) -> String {
    format!("mask-{}", (spec.ratio() * 100.0).round() as u32)
}

/// Writes `<sample_id>__<family>-<class>.{jpg|png}` for every record and
/// class, and returns the ledger in manifest × class order.
pub fn process_manifest(req: &ProcessRequest<'_>) -> Result<Vec<LedgerEntry>> {
    let classes = match req.family {
        Some(f) => {
            ensure!(f.is_processing(), "`{f}` is not a processing family");
            ProcessingClass::grid(f)
        }
        None => {
            ensure!(req.mask.is_some(), "nothing to do: give a family or a mask");
            Vec::new()
        }
    };
    for r in req.records {
        check_id(&r.sample_id)?;
    }
    fs::create_dir_all(req.out_dir).map_err(|e| Error::io(req.out_dir, e))?;
    let jitters = if classes.iter().any(ProcessingClass::needs_jitter) {
        let ids: Vec<&str> = req.records.iter().map(|r| r.sample_id.as_str()).collect();
        Some(sample_jitters(&ids, req.seed))
    } else {
        None
    };

    let per_record: Vec<Result<Vec<LedgerEntry>>> = req
        .records
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            let src: PathBuf = match req.base_dir {
                Some(base) => base.join(&record.source_path),
                None => PathBuf::from(&record.source_path),
            };
            let mut img = load_rgb(&src)?;
            if let Some(spec) = req.mask {
                img = apply_center_mask(&img, spec);
            }
            let mask_ratio = req.mask.map(MaskSpec::ratio);
            if classes.is_empty() {
                let spec = req.mask.expect("checked above");
                let name = format!("{}__{}.png", record.sample_id, mask_name(spec));
                let path = req.out_dir.join(&name);
                write_bytes(&path, &Processed::Raster(img).to_bytes()?)?;
                return Ok(vec![LedgerEntry {
                    sample_id: record.sample_id.clone(),
                    family: None,
                    class: mask_name(spec),
                    class_index: None,
                    path: path.to_string_lossy().into_owned(),
                    jitter_r: None,
                    mask_ratio,
                }]);
            }
            let jitter = jitters.as_ref().map(|j| &j[i]);
            classes
                .iter()
                .enumerate()
                .map(|(ci, class)| {
                    let out = class.apply(&img, jitter)?;
                    let name = format!(
                        "{}__{}-{}.{}",
                        record.sample_id,
                        class.family(),
                        class.name(),
                        out.extension()
                    );
                    let path = req.out_dir.join(name);
                    write_bytes(&path, &out.to_bytes()?)?;
                    Ok(LedgerEntry {
                        sample_id: record.sample_id.clone(),
                        family: Some(class.family()),
                        class: class.name(),
                        class_index: Some(ci),
                        path: path.to_string_lossy().into_owned(),
                        jitter_r: if class.needs_jitter() {
                            jitter.map(|j| j.percent())
                        } else {
                            None
                        },
                        mask_ratio,
                    })
                })
                .collect()
        })
        .collect();

    let mut ledger = Vec::new();
    for entries in per_record {
        ledger.extend(entries?);
    }
    Ok(ledger)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_ledger(entries: &[LedgerEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerEntry>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
