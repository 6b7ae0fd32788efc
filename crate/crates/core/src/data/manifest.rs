//! Sample manifests: one JSON object per line.
//!
//! ```json
//! {"sample_id":"img-001","source_path":"raw/img-001.jpg","semantic_label":3,
//!  "photographer_id":"p17","exif":{"Make":"Canon","ExposureTime":"1/250"},
//!  "pair_id":"obj-9","camera_type":"smart"}
//! ```
//!
//! Only `sample_id`, `source_path` and `semantic_label` are required.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embedding::check_unique;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraType {
    Smart,
    NonSmart,
}

impl CameraType {
    pub fn as_str(self) -> &'static str {
        match self {
            CameraType::Smart => "smart",
            CameraType::NonSmart => "non-smart",
        }
    }
}

impl std::str::FromStr for CameraType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smart" => Ok(CameraType::Smart),
            "non-smart" => Ok(CameraType::NonSmart),
            other => Err(Error::Validation(format!("unknown camera type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub source_path: String,
    pub semantic_label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photographer_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exif: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_type: Option<CameraType>,
}

impl SampleRecord {
    pub fn new(sample_id: impl Into<String>, source_path: impl Into<String>, label: u32) -> Self {
        SampleRecord {
            sample_id: sample_id.into(),
            source_path: source_path.into(),
            semantic_label: label,
            photographer_id: None,
            exif: None,
            pair_id: None,
            camera_type: None,
        }
    }

    pub fn exif_tag(&self, tag: &str) -> Option<&str> {
        self.exif.as_ref()?.get(tag).map(String::as_str)
    }
}

/// Checks id uniqueness and, for records that carry a `pair_id`, that each
/// pair has exactly two members of distinct camera types.
pub fn validate_manifest(records: &[SampleRecord]) -> Result<()> {
    let ids: Vec<String> = records.iter().map(|r| r.sample_id.clone()).collect();
    check_unique(&ids)?;
    let mut pairs: HashMap<&str, Vec<&SampleRecord>> = HashMap::new();
    for r in records {
        if let Some(p) = &r.pair_id {
            pairs.entry(p).or_default().push(r);
        }
    }
    let mut names: Vec<&&str> = pairs.keys().collect();
    names.sort();
    for name in names {
        let members = &pairs[*name];
        if members.len() != 2 {
            return Err(Error::Validation(format!(
                "pair `{name}` has {} member(s), expected 2",
                members.len()
            )));
        }
        match (members[0].camera_type, members[1].camera_type) {
            (Some(a), Some(b)) if a != b => {}
            _ => {
                return Err(Error::Validation(format!(
                    "pair `{name}` needs one smart and one non-smart capture"
                )))
            }
        }
    }
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    let ids: Vec<String> = records.iter().map(|r| r.sample_id.clone()).collect();
    check_unique(&ids)?;
    Ok(records)
}

pub fn write_manifest(records: &[SampleRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Imports a CSV manifest. Recognised columns are the record fields; any
/// column named `exif:<Tag>` becomes an Exif entry. Empty cells are absent.
pub fn read_manifest_csv(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::format(path, format!("csv: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, format!("csv: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(path_col), Some(label_col)) =
        (col("sample_id"), col("source_path"), col("semantic_label"))
    else {
        return Err(Error::format(
            path,
            "csv needs sample_id, source_path and semantic_label columns",
        ));
    };
    let photographer_col = col("photographer_id");
    let pair_col = col("pair_id");
    let camera_col = col("camera_type");
    let exif_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("exif:").map(|t| (i, t.to_owned())))
        .collect();

    let mut records = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(path, format!("csv: {e}")))?;
        let cell = |i: Option<usize>| {
            i.and_then(|i| row.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
        };
        let label = row[label_col].trim().parse::<u32>().map_err(|e| {
            Error::format(path, format!("row {}: semantic_label: {e}", row_no + 2))
        })?;
        let mut record = SampleRecord::new(row[id_col].trim(), row[path_col].trim(), label);
        record.photographer_id = cell(photographer_col);
        record.pair_id = cell(pair_col);
        record.camera_type = cell(camera_col).map(|s| s.parse()).transpose()?;
        let exif: BTreeMap<String, String> = exif_cols
            .iter()
            .filter_map(|(i, tag)| cell(Some(*i)).map(|v| (tag.clone(), v)))
            .collect();
        if !exif.is_empty() {
            record.exif = Some(exif);
        }
        records.push(record);
    }
    let ids: Vec<String> = records.iter().map(|r| r.sample_id.clone()).collect();
    check_unique(&ids)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_optional_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut a = SampleRecord::new("a", "a.jpg", 1);
        a.exif = Some(BTreeMap::from([("Make".into(), "Canon".into())]));
        a.camera_type = Some(CameraType::NonSmart);
        let b = SampleRecord::new("b", "b.jpg", 2);
        write_manifest(&[a.clone(), b.clone()], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"camera_type\":\"non-smart\""));
        assert!(!text.lines().nth(1).unwrap().contains("exif"));
        assert_eq!(read_manifest(&path).unwrap(), vec![a, b]);
    }

    #[test]
    fn csv_shim_reads_exif_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "sample_id,source_path,semantic_label,photographer_id,exif:Make,exif:FNumber\n\
             a,a.jpg,3,p1,Canon,2.8\n\
             b,b.jpg,4,,,\n",
        )
        .unwrap();
        let records = read_manifest_csv(&path).unwrap();
        assert_eq!(records[0].exif_tag("FNumber"), Some("2.8"));
        assert_eq!(records[0].photographer_id.as_deref(), Some("p1"));
        assert!(records[1].exif.is_none());
        assert!(records[1].photographer_id.is_none());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let a = SampleRecord::new("a", "a.jpg", 1);
        write_manifest(&[a.clone(), a], &path).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn pair_structure_checked() {
        let mut a = SampleRecord::new("a", "a.jpg", 0);
        a.pair_id = Some("p".into());
        a.camera_type = Some(CameraType::Smart);
        let mut b = a.clone();
        b.sample_id = "b".into();
        assert!(validate_manifest(&[a.clone(), b.clone()]).is_err());
        b.camera_type = Some(CameraType::NonSmart);
        validate_manifest(&[a.clone(), b]).unwrap();
        assert!(validate_manifest(&[a]).is_err());
    }
}
