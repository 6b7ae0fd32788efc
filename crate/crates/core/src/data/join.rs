use super::{EmbeddingSet, SampleRecord};
use crate::error::{Error, Result};

/// Manifest records paired with their embedding rows, in manifest order.
#[derive(Debug, Clone)]
pub struct AlignedDataset {
    pub records: Vec<SampleRecord>,
    /// Row index into the embedding set for each record.
    pub rows: Vec<usize>,
    /// Manifest ids without an embedding (non-strict mode only).
    pub missing: Vec<String>,
}

impl AlignedDataset {
    pub fn warnings(&self) -> usize {
        self.missing.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Pairs every manifest record with its embedding row. In strict mode a
/// missing id is an error; otherwise the record is dropped and counted.
pub fn join(manifest: &[SampleRecord], set: &EmbeddingSet, strict: bool) -> Result<AlignedDataset> {
    let index = set.index();
    let mut seen = std::collections::HashSet::new();
    let mut out = AlignedDataset {
        records: Vec::with_capacity(manifest.len()),
        rows: Vec::with_capacity(manifest.len()),
        missing: Vec::new(),
    };
    for record in manifest {
        if !seen.insert(record.sample_id.as_str()) {
            return Err(Error::DuplicateId(record.sample_id.clone()));
        }
        match index.get(record.sample_id.as_str()) {
            Some(&row) => {
                out.records.push(record.clone());
                out.rows.push(row);
            }
            None if strict => return Err(Error::MissingId(record.sample_id.clone())),
            None => out.missing.push(record.sample_id.clone()),
        }
    }
    if !out.missing.is_empty() {
        log::warn!(
            "{} manifest record(s) have no embedding and were dropped",
            out.missing.len()
        );
    }
    Ok(out)
}
