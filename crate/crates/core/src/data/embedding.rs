use std::collections::HashMap;

use crate::error::{ensure, Error, Result};

/// Row tolerance on the unit norm when a set claims to be normalized.
pub(crate) const NORMALIZED_TOLERANCE: f64 = 1e-4;

/// `n × d` embeddings produced by one encoder, with one id per row.
///
/// Sets are validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    encoder_tag: String,
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(
        encoder_tag: impl Into<String>,
        dim: usize,
        ids: Vec<String>,
        data: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        let set = EmbeddingSet {
            encoder_tag: encoder_tag.into(),
            dim,
            ids,
            data,
            normalized,
        };
        set.validate()?;
        Ok(set)
    }

    /// Builds a set from row vectors; all rows must share one length.
    pub fn from_rows(
        encoder_tag: impl Into<String>,
        ids: Vec<String>,
        rows: &[Vec<f32>],
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        EmbeddingSet::new(encoder_tag, dim, ids, data, false)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        ensure!(self.dim > 0, "embedding dimension must be positive");
        ensure!(
            self.data.len() == self.ids.len() * self.dim,
            "matrix holds {} values, expected {} rows × {} dims",
            self.data.len(),
            self.ids.len(),
            self.dim
        );
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} in row `{}`",
                self.data[pos],
                self.ids[pos / self.dim]
            )));
        }
        check_unique(&self.ids)?;
        if self.normalized {
            for (i, row) in self.rows().enumerate() {
                let norm = norm(row);
                ensure!(
                    (norm - 1.0).abs() <= NORMALIZED_TOLERANCE,
                    "row `{}` has norm {norm}, but the set is flagged normalized",
                    self.ids[i]
                );
            }
        }
        Ok(())
    }

    pub fn encoder_tag(&self) -> &str {
        &self.encoder_tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Row-major matrix values.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Map from id to row index.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Copies the given rows, in order, into a new set.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            ensure!(r < self.len(), "row {r} out of range for {} rows", self.len());
            ids.push(self.ids[r].clone());
            data.extend_from_slice(self.row(r));
        }
        EmbeddingSet::new(self.encoder_tag.clone(), self.dim, ids, data, self.normalized)
    }
}

pub(crate) fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

pub(crate) fn norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// Scales every row to unit L2 norm and sets the normalized flag.
pub fn l2_normalize(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut data = Vec::with_capacity(set.data.len());
    for (i, row) in set.rows().enumerate() {
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::Validation(format!(
                "row `{}` has zero norm and cannot be normalized",
                set.ids[i]
            )));
        }
        data.extend(row.iter().map(|&v| (f64::from(v) / n) as f32));
    }
    EmbeddingSet::new(set.encoder_tag.clone(), set.dim, set.ids.clone(), data, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn three_four_five() {
        let set = EmbeddingSet::new("t", 2, ids(1), vec![3.0, 4.0], false).unwrap();
        let unit = l2_normalize(&set).unwrap();
        assert_eq!(unit.row(0), &[0.6, 0.8]);
        assert!(unit.is_normalized());
    }

    #[test]
    fn zero_row_is_rejected() {
        let set = EmbeddingSet::new("t", 2, ids(2), vec![1.0, 0.0, 0.0, 0.0], false).unwrap();
        assert!(matches!(l2_normalize(&set), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_and_duplicates_are_rejected() {
        let err = EmbeddingSet::new("t", 2, ids(1), vec![f32::NAN, 0.0], false).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let dup = vec!["a".to_string(), "a".to_string()];
        let err = EmbeddingSet::new("t", 1, dup, vec![1.0, 2.0], false).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn normalized_flag_is_checked() {
        assert!(EmbeddingSet::new("t", 2, ids(1), vec![3.0, 4.0], true).is_err());
    }

    #[test]
    fn row_count_must_match_ids() {
        assert!(EmbeddingSet::new("t", 2, ids(2), vec![1.0, 2.0], false).is_err());
    }
}
