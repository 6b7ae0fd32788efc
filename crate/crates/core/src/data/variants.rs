use super::embedding::{check_unique, norm, NORMALIZED_TOLERANCE};
use super::{EmbeddingSet, LabelSpace};
use crate::error::{ensure, Error, Result};

/// `n × M × d` embeddings: every image under every class of one processing
/// family. Slice `[:, j, :]` is the embedding set for class `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantEmbeddingTensor {
    encoder_tag: String,
    dim: usize,
    ids: Vec<String>,
    space: LabelSpace,
    data: Vec<f32>,
    normalized: bool,
}

impl VariantEmbeddingTensor {
    pub fn new(
        encoder_tag: impl Into<String>,
        dim: usize,
        ids: Vec<String>,
        space: LabelSpace,
        data: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        let t = VariantEmbeddingTensor {
            encoder_tag: encoder_tag.into(),
            dim,
            ids,
            space,
            data,
            normalized,
        };
        t.validate()?;
        Ok(t)
    }

    /// Stacks one embedding set per class; all sets must share ids, dim and
    /// encoder.
    pub fn from_columns(space: LabelSpace, columns: &[EmbeddingSet]) -> Result<Self> {
        ensure!(
            columns.len() == space.len(),
            "expected {} class columns, got {}",
            space.len(),
            columns.len()
        );
        let first = &columns[0];
        for c in &columns[1..] {
            ensure!(c.ids() == first.ids(), "class columns disagree on ids");
            ensure!(
                c.encoder_tag() == first.encoder_tag(),
                "class columns come from different encoders"
            );
            if c.dim() != first.dim() {
                return Err(Error::DimMismatch {
                    expected: first.dim(),
                    actual: c.dim(),
                });
            }
        }
        let (n, d, m) = (first.len(), first.dim(), columns.len());
        let mut data = Vec::with_capacity(n * m * d);
        for i in 0..n {
            for c in columns {
                data.extend_from_slice(c.row(i));
            }
        }
        let normalized = columns.iter().all(EmbeddingSet::is_normalized);
        VariantEmbeddingTensor::new(
            first.encoder_tag(),
            d,
            first.ids().to_vec(),
            space,
            data,
            normalized,
        )
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.dim > 0, "embedding dimension must be positive");
        let m = self.space.len();
        ensure!(
            self.data.len() == self.ids.len() * m * self.dim,
            "tensor holds {} values, expected {} × {} × {}",
            self.data.len(),
            self.ids.len(),
            m,
            self.dim
        );
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite value in variant tensor".into()));
        }
        check_unique(&self.ids)?;
        if self.normalized {
            for row in self.data.chunks_exact(self.dim) {
                ensure!(
                    (norm(row) - 1.0).abs() <= NORMALIZED_TOLERANCE,
                    "tensor flagged normalized has a row of norm {}",
                    norm(row)
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

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn classes(&self) -> usize {
        self.space.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Embedding of image `i` processed with class `class`.
    pub fn row(&self, i: usize, class: usize) -> &[f32] {
        let start = (i * self.space.len() + class) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// The embedding set of every image under class `class`.
    pub fn column(&self, class: usize) -> Result<EmbeddingSet> {
        ensure!(
            class < self.classes(),
            "class {class} out of range for {} classes",
            self.classes()
        );
        let mut data = Vec::with_capacity(self.len() * self.dim);
        for i in 0..self.len() {
            data.extend_from_slice(self.row(i, class));
        }
        EmbeddingSet::new(
            self.encoder_tag.clone(),
            self.dim,
            self.ids.clone(),
            data,
            self.normalized,
        )
    }

    /// One row per image, taking image `i` from class `classes[i]`.
    pub fn gather(&self, classes: &[usize]) -> Result<EmbeddingSet> {
        ensure!(
            classes.len() == self.len(),
            "need one class per image ({}), got {}",
            self.len(),
            classes.len()
        );
        let mut data = Vec::with_capacity(self.len() * self.dim);
        for (i, &c) in classes.iter().enumerate() {
            ensure!(c < self.classes(), "class {c} out of range");
            data.extend_from_slice(self.row(i, c));
        }
        EmbeddingSet::new(
            self.encoder_tag.clone(),
            self.dim,
            self.ids.clone(),
            data,
            self.normalized,
        )
    }
}
