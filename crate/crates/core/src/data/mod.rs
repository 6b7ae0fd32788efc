//! Embedding and manifest data model, plus the binary persistence layer.

mod embedding;
mod format;
mod join;
mod label;
mod manifest;
mod variants;

pub use embedding::{l2_normalize, EmbeddingSet};
pub use format::{
    load_any, load_embeddings, load_variants, save_embeddings, save_variants, LoadedFile,
    FORMAT_VERSION, MAGIC,
};
pub use join::{join, AlignedDataset};
pub use label::{Family, LabelSpace};
pub use manifest::{
    read_manifest, read_manifest_csv, validate_manifest, write_manifest, CameraType, SampleRecord,
};
pub use variants::VariantEmbeddingTensor;
