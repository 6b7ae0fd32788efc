//! Binary embedding files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 8    | magic `MTEMBED\0`                        |
//! | 8      | 4    | format version (`u32`, currently 1)      |
//! | 12     | 4    | header length `H` in bytes (`u32`)       |
//! | 16     | H    | UTF-8 JSON header                        |
//! | 16+H   | …    | `f32` values, row-major                  |
//!
//! The header carries `kind` (`"set"` or `"variants"`), `encoder_tag`, `n`,
//! `d`, `normalized` and `ids`; variant tensors add `family` and `classes`,
//! and their body is ordered `[image][class][dim]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingSet, Family, LabelSpace, VariantEmbeddingTensor};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"MTEMBED\0";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: Kind,
    encoder_tag: String,
    n: u64,
    d: u64,
    normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Set,
    Variants,
}

/// Either kind of embedding file.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedFile {
    Set(EmbeddingSet),
    Variants(VariantEmbeddingTensor),
}

fn encode(header: &Header, body: &[f32]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let header_len = u32::try_from(json.len())
        .map_err(|_| Error::Validation("embedding header exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + body.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for v in body {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    let written = fs::metadata(&tmp).map_err(|e| Error::io(&tmp, e))?.len();
    if written != bytes.len() as u64 {
        let _ = fs::remove_file(&tmp);
        return Err(Error::format(
            path,
            format!("wrote {written} bytes, expected {}", bytes.len()),
        ));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    set.validate()?;
    let header = Header {
        kind: Kind::Set,
        encoder_tag: set.encoder_tag().to_owned(),
        n: set.len() as u64,
        d: set.dim() as u64,
        normalized: set.is_normalized(),
        family: None,
        classes: None,
        ids: set.ids().to_vec(),
    };
    write_file(path.as_ref(), &encode(&header, set.as_slice())?)
}

pub fn save_variants(tensor: &VariantEmbeddingTensor, path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        kind: Kind::Variants,
        encoder_tag: tensor.encoder_tag().to_owned(),
        n: tensor.len() as u64,
        d: tensor.dim() as u64,
        normalized: tensor.is_normalized(),
        family: Some(tensor.space().family()),
        classes: Some(tensor.space().class_names().to_vec()),
        ids: tensor.ids().to_vec(),
    };
    write_file(path.as_ref(), &encode(&header, tensor.as_slice())?)
}

fn decode(path: &Path, bytes: &[u8]) -> Result<LoadedFile> {
    if bytes.len() < PREFIX_LEN {
        return Err(Error::format(
            path,
            format!("{} bytes is too short for a header", bytes.len()),
        ));
    }
    if bytes[..8] != MAGIC {
        return Err(Error::format(path, "unknown magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported format version {version}"),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = PREFIX_LEN + header_len;
    if bytes.len() < header_end {
        return Err(Error::Truncated {
            path: path.into(),
            expected: header_end as u64,
            actual: bytes.len() as u64,
        });
    }
    let header: Header = serde_json::from_slice(&bytes[PREFIX_LEN..header_end])
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if header.ids.len() as u64 != header.n {
        return Err(Error::format(
            path,
            format!("header lists {} ids for n = {}", header.ids.len(), header.n),
        ));
    }
    let classes = match header.kind {
        Kind::Set => 1,
        Kind::Variants => header.classes.as_ref().map_or(0, Vec::len) as u64,
    };
    let values = header
        .n
        .checked_mul(header.d)
        .and_then(|v| v.checked_mul(classes))
        .ok_or_else(|| Error::format(path, "matrix size overflows"))?;
    let expected = header_end as u64 + values * 4;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after the matrix", actual - expected),
        ));
    }
    let body: Vec<f32> = bytes[header_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let d = header.d as usize;
    match header.kind {
        Kind::Set => {
            if header.family.is_some() || header.classes.is_some() {
                return Err(Error::format(path, "plain set header carries class fields"));
            }
            let set = EmbeddingSet::new(header.encoder_tag, d, header.ids, body, header.normalized)?;
            Ok(LoadedFile::Set(set))
        }
        Kind::Variants => {
            let (Some(family), Some(classes)) = (header.family, header.classes) else {
                return Err(Error::format(path, "variant header lacks family/classes"));
            };
            let space = LabelSpace::new(family, classes)?;
            let t = VariantEmbeddingTensor::new(
                header.encoder_tag,
                d,
                header.ids,
                space,
                body,
                header.normalized,
            )?;
            Ok(LoadedFile::Variants(t))
        }
    }
}

/// Loads either kind of embedding file.
pub fn load_any(path: impl AsRef<Path>) -> Result<LoadedFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    match load_any(path.as_ref())? {
        LoadedFile::Set(s) => Ok(s),
        LoadedFile::Variants(_) => Err(Error::format(
            path.as_ref(),
            "expected an embedding set, found a variant tensor",
        )),
    }
}

pub fn load_variants(path: impl AsRef<Path>) -> Result<VariantEmbeddingTensor> {
    match load_any(path.as_ref())? {
        LoadedFile::Variants(t) => Ok(t),
        LoadedFile::Set(_) => Err(Error::format(
            path.as_ref(),
            "expected a variant tensor, found an embedding set",
        )),
    }
}
