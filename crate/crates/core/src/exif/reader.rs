use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use exif::{In, Reader, Value};

use crate::data::SampleRecord;
use crate::error::{Error, Result};

fn value_string(value: &Value) -> Option<String> {
    Some(match value {
        Value::Ascii(parts) => {
            let s: Vec<String> = parts
                .iter()
                .map(|p| String::from_utf8_lossy(p).trim_end_matches('\0').trim().to_owned())
                .collect();
            s.join(" ")
        }
        Value::Rational(v) => {
            let r = v.first()?;
            format!("{}/{}", r.num, r.denom)
        }
        Value::SRational(v) => {
            let r = v.first()?;
            format!("{}/{}", r.num, r.denom)
        }
        Value::Short(v) => v.first()?.to_string(),
        Value::Long(v) => v.first()?.to_string(),
        Value::Byte(v) => v.first()?.to_string(),
        Value::Float(v) => v.first()?.to_string(),
        Value::Double(v) => v.first()?.to_string(),
        _ => return None,
    })
}

/// Reads the primary-image Exif tags of a JPEG file as raw strings keyed by
/// tag name. Rationals are rendered as `num/denom`. A file without Exif
/// yields an empty map.
pub fn read_jpeg_tags(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let exif = match Reader::new().read_from_container(&mut BufReader::new(file)) {
        Ok(exif) => exif,
        Err(exif::Error::NotFound(_)) => return Ok(BTreeMap::new()),
        Err(exif::Error::Io(e)) => return Err(Error::io(path, e)),
        Err(e) => return Err(Error::format(path, format!("exif: {e}"))),
    };
    let mut tags = BTreeMap::new();
    for field in exif.fields().filter(|f| f.ifd_num == In::PRIMARY) {
        if let Some(v) = value_string(&field.value) {
            tags.insert(field.tag.to_string(), v);
        }
    }
    Ok(tags)
}

/// Fills `exif` for records that lack it by reading their JPEG sources.
/// Unreadable files are logged and left without Exif.
pub fn fill_missing_exif(records: &mut [SampleRecord], base_dir: Option<&Path>) -> usize {
    let mut filled = 0;
    for r in records.iter_mut().filter(|r| r.exif.is_none()) {
        let path = match base_dir {
            Some(dir) => dir.join(&r.source_path),
            None => r.source_path.clone().into(),
        };
        match read_jpeg_tags(&path) {
            Ok(tags) if !tags.is_empty() => {
                r.exif = Some(tags);
                filled += 1;
            }
            Ok(_) => {}
            Err(e) => log::warn!("{}: {e}", r.sample_id),
        }
    }
    filled
}
