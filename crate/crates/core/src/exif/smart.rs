use crate::data::{CameraType, SampleRecord};

/// Dedicated-camera manufacturers.
pub const NON_SMART_MAKERS: [&str; 5] = ["canon", "nikon", "fujifilm", "panasonic", "olympus"];
/// Smartphone manufacturers.
pub const SMART_MAKERS: [&str; 5] = ["apple", "google", "huawei", "xiaomi", "motorola"];

/// Classifies a record as smartphone or dedicated camera from its `Make`
/// tag. The brand is the first word of the tag, case-insensitively, so
/// `"NIKON CORPORATION"` and `"OLYMPUS IMAGING CORP."` are recognised.
pub fn derive_smart_vs_nonsmart(record: &SampleRecord) -> Option<CameraType> {
    let make = record.exif_tag("Make")?;
    let brand: String = make
        .split_whitespace()
        .next()?
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_ascii_lowercase();
    if NON_SMART_MAKERS.contains(&brand.as_str()) {
        Some(CameraType::NonSmart)
    } else if SMART_MAKERS.contains(&brand.as_str()) {
        Some(CameraType::Smart)
    } else {
        None
    }
}
