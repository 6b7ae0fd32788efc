use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::exif::BinningConfig;

/// One of the twelve metadata parameters under analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Jpeg,
    Sharpening,
    Resizing,
    Interpolation,
    Make,
    ModelAll,
    ModelSmart,
    ModelSmartVsNon,
    Exposure,
    Aperture,
    Iso,
    FocalLength,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::Jpeg,
        Family::Sharpening,
        Family::Resizing,
        Family::Interpolation,
        Family::Make,
        Family::ModelAll,
        Family::ModelSmart,
        Family::ModelSmartVsNon,
        Family::Exposure,
        Family::Aperture,
        Family::Iso,
        Family::FocalLength,
    ];

    /// Number of classes M for the family.
    pub fn class_count(self) -> usize {
        match self {
            Family::Jpeg => 6,
            Family::Sharpening => 3,
            Family::Resizing => 3,
            Family::Interpolation => 4,
            Family::Make => 9,
            Family::ModelAll => 88,
            Family::ModelSmart => 12,
            Family::ModelSmartVsNon => 2,
            Family::Exposure => 16,
            Family::Aperture => 17,
            Family::Iso => 16,
            Family::FocalLength => 13,
        }
    }

    pub fn is_processing(self) -> bool {
        matches!(
            self,
            Family::Jpeg | Family::Sharpening | Family::Resizing | Family::Interpolation
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Jpeg => "jpeg",
            Family::Sharpening => "sharpening",
            Family::Resizing => "resizing",
            Family::Interpolation => "interpolation",
            Family::Make => "make",
            Family::ModelAll => "model-all",
            Family::ModelSmart => "model-smart",
            Family::ModelSmartVsNon => "model-smart-vs-non",
            Family::Exposure => "exposure",
            Family::Aperture => "aperture",
            Family::Iso => "iso",
            Family::FocalLength => "focal-length",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown parameter family `{s}`")))
    }
}

/// The M classes of one metadata family, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct LabelSpace {
    family: Family,
    class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    family: Family,
    classes: Vec<String>,
}

impl TryFrom<RawSpace> for LabelSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        LabelSpace::new(raw.family, raw.classes)
    }
}

impl From<LabelSpace> for RawSpace {
    fn from(space: LabelSpace) -> Self {
        RawSpace {
            family: space.family,
            classes: space.class_names,
        }
    }
}

impl LabelSpace {
    pub fn new(family: Family, class_names: Vec<String>) -> Result<Self> {
        ensure!(
            class_names.len() == family.class_count(),
            "{family} has {} classes, got {}",
            family.class_count(),
            class_names.len()
        );
        let mut seen = std::collections::HashSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate class name `{name}` in {family}"
                )));
            }
        }
        Ok(LabelSpace {
            family,
            class_names,
        })
    }

    /// The shipped class list for `family`.
    pub fn canonical(family: Family) -> Self {
        let names: Vec<String> = match family {
            Family::Jpeg | Family::Sharpening | Family::Resizing | Family::Interpolation => {
                crate::pipeline::ProcessingClass::grid(family)
                    .iter()
                    .map(|c| c.name())
                    .collect()
            }
            Family::ModelSmartVsNon => vec!["non-smart".into(), "smart".into()],
            _ => BinningConfig::builtin(family)
                .expect("every acquisition family ships a binning config")
                .class_names(),
        };
        LabelSpace::new(family, names).expect("canonical label spaces are valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn name(&self, class: usize) -> Option<&str> {
        self.class_names.get(class).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }
}
