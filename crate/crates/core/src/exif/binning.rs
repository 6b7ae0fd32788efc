use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Family, SampleRecord};
use crate::error::{ensure, Error, Result};

/// Relative tolerance for matching a numeric raw value to a canonical one.
pub const NUMERIC_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    /// Any of the canonical strings.
    Exact { values: Vec<String> },
    /// Numeric interval `[min, max)`, or `[min, max]` when `max_inclusive`.
    Interval {
        min: f64,
        max: f64,
        #[serde(default)]
        max_inclusive: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub name: String,
    #[serde(flatten)]
    pub matcher: Matcher,
}

/// Maps raw Exif values of one acquisition family onto its classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningConfig {
    pub version: String,
    pub family: Family,
    /// Exif tags to read, first present wins.
    pub tags: Vec<String>,
    /// Parse raw values as numbers (rationals allowed).
    #[serde(default)]
    pub numeric: bool,
    pub bins: Vec<Bin>,
}

/// Outcome of binning one record.
#[derive(Debug, Clone, PartialEq)]
pub enum Binned {
    Class(usize),
    /// No Exif map, or none of the configured tags present.
    Missing,
    /// Value parsed but falls outside every bin.
    Unbinned,
    /// Value could not be parsed; treated as unbinned.
    Malformed(String),
}

impl Binned {
    pub fn class(&self) -> Option<usize> {
        match self {
            Binned::Class(c) => Some(*c),
            _ => None,
        }
    }
}

/// Parses `"1/250"`, `"0.004"`, `"f/2.8"`, `"50 mm"`, `"100, 100"` and the
/// like into a number.
pub fn parse_numeric(raw: &str) -> Option<f64> {
    let mut s = raw.trim().trim_matches('\0').trim();
    s = s.split(',').next()?.trim();
    for prefix in ["f/", "F/", "f", "F"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            if rest.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
                s = rest;
                break;
            }
        }
    }
    for suffix in ["mm", "sec", "s"] {
        if let Some(rest) = s.strip_suffix(suffix) {
            s = rest.trim_end();
            break;
        }
    }
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            n / d
        }
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= NUMERIC_TOLERANCE * a.abs().max(b.abs())
}

fn clean(raw: &str) -> &str {
    raw.trim().trim_matches('\0').trim()
}

impl Matcher {
    fn matches_str(&self, raw: &str) -> bool {
        match self {
            Matcher::Exact { values } => values.iter().any(|v| clean(v) == raw),
            Matcher::Interval { .. } => false,
        }
    }

    fn matches_num(&self, x: f64) -> bool {
        match self {
            Matcher::Exact { values } => values
                .iter()
                .filter_map(|v| parse_numeric(v))
                .any(|v| close(v, x)),
            Matcher::Interval {
                min,
                max,
                max_inclusive,
            } => x >= *min && (x < *max || (*max_inclusive && x == *max)),
        }
    }
}

impl BinningConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: BinningConfig = toml::from_str(text)
            .map_err(|e| Error::Validation(format!("binning config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// The shipped configuration for `family`, if it has one.
    pub fn builtin(family: Family) -> Option<Self> {
        let text = match family {
            Family::Make => include_str!("../../configs/binning/make.toml"),
            Family::ModelAll => include_str!("../../configs/binning/model-all.toml"),
            Family::ModelSmart => include_str!("../../configs/binning/model-smart.toml"),
            Family::Exposure => include_str!("../../configs/binning/exposure.toml"),
            Family::Aperture => include_str!("../../configs/binning/aperture.toml"),
            Family::Iso => include_str!("../../configs/binning/iso.toml"),
            Family::FocalLength => include_str!("../../configs/binning/focal-length.toml"),
            _ => return None,
        };
        Some(Self::from_toml_str(text).expect("shipped binning configs are valid"))
    }

    pub fn class_names(&self) -> Vec<String> {
        self.bins.iter().map(|b| b.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.family;
        ensure!(!f.is_processing(), "`{f}` is a processing family, not an acquisition one");
        ensure!(!self.tags.is_empty(), "binning config for `{f}` names no Exif tags");
        ensure!(
            self.bins.len() == f.class_count(),
            "`{f}` needs {} bins, config has {}",
            f.class_count(),
            self.bins.len()
        );
        let mut names = HashSet::new();
        for b in &self.bins {
            ensure!(names.insert(b.name.as_str()), "duplicate bin name `{}`", b.name);
            match &b.matcher {
                Matcher::Exact { values } => {
                    ensure!(!values.is_empty(), "bin `{}` has no values", b.name);
                    if self.numeric {
                        for v in values {
                            ensure!(
                                parse_numeric(v).is_some(),
                                "bin `{}`: `{v}` is not numeric",
                                b.name
                            );
                        }
                    }
                }
                Matcher::Interval { min, max, .. } => {
                    ensure!(self.numeric, "interval bin `{}` in a non-numeric config", b.name);
                    ensure!(min < max, "bin `{}` has an empty interval", b.name);
                }
            }
        }
        // Binning must be a function: no canonical value or interval may be
        // claimed by two bins.
        for (i, a) in self.bins.iter().enumerate() {
            for b in &self.bins[i + 1..] {
                if overlaps(&a.matcher, &b.matcher, self.numeric) {
                    return Err(Error::Validation(format!(
                        "bins `{}` and `{}` overlap",
                        a.name, b.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bins a raw value string.
    pub fn bin_value(&self, raw: &str) -> Binned {
        let raw = clean(raw);
        if let Some(i) = self.bins.iter().position(|b| b.matcher.matches_str(raw)) {
            return Binned::Class(i);
        }
        if !self.numeric {
            return Binned::Unbinned;
        }
        let Some(x) = parse_numeric(raw) else {
            return Binned::Malformed(raw.to_owned());
        };
        match self.bins.iter().position(|b| b.matcher.matches_num(x)) {
            Some(i) => Binned::Class(i),
            None => Binned::Unbinned,
        }
    }
}

fn overlaps(a: &Matcher, b: &Matcher, numeric: bool) -> bool {
    use Matcher::*;
    match (a, b) {
        (Exact { values: va }, Exact { values: vb }) => {
            if va.iter().any(|v| vb.iter().any(|w| clean(v) == clean(w))) {
                return true;
            }
            // tolerance windows of distinct canonical values must not touch
            numeric
                && va.iter().filter_map(|v| parse_numeric(v)).any(|x| {
                    vb.iter()
                        .filter_map(|w| parse_numeric(w))
                        .any(|y| (x - y).abs() <= 2.0 * NUMERIC_TOLERANCE * x.abs().max(y.abs()))
                })
        }
        (Exact { values }, iv @ Interval { .. }) | (iv @ Interval { .. }, Exact { values }) => {
            values.iter().filter_map(|v| parse_numeric(v)).any(|x| iv.matches_num(x))
        }
        (
            Interval {
                min: a0,
                max: a1,
                max_inclusive: ai,
            },
            Interval {
                min: b0,
                max: b1,
                max_inclusive: bi,
            },
        ) => {
            let a_before_b = a1 < b0 || (a1 == b0 && !ai);
            let b_before_a = b1 < a0 || (b1 == a0 && !bi);
            !(a_before_b || b_before_a)
        }
    }
}

/// Bins a record's Exif value for `config.family`.
pub fn bin_exif(record: &SampleRecord, config: &BinningConfig) -> Binned {
    let raw = config.tags.iter().find_map(|t| record.exif_tag(t));
    match raw {
        None => Binned::Missing,
        Some(raw) => config.bin_value(raw),
    }
}
