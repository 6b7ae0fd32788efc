use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Family;
use crate::error::{ensure, Error, Result};
use crate::exif::SplitRule;
use crate::plan::{SchemeKind, DEFAULT_UNIFORM_SEEDS};
use crate::probe::ProbeConfig;
use crate::retrieval::NegativeMode;

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_ks() -> Vec<usize> {
    vec![1, 10]
}
fn default_seeds() -> usize {
    DEFAULT_UNIFORM_SEEDS
}
fn all_schemes() -> Vec<SchemeKind> {
    SchemeKind::ALL.to_vec()
}
fn both_modes() -> Vec<NegativeMode> {
    NegativeMode::BOTH.to_vec()
}
fn recall_ks() -> Vec<usize> {
    vec![1]
}
fn match_ks() -> Vec<usize> {
    vec![1, 5, 10, 20]
}
fn default_bins() -> usize {
    50
}

/// One experiment run: a protocol plus its inputs. Relative paths are
/// resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub experiment: Experiment,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum Experiment {
    Knn(KnnExperiment),
    ProcessingProbe(ProcessingProbeExperiment),
    AcquisitionProbe(AcquisitionProbeExperiment),
    Retrieval(RetrievalExperiment),
    Histogram(HistogramExperiment),
    MatchRate(MatchRateExperiment),
}

/// Counterfactual kNN over the setup grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnExperiment {
    /// Checked against the tensors' label space when given.
    #[serde(default)]
    pub family: Option<Family>,
    pub train_tensor: PathBuf,
    pub test_tensor: PathBuf,
    /// Semantic labels for training ids (and test ids unless
    /// `test_manifest` is set).
    pub train_manifest: PathBuf,
    #[serde(default)]
    pub test_manifest: Option<PathBuf>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeKind>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub uniform_seeds: usize,
    /// Dump the top-10 neighbors of this many queries per setup.
    #[serde(default)]
    pub dump_neighbors: usize,
}

/// Linear probe on uniformly assigned processing labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingProbeExperiment {
    #[serde(default)]
    pub family: Option<Family>,
    pub train_tensor: PathBuf,
    pub test_tensor: PathBuf,
    #[serde(default = "default_seeds")]
    pub uniform_seeds: usize,
    #[serde(default)]
    pub probe: ProbeConfig,
}

/// Linear probe on Exif-derived labels over a photographer-disjoint split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionProbeExperiment {
    pub family: Family,
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    /// Overrides the shipped binning config.
    #[serde(default)]
    pub binning_config: Option<PathBuf>,
    /// Overrides the family's default split rule.
    #[serde(default)]
    pub split_rule: Option<SplitRule>,
    #[serde(default)]
    pub probe: ProbeConfig,
}

/// Paired-capture retrieval for one or more encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalExperiment {
    pub manifest: PathBuf,
    pub embeddings: Vec<PathBuf>,
    #[serde(default = "both_modes")]
    pub modes: Vec<NegativeMode>,
    #[serde(default = "recall_ks")]
    pub ks: Vec<usize>,
}

/// Similarity distributions split by semantic and metadata agreement.
/// Every image gets a uniformly drawn processing class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramExperiment {
    pub tensor: PathBuf,
    pub manifest: PathBuf,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Use only the first this-many images as queries.
    #[serde(default)]
    pub max_queries: Option<usize>,
}

/// Share of nearest neighbors with the same acquisition label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRateExperiment {
    pub family: Family,
    pub manifest: PathBuf,
    pub embeddings: Vec<PathBuf>,
    #[serde(default)]
    pub binning_config: Option<PathBuf>,
    #[serde(default = "match_ks")]
    pub ks: Vec<usize>,
}

impl Experiment {
    pub fn protocol(&self) -> &'static str {
        match self {
            Experiment::Knn(_) => "knn",
            Experiment::ProcessingProbe(_) => "processing-probe",
            Experiment::AcquisitionProbe(_) => "acquisition-probe",
            Experiment::Retrieval(_) => "retrieval",
            Experiment::Histogram(_) => "histogram",
            Experiment::MatchRate(_) => "match-rate",
        }
    }

    /// Every input file the experiment reads.
    pub fn inputs(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = Vec::new();
        match self {
            Experiment::Knn(e) => {
                v.extend([e.train_tensor.as_path(), &e.test_tensor, &e.train_manifest]);
                v.extend(e.test_manifest.as_deref());
            }
            Experiment::ProcessingProbe(e) => v.extend([e.train_tensor.as_path(), &e.test_tensor]),
            Experiment::AcquisitionProbe(e) => {
                v.extend([e.manifest.as_path(), &e.embeddings]);
                v.extend(e.binning_config.as_deref());
            }
            Experiment::Retrieval(e) => {
                v.push(&e.manifest);
                v.extend(e.embeddings.iter().map(PathBuf::as_path));
            }
            Experiment::Histogram(e) => v.extend([e.tensor.as_path(), &e.manifest]),
            Experiment::MatchRate(e) => {
                v.push(&e.manifest);
                v.extend(e.embeddings.iter().map(PathBuf::as_path));
                v.extend(e.binning_config.as_deref());
            }
        }
        v
    }
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            master_seed: 0,
            out_dir: default_out(),
            experiment,
            base_dir: None,
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn from_str_with_base(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?
        };
        cfg.base_dir = base_dir.map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        Self::from_str_with_base(&text, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Canonical JSON form; the config hash is taken over this.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Checks the descriptor and that every input exists, before any
    /// compute.
    pub fn validate(&self) -> Result<()> {
        for p in self.experiment.inputs() {
            let full = self.resolve(p);
            ensure!(full.is_file(), "input `{}` does not exist", full.display());
        }
        let nonempty_ks = |ks: &[usize]| -> Result<()> {
            ensure!(!ks.is_empty(), "k list is empty");
            ensure!(ks.iter().all(|&k| k >= 1), "k values must be positive");
            Ok(())
        };
        match &self.experiment {
            Experiment::Knn(e) => {
                nonempty_ks(&e.ks)?;
                ensure!(!e.schemes.is_empty(), "no setups selected");
                if e.schemes.contains(&SchemeKind::Uniform) {
                    ensure!(e.uniform_seeds >= 1, "uniform_seeds must be at least 1");
                }
            }
            Experiment::ProcessingProbe(e) => {
                ensure!(e.uniform_seeds >= 1, "uniform_seeds must be at least 1");
                e.probe.validate()?;
            }
            Experiment::AcquisitionProbe(e) => {
                ensure!(!e.family.is_processing(), "`{}` is not an acquisition family", e.family);
                e.probe.validate()?;
            }
            Experiment::Retrieval(e) => {
                nonempty_ks(&e.ks)?;
                ensure!(!e.embeddings.is_empty(), "no embedding files given");
                ensure!(!e.modes.is_empty(), "no retrieval modes given");
            }
            Experiment::Histogram(e) => ensure!(e.bins >= 2, "need at least two bins"),
            Experiment::MatchRate(e) => {
                nonempty_ks(&e.ks)?;
                ensure!(!e.embeddings.is_empty(), "no embedding files given");
                ensure!(!e.family.is_processing(), "`{}` is not an acquisition family", e.family);
            }
        }
        Ok(())
    }
}
