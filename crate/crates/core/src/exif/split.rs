use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::binning::{bin_exif, Binned, BinningConfig};
use super::smart::derive_smart_vs_nonsmart;
use crate::data::{CameraType, Family, LabelSpace, SampleRecord};
use crate::error::{Error, Result};
use crate::seed;

/// How the non-test side of a split is sized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainRule {
    /// Undersample every class to the minority-class size, holding out
    /// `val_per_class` of each for validation.
    Undersample { val_per_class: usize },
    /// Draw exactly `train_per_class + val_per_class` per class.
    Fixed {
        train_per_class: usize,
        val_per_class: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    /// Classes with fewer labelled images are dropped.
    pub min_class_count: usize,
    pub test_per_class: usize,
    pub train: TrainRule,
}

impl SplitRule {
    /// Large families: classes with at least 5,000 images, 500 test images
    /// per class, train undersampled to the minority class with 200 per
    /// class for validation.
    pub const LARGE: SplitRule = SplitRule {
        min_class_count: 5000,
        test_per_class: 500,
        train: TrainRule::Undersample { val_per_class: 200 },
    };

    /// Camera models: classes with at least 500 images, 500 drawn per
    /// class and divided 4:1 between train and test, 20% of train held out
    /// for validation.
    pub const MODEL: SplitRule = SplitRule {
        min_class_count: 500,
        test_per_class: 100,
        train: TrainRule::Fixed {
            train_per_class: 320,
            val_per_class: 80,
        },
    };

    pub fn for_family(family: Family) -> Self {
        match family {
            Family::ModelAll | Family::ModelSmart => Self::MODEL,
            _ => Self::LARGE,
        }
    }
}

/// Maps records to classes of one acquisition family.
#[derive(Debug, Clone)]
pub enum AcquisitionLabeler {
    Binning(BinningConfig),
    SmartVsNon,
}

impl AcquisitionLabeler {
    /// Shipped labeler for an acquisition family.
    pub fn builtin(family: Family) -> Result<Self> {
        if family == Family::ModelSmartVsNon {
            return Ok(Self::SmartVsNon);
        }
        BinningConfig::builtin(family).map(Self::Binning).ok_or_else(|| {
            Error::Validation(format!("`{family}` is not an acquisition family"))
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Binning(c) => c.family,
            Self::SmartVsNon => Family::ModelSmartVsNon,
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        match self {
            Self::Binning(c) => c.class_names(),
            Self::SmartVsNon => LabelSpace::canonical(Family::ModelSmartVsNon)
                .class_names()
                .to_vec(),
        }
    }

    pub fn config_version(&self) -> String {
        match self {
            Self::Binning(c) => c.version.clone(),
            Self::SmartVsNon => "allowlist".to_owned(),
        }
    }

    pub fn label(&self, record: &SampleRecord) -> Binned {
        match self {
            Self::Binning(c) => bin_exif(record, c),
            Self::SmartVsNon => match derive_smart_vs_nonsmart(record) {
                Some(CameraType::NonSmart) => Binned::Class(0),
                Some(CameraType::Smart) => Binned::Class(1),
                None if record.exif_tag("Make").is_none() => Binned::Missing,
                None => Binned::Unbinned,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub sample_id: String,
    /// Index into [`AcquisitionSplit::classes`].
    pub class: usize,
    pub photographer_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAudit {
    pub class: String,
    /// Labelled images with a photographer.
    pub available: usize,
    pub retained: bool,
    pub test: usize,
    pub train: usize,
    pub val: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub input_records: usize,
    /// Every class of the family, in label-space order.
    pub classes: Vec<ClassAudit>,
    /// Dropped records by reason.
    pub dropped: BTreeMap<String, usize>,
    pub test_photographers: usize,
    pub trainval_photographers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub seed: u64,
    pub rule: SplitRule,
    pub config_version: String,
    pub toolkit_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSplit {
    pub family: Family,
    /// Retained class names; entry classes index into this list.
    pub classes: Vec<String>,
    pub train: Vec<SplitEntry>,
    pub val: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
    pub provenance: SplitProvenance,
    pub audit: SplitAudit,
}

struct Candidate {
    record: usize,
    class: usize,
    photographer: usize,
}

fn bump(map: &mut BTreeMap<String, usize>, reason: &str, n: usize) {
    if n > 0 {
        *map.entry(reason.to_owned()).or_default() += n;
    }
}

/// Builds a balanced, photographer-disjoint split.
///
/// Whole photographers are moved to the test side first: while some class
/// still needs test images, the class with the largest remaining need picks
/// the unassigned photographer with the fewest images of that class (ties
/// broken by a seeded hash of the photographer id). Photographers whose
/// move would leave some class too few train/val images are picked only
/// when nobody else is left. Test images are then
/// sampled from test photographers only, and train/val from the rest.
pub fn build_acquisition_split(
    records: &[SampleRecord],
    labeler: &AcquisitionLabeler,
    rule: SplitRule,
    seed: u64,
) -> Result<AcquisitionSplit> {
    let family = labeler.family();
    let names = labeler.class_names();
    let mut dropped = BTreeMap::new();

    let mut photographers: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labelled = Vec::new();
    let mut available = vec![0usize; names.len()];
    for (i, r) in records.iter().enumerate() {
        let Some(p) = r.photographer_id.as_deref() else {
            bump(&mut dropped, "no_photographer", 1);
            continue;
        };
        match labeler.label(r) {
            Binned::Class(c) => {
                available[c] += 1;
                let next = photographers.len();
                let photographer = *photographers.entry(p).or_insert(next);
                labelled.push(Candidate {
                    record: i,
                    class: c,
                    photographer,
                });
            }
            Binned::Missing => bump(&mut dropped, "missing_value", 1),
            Binned::Unbinned => bump(&mut dropped, "unbinned", 1),
            Binned::Malformed(raw) => {
                log::debug!("record {}: malformed value `{raw}`", r.sample_id);
                bump(&mut dropped, "malformed", 1);
            }
        }
    }
    let mut photographer_ids = vec![""; photographers.len()];
    for (id, &i) in &photographers {
        photographer_ids[i] = id;
    }

    // Retained classes get contiguous indices in family order.
    let mut remap = vec![None; names.len()];
    let mut classes = Vec::new();
    for (c, &n) in available.iter().enumerate() {
        if n >= rule.min_class_count {
            remap[c] = Some(classes.len());
            classes.push(names[c].clone());
        }
    }
    if classes.is_empty() {
        return Err(Error::Unsatisfiable(format!(
            "no `{family}` class has at least {} images with a photographer",
            rule.min_class_count
        )));
    }
    let k = classes.len();
    let mut pool = Vec::with_capacity(labelled.len());
    for mut cand in labelled {
        match remap[cand.class] {
            Some(c) => {
                cand.class = c;
                pool.push(cand);
            }
            None => bump(&mut dropped, "below_threshold", 1),
        }
    }

    // per-photographer image counts for each retained class
    let mut counts = vec![vec![0usize; k]; photographer_ids.len()];
    for cand in &pool {
        counts[cand.photographer][cand.class] += 1;
    }
    let tie: Vec<u64> = photographer_ids
        .iter()
        .map(|id| seed::keyed_hash(seed, "split-photographer", id))
        .collect();

    // smallest train/val pool each class can be left with
    let floor = match rule.train {
        TrainRule::Undersample { val_per_class } => val_per_class + 1,
        TrainRule::Fixed {
            train_per_class,
            val_per_class,
        } => train_per_class + val_per_class,
    };
    let mut remaining = vec![0usize; k];
    for cand in &pool {
        remaining[cand.class] += 1;
    }
    let mut in_test = vec![false; photographer_ids.len()];
    let mut need = vec![rule.test_per_class; k];
    while let Some(c) = (0..k)
        .filter(|&c| need[c] > 0)
        .max_by(|&a, &b| need[a].cmp(&need[b]).then(b.cmp(&a)))
    {
        let starves = |p: usize| (0..k).any(|j| remaining[j] < counts[p][j] + floor);
        let pick = (0..photographer_ids.len())
            .filter(|&p| !in_test[p] && counts[p][c] > 0)
            .min_by_key(|&p| (starves(p), counts[p][c], counts[p].iter().sum::<usize>(), tie[p], p));
        let Some(p) = pick else {
            return Err(Error::Unsatisfiable(format!(
                "class `{}` needs {} more test images but has no photographers left",
                classes[c], need[c]
            )));
        };
        in_test[p] = true;
        for j in 0..k {
            need[j] = need[j].saturating_sub(counts[p][j]);
            remaining[j] -= counts[p][j];
        }
    }

    let mut test_side: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut rest: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, cand) in pool.iter().enumerate() {
        if in_test[cand.photographer] {
            test_side[cand.class].push(i);
        } else {
            rest[cand.class].push(i);
        }
    }

    let (train_n, val_n) = match rule.train {
        TrainRule::Undersample { val_per_class } => {
            let minority = rest.iter().map(Vec::len).min().unwrap_or(0);
            if minority <= val_per_class {
                let c = (0..k).min_by_key(|&c| rest[c].len()).unwrap_or(0);
                return Err(blocked(&classes, c, rest[c].len(), val_per_class + 1, &counts, &in_test, &photographer_ids));
            }
            (minority - val_per_class, val_per_class)
        }
        TrainRule::Fixed {
            train_per_class,
            val_per_class,
        } => {
            let want = train_per_class + val_per_class;
            if let Some(c) = (0..k).find(|&c| rest[c].len() < want) {
                return Err(blocked(&classes, c, rest[c].len(), want, &counts, &in_test, &photographer_ids));
            }
            (train_per_class, val_per_class)
        }
    };

    let mut role = vec![None; pool.len()];
    let mut audits = vec![(0usize, 0usize, 0usize); k];
    for c in 0..k {
        let mut t = test_side[c].clone();
        t.shuffle(&mut seed::keyed_stream(seed, "split-test", &classes[c]));
        for &i in t.iter().take(rule.test_per_class) {
            role[i] = Some(2u8);
        }
        bump(&mut dropped, "test_photographer_surplus", t.len().saturating_sub(rule.test_per_class));

        let mut r = rest[c].clone();
        r.shuffle(&mut seed::keyed_stream(seed, "split-trainval", &classes[c]));
        for &i in r.iter().take(val_n) {
            role[i] = Some(1);
        }
        for &i in r.iter().skip(val_n).take(train_n) {
            role[i] = Some(0);
        }
        bump(&mut dropped, "undersampled", r.len() - val_n - train_n);
        audits[c] = (t.len().min(rule.test_per_class), train_n, val_n);
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (cand, role) in pool.iter().zip(role) {
        let entry = || SplitEntry {
            sample_id: records[cand.record].sample_id.clone(),
            class: cand.class,
            photographer_id: photographer_ids[cand.photographer].to_owned(),
        };
        match role {
            Some(0) => train.push(entry()),
            Some(1) => val.push(entry()),
            Some(_) => test.push(entry()),
            None => {}
        }
    }

    let classes_audit = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (test, train, val) = remap[c].map(|r| audits[r]).unwrap_or_default();
            ClassAudit {
                class: name.clone(),
                available: available[c],
                retained: remap[c].is_some(),
                test,
                train,
                val,
            }
        })
        .collect();
    let used_test: std::collections::BTreeSet<&str> =
        test.iter().map(|e| e.photographer_id.as_str()).collect();
    let used_trainval: std::collections::BTreeSet<&str> = train
        .iter()
        .chain(&val)
        .map(|e| e.photographer_id.as_str())
        .collect();
    debug_assert!(used_test.is_disjoint(&used_trainval));

    Ok(AcquisitionSplit {
        family,
        classes,
        audit: SplitAudit {
            input_records: records.len(),
            classes: classes_audit,
            dropped,
            test_photographers: used_test.len(),
            trainval_photographers: used_trainval.len(),
        },
        train,
        val,
        test,
        provenance: SplitProvenance {
            seed,
            rule,
            config_version: labeler.config_version(),
            toolkit_version: crate::TOOLKIT_VERSION.to_owned(),
        },
    })
}

fn blocked(
    classes: &[String],
    c: usize,
    have: usize,
    want: usize,
    counts: &[Vec<usize>],
    in_test: &[bool],
    ids: &[&str],
) -> Error {
    let mut owners: Vec<(usize, &str)> = (0..ids.len())
        .filter(|&p| in_test[p] && counts[p][c] > 0)
        .map(|p| (counts[p][c], ids[p]))
        .collect();
    owners.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    let listed: Vec<String> = owners
        .iter()
        .take(10)
        .map(|(n, id)| format!("{id} ({n})"))
        .collect();
    Error::Unsatisfiable(format!(
        "class `{}` keeps {have} train/val images after moving test photographers, needs {want}; \
         blocking photographers: {}",
        classes[c],
        if listed.is_empty() { "none".to_owned() } else { listed.join(", ") }
    ))
}

impl AcquisitionSplit {
    /// Checks the structural invariants: disjoint ids, disjoint
    /// photographer sets and per-class counts matching the rule.
    pub fn check(&self) -> Result<()> {
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        for e in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::DuplicateId(e.sample_id.clone()));
            }
        }
        let test_p: HashSet<&str> = self.test.iter().map(|e| e.photographer_id.as_str()).collect();
        if let Some(e) = self
            .train
            .iter()
            .chain(&self.val)
            .find(|e| test_p.contains(e.photographer_id.as_str()))
        {
            return Err(Error::Validation(format!(
                "photographer `{}` is on both sides of the split",
                e.photographer_id
            )));
        }
        let per_class = |entries: &[SplitEntry]| {
            let mut n = vec![0usize; self.classes.len()];
            for e in entries {
                n[e.class] += 1;
            }
            n
        };
        let (tr, va, te) = (per_class(&self.train), per_class(&self.val), per_class(&self.test));
        let rule = self.provenance.rule;
        for c in 0..self.classes.len() {
            if te[c] != rule.test_per_class {
                return Err(Error::Validation(format!(
                    "class `{}` has {} test images, expected {}",
                    self.classes[c], te[c], rule.test_per_class
                )));
            }
            let (want_tr, want_va) = match rule.train {
                TrainRule::Undersample { val_per_class } => (tr[0], val_per_class),
                TrainRule::Fixed {
                    train_per_class,
                    val_per_class,
                } => (train_per_class, val_per_class),
            };
            if tr[c] != want_tr || va[c] != want_va {
                return Err(Error::Validation(format!(
                    "class `{}` has {}/{} train/val images, expected {want_tr}/{want_va}",
                    self.classes[c], tr[c], va[c]
                )));
            }
        }
        Ok(())
    }
}
