//! Metadata-label assignment plans: which processing class every training
//! image receives, and which class the query receives.
//!
//! Plans serialize as scheme descriptors. Per-image maps are only
//! materialized for uniform plans, and even those are regenerated from the
//! seed rather than stored.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::LabelSpace;
use crate::error::{ensure, Result};
use crate::seed;

/// Number of uniform seeds in the default setup grid.
pub const DEFAULT_UNIFORM_SEEDS: usize = 10;

/// `count` consecutive uniform seeds starting at `master`.
pub fn uniform_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| master.wrapping_add(i)).collect()
}

/// One concrete counterfactual setup. `test` is the query's class p_i and
/// `other` / `train` the alternative class p_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum AssignmentScheme {
    /// Training and query all in p_i.
    AllSame { test: usize },
    /// Query in p_i, every training image in p_j.
    AllDiff { test: usize, train: usize },
    /// Same-semantic training images in p_i, the rest in p_j.
    PosSame { test: usize, other: usize },
    /// Same-semantic training images in p_j, the rest in p_i.
    NegSame { test: usize, other: usize },
    /// Training classes drawn uniformly per image; query in p_i.
    Uniform { test: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    AllSame,
    AllDiff,
    PosSame,
    NegSame,
    Uniform,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::AllSame,
        SchemeKind::AllDiff,
        SchemeKind::PosSame,
        SchemeKind::NegSame,
        SchemeKind::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::AllSame => "all-same",
            SchemeKind::AllDiff => "all-diff",
            SchemeKind::PosSame => "pos-same",
            SchemeKind::NegSame => "neg-same",
            SchemeKind::Uniform => "uniform",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| crate::Error::Validation(format!("unknown scheme `{s}`")))
    }
}

/// Training-side assignment rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanRule {
    /// Every training image in one class.
    Constant(usize),
    /// Per training row, in training order.
    PerImage(Vec<usize>),
    /// Depends on whether a training image shares the query's semantic label.
    Conditional { on_match: usize, on_mismatch: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub rule: PlanRule,
    pub test_class: usize,
}

impl AssignmentPlan {
    /// Class of training row `row` with semantic label `train_label`, for a
    /// query with semantic label `query_label`.
    #[inline]
    pub fn class_for(&self, row: usize, train_label: u32, query_label: u32) -> usize {
        match &self.rule {
            PlanRule::Constant(c) => *c,
            PlanRule::PerImage(v) => v[row],
            PlanRule::Conditional {
                on_match,
                on_mismatch,
            } => {
                if train_label == query_label {
                    *on_match
                } else {
                    *on_mismatch
                }
            }
        }
    }

    /// Materializes the training classes for one query.
    pub fn classes_for_query(&self, train_labels: &[u32], query_label: u32) -> Vec<usize> {
        (0..train_labels.len())
            .map(|i| self.class_for(i, train_labels[i], query_label))
            .collect()
    }

    pub fn is_query_conditional(&self) -> bool {
        matches!(self.rule, PlanRule::Conditional { .. })
    }
}

impl AssignmentScheme {
    pub fn kind(&self) -> SchemeKind {
        match self {
            AssignmentScheme::AllSame { .. } => SchemeKind::AllSame,
            AssignmentScheme::AllDiff { .. } => SchemeKind::AllDiff,
            AssignmentScheme::PosSame { .. } => SchemeKind::PosSame,
            AssignmentScheme::NegSame { .. } => SchemeKind::NegSame,
            AssignmentScheme::Uniform { .. } => SchemeKind::Uniform,
        }
    }

    pub fn test_class(&self) -> usize {
        match *self {
            AssignmentScheme::AllSame { test }
            | AssignmentScheme::AllDiff { test, .. }
            | AssignmentScheme::PosSame { test, .. }
            | AssignmentScheme::NegSame { test, .. }
            | AssignmentScheme::Uniform { test, .. } => test,
        }
    }

    pub fn validate(&self, space: &LabelSpace) -> Result<()> {
        let m = space.len();
        let check = |c: usize| -> Result<()> {
            ensure!(c < m, "class {c} out of range for `{}` (M = {m})", space.family());
            Ok(())
        };
        check(self.test_class())?;
        match *self {
            AssignmentScheme::AllDiff { test, train: other }
            | AssignmentScheme::PosSame { test, other }
            | AssignmentScheme::NegSame { test, other } => {
                check(other)?;
                ensure!(test != other, "{} needs two distinct classes, got {test} twice", self.kind());
            }
            _ => {}
        }
        Ok(())
    }

    /// Short label such as `pos-same/q85-420/q95-444`.
    pub fn label(&self, space: &LabelSpace) -> String {
        let name = |c: usize| space.name(c).unwrap_or("?").to_owned();
        match *self {
            AssignmentScheme::AllSame { test } => format!("all-same/{}", name(test)),
            AssignmentScheme::AllDiff { test, train: other }
            | AssignmentScheme::PosSame { test, other }
            | AssignmentScheme::NegSame { test, other } => {
                format!("{}/{}/{}", self.kind(), name(test), name(other))
            }
            AssignmentScheme::Uniform { test, seed } => {
                format!("uniform/{}/seed-{seed}", name(test))
            }
        }
    }

    /// Builds the plan over `train_ids` (only used by uniform schemes).
    pub fn plan<S: AsRef<str>>(&self, train_ids: &[S], space: &LabelSpace) -> Result<AssignmentPlan> {
        self.validate(space)?;
        let test_class = self.test_class();
        let rule = match *self {
            AssignmentScheme::AllSame { test } => PlanRule::Constant(test),
            AssignmentScheme::AllDiff { train, .. } => PlanRule::Constant(train),
            AssignmentScheme::PosSame { test, other } => PlanRule::Conditional {
                on_match: test,
                on_mismatch: other,
            },
            AssignmentScheme::NegSame { test, other } => PlanRule::Conditional {
                on_match: other,
                on_mismatch: test,
            },
            AssignmentScheme::Uniform { test, seed } => {
                let mut plan = assign_uniform(train_ids, space, seed)?;
                plan.test_class = test;
                return Ok(plan);
            }
        };
        Ok(AssignmentPlan { rule, test_class })
    }
}

/// Independent uniform draw over the M classes for every training id. The
/// draw for an id depends only on `(seed, id)`, so it does not change when
/// other ids are added or reordered.
pub fn assign_uniform<S: AsRef<str>>(
    train_ids: &[S],
    space: &LabelSpace,
    seed: u64,
) -> Result<AssignmentPlan> {
    let m = space.len();
    ensure!(m > 0, "label space is empty");
    let classes = train_ids
        .iter()
        .map(|id| seed::keyed_stream(seed, "uniform-assignment", id.as_ref()).gen_range(0..m))
        .collect();
    Ok(AssignmentPlan {
        rule: PlanRule::PerImage(classes),
        test_class: 0,
    })
}

/// Query-conditional plan for a positive/negative scheme.
pub fn assign_counterfactual(scheme: &AssignmentScheme, space: &LabelSpace) -> Result<AssignmentPlan> {
    ensure!(
        matches!(
            scheme,
            AssignmentScheme::PosSame { .. } | AssignmentScheme::NegSame { .. }
        ),
        "{} is not query-conditional",
        scheme.kind()
    );
    scheme.plan::<&str>(&[], space)
}

/// Every concrete scheme of `kind` over `space`. Uniform yields one scheme
/// per (seed, test class), in the order of `uniform_seeds`; the first seed
/// is the one hyperparameters are tuned on.
pub fn enumerate_setup_grid(space: &LabelSpace, kind: SchemeKind, uniform_seeds: &[u64]) -> Vec<AssignmentScheme> {
    let m = space.len();
    let pairs = || (0..m).flat_map(move |i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)));
    match kind {
        SchemeKind::AllSame => (0..m).map(|test| AssignmentScheme::AllSame { test }).collect(),
        SchemeKind::AllDiff => pairs()
            .map(|(test, train)| AssignmentScheme::AllDiff { test, train })
            .collect(),
        SchemeKind::PosSame => pairs()
            .map(|(test, other)| AssignmentScheme::PosSame { test, other })
            .collect(),
        SchemeKind::NegSame => pairs()
            .map(|(test, other)| AssignmentScheme::NegSame { test, other })
            .collect(),
        SchemeKind::Uniform => uniform_seeds
            .iter()
            .flat_map(|&seed| (0..m).map(move |test| AssignmentScheme::Uniform { test, seed }))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Family;

    fn jpeg() -> LabelSpace {
        LabelSpace::canonical(Family::Jpeg)
    }

    #[test]
    fn grid_sizes() {
        let s = jpeg();
        assert_eq!(enumerate_setup_grid(&s, SchemeKind::AllDiff, &[0]).len(), 30);
        assert_eq!(enumerate_setup_grid(&s, SchemeKind::PosSame, &[0]).len(), 30);
        assert_eq!(enumerate_setup_grid(&s, SchemeKind::AllSame, &[0]).len(), 6);
        assert_eq!(enumerate_setup_grid(&s, SchemeKind::Uniform, &uniform_seeds(0, 10)).len(), 60);
        let sharp = LabelSpace::canonical(Family::Sharpening);
        assert_eq!(enumerate_setup_grid(&sharp, SchemeKind::AllSame, &[0]).len(), 3);
    }

    #[test]
    fn counterfactual_rules() {
        let s = jpeg();
        let train = [0u32, 0, 1];
        let pos = AssignmentScheme::PosSame { test: 0, other: 1 };
        let plan = assign_counterfactual(&pos, &s).unwrap();
        assert_eq!(plan.classes_for_query(&train, 0), vec![0, 0, 1]);
        assert_eq!(plan.classes_for_query(&train, 7), vec![1, 1, 1]);
        let neg = AssignmentScheme::NegSame { test: 0, other: 1 };
        let plan = assign_counterfactual(&neg, &s).unwrap();
        assert_eq!(plan.classes_for_query(&train, 0), vec![1, 1, 0]);
        assert_eq!(plan.test_class, 0);
        let same = AssignmentScheme::PosSame { test: 2, other: 2 };
        assert!(assign_counterfactual(&same, &s).is_err());
        assert!(assign_counterfactual(&AssignmentScheme::AllSame { test: 0 }, &s).is_err());
    }

    #[test]
    fn uniform_counts_and_determinism() {
        let s = jpeg();
        let ids: Vec<String> = (0..6000).map(|i| format!("img{i}")).collect();
        let plan = assign_uniform(&ids, &s, 11).unwrap();
        let PlanRule::PerImage(v) = &plan.rule else { panic!() };
        let mut counts = [0usize; 6];
        for &c in v {
            counts[c] += 1;
        }
        assert!(counts.iter().all(|&n| n.abs_diff(1000) <= 150), "{counts:?}");
        assert_eq!(plan, assign_uniform(&ids, &s, 11).unwrap());
        assert_ne!(plan, assign_uniform(&ids, &s, 12).unwrap());
    }

    #[test]
    fn scheme_serializes_as_descriptor() {
        let s = AssignmentScheme::Uniform { test: 3, seed: 9 };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"scheme":"uniform","test":3,"seed":9}"#);
        assert_eq!(serde_json::from_str::<AssignmentScheme>(&json).unwrap(), s);
    }
}
