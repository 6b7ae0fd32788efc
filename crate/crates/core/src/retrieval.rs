//! Paired-capture retrieval: each image of a pair queries for its partner
//! (taken with the other camera type) among negatives that either share the
//! query's camera type or do not.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CameraType, EmbeddingSet, SampleRecord};
use crate::error::{ensure, Error, Result};
use crate::knn::{cosine, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    /// Negatives captured with the query's camera type.
    Same,
    /// Negatives captured with the other camera type.
    Different,
}

impl NegativeMode {
    pub const BOTH: [NegativeMode; 2] = [NegativeMode::Same, NegativeMode::Different];

    pub fn as_str(self) -> &'static str {
        match self {
            NegativeMode::Same => "same",
            NegativeMode::Different => "different",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalInstance {
    pub query_id: String,
    pub query_type: CameraType,
    pub positive_id: String,
    pub negative_ids: Vec<String>,
    pub mode: NegativeMode,
}

/// Pairs keyed by pair id, each as (smartphone record, dedicated-camera
/// record), in order of first appearance.
fn pairs(records: &[SampleRecord]) -> Result<Vec<[&SampleRecord; 2]>> {
    let mut order = Vec::new();
    let mut members: HashMap<&str, Vec<&SampleRecord>> = HashMap::new();
    for r in records {
        let Some(p) = r.pair_id.as_deref() else { continue };
        ensure!(r.camera_type.is_some(), "record `{}` in pair `{p}` has no camera_type", r.sample_id);
        let entry = members.entry(p).or_default();
        if entry.is_empty() {
            order.push(p);
        }
        entry.push(r);
    }
    ensure!(!order.is_empty(), "no records carry a pair_id");
    order
        .into_iter()
        .map(|p| {
            let m = &members[p];
            ensure!(m.len() == 2, "pair `{p}` has {} members, expected 2", m.len());
            let (a, b) = (m[0], m[1]);
            ensure!(a.camera_type != b.camera_type, "pair `{p}` has two images of the same camera type");
            Ok(if a.camera_type == Some(CameraType::Smart) { [a, b] } else { [b, a] })
        })
        .collect()
}

/// One instance per paired record acting as query.
pub fn build_instances(records: &[SampleRecord], mode: NegativeMode) -> Result<Vec<RetrievalInstance>> {
    let pairs = pairs(records)?;
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for (pi, pair) in pairs.iter().enumerate() {
        for (side, query) in pair.iter().enumerate() {
            let qtype = query.camera_type.unwrap();
            let wanted = match mode {
                NegativeMode::Same => side,
                NegativeMode::Different => 1 - side,
            };
            let negative_ids = pairs
                .iter()
                .enumerate()
                .filter(|&(pj, _)| pj != pi)
                .map(|(_, other)| other[wanted].sample_id.clone())
                .collect();
            out.push(RetrievalInstance {
                query_id: query.sample_id.clone(),
                query_type: qtype,
                positive_id: pair[1 - side].sample_id.clone(),
                negative_ids,
                mode,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub query_type: CameraType,
    /// 1-based rank of the positive.
    pub positive_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub mode: NegativeMode,
    pub ks: Vec<usize>,
    /// Recall over all queries, per k.
    pub recall: Vec<f64>,
    /// Recall per query camera type, per k.
    pub recall_by_direction: BTreeMap<String, Vec<f64>>,
    pub n_queries: usize,
    pub queries: Vec<QueryResult>,
}

impl RetrievalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }
}

/// Rank of the positive among `{positive} ∪ negatives`, ordering by
/// similarity and then by embedding row index.
fn positive_rank(inst: &RetrievalInstance, set: &EmbeddingSet, index: &HashMap<&str, usize>, norms: &[f64]) -> Result<usize> {
    let row = |id: &str| index.get(id).copied().ok_or_else(|| Error::MissingId(id.to_owned()));
    let q = row(&inst.query_id)?;
    let p = row(&inst.positive_id)?;
    let sim = |i: usize| cosine(set.row(q), norms[q], set.row(i), norms[i]);
    let sp = sim(p);
    let mut rank = 1;
    for id in &inst.negative_ids {
        let n = row(id)?;
        let s = sim(n);
        if s > sp || (s == sp && n < p) {
            rank += 1;
        }
    }
    Ok(rank)
}

pub fn recall_at_k(instances: &[RetrievalInstance], set: &EmbeddingSet, ks: &[usize]) -> Result<RetrievalReport> {
    ensure!(!instances.is_empty(), "no retrieval instances");
    ensure!(!ks.is_empty(), "no k values given");
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(Error::InvalidK { k, n: 0 });
    }
    let mode = instances[0].mode;
    ensure!(instances.iter().all(|i| i.mode == mode), "instances mix negative modes");
    let index = set.index();
    let norms: Vec<f64> = set.rows().map(norm).collect();
    let queries: Vec<QueryResult> = instances
        .par_iter()
        .map(|inst| {
            Ok(QueryResult {
                query_id: inst.query_id.clone(),
                query_type: inst.query_type,
                positive_rank: positive_rank(inst, set, &index, &norms)?,
            })
        })
        .collect::<Result<_>>()?;
    let recall_of = |subset: &[&QueryResult]| -> Vec<f64> {
        ks.iter()
            .map(|&k| subset.iter().filter(|q| q.positive_rank <= k).count() as f64 / subset.len().max(1) as f64)
            .collect()
    };
    let all: Vec<&QueryResult> = queries.iter().collect();
    let mut by_direction = BTreeMap::new();
    for t in [CameraType::Smart, CameraType::NonSmart] {
        let subset: Vec<&QueryResult> = queries.iter().filter(|q| q.query_type == t).collect();
        if !subset.is_empty() {
            by_direction.insert(t.as_str().to_owned(), recall_of(&subset));
        }
    }
    Ok(RetrievalReport {
        mode,
        ks: ks.to_vec(),
        recall: recall_of(&all),
        recall_by_direction: by_direction,
        n_queries: queries.len(),
        queries,
    })
}
