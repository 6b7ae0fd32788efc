//! Exact cosine kNN: semantic classification under assignment plans,
//! neighbor metadata-match rates, conditional similarity histograms and
//! neighbor dumps.
//!
//! Similarities are accumulated in f64 over f32 inputs. Neighbors are
//! ranked by similarity, descending, with ties going to the lower row
//! index. Votes are plurality; a tied vote goes to whichever tied class
//! holds the best-ranked neighbor.

mod histogram;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSet, VariantEmbeddingTensor};
use crate::error::{ensure, Error, Result};
use crate::plan::AssignmentPlan;

pub use histogram::{similarity_histogram, HistogramCell, SimilarityHistogram};

/// The k values plotted for accuracy-vs-k curves.
pub const K_GRID: [usize; 9] = [1, 5, 10, 20, 50, 100, 200, 500, 1000];

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[inline]
pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity given precomputed norms; zero vectors have similarity
/// zero with everything.
#[inline]
pub(crate) fn cosine(a: &[f32], na: f64, b: &[f32], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Orders `(row, similarity)` pairs best first. Similarities are finite;
/// `0.0` and `-0.0` compare equal.
#[inline]
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Keeps the best `k` of `scored`, sorted best first.
pub(crate) fn top_k(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if k < scored.len() {
        scored.select_nth_unstable_by(k, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

/// Plurality vote over ranked neighbors.
pub fn vote(ranked: &[(usize, f64)], labels: &[u32]) -> Option<u32> {
    let mut tally: Vec<(u32, usize, usize)> = Vec::new(); // (label, votes, best rank)
    for (rank, &(row, _)) in ranked.iter().enumerate() {
        let l = labels[row];
        match tally.iter_mut().find(|t| t.0 == l) {
            Some(t) => t.1 += 1,
            None => tally.push((l, 1, rank)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|t| t.0)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimMismatch { expected, actual });
    }
    Ok(())
}

/// Ranked neighbors of `query` among the rows of `train`.
pub fn neighbors(query: &[f32], train: &EmbeddingSet, k: usize) -> Result<Vec<(usize, f64)>> {
    check_dim(train.dim(), query.len())?;
    check_k(k, train.len())?;
    let nq = norm(query);
    let scored = train
        .rows()
        .enumerate()
        .map(|(i, r)| (i, cosine(query, nq, r, norm(r))))
        .collect();
    Ok(top_k(scored, k))
}

/// Semantic label predicted for one query.
pub fn knn_predict(query: &[f32], train: &EmbeddingSet, labels: &[u32], k: usize) -> Result<u32> {
    ensure!(labels.len() == train.len(), "{} labels for {} training rows", labels.len(), train.len());
    let ranked = neighbors(query, train, k)?;
    Ok(vote(&ranked, labels).expect("k >= 1"))
}

/// Per-k results of evaluating one assignment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeEval {
    pub ks: Vec<usize>,
    /// kNN classification accuracy per k.
    pub accuracy: Vec<f64>,
    /// Mean fraction of the top-k neighbors sharing the query's semantic
    /// label, per k.
    pub semantic_match: Vec<f64>,
}

impl SchemeEval {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.accuracy[i])
    }
}

/// Accuracy of kNN semantic classification when each training image is
/// represented by the tensor column the plan picks for it (possibly
/// depending on the query). `queries` hold the test images already
/// processed with the plan's test class.
pub fn evaluate_scheme(
    queries: &EmbeddingSet,
    query_labels: &[u32],
    train: &VariantEmbeddingTensor,
    train_labels: &[u32],
    plan: &AssignmentPlan,
    ks: &[usize],
) -> Result<SchemeEval> {
    check_dim(train.dim(), queries.dim())?;
    ensure!(query_labels.len() == queries.len(), "{} labels for {} queries", query_labels.len(), queries.len());
    ensure!(train_labels.len() == train.len(), "{} labels for {} training rows", train_labels.len(), train.len());
    ensure!(!ks.is_empty(), "no k values given");
    ensure!(plan.test_class < train.classes(), "plan test class {} out of range", plan.test_class);
    if let crate::plan::PlanRule::PerImage(v) = &plan.rule {
        ensure!(v.len() == train.len(), "plan covers {} rows, training set has {}", v.len(), train.len());
    }
    let n = train.len();
    for &k in ks {
        check_k(k, n)?;
    }
    let kmax = *ks.iter().max().unwrap();
    let m = train.classes();
    // norms[i * m + c]
    let norms: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..m).map(move |c| norm(train.row(i, c))))
        .collect();

    let per_query: Vec<(Vec<bool>, Vec<usize>)> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let query = queries.row(q);
            let nq = norm(query);
            let ql = query_labels[q];
            let scored = (0..n)
                .map(|i| {
                    let c = plan.class_for(i, train_labels[i], ql);
                    (i, cosine(query, nq, train.row(i, c), norms[i * m + c]))
                })
                .collect();
            let ranked = top_k(scored, kmax);
            let mut correct = Vec::with_capacity(ks.len());
            let mut matches = Vec::with_capacity(ks.len());
            for &k in ks {
                correct.push(vote(&ranked[..k], train_labels) == Some(ql));
                matches.push(ranked[..k].iter().filter(|&&(i, _)| train_labels[i] == ql).count());
            }
            (correct, matches)
        })
        .collect();

    let nq = queries.len().max(1) as f64;
    let accuracy = (0..ks.len())
        .map(|j| per_query.iter().filter(|r| r.0[j]).count() as f64 / nq)
        .collect();
    let semantic_match = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| per_query.iter().map(|r| r.1[j] as f64 / k as f64).sum::<f64>() / nq)
        .collect();
    Ok(SchemeEval {
        ks: ks.to_vec(),
        accuracy,
        semantic_match,
    })
}

/// Percentage of each point's top-k neighbors (itself excluded) sharing its
/// metadata label, averaged over all points, for every k in `ks`.
pub fn neighbor_match_rate(set: &EmbeddingSet, meta_labels: &[usize], ks: &[usize]) -> Result<Vec<f64>> {
    let n = set.len();
    ensure!(meta_labels.len() == n, "{} labels for {} rows", meta_labels.len(), n);
    ensure!(!ks.is_empty(), "no k values given");
    for &k in ks {
        if k == 0 || k >= n {
            return Err(Error::InvalidK { k, n });
        }
    }
    let kmax = *ks.iter().max().unwrap();
    let norms: Vec<f64> = set.rows().map(norm).collect();
    let hits: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|q| {
            let query = set.row(q);
            let scored = (0..n)
                .filter(|&i| i != q)
                .map(|i| (i, cosine(query, norms[q], set.row(i), norms[i])))
                .collect();
            let ranked = top_k(scored, kmax);
            ks.iter()
                .map(|&k| ranked[..k].iter().filter(|&&(i, _)| meta_labels[i] == meta_labels[q]).count())
                .collect()
        })
        .collect();
    Ok(ks
        .iter()
        .enumerate()
        .map(|(j, &k)| 100.0 * hits.iter().map(|h| h[j] as f64 / k as f64).sum::<f64>() / n as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub rank: usize,
    pub id: String,
    pub similarity: f64,
    pub semantic_label: u32,
    pub meta_label: usize,
}

/// Top-k database entries for `query`. With `exclude_id`, the database row
/// carrying that id is skipped (a query's own entry).
pub fn dump_neighbors(
    query: &[f32],
    database: &EmbeddingSet,
    semantic: &[u32],
    meta: &[usize],
    k: usize,
    exclude_id: Option<&str>,
) -> Result<Vec<NeighborEntry>> {
    check_dim(database.dim(), query.len())?;
    ensure!(
        semantic.len() == database.len() && meta.len() == database.len(),
        "label count does not match the database"
    );
    let nq = norm(query);
    let scored: Vec<(usize, f64)> = database
        .rows()
        .enumerate()
        .filter(|(i, _)| exclude_id != Some(database.ids()[*i].as_str()))
        .map(|(i, r)| (i, cosine(query, nq, r, norm(r))))
        .collect();
    check_k(k, scored.len())?;
    Ok(top_k(scored, k)
        .into_iter()
        .enumerate()
        .map(|(rank, (i, s))| NeighborEntry {
            rank: rank + 1,
            id: database.ids()[i].clone(),
            similarity: s,
            semantic_label: semantic[i],
            meta_label: meta[i],
        })
        .collect())
}
