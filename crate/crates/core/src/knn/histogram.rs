use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cosine, norm};
use crate::data::EmbeddingSet;
use crate::error::{ensure, Result};

/// One of the four conditional distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub same_semantic: bool,
    pub same_meta: bool,
    pub counts: Vec<u64>,
    /// Counts normalized to sum to one (all zero for an empty cell).
    pub density: Vec<f64>,
    pub total: u64,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHistogram {
    /// `bins + 1` equally spaced edges over [-1, 1].
    pub bin_edges: Vec<f64>,
    /// Ordered (same sem, same meta), (same sem, diff meta),
    /// (diff sem, same meta), (diff sem, diff meta).
    pub cells: Vec<HistogramCell>,
}

impl SimilarityHistogram {
    pub fn cell(&self, same_semantic: bool, same_meta: bool) -> &HistogramCell {
        &self.cells[cell_index(same_semantic, same_meta)]
    }
}

fn cell_index(same_semantic: bool, same_meta: bool) -> usize {
    (!same_semantic as usize) * 2 + !same_meta as usize
}

/// Distribution of query-to-database cosine similarities split by whether
/// the pair shares its semantic label and its metadata label. Pairs whose
/// ids are equal (a query against itself) are skipped.
#[allow(clippy::too_many_arguments)]
pub fn similarity_histogram(
    queries: &EmbeddingSet,
    query_semantic: &[u32],
    query_meta: &[usize],
    database: &EmbeddingSet,
    db_semantic: &[u32],
    db_meta: &[usize],
    bins: usize,
) -> Result<SimilarityHistogram> {
    ensure!(bins >= 2, "need at least two bins, got {bins}");
    ensure!(queries.dim() == database.dim(), "query and database dimensions differ");
    ensure!(
        query_semantic.len() == queries.len() && query_meta.len() == queries.len(),
        "query label count does not match the queries"
    );
    ensure!(
        db_semantic.len() == database.len() && db_meta.len() == database.len(),
        "database label count does not match the database"
    );
    let db_norms: Vec<f64> = database.rows().map(norm).collect();
    let width = 2.0 / bins as f64;
    let bin_of = |s: f64| (((s + 1.0) / width).floor().max(0.0) as usize).min(bins - 1);

    let partials: Vec<(Vec<u64>, [f64; 4])> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let mut counts = vec![0u64; 4 * bins];
            let mut sums = [0.0f64; 4];
            let query = queries.row(q);
            let nq = norm(query);
            let qid = &queries.ids()[q];
            for (i, row) in database.rows().enumerate() {
                if &database.ids()[i] == qid {
                    continue;
                }
                let s = cosine(query, nq, row, db_norms[i]);
                let c = cell_index(query_semantic[q] == db_semantic[i], query_meta[q] == db_meta[i]);
                counts[c * bins + bin_of(s)] += 1;
                sums[c] += s;
            }
            (counts, sums)
        })
        .collect();

    // reduce in query order so sums do not depend on scheduling
    let mut counts = vec![0u64; 4 * bins];
    let mut sums = [0.0f64; 4];
    for (c, s) in &partials {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
    }
    let cells = (0..4)
        .map(|c| {
            let counts = counts[c * bins..(c + 1) * bins].to_vec();
            let total: u64 = counts.iter().sum();
            let density = counts
                .iter()
                .map(|&n| if total == 0 { 0.0 } else { n as f64 / total as f64 })
                .collect();
            HistogramCell {
                same_semantic: c < 2,
                same_meta: c % 2 == 0,
                counts,
                density,
                total,
                mean: (total > 0).then(|| sums[c] / total as f64),
            }
        })
        .collect();
    Ok(SimilarityHistogram {
        bin_edges: (0..=bins).map(|i| -1.0 + i as f64 * width).collect(),
        cells,
    })
}
