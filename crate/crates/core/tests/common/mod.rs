//! Brute-force oracles and synthetic data shared by the integration tests.
//!
//! The oracles materialize every training matrix explicitly and rank with a
//! full stable sort, so they share no code with the engine beyond the data
//! containers.
#![allow(dead_code)]

use std::collections::BTreeMap;

use metatrace_core::data::{
    save_variants, write_manifest, CameraType, EmbeddingSet, Family, LabelSpace, SampleRecord, VariantEmbeddingTensor,
};
use metatrace_core::plan::{AssignmentScheme, SchemeKind};
use metatrace_core::report::{Experiment, KnnExperiment, RunConfig};
use metatrace_core::retrieval::RetrievalInstance;
use metatrace_core::seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:05}")).collect()
}

/// A random row. With `coarse`, entries come from {-2..2} so that exact
/// similarity ties are common.
pub fn random_row(rng: &mut impl Rng, d: usize, coarse: bool) -> Vec<f32> {
    (0..d)
        .map(|_| {
            if coarse {
                rng.gen_range(-2i32..=2) as f32
            } else {
                normal(rng) as f32
            }
        })
        .collect()
}

pub fn random_set(rng: &mut impl Rng, prefix: &str, n: usize, d: usize, coarse: bool) -> EmbeddingSet {
    let rows: Vec<Vec<f32>> = (0..n).map(|_| random_row(rng, d, coarse)).collect();
    EmbeddingSet::from_rows("synthetic", ids(prefix, n), &rows).unwrap()
}

pub fn random_tensor(rng: &mut impl Rng, space: &LabelSpace, n: usize, d: usize, coarse: bool) -> VariantEmbeddingTensor {
    let m = space.len();
    let data = (0..n * m).flat_map(|_| random_row(rng, d, coarse)).collect();
    VariantEmbeddingTensor::new("synthetic", d, ids("t", n), space.clone(), data, false).unwrap()
}

// ---------------------------------------------------------------- oracles

pub fn oracle_cos(a: &[f32], b: &[f32]) -> f64 {
    let dot = |x: &[f32], y: &[f32]| -> f64 { x.iter().zip(y).map(|(&p, &q)| p as f64 * q as f64).sum() };
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// All rows ranked by similarity, descending; a stable sort keeps equal
/// similarities in row order.
pub fn oracle_rank(query: &[f32], rows: &[&[f32]]) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = rows.iter().enumerate().map(|(i, r)| (i, oracle_cos(query, r))).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored
}

/// Plurality over the first `k`; among tied classes the one seen first wins.
pub fn oracle_vote(ranked: &[(usize, f64)], labels: &[u32], k: usize) -> u32 {
    let top = &ranked[..k];
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &(i, _) in top {
        *counts.entry(labels[i]).or_default() += 1;
    }
    let best = *counts.values().max().unwrap();
    top.iter()
        .map(|&(i, _)| labels[i])
        .find(|l| counts[l] == best)
        .unwrap()
}

/// Training classes for one query, read straight off the scheme definition.
pub fn oracle_classes(scheme: &AssignmentScheme, train_ids: &[String], train_labels: &[u32], query_label: u32, m: usize) -> Vec<usize> {
    train_ids
        .iter()
        .zip(train_labels)
        .map(|(id, &l)| match *scheme {
            AssignmentScheme::AllSame { test } => test,
            AssignmentScheme::AllDiff { train, .. } => train,
            AssignmentScheme::PosSame { test, other } => {
                if l == query_label {
                    test
                } else {
                    other
                }
            }
            AssignmentScheme::NegSame { test, other } => {
                if l == query_label {
                    other
                } else {
                    test
                }
            }
            AssignmentScheme::Uniform { seed, .. } => {
                seed::keyed_stream(seed, "uniform-assignment", id).gen_range(0..m)
            }
        })
        .collect()
}

pub fn scheme_test_class(scheme: &AssignmentScheme) -> usize {
    match *scheme {
        AssignmentScheme::AllSame { test }
        | AssignmentScheme::AllDiff { test, .. }
        | AssignmentScheme::PosSame { test, .. }
        | AssignmentScheme::NegSame { test, .. }
        | AssignmentScheme::Uniform { test, .. } => test,
    }
}

/// (accuracy, semantic match) per k, materializing one training matrix per
/// query.
pub fn oracle_evaluate(
    queries: &EmbeddingSet,
    query_labels: &[u32],
    train: &VariantEmbeddingTensor,
    train_labels: &[u32],
    scheme: &AssignmentScheme,
    ks: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut correct = vec![0usize; ks.len()];
    let mut matched = vec![0.0f64; ks.len()];
    for q in 0..queries.len() {
        let classes = oracle_classes(scheme, train.ids(), train_labels, query_labels[q], train.classes());
        let rows: Vec<&[f32]> = classes.iter().enumerate().map(|(i, &c)| train.row(i, c)).collect();
        let ranked = oracle_rank(queries.row(q), &rows);
        for (j, &k) in ks.iter().enumerate() {
            if oracle_vote(&ranked, train_labels, k) == query_labels[q] {
                correct[j] += 1;
            }
            let same = ranked[..k].iter().filter(|&&(i, _)| train_labels[i] == query_labels[q]).count();
            matched[j] += same as f64 / k as f64;
        }
    }
    let nq = queries.len() as f64;
    (
        correct.iter().map(|&c| c as f64 / nq).collect(),
        matched.iter().map(|&s| s / nq).collect(),
    )
}

pub fn oracle_match_rate(set: &EmbeddingSet, meta: &[usize], k: usize) -> f64 {
    let n = set.len();
    let mut sum = 0.0;
    for q in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        let rows: Vec<&[f32]> = others.iter().map(|&i| set.row(i)).collect();
        let ranked = oracle_rank(set.row(q), &rows);
        let hits = ranked[..k].iter().filter(|&&(j, _)| meta[others[j]] == meta[q]).count();
        sum += hits as f64 / k as f64;
    }
    100.0 * sum / n as f64
}

/// 1-based rank of the positive among positive and negatives, ties broken
/// by embedding row.
pub fn oracle_positive_rank(inst: &RetrievalInstance, set: &EmbeddingSet) -> usize {
    let index = set.index();
    let q = set.row(index[inst.query_id.as_str()]);
    let mut candidates: Vec<usize> = inst.negative_ids.iter().map(|id| index[id.as_str()]).collect();
    let p = index[inst.positive_id.as_str()];
    candidates.push(p);
    candidates.sort_unstable();
    let rows: Vec<&[f32]> = candidates.iter().map(|&i| set.row(i)).collect();
    let ranked = oracle_rank(q, &rows);
    ranked.iter().position(|&(j, _)| candidates[j] == p).unwrap() + 1
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ------------------------------------------------------ synthetic geometry

/// Semantic and metadata structure coupled in one space:
/// `x = e_semantic + lambda * e_(S + meta) + noise`, with the noise shared by
/// all variants of an image.
pub struct Coupled {
    pub space: LabelSpace,
    pub train: VariantEmbeddingTensor,
    pub train_labels: Vec<u32>,
    pub test: VariantEmbeddingTensor,
    pub test_labels: Vec<u32>,
}

#[allow(clippy::too_many_arguments)]
pub fn coupled_geometry(
    family: Family,
    semantic: usize,
    d: usize,
    n_train: usize,
    n_test: usize,
    lambda: f64,
    sigma: f64,
    seed: u64,
) -> Coupled {
    let space = LabelSpace::canonical(family);
    let m = space.len();
    assert!(d >= semantic + m, "dimension too small for orthonormal dictionaries");
    let mut rng = rng(seed);
    let mut build = |prefix: &str, n: usize| {
        let labels: Vec<u32> = (0..n).map(|i| (i % semantic) as u32).collect();
        let mut data = Vec::with_capacity(n * m * d);
        for &y in &labels {
            let noise: Vec<f64> = (0..d).map(|_| sigma * normal(&mut rng)).collect();
            for c in 0..m {
                data.extend((0..d).map(|j| {
                    let mut v = noise[j];
                    if j == y as usize {
                        v += 1.0;
                    }
                    if j == semantic + c {
                        v += lambda;
                    }
                    v as f32
                }));
            }
        }
        let t = VariantEmbeddingTensor::new("coupled", d, ids(prefix, n), space.clone(), data, false).unwrap();
        (t, labels)
    };
    let (train, train_labels) = build("tr", n_train);
    let (test, test_labels) = build("te", n_test);
    Coupled {
        space,
        train,
        train_labels,
        test,
        test_labels,
    }
}

/// Paired captures of `pairs` objects drawn around `clusters` random
/// centres. Each capture adds `lambda` along its camera type's direction
/// (the first two axes) plus capture noise of norm about `eta`; objects
/// spread around their centre with norm about `tau`.
pub fn paired_captures(pairs: usize, d: usize, clusters: usize, tau: f64, eta: f64, lambda: f64, seed: u64) -> (Vec<SampleRecord>, EmbeddingSet) {
    let mut rng = rng(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let mut records = Vec::with_capacity(2 * pairs);
    let mut ids = Vec::with_capacity(2 * pairs);
    let mut rows = Vec::with_capacity(2 * pairs);
    for p in 0..pairs {
        let object: Vec<f64> = centres[p % clusters]
            .iter()
            .map(|c| c + tau * scale * normal(&mut rng))
            .collect();
        for (axis, t) in [(0, CameraType::Smart), (1, CameraType::NonSmart)] {
            let id = format!("pair{p:04}-{}", t.as_str());
            let row: Vec<f32> = object
                .iter()
                .enumerate()
                .map(|(j, &o)| {
                    let cam = if j == axis { lambda } else { 0.0 };
                    (o + cam + eta * scale * normal(&mut rng)) as f32
                })
                .collect();
            let mut r = SampleRecord::new(&id, format!("{id}.jpg"), (p % clusters) as u32);
            r.pair_id = Some(format!("pair{p:04}"));
            r.camera_type = Some(t);
            records.push(r);
            ids.push(id);
            rows.push(row);
        }
    }
    (records, EmbeddingSet::from_rows("paired", ids, &rows).unwrap())
}

/// Unit-norm random directions plus `offset` times a class-specific unit
/// vector (the first `m` axes).
pub fn planted(n: usize, d: usize, m: usize, offset: f64, prefix: &str, rng: &mut impl Rng) -> (EmbeddingSet, Vec<usize>) {
    let labels: Vec<usize> = (0..n).map(|i| i % m).collect();
    let rows: Vec<Vec<f32>> = labels
        .iter()
        .map(|&y| {
            let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter()
                .enumerate()
                .map(|(j, x)| (x / norm + if j == y { offset } else { 0.0 }) as f32)
                .collect()
        })
        .collect();
    (EmbeddingSet::from_rows("planted", ids(prefix, n), &rows).unwrap(), labels)
}

/// Writes `train.mte`, `test.mte` and `manifest.jsonl` for `c` into `dir`
/// and returns a knn run over them.
pub fn write_knn_inputs(dir: &std::path::Path, c: &Coupled, schemes: &[SchemeKind]) -> RunConfig {
    save_variants(&c.train, dir.join("train.mte")).unwrap();
    save_variants(&c.test, dir.join("test.mte")).unwrap();
    let records: Vec<SampleRecord> = c
        .train
        .ids()
        .iter()
        .zip(&c.train_labels)
        .chain(c.test.ids().iter().zip(&c.test_labels))
        .map(|(id, &l)| SampleRecord::new(id, format!("{id}.png"), l))
        .collect();
    write_manifest(&records, dir.join("manifest.jsonl")).unwrap();
    let mut cfg = RunConfig::new(Experiment::Knn(KnnExperiment {
        family: Some(c.space.family()),
        train_tensor: "train.mte".into(),
        test_tensor: "test.mte".into(),
        train_manifest: "manifest.jsonl".into(),
        test_manifest: None,
        schemes: schemes.to_vec(),
        ks: vec![1, 10],
        uniform_seeds: 10,
        dump_neighbors: 0,
    }));
    cfg.base_dir = Some(dir.to_path_buf());
    cfg
}
