use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{aggregate, sha256_file, Cell, EvalReport, Provenance, RunConfig, REPORT_SCHEMA};
use super::config::*;
use crate::data::{
    load_embeddings, load_variants, read_manifest, read_manifest_csv, EmbeddingSet, Family, LabelSpace,
    SampleRecord, VariantEmbeddingTensor,
};
use crate::error::{ensure, Error, Result};
use crate::exif::{build_acquisition_split, AcquisitionLabeler, BinningConfig, SplitEntry, SplitRule};
use crate::knn::{self, K_GRID};
use crate::plan::{assign_uniform, enumerate_setup_grid, uniform_seeds, PlanRule};
use crate::probe::{evaluate_probe, random_baseline, train_probe, train_probe_fixed, train_probe_with_val};
use crate::retrieval::{build_instances, recall_at_k};

pub(crate) fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_manifest_csv(path),
        _ => read_manifest(path),
    }
}

fn semantic_labels(ids: &[String], records: &[SampleRecord]) -> Result<Vec<u32>> {
    let by_id: HashMap<&str, u32> = records.iter().map(|r| (r.sample_id.as_str(), r.semantic_label)).collect();
    ids.iter()
        .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| Error::MissingId(id.clone())))
        .collect()
}

fn check_family(expected: Option<Family>, space: &LabelSpace) -> Result<()> {
    if let Some(f) = expected {
        ensure!(space.family() == f, "tensor holds `{}` variants, config says `{f}`", space.family());
    }
    Ok(())
}

fn labeler(cfg: &RunConfig, family: Family, path: Option<&Path>) -> Result<AcquisitionLabeler> {
    let labeler = match path {
        Some(p) => AcquisitionLabeler::Binning(BinningConfig::load(cfg.resolve(p))?),
        None => AcquisitionLabeler::builtin(family)?,
    };
    ensure!(labeler.family() == family, "binning config is for `{}`, not `{family}`", labeler.family());
    Ok(labeler)
}

/// Runs the configured protocol over its full grid.
pub fn run_experiment(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let started = Instant::now();
    let (cells, extras) = match &cfg.experiment {
        Experiment::Knn(e) => run_knn(cfg, e)?,
        Experiment::ProcessingProbe(e) => run_processing_probe(cfg, e)?,
        Experiment::AcquisitionProbe(e) => run_acquisition_probe(cfg, e)?,
        Experiment::Retrieval(e) => run_retrieval(cfg, e)?,
        Experiment::Histogram(e) => run_histogram(cfg, e)?,
        Experiment::MatchRate(e) => run_match_rate(cfg, e)?,
    };
    let mut inputs = BTreeMap::new();
    for p in cfg.experiment.inputs() {
        inputs.insert(p.display().to_string(), sha256_file(&cfg.resolve(p))?);
    }
    let report = EvalReport {
        schema: REPORT_SCHEMA.to_owned(),
        toolkit_version: crate::TOOLKIT_VERSION.to_owned(),
        config: cfg.clone(),
        aggregates: aggregate(&cells),
        cells,
        extras,
        provenance: Provenance {
            master_seed: cfg.master_seed,
            config_hash: cfg.hash(),
            inputs,
        },
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    report.verify()?;
    Ok(report)
}

type Outcome = (Vec<Cell>, serde_json::Value);

fn run_knn(cfg: &RunConfig, e: &KnnExperiment) -> Result<Outcome> {
    let train = load_variants(cfg.resolve(&e.train_tensor))?;
    let test = load_variants(cfg.resolve(&e.test_tensor))?;
    let space = train.space().clone();
    check_family(e.family, &space)?;
    ensure!(test.space() == &space, "train and test tensors use different label spaces");
    let train_records = load_manifest(&cfg.resolve(&e.train_manifest))?;
    let test_records = match &e.test_manifest {
        Some(p) => load_manifest(&cfg.resolve(p))?,
        None => train_records.clone(),
    };
    let train_labels = semantic_labels(train.ids(), &train_records)?;
    let test_labels = semantic_labels(test.ids(), &test_records)?;
    let n = train.len();
    for &k in &e.ks {
        if k > n {
            return Err(Error::InvalidK { k, n });
        }
    }
    let mut ks: Vec<usize> = e.ks.iter().copied().chain(K_GRID.into_iter().filter(|&k| k <= n)).collect();
    ks.sort_unstable();
    ks.dedup();

    let seeds = uniform_seeds(cfg.master_seed, e.uniform_seeds);
    let schemes: Vec<_> = e
        .schemes
        .iter()
        .flat_map(|&kind| enumerate_setup_grid(&space, kind, &seeds))
        .collect();
    let cells = schemes
        .par_iter()
        .map(|scheme| {
            let label = scheme.label(&space);
            let run = || -> Result<Cell> {
                let plan = scheme.plan(train.ids(), &space)?;
                let queries = test.column(scheme.test_class())?;
                let eval = knn::evaluate_scheme(&queries, &test_labels, &train, &train_labels, &plan, &ks)?;
                let mut metrics = BTreeMap::new();
                for (i, &k) in ks.iter().enumerate() {
                    metrics.insert(format!("accuracy@{k}"), eval.accuracy[i]);
                    metrics.insert(format!("semantic_match@{k}"), eval.semantic_match[i]);
                }
                Ok(Cell {
                    group: scheme.kind().to_string(),
                    label: label.clone(),
                    params: serde_json::to_value(scheme)?,
                    metrics,
                })
            };
            run().map_err(|err| err.in_cell(label.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut extras = json!({ "ks": ks, "n_train": n, "n_test": test.len() });
    if e.dump_neighbors > 0 {
        let mut dumps = BTreeMap::new();
        for &kind in &e.schemes {
            let Some(scheme) = enumerate_setup_grid(&space, kind, &seeds).into_iter().next() else {
                continue;
            };
            let plan = scheme.plan(train.ids(), &space)?;
            let queries = test.column(scheme.test_class())?;
            let k = 10.min(n);
            let mut entries = Vec::new();
            for q in 0..e.dump_neighbors.min(queries.len()) {
                let classes = plan.classes_for_query(&train_labels, test_labels[q]);
                let db = train.gather(&classes)?;
                let neighbors = knn::dump_neighbors(queries.row(q), &db, &train_labels, &classes, k, None)?;
                entries.push(json!({
                    "query_id": queries.ids()[q],
                    "semantic_label": test_labels[q],
                    "meta_label": scheme.test_class(),
                    "neighbors": neighbors,
                }));
            }
            dumps.insert(scheme.label(&space), entries);
        }
        extras["neighbors"] = serde_json::to_value(dumps)?;
    }
    Ok((cells, extras))
}

fn run_processing_probe(cfg: &RunConfig, e: &ProcessingProbeExperiment) -> Result<Outcome> {
    let train = load_variants(cfg.resolve(&e.train_tensor))?;
    let test = load_variants(cfg.resolve(&e.test_tensor))?;
    let space = train.space().clone();
    check_family(e.family, &space)?;
    ensure!(test.space() == &space, "train and test tensors use different label spaces");
    let m = space.len();
    let columns: Vec<EmbeddingSet> = (0..m).map(|c| test.column(c)).collect::<Result<_>>()?;

    let seeds = uniform_seeds(cfg.master_seed, e.uniform_seeds);
    let mut cells = Vec::new();
    let mut tuning = serde_json::Value::Null;
    let mut chosen = None;
    for (si, &seed) in seeds.iter().enumerate() {
        let plan = assign_uniform(train.ids(), &space, seed)?;
        let PlanRule::PerImage(classes) = &plan.rule else { unreachable!() };
        let x = train.gather(classes)?;
        let probe_cfg = crate::probe::ProbeConfig { seed, ..e.probe.clone() };
        let cell_name = format!("seed-{seed}");
        let model = match chosen {
            // hyperparameters are tuned on the first seed only
            None => {
                let fit = train_probe(&x, classes, m, &probe_cfg).map_err(|err| err.in_cell(cell_name.clone()))?;
                chosen = Some(fit.model.hyperparams);
                tuning = json!({
                    "seed": seed,
                    "trials": fit.trials,
                    "chosen_trial": fit.chosen_trial,
                    "hyperparams": fit.model.hyperparams,
                    "best_val_accuracy": fit.best_val_accuracy,
                    "final_val_accuracy": fit.final_val_accuracy,
                    "final_train_accuracy": fit.final_train_accuracy,
                });
                fit.model
            }
            Some(hp) => train_probe_fixed(&x, classes, m, hp, &probe_cfg)
                .map_err(|err| err.in_cell(cell_name.clone()))?,
        };
        for (p, col) in columns.iter().enumerate() {
            let acc = evaluate_probe(&model, col, &vec![p; col.len()])?;
            cells.push(Cell {
                group: "uniform".to_owned(),
                label: format!("seed-{seed}/{}", space.name(p).unwrap_or("?")),
                params: json!({ "seed": seed, "seed_index": si, "test": p }),
                metrics: [("accuracy".to_owned(), acc)].into(),
            });
        }
    }
    let extras = json!({
        "family": space.family(),
        "classes": space.class_names(),
        "random_baseline": random_baseline(m),
        "normalize": e.probe.normalize,
        "tuning": tuning,
    });
    Ok((cells, extras))
}

fn gather_split(set: &EmbeddingSet, entries: &[SplitEntry]) -> Result<(EmbeddingSet, Vec<usize>)> {
    let index = set.index();
    let rows = entries
        .iter()
        .map(|e| index.get(e.sample_id.as_str()).copied().ok_or_else(|| Error::MissingId(e.sample_id.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok((set.select(&rows)?, entries.iter().map(|e| e.class).collect()))
}

fn run_acquisition_probe(cfg: &RunConfig, e: &AcquisitionProbeExperiment) -> Result<Outcome> {
    let records = load_manifest(&cfg.resolve(&e.manifest))?;
    let labeler = labeler(cfg, e.family, e.binning_config.as_deref())?;
    let rule = e.split_rule.unwrap_or_else(|| SplitRule::for_family(e.family));
    let split = build_acquisition_split(&records, &labeler, rule, cfg.master_seed)?;
    let set = load_embeddings(cfg.resolve(&e.embeddings))?;
    let (train, train_y) = gather_split(&set, &split.train)?;
    let (val, val_y) = gather_split(&set, &split.val)?;
    let (test, test_y) = gather_split(&set, &split.test)?;
    let m = split.classes.len();
    let probe_cfg = crate::probe::ProbeConfig {
        seed: cfg.master_seed,
        ..e.probe.clone()
    };
    let fit = train_probe_with_val(&train, &train_y, &val, &val_y, m, &probe_cfg)
        .map_err(|err| err.in_cell(e.family.to_string()))?;
    let acc = evaluate_probe(&fit.model, &test, &test_y)?;
    let cells = vec![Cell {
        group: e.family.to_string(),
        label: set.encoder_tag().to_owned(),
        params: json!({ "classes": m }),
        metrics: [
            ("accuracy".to_owned(), acc),
            ("random_baseline".to_owned(), random_baseline(m)),
        ]
        .into(),
    }];
    let extras = json!({
        "classes": split.classes,
        "split": { "train": split.train.len(), "val": split.val.len(), "test": split.test.len() },
        "audit": split.audit,
        "split_provenance": split.provenance,
        "trials": fit.trials,
        "chosen_trial": fit.chosen_trial,
        "hyperparams": fit.model.hyperparams,
        "best_val_accuracy": fit.best_val_accuracy,
        "final_val_accuracy": fit.final_val_accuracy,
    });
    Ok((cells, extras))
}

fn run_retrieval(cfg: &RunConfig, e: &RetrievalExperiment) -> Result<Outcome> {
    let records = load_manifest(&cfg.resolve(&e.manifest))?;
    let mut cells = Vec::new();
    let mut scatter = Vec::new();
    let mut per_query = Vec::new();
    for path in &e.embeddings {
        let set = load_embeddings(cfg.resolve(path))?;
        let encoder = set.encoder_tag().to_owned();
        let mut point = BTreeMap::new();
        for &mode in &e.modes {
            let instances = build_instances(&records, mode)?;
            let rep = recall_at_k(&instances, &set, &e.ks).map_err(|err| err.in_cell(format!("{encoder}/{}", mode.as_str())))?;
            let mut metrics = BTreeMap::new();
            for (i, &k) in e.ks.iter().enumerate() {
                metrics.insert(format!("recall@{k}"), rep.recall[i]);
                for (dir, r) in &rep.recall_by_direction {
                    metrics.insert(format!("recall@{k}/{dir}"), r[i]);
                }
            }
            point.insert(mode.as_str(), rep.recall[0]);
            per_query.push(json!({ "encoder": encoder, "mode": mode, "queries": rep.queries }));
            cells.push(Cell {
                group: mode.as_str().to_owned(),
                label: encoder.clone(),
                params: json!({ "encoder": encoder, "mode": mode, "n_queries": rep.n_queries }),
                metrics,
            });
        }
        scatter.push(json!({ "encoder": encoder, "recall": point }));
    }
    Ok((cells, json!({ "k": e.ks[0], "scatter": scatter, "per_query": per_query })))
}

fn run_histogram(cfg: &RunConfig, e: &HistogramExperiment) -> Result<Outcome> {
    let tensor: VariantEmbeddingTensor = load_variants(cfg.resolve(&e.tensor))?;
    let records = load_manifest(&cfg.resolve(&e.manifest))?;
    let semantic = semantic_labels(tensor.ids(), &records)?;
    let space = tensor.space().clone();
    let plan = assign_uniform(tensor.ids(), &space, cfg.master_seed)?;
    let PlanRule::PerImage(meta) = plan.rule else { unreachable!() };
    let db = tensor.gather(&meta)?;
    let q = e.max_queries.unwrap_or(db.len()).min(db.len());
    let rows: Vec<usize> = (0..q).collect();
    let queries = db.select(&rows)?;
    let hist = knn::similarity_histogram(&queries, &semantic[..q], &meta[..q], &db, &semantic, &meta, e.bins)?;
    let cells = hist
        .cells
        .iter()
        .map(|c| {
            let name = cell_name(c.same_semantic, c.same_meta);
            let mut metrics = BTreeMap::from([("count".to_owned(), c.total as f64)]);
            if let Some(m) = c.mean {
                metrics.insert("mean_similarity".to_owned(), m);
            }
            Cell {
                group: name.clone(),
                label: name,
                params: json!({ "same_semantic": c.same_semantic, "same_meta": c.same_meta }),
                metrics,
            }
        })
        .collect();
    Ok((cells, json!({ "family": space.family(), "queries": q, "database": db.len(), "histogram": hist })))
}

pub(crate) fn cell_name(same_semantic: bool, same_meta: bool) -> String {
    format!(
        "{}-sem_{}-meta",
        if same_semantic { "same" } else { "diff" },
        if same_meta { "same" } else { "diff" }
    )
}

fn run_match_rate(cfg: &RunConfig, e: &MatchRateExperiment) -> Result<Outcome> {
    let records = load_manifest(&cfg.resolve(&e.manifest))?;
    let labeler = labeler(cfg, e.family, e.binning_config.as_deref())?;
    let labels: HashMap<&str, usize> = records
        .iter()
        .filter_map(|r| labeler.label(r).class().map(|c| (r.sample_id.as_str(), c)))
        .collect();
    let mut cells = Vec::new();
    for path in &e.embeddings {
        let set = load_embeddings(cfg.resolve(path))?;
        let rows: Vec<usize> = (0..set.len()).filter(|&i| labels.contains_key(set.ids()[i].as_str())).collect();
        let sub = set.select(&rows)?;
        let meta: Vec<usize> = sub.ids().iter().map(|id| labels[id.as_str()]).collect();
        let rates = knn::neighbor_match_rate(&sub, &meta, &e.ks).map_err(|err| err.in_cell(set.encoder_tag().to_owned()))?;
        cells.push(Cell {
            group: e.family.to_string(),
            label: set.encoder_tag().to_owned(),
            params: json!({ "encoder": set.encoder_tag(), "n": sub.len(), "dropped": set.len() - sub.len() }),
            metrics: e.ks.iter().zip(rates).map(|(k, r)| (format!("match@{k}"), r)).collect(),
        });
    }
    Ok((cells, json!({ "class_names": labeler.class_names() })))
}
