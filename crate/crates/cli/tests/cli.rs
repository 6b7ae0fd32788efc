use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use metatrace_core::data::{
    read_manifest, save_variants, write_manifest, Family, LabelSpace, SampleRecord, VariantEmbeddingTensor,
};
use metatrace_core::pipeline::{read_ledger, RgbImage};
use metatrace_core::report::EvalReport;

fn metatrace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metatrace"))
        .current_dir(dir)
        .env("METATRACE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Sharpening tensors where every coordinate is a small deterministic
/// function of (image, class, dim), plus a manifest with 3 semantic labels.
fn write_knn_fixture(dir: &Path) {
    let space = LabelSpace::canonical(Family::Sharpening);
    let tensor = |prefix: &str, n: usize, salt: usize| {
        let ids: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
        let data = (0..n * 3 * 4)
            .map(|j| {
                let (i, d) = (j / 12, j % 4);
                let base = if d == i % 3 { 1.0 } else { 0.0 };
                base + ((j * 7919 + salt) % 97) as f32 / 400.0
            })
            .collect();
        VariantEmbeddingTensor::new("fixture", 4, ids, space.clone(), data, false).unwrap()
    };
    let train = tensor("tr", 24, 1);
    let test = tensor("te", 9, 2);
    save_variants(&train, dir.join("train.mte")).unwrap();
    save_variants(&test, dir.join("test.mte")).unwrap();
    let records: Vec<SampleRecord> = train
        .ids()
        .iter()
        .chain(test.ids())
        .map(|id| {
            let i: u32 = id[2..].parse().unwrap();
            SampleRecord::new(id, format!("{id}.png"), i % 3)
        })
        .collect();
    write_manifest(&records, dir.join("manifest.jsonl")).unwrap();
}

#[test]
fn knn_run_writes_a_checkable_report() {
    let dir = tempfile::tempdir().unwrap();
    write_knn_fixture(dir.path());
    let out = metatrace(
        dir.path(),
        &[
            "knn", "--train-tensor", "train.mte", "--test-tensor", "test.mte", "--manifest", "manifest.jsonl",
            "--scheme", "all-same", "--scheme", "pos-same", "--k", "1", "--k", "3", "--out", "runs",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("all-same"));

    let hash_dir = std::fs::read_dir(dir.path().join("runs")).unwrap().next().unwrap().unwrap().path();
    let report_path = hash_dir.join("run-001").join("report.json");
    let report = EvalReport::load(&report_path).unwrap();
    assert_eq!(report.cells.len(), 3 + 6);
    assert!(report.aggregate("pos-same").unwrap().metrics.contains_key("accuracy@3"));

    let check = metatrace(dir.path(), &["report", "check", report_path.to_str().unwrap()]);
    assert!(check.status.success(), "{}", stderr(&check));
    assert!(stdout(&check).starts_with("ok: 9 cells, 2 aggregates"));

    let export = metatrace(
        dir.path(),
        &["report", "export", report_path.to_str().unwrap(), "--kind", "cells", "--out-dir", "tables"],
    );
    assert!(export.status.success(), "{}", stderr(&export));
    assert!(dir.path().join("tables/cells.tsv").is_file());

    // the same run again lands in a new directory
    let again = metatrace(
        dir.path(),
        &[
            "knn", "--train-tensor", "train.mte", "--test-tensor", "test.mte", "--manifest", "manifest.jsonl",
            "--scheme", "all-same", "--scheme", "pos-same", "--k", "1", "--k", "3", "--out", "runs",
        ],
    );
    assert!(again.status.success());
    assert!(hash_dir.join("run-002/report.json").is_file());
}

#[test]
fn config_file_drives_report_run() {
    let dir = tempfile::tempdir().unwrap();
    write_knn_fixture(dir.path());
    std::fs::write(
        dir.path().join("knn.toml"),
        "master_seed = 3\nout_dir = \"out\"\n\n[experiment]\nprotocol = \"knn\"\ntrain_tensor = \"train.mte\"\n\
         test_tensor = \"test.mte\"\ntrain_manifest = \"manifest.jsonl\"\nschemes = [\"uniform\"]\nuniform_seeds = 2\nks = [1]\n",
    )
    .unwrap();
    let out = metatrace(dir.path(), &["report", "run", "knn.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("out")).unwrap().collect();
    assert_eq!(runs.len(), 1);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    write_knn_fixture(dir.path());
    let missing = metatrace(
        dir.path(),
        &["knn", "--train-tensor", "nope.mte", "--test-tensor", "test.mte", "--manifest", "manifest.jsonl"],
    );
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("nope.mte"));

    let big_k = metatrace(
        dir.path(),
        &["knn", "--train-tensor", "train.mte", "--test-tensor", "test.mte", "--manifest", "manifest.jsonl", "--k", "25"],
    );
    assert_eq!(big_k.status.code(), Some(2), "{}", stderr(&big_k));

    let scheme = metatrace(dir.path(), &["plan", "--family", "jpeg", "--scheme", "sideways"]);
    assert_eq!(scheme.status.code(), Some(2));

    std::fs::write(dir.path().join("junk.json"), "{}").unwrap();
    let check = metatrace(dir.path(), &["report", "check", "junk.json"]);
    assert_eq!(check.status.code(), Some(2));
}

#[test]
fn plan_lists_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = metatrace(dir.path(), &["plan", "--family", "jpeg", "--scheme", "pos-same"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 30);
    let out = metatrace(dir.path(), &["plan", "--family", "sharpening", "--scheme", "uniform", "--seeds", "4", "--seed", "9"]);
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], r#"{"scheme":"uniform","test":0,"seed":9}"#);
    let out = metatrace(dir.path(), &["plan", "--family", "make", "--scheme", "all-same"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn process_expands_every_class() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for i in 0..2u32 {
        let raw: Vec<u8> = (0..20 * 14 * 3).map(|j| ((j as u32 * 31 + i * 7) % 251) as u8).collect();
        let img = RgbImage::from_raw(20, 14, raw).unwrap();
        img.save(dir.path().join(format!("img{i}.png"))).unwrap();
        records.push(SampleRecord::new(format!("img{i}"), format!("img{i}.png"), i));
    }
    write_manifest(&records, dir.path().join("images.jsonl")).unwrap();
    let out = metatrace(dir.path(), &["process", "--manifest", "images.jsonl", "--family", "jpeg", "--out", "jpeg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ledger = read_ledger(dir.path().join("jpeg/ledger.jsonl")).unwrap();
    assert_eq!(ledger.len(), 12);
    let jpgs = std::fs::read_dir(dir.path().join("jpeg"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "jpg"))
        .count();
    assert_eq!(jpgs, 12);

    let out = metatrace(dir.path(), &["process", "--manifest", "images.jsonl", "--family", "make", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unsatisfiable_split_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<SampleRecord> = (0..1200)
        .map(|i| {
            let mut r = SampleRecord::new(format!("s{i}"), format!("s{i}.jpg"), 0);
            // one photographer per class: no way to keep test and train apart
            let model = if i % 2 == 0 { "iPhone 11" } else { "iPhone X" };
            r.photographer_id = Some(model.replace(' ', "-"));
            r.exif = Some(BTreeMap::from([("Model".to_owned(), model.to_owned())]));
            r
        })
        .collect();
    write_manifest(&records, dir.path().join("m.jsonl")).unwrap();
    let out = metatrace(dir.path(), &["split", "--manifest", "m.jsonl", "--family", "model-smart", "--out", "split.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("cannot be constructed"));
    assert!(!dir.path().join("split.json").exists());
    assert_eq!(read_manifest(dir.path().join("m.jsonl")).unwrap().len(), 1200);
}
