mod common;

use std::collections::HashSet;

use common::*;
use metatrace_core::data::{CameraType, SampleRecord};
use metatrace_core::retrieval::{build_instances, recall_at_k, NegativeMode};
use metatrace_core::Error;
use proptest::prelude::*;

#[test]
fn instances_cover_both_directions_with_the_right_negatives() {
    let (records, _) = paired_captures(12, 8, 3, 0.2, 0.1, 0.0, 1);
    let kind: std::collections::HashMap<&str, CameraType> =
        records.iter().map(|r| (r.sample_id.as_str(), r.camera_type.unwrap())).collect();
    for mode in NegativeMode::BOTH {
        let instances = build_instances(&records, mode).unwrap();
        assert_eq!(instances.len(), 24);
        let queries: HashSet<&str> = instances.iter().map(|i| i.query_id.as_str()).collect();
        assert_eq!(queries.len(), 24);
        for inst in &instances {
            assert_eq!(inst.negative_ids.len(), 11);
            assert_ne!(kind[inst.positive_id.as_str()], inst.query_type);
            for n in &inst.negative_ids {
                let same = kind[n.as_str()] == inst.query_type;
                assert_eq!(same, mode == NegativeMode::Same, "{mode:?} {n}");
                assert!(!n.starts_with(&inst.query_id[..8]), "negative from the query's own pair");
            }
        }
    }
}

#[test]
fn ranks_match_oracle_on_tied_embeddings() {
    let mut r = rng(2);
    let set = random_set(&mut r, "x", 40, 3, true);
    let records: Vec<SampleRecord> = set
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut rec = SampleRecord::new(id, "", 0);
            rec.pair_id = Some(format!("p{}", i / 2));
            rec.camera_type = Some(if i % 2 == 0 { CameraType::NonSmart } else { CameraType::Smart });
            rec
        })
        .collect();
    for mode in NegativeMode::BOTH {
        let instances = build_instances(&records, mode).unwrap();
        let report = recall_at_k(&instances, &set, &[1, 5, 20]).unwrap();
        for (inst, q) in instances.iter().zip(&report.queries) {
            assert_eq!(q.positive_rank, oracle_positive_rank(inst, &set));
        }
        let by_dir: f64 = report.recall_by_direction.values().map(|v| v[1]).sum::<f64>() / 2.0;
        assert!((by_dir - report.recall[1]).abs() < 1e-12);
        assert_eq!(report.recall[2], 1.0);
    }
}

#[test]
fn camera_direction_separates_the_modes() {
    let (records, set) = paired_captures(200, 16, 10, 0.2, 0.1, 0.6, 3);
    let recall = |mode| {
        let inst = build_instances(&records, mode).unwrap();
        recall_at_k(&inst, &set, &[1]).unwrap().recall[0]
    };
    assert!(recall(NegativeMode::Different) > recall(NegativeMode::Same) + 0.05);
}

#[test]
fn malformed_pairs_are_rejected() {
    let mut a = SampleRecord::new("a", "", 0);
    a.pair_id = Some("p".into());
    a.camera_type = Some(CameraType::Smart);
    let mut b = a.clone();
    b.sample_id = "b".into();
    assert!(build_instances(&[a.clone(), b.clone()], NegativeMode::Same).is_err());
    b.camera_type = None;
    assert!(build_instances(&[a.clone(), b], NegativeMode::Same).is_err());
    assert!(build_instances(&[a], NegativeMode::Same).is_err());
    assert!(build_instances(&[SampleRecord::new("c", "", 0)], NegativeMode::Same).is_err());
}

#[test]
fn missing_embedding_is_reported_by_id() {
    let (records, set) = paired_captures(4, 4, 2, 0.2, 0.1, 0.0, 4);
    let partial = set.select(&[0, 1, 2, 3, 4, 5, 6]).unwrap();
    let inst = build_instances(&records, NegativeMode::Same).unwrap();
    assert!(matches!(recall_at_k(&inst, &partial, &[1]), Err(Error::MissingId(_))));
    assert!(recall_at_k(&inst, &set, &[0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recall_is_monotone_in_k(seed in any::<u64>(), lambda in 0.0f64..1.0) {
        let (records, set) = paired_captures(15, 6, 4, 0.3, 0.3, lambda, seed);
        let inst = build_instances(&records, NegativeMode::Different).unwrap();
        let report = recall_at_k(&inst, &set, &[1, 2, 5, 15]).unwrap();
        prop_assert!(report.recall.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(report.recall[3], 1.0);
        prop_assert_eq!(report.n_queries, 30);
    }
}
