//! End-to-end embedding training on a planted-structure graph: train on a
//! held-out split, then check that link prediction beats an untrained table
//! by a wide margin and that a usable decision threshold can be calibrated.

use kgvet_core::synth::grouped_attribute_graph;
use kgvet_core::transe::{
    calibrate_threshold, evaluate_link_prediction, score_triplet, train_transe_with_log,
    EmbeddingTable, TransEConfig,
};

fn quick_config() -> TransEConfig {
    TransEConfig {
        dim: 16,
        learning_rate: 0.05,
        epochs: 120,
        batch_size: 64,
        seed: 42,
        ..TransEConfig::default()
    }
}

#[test]
fn training_beats_untrained_table_on_held_out_links() {
    let full = grouped_attribute_graph(4, 10, 4);
    let (train, test) = full.split(0.8, 42).unwrap();
    assert_eq!(train.triplet_count() + test.triplet_count(), 160);

    let cfg = quick_config();
    let (table, losses) = train_transe_with_log(&train, &cfg).unwrap();
    assert!(
        losses.first().unwrap() > losses.last().unwrap(),
        "loss should drop: {:?} -> {:?}",
        losses.first(),
        losses.last()
    );

    let trained = evaluate_link_prediction(&table, &test, &full).unwrap();
    let random = EmbeddingTable::random(&train, cfg.dim, cfg.seed);
    let baseline = evaluate_link_prediction(&random, &test, &full).unwrap();

    assert!(
        trained.mrr >= 5.0 * baseline.mrr,
        "trained MRR {} vs random {}",
        trained.mrr,
        baseline.mrr
    );
    assert!(
        trained.hits_at_1 >= 0.8,
        "hits@1 only {}",
        trained.hits_at_1
    );
    assert!(trained.hits_at_1 <= trained.hits_at_3);
    assert!(trained.hits_at_3 <= trained.hits_at_10);
}

#[test]
fn trained_scores_support_threshold_calibration() {
    let full = grouped_attribute_graph(4, 10, 4);
    let (train, test) = full.split(0.8, 42).unwrap();
    let table = train_transe_with_log(&train, &quick_config()).unwrap().0;

    let positives: Vec<f64> = test
        .triplets()
        .map(|t| score_triplet(&table, &t).unwrap())
        .collect();
    let negatives: Vec<f64> = test
        .triplets()
        .flat_map(|t| full.sample_negatives(&t, 1, 7).unwrap())
        .map(|t| score_triplet(&table, &t).unwrap())
        .collect();

    let cal = calibrate_threshold(&positives, &negatives);
    assert!(
        cal.balanced_accuracy >= 0.9,
        "balanced accuracy only {}",
        cal.balanced_accuracy
    );
    // The chosen cut must actually sit between the two populations it was
    // picked to separate.
    let kept = positives.iter().filter(|s| **s <= cal.threshold).count();
    assert!(kept * 2 > positives.len());
}

#[test]
fn training_pipeline_is_deterministic_end_to_end() {
    let full = grouped_attribute_graph(3, 6, 3);
    let (train, test) = full.split(0.8, 9).unwrap();
    let cfg = TransEConfig {
        dim: 8,
        epochs: 30,
        batch_size: 32,
        ..quick_config()
    };
    let a = train_transe_with_log(&train, &cfg).unwrap();
    let b = train_transe_with_log(&train, &cfg).unwrap();
    assert_eq!(a.1, b.1, "epoch losses must be bitwise equal");

    let ma = evaluate_link_prediction(&a.0, &test, &full).unwrap();
    let mb = evaluate_link_prediction(&b.0, &test, &full).unwrap();
    assert_eq!(ma.mrr.to_bits(), mb.mrr.to_bits());
    assert_eq!(ma.hits_at_10.to_bits(), mb.hits_at_10.to_bits());
}
