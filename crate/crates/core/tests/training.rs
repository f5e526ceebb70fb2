mod common;

use mgcn::eval::{evaluate, run_experiment, ExperimentPlan, Method};
use mgcn::mlgraph::split_labels;
use mgcn::train::{train, OptimizerKind};
use mgcn::{LabelSplit, TrainConfig};

fn gd(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        embedding_dim: 4,
        epochs,
        optimizer: OptimizerKind::PlainGd,
        learning_rate: 0.05,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_decreases_on_six_node_fixture() {
    let graph = common::six_node();
    for seed in 0..3 {
        let split = split_labels(&graph, 0.5, seed).unwrap();
        let h = train(&graph, &split, &gd(seed, 51)).unwrap().history;
        let (first, last) = (&h.records[0].loss, &h.records[50].loss);
        assert!(last.total < first.total, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn zero_lambda_never_reads_labels() {
    let graph = common::random_graph(4, &[6, 5], 2, false, &[]);
    let blind = graph.without_labels();
    let cfg = TrainConfig {
        lambda: 0.0,
        embedding_dim: 4,
        epochs: 20,
        ..TrainConfig::default()
    };
    let split = split_labels(&graph, 0.5, 1).unwrap();
    let a = train(&graph, &split, &cfg).unwrap();
    let b = train(&blind, &LabelSplit::empty(2), &cfg).unwrap();
    assert_eq!(a.embeddings, b.embeddings);
    let la: Vec<_> = a.history.records.iter().map(|r| r.loss.total).collect();
    let lb: Vec<_> = b.history.records.iter().map(|r| r.loss.total).collect();
    assert_eq!(la, lb);
}

#[test]
fn no_between_edges_drops_cross_terms_everywhere() {
    let graph = common::random_graph(8, &[5, 4, 3], 2, false, &[]);
    let split = split_labels(&graph, 0.5, 0).unwrap();
    let cfg = TrainConfig {
        use_between_edges: false,
        embedding_dim: 3,
        epochs: 5,
        ..TrainConfig::default()
    };
    let h = train(&graph, &split, &cfg).unwrap().history;
    assert_eq!(h.records.len(), 5);
    for r in &h.records {
        assert!(r.loss.pairs.keys().all(|&(k, l)| k == l));
        assert_eq!(r.loss.pairs.len(), 3);
    }
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let graph = common::random_graph(2, &[6, 6], 3, true, &[]);
    let split = split_labels(&graph, 0.5, 2).unwrap();
    let cfg = TrainConfig {
        embedding_dim: 5,
        epochs: 30,
        seed: 2,
        ..TrainConfig::default()
    };
    let a = train(&graph, &split, &cfg).unwrap();
    let b = train(&graph, &split, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.embeddings, b.embeddings);
    assert_eq!(a.history.to_tsv(), b.history.to_tsv());
    assert_eq!(a.history.params_digest, b.history.params_digest);
}

#[test]
fn experiments_do_not_depend_on_worker_count() {
    let graph = common::random_graph(5, &[6, 6], 2, false, &[]);
    let cfg = TrainConfig {
        embedding_dim: 4,
        epochs: 10,
        ..TrainConfig::default()
    };
    let plan = |jobs| ExperimentPlan {
        ratios: vec![0.5],
        runs: 4,
        base_seed: 3,
        jobs,
    };
    let serial = run_experiment(&graph, Method::Mgcn, &cfg, &plan(1)).unwrap();
    let parallel = run_experiment(&graph, Method::Mgcn, &cfg, &plan(3)).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn single_run_has_zero_spread_and_scores_stay_in_range() {
    let graph = common::six_node();
    let plan = ExperimentPlan {
        ratios: vec![0.2, 0.5],
        runs: 1,
        ..ExperimentPlan::default()
    };
    for method in Method::ALL {
        let reports = run_experiment(&graph, method, &gd(0, 5), &plan).unwrap();
        assert_eq!(reports.len(), 2);
        for r in reports {
            assert_eq!((r.micro_std, r.macro_std), (0.0, 0.0));
            assert!((0.0..=1.0).contains(&r.micro_mean) && (0.0..=1.0).contains(&r.macro_mean));
        }
    }
}

#[test]
fn evaluation_ignores_training_labels() {
    let graph = common::random_graph(6, &[6, 6], 2, false, &[]);
    let split = split_labels(&graph, 0.5, 6).unwrap();
    let out = train(&graph, &split, &gd(6, 5)).unwrap();
    let before = evaluate(&graph, &out.params, &split).unwrap();
    let mut flipped = graph.clone();
    for (k, layer) in split.layers.iter().enumerate() {
        for &i in &layer.train {
            flipped.labels[k][i] = flipped.labels[k][i].map(|c| 1 - c);
        }
    }
    assert_eq!(evaluate(&flipped, &out.params, &split).unwrap(), before);
}
