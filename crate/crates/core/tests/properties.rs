mod common;

use mgcn::loss::{label_loss, link_loss};
use mgcn::mlgraph::{generate_synthetic, load_graph, save_graph, split_labels, SyntheticSpec};
use mgcn::model::{init_params, Mgcn};
use mgcn::numerics::{row_softmax, sigmoid, spmm, CsrMatrix};
use mgcn::{DenseMatrix, EmbeddingSet, Objective};
use proptest::prelude::*;

fn sparse_8x8() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.3, -2.0..2.0f64), 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmm_matches_naive_product(cells in sparse_8x8(), x in prop::collection::vec(-2.0..2.0f64, 8 * 3)) {
        let triplets: Vec<_> = cells
            .iter()
            .enumerate()
            .filter_map(|(p, v)| v.map(|v| (p / 8, p % 8, v)))
            .collect();
        let s = CsrMatrix::from_sorted_triplets(8, 8, triplets).unwrap();
        let x = DenseMatrix::from_vec(8, 3, x).unwrap();
        let got = spmm(&s, &x).unwrap();
        for i in 0..8 {
            for c in 0..3 {
                let want: f64 = (0..8).map(|j| cells[i * 8 + j].unwrap_or(0.0) * x.get(j, c)).sum();
                prop_assert!((got.get(i, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-800.0..800.0f64, 4 * 5)) {
        let p = row_softmax(&DenseMatrix::from_vec(4, 5, v).unwrap());
        for i in 0..4 {
            prop_assert!(p.row(i).iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_antisymmetric(x in -750.0..750.0f64) {
        prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&sigmoid(x)));
    }

    #[test]
    fn split_partitions_labeled_nodes(seed in 0u64..1000, ratio in 0.05..0.95f64) {
        let graph = common::random_graph(seed % 7, &[12, 9], 2, false, &[]);
        let split = match split_labels(&graph, ratio, seed) {
            Ok(s) => s,
            Err(mgcn::Error::TooFewLabels { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for k in 0..2 {
            let labeled = graph.labeled_nodes(k);
            let layer = &split.layers[k];
            let mut all: Vec<usize> = layer.train.iter().chain(&layer.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &labeled);
            prop_assert_eq!(layer.train.len(), (ratio * labeled.len() as f64).ceil() as usize);
        }
    }

    #[test]
    fn synthetic_within_layers_are_symmetric(seed in 0u64..500, n in 4usize..30) {
        let spec = SyntheticSpec { layer_sizes: vec![n, n + 3], communities: 2, p_in: 0.4, p_out: 0.1, q_same: 0.3, q_diff: 0.05, seed, ..SyntheticSpec::default() };
        if let Ok(graph) = generate_synthetic(&spec) {
            for k in 0..2 {
                let a = graph.within(k);
                prop_assert!(a.entries().iter().all(|&(i, j)| i != j && a.contains(j, i)));
            }
        }
    }

    #[test]
    fn save_then_load_round_trips(seed in 0u64..200, dense in any::<bool>()) {
        let graph = common::random_graph(seed, &[5, 4, 3], 2, dense, &[1]);
        let dir = tempfile::tempdir().unwrap();
        save_graph(&graph, dir.path()).unwrap();
        prop_assert_eq!(load_graph(dir.path()).unwrap(), graph);
    }

    #[test]
    fn link_loss_invariant_under_relabeling(seed in 0u64..200) {
        let sizes = [5, 4];
        let graph = common::random_graph(seed, &sizes, 2, false, &[]);
        let z = EmbeddingSet { layers: vec![random_z(seed, 5, 3), random_z(seed + 1, 4, 3)] };
        let perms = common::random_perms(seed, &sizes);
        let pg = common::oracle::permute(&graph, &perms);
        let pz = EmbeddingSet { layers: z.layers.iter().zip(&perms).map(|(m, p)| common::permute_rows(m, p)).collect() };
        let a = link_loss(&graph, &z, &Objective::new(0.0)).unwrap().link;
        let b = link_loss(&pg, &pz, &Objective::new(0.0)).unwrap().link;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    /// Raising one decoder probability lowers the loss on an edge and raises
    /// it on a non-edge. An extra embedding column set only on row `i` of
    /// layer 1 and row `j` of layer 2 moves logit `(i, j)` and nothing else.
    #[test]
    fn link_loss_monotone_in_single_probability(seed in 0u64..200, i in 0usize..5, j in 0usize..4) {
        let graph = common::random_graph(seed, &[5, 4], 2, false, &[]);
        let base = [random_z(seed, 5, 3), random_z(seed + 9, 4, 3)];
        let term = |t: f64| {
            let mut zk = DenseMatrix::zeros(5, 4);
            let mut zl = DenseMatrix::zeros(4, 4);
            for r in 0..5 { zk.row_mut(r)[..3].copy_from_slice(base[0].row(r)); }
            for r in 0..4 { zl.row_mut(r)[..3].copy_from_slice(base[1].row(r)); }
            zk.set(i, 3, t);
            zl.set(j, 3, 1.0);
            let z = EmbeddingSet { layers: vec![zk, zl] };
            link_loss(&graph, &z, &Objective::new(0.0)).unwrap().pairs[&(0, 1)]
        };
        let (before, after) = (term(0.0), term(1e-3));
        if graph.pair(0, 1).unwrap().contains(i, j) {
            prop_assert!(after < before);
        } else {
            prop_assert!(after > before);
        }
    }

    #[test]
    fn label_loss_is_nonnegative(seed in 0u64..200) {
        let graph = common::random_graph(seed, &[6, 6], 2, seed % 2 == 0, &[]);
        let split = match split_labels(&graph, 0.5, seed) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let params = init_params(&graph, 3, 1, seed).unwrap();
        let pass = Mgcn::new(&graph).unwrap().forward(&params, true).unwrap();
        prop_assert!(label_loss(&graph, &pass.predictions, &split).unwrap() >= 0.0);
    }
}

fn random_z(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn label_loss_zero_only_when_one_hot_correct() {
    let graph = common::random_graph(3, &[6], 2, false, &[]);
    let split = split_labels(&graph, 0.5, 3).unwrap();
    let mut y = DenseMatrix::zeros(6, 2);
    for i in 0..6 {
        y.set(i, graph.labels[0][i].unwrap(), 1.0);
    }
    let mut preds = mgcn::Predictions {
        layers: vec![Some(y.clone())],
    };
    assert_eq!(label_loss(&graph, &preds, &split).unwrap(), 0.0);
    let i = split.layers[0].train[0];
    let c = graph.labels[0][i].unwrap();
    y.set(i, c, 0.9);
    y.set(i, 1 - c, 0.1);
    preds.layers[0] = Some(y);
    assert!(label_loss(&graph, &preds, &split).unwrap() > 0.0);
}

/// Edge counts of a planted partition stay within five standard deviations
/// of their binomial mean.
#[test]
fn synthetic_edge_counts_match_binomial_mean() {
    let spec = SyntheticSpec {
        seed: 11,
        ..SyntheticSpec::default()
    };
    let graph = generate_synthetic(&spec).unwrap();
    let community = |k: usize, i: usize| graph.labels[k][i].unwrap();
    for (&(k, l), a) in &graph.relations {
        let (p_same, p_diff) = if k == l {
            (spec.p_in, spec.p_out)
        } else {
            (spec.q_same, spec.q_diff)
        };
        let (mut same, mut diff) = (0.0, 0.0);
        let (mut e_same, mut e_diff) = (0.0, 0.0);
        for i in 0..graph.layer_sizes[k] {
            let lo = if k == l { i + 1 } else { 0 };
            for j in lo..graph.layer_sizes[l] {
                let hit = a.contains(i, j) as u8 as f64;
                if community(k, i) == community(l, j) {
                    same += 1.0;
                    e_same += hit;
                } else {
                    diff += 1.0;
                    e_diff += hit;
                }
            }
        }
        for (n, e, p) in [(same, e_same, p_same), (diff, e_diff, p_diff)] {
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!(
                (e - n * p).abs() <= 5.0 * sd,
                "pair ({k},{l}): {e} edges vs mean {}",
                n * p
            );
        }
    }
}
