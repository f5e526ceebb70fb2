#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracle;

use std::collections::BTreeMap;

use mgcn::mlgraph::{Attributes, MultiLayerGraph, SparseBinaryMatrix};
use mgcn::model::ModelParams;
use mgcn::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random multi-layer graph with every stored pair non-degenerate.
/// `sizes[k]` nodes per layer, all layers labeled with `classes` classes
/// except those listed in `unlabeled`.
pub fn random_graph(
    seed: u64,
    sizes: &[usize],
    classes: usize,
    dense_attrs: bool,
    unlabeled: &[usize],
) -> MultiLayerGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sizes.len();
    let mut relations = BTreeMap::new();
    for k in 0..m {
        for l in k..m {
            let (nk, nl) = (sizes[k], sizes[l]);
            let mut entries = Vec::new();
            loop {
                entries.clear();
                for i in 0..nk {
                    let start = if k == l { i + 1 } else { 0 };
                    for j in start..nl {
                        if rng.gen_bool(0.35) {
                            entries.push((i, j));
                            if k == l {
                                entries.push((j, i));
                            }
                        }
                    }
                }
                let cells = nk * nl;
                if !entries.is_empty() && entries.len() < cells {
                    break;
                }
            }
            relations.insert((k, l), SparseBinaryMatrix::new(nk, nl, entries.clone()));
        }
    }
    let attributes = sizes
        .iter()
        .map(|&n| {
            if dense_attrs {
                let c = 3;
                let data = (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
                Attributes::Dense(DenseMatrix::from_vec(n, c, data).unwrap())
            } else {
                Attributes::Identity(n)
            }
        })
        .collect();
    let labels = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if unlabeled.contains(&k) {
                vec![None; n]
            } else {
                (0..n)
                    .map(|i| Some((i + rng.gen_range(0..classes)) % classes))
                    .collect()
            }
        })
        .collect();
    let num_classes = (0..m)
        .map(|k| if unlabeled.contains(&k) { 0 } else { classes })
        .collect();
    MultiLayerGraph::new(sizes.to_vec(), relations, attributes, labels, num_classes).unwrap()
}

/// Uniformly random permutation of every layer's node indices.
pub fn random_perms(seed: u64, sizes: &[usize]) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&n| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

/// Parameters matching a relabeled graph: for identity-attribute layers the
/// first encoder weight is indexed by node and moves with it.
pub fn permute_params(
    graph: &MultiLayerGraph,
    params: &ModelParams,
    perms: &[Vec<usize>],
) -> ModelParams {
    let mut out = params.clone();
    for (k, p) in perms.iter().enumerate() {
        if let Attributes::Identity(_) = graph.attributes[k] {
            let w = &params.encoder[k][0];
            for i in 0..w.rows() {
                out.encoder[k][0].row_mut(p[i]).copy_from_slice(w.row(i));
            }
        }
    }
    out
}

/// Rows of `m` moved to their new positions.
pub fn permute_rows(m: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        out.row_mut(perm[i]).copy_from_slice(m.row(i));
    }
    out
}

/// Two layers of three nodes, two classes each. The CLI bundles the same
/// graph as a dataset directory.
pub fn six_node() -> MultiLayerGraph {
    let within_1 = SparseBinaryMatrix::new(3, 3, [(0, 1), (1, 2)]).symmetrized();
    let within_2 = SparseBinaryMatrix::new(3, 3, [(0, 1)]).symmetrized();
    let between = SparseBinaryMatrix::new(3, 3, [(0, 0), (1, 1), (2, 2)]);
    MultiLayerGraph::new(
        vec![3, 3],
        BTreeMap::from([((0, 0), within_1), ((0, 1), between), ((1, 1), within_2)]),
        vec![Attributes::Identity(3), Attributes::Identity(3)],
        vec![
            vec![Some(0), Some(0), Some(1)],
            vec![Some(0), Some(1), Some(1)],
        ],
        vec![2, 2],
    )
    .unwrap()
}
