//! Deliberately naive reference implementations, written from the formulas
//! with dense scalar loops and no shared code with the library.

#![allow(clippy::needless_range_loop)]

use mgcn::mlgraph::{Attributes, LabelSplit, MultiLayerGraph, SparseBinaryMatrix};
use mgcn::model::{EmbeddingSet, ModelParams, Predictions};

const CLAMP: f64 = 1e-12;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted cross-entropy over every cell of every stored pair `k ≤ l`.
pub fn link_loss(graph: &MultiLayerGraph, z: &EmbeddingSet, between: bool) -> f64 {
    let mut total = 0.0;
    for (&(k, l), a) in &graph.relations {
        if k != l && !between {
            continue;
        }
        let (nk, nl) = (graph.layer_sizes[k], graph.layer_sizes[l]);
        let cells = (nk * nl) as f64;
        let mut edges = 0.0;
        for i in 0..nk {
            for j in 0..nl {
                if a.contains(i, j) {
                    edges += 1.0;
                }
            }
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for i in 0..nk {
            for j in 0..nl {
                let mut logit = 0.0;
                for d in 0..z.layers[k].cols() {
                    logit += z.layers[k].get(i, d) * z.layers[l].get(j, d);
                }
                let p = logistic(logit);
                if a.contains(i, j) {
                    pos += p.max(CLAMP).ln();
                } else {
                    neg += (1.0 - p).max(CLAMP).ln();
                }
            }
        }
        total += -cells * (pos / edges + neg / (cells - edges));
    }
    total
}

/// Raw-sum cross-entropy over training nodes.
pub fn label_loss(graph: &MultiLayerGraph, preds: &Predictions, split: &LabelSplit) -> f64 {
    let mut total = 0.0;
    for (k, layer) in split.layers.iter().enumerate() {
        for &i in &layer.train {
            let y = graph.labels[k][i].unwrap();
            let p = preds.layers[k].as_ref().unwrap().get(i, y);
            total -= p.max(CLAMP).ln();
        }
    }
    total
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` as nested vectors.
pub fn normalized(a: &SparseBinaryMatrix) -> Vec<Vec<f64>> {
    let n = a.rows();
    let mut at = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            at[i][j] = if i == j || a.contains(i, j) { 1.0 } else { 0.0 };
        }
    }
    let deg: Vec<f64> = at.iter().map(|r| r.iter().sum()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = at[i][j] / (deg[i].sqrt() * deg[j].sqrt());
        }
    }
    s
}

fn product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|r| {
            (0..cols)
                .map(|c| (0..inner).map(|p| r[p] * b[p][c]).sum())
                .collect()
        })
        .collect()
}

fn rows_of(m: &mgcn::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Embeddings of every layer, via dense matrix products.
pub fn encode(graph: &MultiLayerGraph, params: &ModelParams) -> Vec<Vec<Vec<f64>>> {
    (0..graph.num_layers())
        .map(|k| {
            let n = graph.layer_sizes[k];
            let s = normalized(graph.within(k));
            let mut h: Vec<Vec<f64>> = match &graph.attributes[k] {
                Attributes::Identity(_) => (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect(),
                Attributes::Dense(x) => rows_of(x),
            };
            for w in &params.encoder[k] {
                h = product(&product(&s, &h), &rows_of(w));
                for v in h.iter_mut().flatten() {
                    *v = v.max(0.0);
                }
            }
            h
        })
        .collect()
}

/// Micro- and macro-F1 and per-class F1 from an explicit confusion matrix.
pub fn f1(predicted: &[usize], truth: &[usize], classes: usize) -> (f64, f64, Vec<f64>) {
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let score = |tp: usize, fp: usize, fn_: usize| {
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let mut per_class = Vec::new();
    for c in 0..classes {
        let tp = confusion[c][c];
        let fp: usize = (0..classes).map(|t| confusion[t][c]).sum::<usize>() - tp;
        let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        per_class.push(score(tp, fp, fn_));
    }
    let macro_ = per_class.iter().sum::<f64>() / classes as f64;
    (score(tp_all, fp_all, fn_all), macro_, per_class)
}

/// Relabels the nodes of every layer: node `i` of layer `k` becomes
/// `perms[k][i]`.
pub fn permute(graph: &MultiLayerGraph, perms: &[Vec<usize>]) -> MultiLayerGraph {
    let relations = graph
        .relations
        .iter()
        .map(|(&(k, l), a)| ((k, l), a.permuted(&perms[k], &perms[l])))
        .collect();
    let attributes = graph
        .attributes
        .iter()
        .zip(perms)
        .map(|(x, p)| match x {
            Attributes::Identity(n) => Attributes::Identity(*n),
            Attributes::Dense(m) => {
                let mut out = m.clone();
                for i in 0..m.rows() {
                    out.row_mut(p[i]).copy_from_slice(m.row(i));
                }
                Attributes::Dense(out)
            }
        })
        .collect();
    let labels = graph
        .labels
        .iter()
        .zip(perms)
        .map(|(y, p)| {
            let mut out = y.clone();
            for i in 0..y.len() {
                out[p[i]] = y[i];
            }
            out
        })
        .collect();
    MultiLayerGraph::new(
        graph.layer_sizes.clone(),
        relations,
        attributes,
        labels,
        graph.num_classes.clone(),
    )
    .unwrap()
}
