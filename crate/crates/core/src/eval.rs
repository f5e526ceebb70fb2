//! Node-classification scoring and the multi-run experiment protocol.
//!
//! Scores pool every labeled layer. Micro-F1 pools all test nodes; macro-F1
//! treats each `(layer, class)` pair as its own class.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mlgraph::{split_labels, LabelSplit, MultiLayerGraph};
use crate::model::{EmbeddingSet, Mgcn, ModelParams};
use crate::numerics::DenseMatrix;
use crate::train::{train, OptimizerKind, OptimizerState, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerScores {
    pub layer: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub per_layer: Vec<LayerScores>,
    pub n_test: usize,
}

/// Micro- and macro-F1 for single-label multiclass predictions. A class
/// with no true and no predicted instance scores 0.
pub fn f1_scores(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Scores> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape {
            op: "f1_scores",
            left: (predicted.len(), 1),
            right: (truth.len(), 1),
        });
    }
    if let Some(&c) = predicted.iter().chain(truth).find(|&&c| c >= classes) {
        return Err(Error::Contract(format!(
            "label {c} outside {classes} classes"
        )));
    }
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let per_class_f1: Vec<f64> = (0..classes).map(|c| f1(tp[c], fp[c], fn_[c])).collect();
    let macro_f1 = if classes == 0 {
        0.0
    } else {
        per_class_f1.iter().sum::<f64>() / classes as f64
    };
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    Ok(Scores {
        micro_f1,
        macro_f1,
        per_class_f1,
        per_layer: Vec::new(),
        n_test: truth.len(),
    })
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Pools per-layer predictions over the test nodes of `split`.
/// `predicted[k][i]` is the predicted class of node `i` of layer `k`.
pub fn score_predictions(
    graph: &MultiLayerGraph,
    split: &LabelSplit,
    predicted: &[Option<Vec<usize>>],
) -> Result<Scores> {
    let mut all_pred = Vec::new();
    let mut all_truth = Vec::new();
    let mut per_layer = Vec::new();
    let mut offset = 0;
    for k in 0..graph.num_layers() {
        let classes = graph.num_classes[k];
        if classes == 0 {
            continue;
        }
        let test = &split.layers[k].test;
        if !test.is_empty() {
            let pred_k = predicted[k].as_ref().ok_or_else(|| {
                Error::Contract(format!("no predictions for labeled layer {}", k + 1))
            })?;
            let mut p = Vec::with_capacity(test.len());
            let mut t = Vec::with_capacity(test.len());
            for &i in test {
                let y = graph.labels[k][i].ok_or_else(|| {
                    Error::Contract(format!("test node {i} of layer {} is unlabeled", k + 1))
                })?;
                p.push(pred_k[i]);
                t.push(y);
            }
            let s = f1_scores(&p, &t, classes)?;
            per_layer.push(LayerScores {
                layer: k + 1,
                micro_f1: s.micro_f1,
                macro_f1: s.macro_f1,
                n_test: t.len(),
            });
            all_pred.extend(p.into_iter().map(|c| c + offset));
            all_truth.extend(t.into_iter().map(|c| c + offset));
        }
        offset += classes;
    }
    if all_truth.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut scores = f1_scores(&all_pred, &all_truth, offset)?;
    scores.per_layer = per_layer;
    Ok(scores)
}

/// Scores the classifier heads on the held-out nodes.
pub fn evaluate(
    graph: &MultiLayerGraph,
    params: &ModelParams,
    split: &LabelSplit,
) -> Result<Scores> {
    let model = Mgcn::new(graph)?;
    let z = model.encode(params)?;
    let preds = model.classify(&z, params)?;
    let predicted: Vec<Option<Vec<usize>>> = preds
        .layers
        .iter()
        .map(|p| {
            p.as_ref()
                .map(|p| (0..p.rows()).map(|i| argmax(p.row(i))).collect())
        })
        .collect();
    score_predictions(graph, split, &predicted)
}

/// Multinomial logistic regression on standardized embedding features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `(F + 1) × K`, last row is the bias.
    weights: DenseMatrix,
}

pub const PROBE_ITERATIONS: usize = 500;
pub const PROBE_LEARNING_RATE: f64 = 0.05;
pub const PROBE_L2: f64 = 1e-4;

impl LogisticProbe {
    pub fn fit(
        features: &DenseMatrix,
        train: &[usize],
        labels: &[usize],
        classes: usize,
    ) -> Result<Self> {
        if train.len() != labels.len() || train.is_empty() {
            return Err(Error::Contract(
                "probe needs one label per training row".into(),
            ));
        }
        let f = features.cols();
        let n = train.len() as f64;
        let mut mean = vec![0.0; f];
        for &i in train {
            for (m, &x) in mean.iter_mut().zip(features.row(i)) {
                *m += x / n;
            }
        }
        let mut scale = vec![0.0; f];
        for &i in train {
            for ((s, &x), m) in scale.iter_mut().zip(features.row(i)).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        for s in scale.iter_mut() {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }

        let mut x = DenseMatrix::zeros(train.len(), f + 1);
        for (r, &i) in train.iter().enumerate() {
            let row = x.row_mut(r);
            for j in 0..f {
                row[j] = (features.get(i, j) - mean[j]) / scale[j];
            }
            row[f] = 1.0;
        }

        let mut probe = ModelParams {
            dim: classes,
            encoder: vec![vec![DenseMatrix::zeros(f + 1, classes)]],
            classifier: vec![None],
        };
        let mut state = OptimizerState::new(&probe);
        for _ in 0..PROBE_ITERATIONS {
            let w = &probe.encoder[0][0];
            let probs = crate::numerics::row_softmax(&x.matmul(w)?);
            let mut d = probs;
            for (r, &y) in labels.iter().enumerate() {
                let v = d.get(r, y);
                d.set(r, y, v - 1.0);
            }
            let mut grad = x.matmul_tn(&d)?;
            grad.as_mut_slice().iter_mut().for_each(|g| *g /= n);
            for j in 0..f {
                for c in 0..classes {
                    let g = grad.get(j, c) + PROBE_L2 * w.get(j, c);
                    grad.set(j, c, g);
                }
            }
            let grads = ModelParams {
                dim: classes,
                encoder: vec![vec![grad]],
                classifier: vec![None],
            };
            crate::train::optimizer_step(
                &mut probe,
                &grads,
                &mut state,
                OptimizerKind::Adam,
                PROBE_LEARNING_RATE,
            )?;
        }
        Ok(Self {
            mean,
            scale,
            weights: probe.encoder.remove(0).remove(0),
        })
    }

    pub fn predict(&self, features: &DenseMatrix) -> Vec<usize> {
        let f = self.mean.len();
        (0..features.rows())
            .map(|i| {
                let row = features.row(i);
                let scores: Vec<f64> = (0..self.weights.cols())
                    .map(|c| {
                        let mut s = self.weights.get(f, c);
                        for j in 0..f {
                            s += (row[j] - self.mean[j]) / self.scale[j] * self.weights.get(j, c);
                        }
                        s
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}

/// Fits a probe per labeled layer on the training nodes and scores the
/// held-out nodes.
pub fn evaluate_probe(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    split: &LabelSplit,
) -> Result<Scores> {
    let mut predicted = vec![None; graph.num_layers()];
    for k in 0..graph.num_layers() {
        let train = &split.layers[k].train;
        if graph.num_classes[k] == 0 || train.is_empty() {
            continue;
        }
        let labels = train
            .iter()
            .map(|&i| {
                graph.labels[k][i].ok_or_else(|| {
                    Error::Contract(format!("training node {i} of layer {} is unlabeled", k + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let probe = LogisticProbe::fit(&z.layers[k], train, &labels, graph.num_classes[k])?;
        predicted[k] = Some(probe.predict(&z.layers[k]));
    }
    score_predictions(graph, split, &predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Full model: within and between reconstruction plus labels.
    Mgcn,
    /// Between-layer pairs removed from the reconstruction loss.
    GcnNoCross,
    /// `λ = 0`, then a logistic-regression probe on the embeddings.
    UnsupLogreg,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mgcn, Method::GcnNoCross, Method::UnsupLogreg];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Mgcn => "mgcn",
            Method::GcnNoCross => "gcn-no-cross",
            Method::UnsupLogreg => "unsup+logreg",
        }
    }

    /// The training configuration this method derives from `base`.
    pub fn config(&self, base: &TrainConfig) -> TrainConfig {
        match self {
            Method::Mgcn => base.clone(),
            Method::GcnNoCross => TrainConfig {
                use_between_edges: false,
                ..base.clone()
            },
            Method::UnsupLogreg => TrainConfig {
                lambda: 0.0,
                ..base.clone()
            },
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| {
                Error::config(
                    "methods",
                    format!("unknown method `{s}` (expected mgcn, gcn-no-cross or unsup+logreg)"),
                )
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Trains one model and scores it.
pub fn run_once(
    graph: &MultiLayerGraph,
    method: Method,
    cfg: &TrainConfig,
    split: &LabelSplit,
) -> Result<Scores> {
    let cfg = method.config(cfg);
    let out = train(graph, split, &cfg)?;
    match method {
        Method::UnsupLogreg => evaluate_probe(graph, &out.embeddings, split),
        _ => evaluate(graph, &out.params, split),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub ratios: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            ratios: vec![0.2],
            runs: 10,
            base_seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    pub ratio: f64,
    pub dim: usize,
    pub runs: usize,
    pub micro_mean: f64,
    pub micro_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub scores: Vec<Scores>,
}

/// Mean and population standard deviation, summed in sorted order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, (sq.iter().sum::<f64>() / n).sqrt())
}

fn parallel_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || (w..n).step_by(jobs).map(|i| (i, f(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("worker panicked") {
                slots[i] = Some(v);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

/// For every ratio, trains and scores `plan.runs` models. Run `r` uses seed
/// `base_seed + r` for both its label split and its initialization.
pub fn run_experiment(
    graph: &MultiLayerGraph,
    method: Method,
    cfg: &TrainConfig,
    plan: &ExperimentPlan,
) -> Result<Vec<ExperimentReport>> {
    if plan.runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let mut reports = Vec::with_capacity(plan.ratios.len());
    for &ratio in &plan.ratios {
        let results = parallel_map(plan.runs, plan.jobs, |r| {
            let seed = plan.base_seed + r as u64;
            let split = split_labels(graph, ratio, seed)?;
            let cfg = TrainConfig {
                seed,
                ..cfg.clone()
            };
            run_once(graph, method, &cfg, &split)
        });
        let scores = results.into_iter().collect::<Result<Vec<_>>>()?;
        let micro: Vec<f64> = scores.iter().map(|s| s.micro_f1).collect();
        let macro_: Vec<f64> = scores.iter().map(|s| s.macro_f1).collect();
        let (micro_mean, micro_std) = mean_std(&micro);
        let (macro_mean, macro_std) = mean_std(&macro_);
        reports.push(ExperimentReport {
            method,
            ratio,
            dim: cfg.embedding_dim,
            runs: plan.runs,
            micro_mean,
            micro_std,
            macro_mean,
            macro_std,
            scores,
        });
    }
    Ok(reports)
}

/// One experiment per embedding dimension, everything else fixed.
pub fn dimension_sweep(
    graph: &MultiLayerGraph,
    method: Method,
    dims: &[usize],
    cfg: &TrainConfig,
    plan: &ExperimentPlan,
) -> Result<Vec<ExperimentReport>> {
    if dims.is_empty() {
        return Err(Error::config("dims", "at least one dimension is required"));
    }
    let mut out = Vec::new();
    for &dim in dims {
        let cfg = TrainConfig {
            embedding_dim: dim,
            ..cfg.clone()
        };
        out.extend(run_experiment(graph, method, &cfg, plan)?);
    }
    Ok(out)
}

pub fn reports_to_tsv(reports: &[ExperimentReport]) -> String {
    let mut s = String::from(
        "# mgcn report v1\n# macro-F1 pools (layer, class) pairs as distinct classes\n\
         method\tratio\tdim\truns\tmicro_f1_mean\tmicro_f1_std\tmacro_f1_mean\tmacro_f1_std\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.method, r.ratio, r.dim, r.runs, r.micro_mean, r.micro_std, r.macro_mean, r.macro_std
        );
    }
    s
}

pub fn write_reports(reports: &[ExperimentReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, reports_to_tsv(reports)).map_err(|e| Error::io(path, e))
}
