//! In-browser playground: generate a planted-partition multi-layer graph,
//! train on it, and inspect the embeddings and the decoded adjacency.
//!
//! [`Session`] is plain Rust and speaks JSON strings, so it runs and is
//! tested natively. [`WasmSession`] is the thin JavaScript-facing wrapper.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use mgcn::eval::evaluate;
use mgcn::mlgraph::{generate_synthetic, split_labels, SyntheticSpec};
use mgcn::model::{decode_pair, init_params, Mgcn};
use mgcn::train::{train_from, OptimizerKind};
use mgcn::{DenseMatrix, LabelSplit, ModelParams, MultiLayerGraph, TrainConfig};

/// Dataset knobs exposed on the page.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub layers: usize,
    pub nodes: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub q_same: f64,
    pub q_diff: f64,
    /// Only the first layer keeps its labels when false.
    pub label_all_layers: bool,
    pub ratio: f64,
    pub seed: u64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            layers: 2,
            nodes: 100,
            communities: 3,
            p_in: 0.12,
            p_out: 0.01,
            q_same: 0.10,
            q_diff: 0.005,
            label_all_layers: false,
            ratio: 0.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub dim: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub use_between_edges: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            dim: 16,
            lambda: 10.0,
            learning_rate: 0.01,
            use_between_edges: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub epochs: usize,
    pub link: Vec<f64>,
    pub label: Vec<f64>,
    pub total: Vec<f64>,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub n_test: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub layer: usize,
    pub points: Vec<[f64; 2]>,
    pub community: Vec<usize>,
    pub train: Vec<bool>,
}

/// Decoded probabilities for one layer pair, rows and columns grouped by
/// community.
#[derive(Debug, Clone, Serialize)]
pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
    pub probability: Vec<f64>,
    pub edge: Vec<u8>,
}

pub struct Session {
    graph: MultiLayerGraph,
    communities: Vec<Vec<usize>>,
    split: LabelSplit,
    seed: u64,
    params: Option<ModelParams>,
    last: Option<TrainOptions>,
    progress: Progress,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Session {
    pub fn new(options_json: &str) -> Result<Self, String> {
        let o: GraphOptions = serde_json::from_str(options_json).map_err(err)?;
        if o.layers == 0 || o.layers > 3 || o.nodes < o.communities || o.nodes > 400 {
            return Err(
                "use 1 to 3 layers of at most 400 nodes, at least one per community".into(),
            );
        }
        let spec = SyntheticSpec {
            layer_sizes: vec![o.nodes; o.layers],
            communities: o.communities,
            p_in: o.p_in,
            p_out: o.p_out,
            q_same: o.q_same,
            q_diff: o.q_diff,
            labeled_layers: None,
            seed: o.seed,
            ..SyntheticSpec::default()
        };
        let mut graph = generate_synthetic(&spec).map_err(err)?;
        let communities: Vec<Vec<usize>> = graph
            .labels
            .iter()
            .map(|l| l.iter().map(|c| c.unwrap_or(0)).collect())
            .collect();
        if !o.label_all_layers {
            for k in 1..o.layers {
                graph.labels[k] = vec![None; o.nodes];
                graph.num_classes[k] = 0;
            }
        }
        let split = split_labels(&graph, o.ratio, o.seed).map_err(err)?;
        Ok(Self {
            graph,
            communities,
            split,
            seed: o.seed,
            params: None,
            last: None,
            progress: Progress {
                epochs: 0,
                link: Vec::new(),
                label: Vec::new(),
                total: Vec::new(),
                micro_f1: None,
                macro_f1: None,
                n_test: 0,
            },
        })
    }

    /// Runs more epochs. Changing the dimension restarts from a fresh
    /// initialization and clears the loss curve.
    pub fn train(&mut self, options_json: &str) -> Result<String, String> {
        let o: TrainOptions = serde_json::from_str(options_json).map_err(err)?;
        let cfg = TrainConfig {
            embedding_dim: o.dim,
            lambda: o.lambda,
            epochs: o.epochs,
            optimizer: OptimizerKind::Adam,
            learning_rate: o.learning_rate,
            seed: self.seed,
            use_between_edges: o.use_between_edges,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(err)?;
        let restart = self.last.as_ref().is_none_or(|l| l.dim != o.dim);
        let params = match self.params.take() {
            Some(p) if !restart => p,
            _ => {
                self.progress.epochs = 0;
                self.progress.link.clear();
                self.progress.label.clear();
                self.progress.total.clear();
                init_params(&self.graph, o.dim, 1, self.seed).map_err(err)?
            }
        };
        let out = train_from(&self.graph, &self.split, &cfg, params).map_err(err)?;
        for r in &out.history.records {
            self.progress.link.push(r.loss.link);
            self.progress.label.push(r.loss.label);
            self.progress.total.push(r.loss.total);
        }
        self.progress.epochs += o.epochs;
        match evaluate(&self.graph, &out.params, &self.split) {
            Ok(s) => {
                self.progress.micro_f1 = Some(s.micro_f1);
                self.progress.macro_f1 = Some(s.macro_f1);
                self.progress.n_test = s.n_test;
            }
            Err(_) => {
                self.progress.micro_f1 = None;
                self.progress.macro_f1 = None;
                self.progress.n_test = 0;
            }
        }
        self.params = Some(out.params);
        self.last = Some(o);
        serde_json::to_string(&self.progress).map_err(err)
    }

    fn params(&self) -> Result<&ModelParams, String> {
        self.params
            .as_ref()
            .ok_or_else(|| "train first".to_string())
    }

    /// Embeddings of layer `k` (0-based) on their top two principal axes.
    pub fn project(&self, k: usize) -> Result<String, String> {
        let layer = self.check_layer(k)?;
        let z = Mgcn::new(&self.graph)
            .map_err(err)?
            .encode(self.params()?)
            .map_err(err)?;
        let points = principal_plane(&z.layers[layer]);
        let mut train = vec![false; self.graph.layer_sizes[layer]];
        for &i in &self.split.layers[layer].train {
            train[i] = true;
        }
        let p = Projection {
            layer,
            points,
            community: self.communities[layer].clone(),
            train,
        };
        serde_json::to_string(&p).map_err(err)
    }

    /// Decoded link probabilities for layers `k ≤ l` next to the true edges.
    pub fn heatmap(&self, k: usize, l: usize) -> Result<String, String> {
        let (k, l) = (self.check_layer(k)?, self.check_layer(l)?);
        let (k, l) = (k.min(l), k.max(l));
        let a = self.graph.pair(k, l).ok_or("pair not stored")?;
        let z = Mgcn::new(&self.graph)
            .map_err(err)?
            .encode(self.params()?)
            .map_err(err)?;
        let probs = decode_pair(&z.layers[k], &z.layers[l]).map_err(err)?;
        let order = |layer: usize| {
            let mut idx: Vec<usize> = (0..self.graph.layer_sizes[layer]).collect();
            idx.sort_by_key(|&i| (self.communities[layer][i], i));
            idx
        };
        let (row_order, col_order) = (order(k), order(l));
        let mut probability = Vec::with_capacity(row_order.len() * col_order.len());
        let mut edge = Vec::with_capacity(probability.capacity());
        for &i in &row_order {
            for &j in &col_order {
                probability.push(probs.get(i, j));
                edge.push(a.contains(i, j) as u8);
            }
        }
        let h = Heatmap {
            rows: row_order.len(),
            cols: col_order.len(),
            row_order,
            col_order,
            probability,
            edge,
        };
        serde_json::to_string(&h).map_err(err)
    }

    fn check_layer(&self, k: usize) -> Result<usize, String> {
        if k < self.graph.num_layers() {
            Ok(k)
        } else {
            Err(format!("layer {k} does not exist"))
        }
    }
}

/// Coordinates on the two leading principal components, found by power
/// iteration with deflation on the feature covariance.
pub fn principal_plane(z: &DenseMatrix) -> Vec<[f64; 2]> {
    let (n, f) = z.shape();
    let mut centered = z.clone();
    for c in 0..f {
        let mean = (0..n).map(|i| z.get(i, c)).sum::<f64>() / n.max(1) as f64;
        for i in 0..n {
            centered.set(i, c, z.get(i, c) - mean);
        }
    }
    let mut cov = centered.matmul_tn(&centered).expect("square");
    let mut axes = Vec::new();
    for a in 0..2 {
        let mut v: Vec<f64> = (0..f).map(|i| 1.0 + ((i + a) % 3) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w: Vec<f64> = (0..f)
                .map(|i| (0..f).map(|j| cov.get(i, j) * v[j]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        for i in 0..f {
            for j in 0..f {
                cov.set(i, j, cov.get(i, j) - lambda * v[i] * v[j]);
            }
        }
        axes.push(v);
    }
    (0..n)
        .map(|i| {
            let r = centered.row(i);
            let dot = |v: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum();
            [dot(&axes[0]), dot(&axes[1])]
        })
        .collect()
}

#[wasm_bindgen]
pub struct WasmSession(Session);

#[wasm_bindgen]
impl WasmSession {
    #[wasm_bindgen(constructor)]
    pub fn new(options_json: &str) -> Result<WasmSession, JsError> {
        Session::new(options_json)
            .map(WasmSession)
            .map_err(|e| JsError::new(&e))
    }

    pub fn train(&mut self, options_json: &str) -> Result<String, JsError> {
        self.0.train(options_json).map_err(|e| JsError::new(&e))
    }

    pub fn project(&self, layer: usize) -> Result<String, JsError> {
        self.0.project(layer).map_err(|e| JsError::new(&e))
    }

    pub fn heatmap(&self, k: usize, l: usize) -> Result<String, JsError> {
        self.0.heatmap(k, l).map_err(|e| JsError::new(&e))
    }
}
