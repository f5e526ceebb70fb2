//! The MGCN network: one GCN encoder per layer, inner-product decoders for
//! every stored layer pair, and a GCN softmax classifier head per labeled
//! layer. Gradients are derived by hand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss::{self, LossBreakdown, Objective};
use crate::mlgraph::{Attributes, LabelSplit, MultiLayerGraph, SparseBinaryMatrix};
use crate::numerics::{elementwise_sigmoid, row_softmax, spmm, CsrMatrix, DenseMatrix};
use crate::seed::{self, Stream};

/// Per encoder layer: the propagated input (None for the first layer) and
/// the pre-activation.
type LayerCache = (Option<DenseMatrix>, DenseMatrix);

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(CsrMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn identity(n: usize) -> Self {
        Self(CsrMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }
}

pub fn normalize_adjacency(a: &SparseBinaryMatrix) -> Result<NormalizedAdjacency> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape {
            op: "normalize_adjacency",
            left: a.shape(),
            right: (n, n),
        });
    }
    for &(i, j) in a.entries() {
        if i >= n || j >= n {
            return Err(Error::Contract(format!("entry ({i},{j}) outside {n}x{n}")));
        }
        if i == j {
            return Err(Error::Contract(format!("self-loop at node {i}")));
        }
        if !a.contains(j, i) {
            return Err(Error::Contract(format!("asymmetric entry ({i},{j})")));
        }
    }
    let mut degree = vec![1.0f64; n];
    for &(i, _) in a.entries() {
        degree[i] += 1.0;
    }
    let weight = |i: usize, j: usize| 1.0 / (degree[i] * degree[j]).sqrt();

    let mut triplets = Vec::with_capacity(a.nnz() + n);
    let mut entries = a.entries().iter().peekable();
    for i in 0..n {
        let mut diag_done = false;
        while let Some(&&(r, c)) = entries.peek() {
            if r != i {
                break;
            }
            if !diag_done && c > i {
                triplets.push((i, i, weight(i, i)));
                diag_done = true;
            }
            triplets.push((i, c, weight(i, c)));
            entries.next();
        }
        if !diag_done {
            triplets.push((i, i, weight(i, i)));
        }
    }
    Ok(NormalizedAdjacency(CsrMatrix::from_sorted_triplets(
        n, n, triplets,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

/// `a(S · X · Θ)`.
pub fn gcn_layer(
    s: &NormalizedAdjacency,
    x: &DenseMatrix,
    theta: &DenseMatrix,
    activation: Activation,
) -> Result<DenseMatrix> {
    let pre = spmm(&s.0, x)?.matmul(theta)?;
    Ok(match activation {
        Activation::Relu => pre.map(relu),
        Activation::Identity => pre,
        Activation::Softmax => row_softmax(&pre),
    })
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Trainable weights. Encoder stacks are `C_k × F` followed by `F × F`
/// for deeper encoders; classifier heads are `F × K_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub encoder: Vec<Vec<DenseMatrix>>,
    pub classifier: Vec<Option<DenseMatrix>>,
}

impl ModelParams {
    pub fn tensors(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.encoder
            .iter()
            .flatten()
            .chain(self.classifier.iter().flatten())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix> {
        self.encoder
            .iter_mut()
            .flatten()
            .chain(self.classifier.iter_mut().flatten())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().map(|t| t.as_slice().len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_scalars());
        let mut offset = 0;
        for t in self.tensors_mut() {
            let s = t.as_mut_slice();
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        }
    }

    pub fn zeros_like(&self) -> Self {
        let zero = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
        Self {
            dim: self.dim,
            encoder: self
                .encoder
                .iter()
                .map(|ws| ws.iter().map(zero).collect())
                .collect(),
            classifier: self
                .classifier
                .iter()
                .map(|c| c.as_ref().map(zero))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(DenseMatrix::is_finite)
    }

    /// SHA-256 over the little-endian bytes of every parameter.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for t in self.tensors() {
            for v in t.as_slice() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check(&self, graph: &MultiLayerGraph) -> Result<()> {
        let m = graph.num_layers();
        if self.encoder.len() != m || self.classifier.len() != m {
            return Err(Error::Contract(format!(
                "parameters cover {} layers, graph has {m}",
                self.encoder.len()
            )));
        }
        for k in 0..m {
            let ws = &self.encoder[k];
            if ws.is_empty() {
                return Err(Error::Contract(format!(
                    "layer {} has no encoder weights",
                    k + 1
                )));
            }
            let mut rows = graph.attributes[k].cols();
            for w in ws {
                if w.rows() != rows || w.cols() != self.dim {
                    return Err(Error::Shape {
                        op: "encoder weight",
                        left: w.shape(),
                        right: (rows, self.dim),
                    });
                }
                rows = self.dim;
            }
            match (&self.classifier[k], graph.num_classes[k]) {
                (None, 0) => {}
                (Some(c), classes) if c.shape() == (self.dim, classes) => {}
                (c, classes) => {
                    return Err(Error::Shape {
                        op: "classifier weight",
                        left: c.as_ref().map_or((0, 0), DenseMatrix::shape),
                        right: (self.dim, classes),
                    })
                }
            }
        }
        Ok(())
    }
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    let bound = glorot_bound(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("shape")
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform initialization. `depth` is the number of encoder GCN layers.
/// Encoder weights are drawn before any classifier head, so they do not
/// depend on which layers carry labels.
pub fn init_params(
    graph: &MultiLayerGraph,
    dim: usize,
    depth: usize,
    seed: u64,
) -> Result<ModelParams> {
    if dim == 0 {
        return Err(Error::config("embedding_dim", "must be at least 1"));
    }
    if depth == 0 {
        return Err(Error::config("encoder_depth", "must be at least 1"));
    }
    let mut rng = seed::rng(seed, Stream::Init);
    let m = graph.num_layers();
    let mut encoder = Vec::with_capacity(m);
    for k in 0..m {
        let mut ws = vec![glorot(&mut rng, graph.attributes[k].cols(), dim)];
        for _ in 1..depth {
            ws.push(glorot(&mut rng, dim, dim));
        }
        encoder.push(ws);
    }
    let classifier = graph
        .num_classes
        .iter()
        .map(|&classes| (classes > 0).then(|| glorot(&mut rng, dim, classes)))
        .collect();
    Ok(ModelParams {
        dim,
        encoder,
        classifier,
    })
}

/// Per-layer embeddings `Z^(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub layers: Vec<DenseMatrix>,
}

/// Per-layer class probabilities; `None` for unlabeled layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub layers: Vec<Option<DenseMatrix>>,
}

/// `S · X` for the first encoder layer. Identity attributes keep the sparse
/// factor so the product with `Θ` is a plain `spmm`.
#[derive(Debug, Clone)]
enum PropagatedInput {
    Sparse,
    Dense(DenseMatrix),
}

/// Everything the forward pass keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Per layer, per encoder depth: `(input, pre-activation)` where `input`
    /// is `S · H_{t-1}` for depths past the first.
    encoder: Vec<Vec<(Option<DenseMatrix>, DenseMatrix)>>,
    pub embeddings: EmbeddingSet,
    /// Per labeled layer: `S · Z`.
    propagated_z: Vec<Option<DenseMatrix>>,
    pub predictions: Predictions,
}

/// A graph with its normalized adjacencies and propagated inputs cached.
#[derive(Debug, Clone)]
pub struct Mgcn<'g> {
    graph: &'g MultiLayerGraph,
    adjacency: Vec<NormalizedAdjacency>,
    inputs: Vec<PropagatedInput>,
}

impl<'g> Mgcn<'g> {
    pub fn new(graph: &'g MultiLayerGraph) -> Result<Self> {
        graph.ensure_valid()?;
        let adjacency = (0..graph.num_layers())
            .map(|k| normalize_adjacency(graph.within(k)))
            .collect::<Result<Vec<_>>>()?;
        let inputs = adjacency
            .iter()
            .zip(&graph.attributes)
            .map(|(s, x)| {
                Ok(match x {
                    Attributes::Identity(_) => PropagatedInput::Sparse,
                    Attributes::Dense(x) => PropagatedInput::Dense(spmm(&s.0, x)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            graph,
            adjacency,
            inputs,
        })
    }

    pub fn graph(&self) -> &MultiLayerGraph {
        self.graph
    }

    pub fn adjacency(&self, k: usize) -> &NormalizedAdjacency {
        &self.adjacency[k]
    }

    fn encode_layer(
        &self,
        k: usize,
        weights: &[DenseMatrix],
    ) -> Result<(Vec<LayerCache>, DenseMatrix)> {
        let s = &self.adjacency[k].0;
        let mut cache = Vec::with_capacity(weights.len());
        let first = match &self.inputs[k] {
            PropagatedInput::Sparse => spmm(s, &weights[0])?,
            PropagatedInput::Dense(sx) => sx.matmul(&weights[0])?,
        };
        let mut hidden = first.map(relu);
        cache.push((None, first));
        for w in &weights[1..] {
            let input = spmm(s, &hidden)?;
            let pre = input.matmul(w)?;
            hidden = pre.map(relu);
            cache.push((Some(input), pre));
        }
        Ok((cache, hidden))
    }

    /// `Z^(k) = ReLU(S_k X_k Θ_enc^(k))` per layer. Between-layer relations
    /// play no part here.
    pub fn encode(&self, params: &ModelParams) -> Result<EmbeddingSet> {
        params.check(self.graph)?;
        let layers = (0..self.graph.num_layers())
            .map(|k| Ok(self.encode_layer(k, &params.encoder[k])?.1))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingSet { layers })
    }

    /// `Ŷ^(k) = softmax(S_k Z^(k) Θ_cls^(k))` for every labeled layer.
    pub fn classify(&self, z: &EmbeddingSet, params: &ModelParams) -> Result<Predictions> {
        let layers = (0..self.graph.num_layers())
            .map(|k| match &params.classifier[k] {
                Some(theta) if self.graph.has_labels(k) => Ok(Some(gcn_layer(
                    &self.adjacency[k],
                    &z.layers[k],
                    theta,
                    Activation::Softmax,
                )?)),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Predictions { layers })
    }

    /// Forward pass. The classifier heads are skipped when `with_classifier`
    /// is false, in which case no prediction is produced.
    pub fn forward(&self, params: &ModelParams, with_classifier: bool) -> Result<ForwardPass> {
        params.check(self.graph)?;
        let m = self.graph.num_layers();
        let mut encoder = Vec::with_capacity(m);
        let mut embeddings = Vec::with_capacity(m);
        for k in 0..m {
            let (cache, z) = self.encode_layer(k, &params.encoder[k])?;
            encoder.push(cache);
            embeddings.push(z);
        }
        let mut propagated_z = vec![None; m];
        let mut predictions = vec![None; m];
        if with_classifier {
            for k in 0..m {
                if let (Some(theta), true) = (&params.classifier[k], self.graph.has_labels(k)) {
                    let sz = spmm(&self.adjacency[k].0, &embeddings[k])?;
                    predictions[k] = Some(row_softmax(&sz.matmul(theta)?));
                    propagated_z[k] = Some(sz);
                }
            }
        }
        Ok(ForwardPass {
            encoder,
            embeddings: EmbeddingSet { layers: embeddings },
            propagated_z,
            predictions: Predictions {
                layers: predictions,
            },
        })
    }

    /// Loss value without gradients.
    pub fn loss(
        &self,
        params: &ModelParams,
        split: &LabelSplit,
        objective: &Objective,
    ) -> Result<LossBreakdown> {
        let supervised = objective.lambda > 0.0;
        let fwd = self.forward(params, supervised)?;
        loss::total_loss(
            self.graph,
            &fwd.embeddings,
            supervised.then_some(&fwd.predictions),
            split,
            objective,
        )
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        params: &ModelParams,
        split: &LabelSplit,
        objective: &Objective,
    ) -> Result<(LossBreakdown, ModelParams)> {
        let supervised = objective.lambda > 0.0;
        let fwd = self.forward(params, supervised)?;
        let link = loss::link_loss_with_grad(self.graph, &fwd.embeddings, objective)?;
        let mut dz = link.grad;
        let mut grads = params.zeros_like();

        let label = if supervised {
            let label = loss::label_loss_with_grad(self.graph, &fwd.predictions, split)?;
            for (k, d_logits) in label.grad.iter().enumerate() {
                let (Some(d_logits), Some(theta), Some(sz)) =
                    (d_logits, &params.classifier[k], &fwd.propagated_z[k])
                else {
                    continue;
                };
                let mut d_logits = d_logits.clone();
                d_logits
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v *= objective.lambda);
                grads.classifier[k] = Some(sz.matmul_tn(&d_logits)?);
                let d_sz = d_logits.matmul_nt(theta)?;
                dz[k].add_scaled(1.0, &spmm(&self.adjacency[k].0, &d_sz)?)?;
            }
            label.value
        } else {
            0.0
        };

        for (k, d_hidden) in dz.into_iter().enumerate() {
            let s = &self.adjacency[k].0;
            let weights = &params.encoder[k];
            let cache = &fwd.encoder[k];
            let mut d_hidden = d_hidden;
            for t in (0..weights.len()).rev() {
                let (input, pre) = &cache[t];
                let mut d_pre = d_hidden;
                for (d, &p) in d_pre.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                }
                grads.encoder[k][t] = match (input, &self.inputs[k]) {
                    (Some(sh), _) => sh.matmul_tn(&d_pre)?,
                    (None, PropagatedInput::Sparse) => spmm(s, &d_pre)?,
                    (None, PropagatedInput::Dense(sx)) => sx.matmul_tn(&d_pre)?,
                };
                if t == 0 {
                    break;
                }
                d_hidden = spmm(s, &d_pre.matmul_nt(&weights[t])?)?;
            }
        }

        let breakdown = LossBreakdown::new(link.value, link.pairs, label, objective.lambda);
        if !breakdown.total.is_finite() {
            return Err(Error::NonFinite(format!("loss: {breakdown}")));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite(format!("gradient at loss {breakdown}")));
        }
        Ok((breakdown, grads))
    }
}

pub fn encode(graph: &MultiLayerGraph, params: &ModelParams) -> Result<EmbeddingSet> {
    Mgcn::new(graph)?.encode(params)
}

pub fn classify(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    params: &ModelParams,
) -> Result<Predictions> {
    Mgcn::new(graph)?.classify(z, params)
}

/// `Â = σ(Z_k Z_lᵀ)`.
pub fn decode_pair(z_k: &DenseMatrix, z_l: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(elementwise_sigmoid(&z_k.matmul_nt(z_l)?))
}

/// Gradient of the full objective with between-layer reconstruction enabled.
pub fn backward(
    graph: &MultiLayerGraph,
    params: &ModelParams,
    split: &LabelSplit,
    lambda: f64,
) -> Result<(LossBreakdown, ModelParams)> {
    Mgcn::new(graph)?.loss_and_gradient(params, split, &Objective::new(lambda))
}

pub fn embeddings_file(k: usize) -> String {
    format!("embeddings_{}.txt", k + 1)
}

/// One file per layer; row `i` holds the `F` coordinates of node `i`.
pub fn write_embeddings(z: &EmbeddingSet, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (k, m) in z.layers.iter().enumerate() {
        let mut s = format!(
            "# mgcn embeddings v1 layer={} rows={} cols={}\n",
            k + 1,
            m.rows(),
            m.cols()
        );
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let path = dir.join(embeddings_file(k));
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let (mut rows, mut cols) = (0, None);
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("invalid real `{v}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if *cols.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "ragged embedding row".into(),
            });
        }
        data.extend(vals);
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}
