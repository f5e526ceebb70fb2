//! Training objective: class-balanced link reconstruction over every stored
//! layer pair plus cross-entropy on the training labels.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::mlgraph::{LabelSplit, MultiLayerGraph};
use crate::model::{EmbeddingSet, Predictions};
use crate::numerics::{sigmoid, DenseMatrix};

/// Probabilities are clamped to at least this before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// Weighting of the two loss terms and which pairs take part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    /// When false, only within-layer pairs are reconstructed.
    pub use_between_edges: bool,
}

impl Objective {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            use_between_edges: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub link: f64,
    pub label: f64,
    pub total: f64,
    /// Reconstruction term per `(k, l)` pair, 0-based.
    pub pairs: BTreeMap<(usize, usize), f64>,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn new(link: f64, pairs: BTreeMap<(usize, usize), f64>, label: f64, lambda: f64) -> Self {
        Self {
            link,
            label,
            total: link + lambda * label,
            pairs,
            lambda,
        }
    }
}

impl fmt::Display for LossBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "total={} link={} label={} lambda={}",
            self.total, self.link, self.label, self.lambda
        )?;
        for ((k, l), v) in &self.pairs {
            write!(f, " link[{},{}]={v}", k + 1, l + 1)?;
        }
        Ok(())
    }
}

/// Link loss value with per-pair terms and `∂L/∂Z` per layer.
pub struct LinkTerms {
    pub value: f64,
    pub pairs: BTreeMap<(usize, usize), f64>,
    pub grad: Vec<DenseMatrix>,
}

fn selected_pairs<'a>(
    graph: &'a MultiLayerGraph,
    use_between_edges: bool,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    graph
        .relations
        .keys()
        .copied()
        .filter(move |&(k, l)| use_between_edges || k == l)
}

fn pair_weights(graph: &MultiLayerGraph, k: usize, l: usize) -> Result<(f64, usize, usize)> {
    let cells = graph.layer_sizes[k] * graph.layer_sizes[l];
    let edges = graph.relations[&(k, l)].nnz();
    if edges == 0 || edges >= cells {
        return Err(Error::DegeneratePair {
            k: k + 1,
            l: l + 1,
            edges,
            cells,
        });
    }
    Ok((cells as f64, edges, cells - edges))
}

fn link_terms(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    use_between_edges: bool,
    want_grad: bool,
) -> Result<LinkTerms> {
    let mut grad: Vec<DenseMatrix> = if want_grad {
        z.layers
            .iter()
            .map(|m| DenseMatrix::zeros(m.rows(), m.cols()))
            .collect()
    } else {
        Vec::new()
    };
    let mut pairs = BTreeMap::new();
    let mut value = 0.0;
    for (k, l) in selected_pairs(graph, use_between_edges) {
        let (cells, n_pos, n_neg) = pair_weights(graph, k, l)?;
        let (zk, zl) = (&z.layers[k], &z.layers[l]);
        let logits = zk.matmul_nt(zl)?;
        let entries = graph.relations[&(k, l)].entries();
        let w_pos = cells / n_pos as f64;
        let w_neg = cells / n_neg as f64;

        let mut d_logits = want_grad.then(|| DenseMatrix::zeros(logits.rows(), logits.cols()));
        let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
        let mut next = 0;
        for i in 0..logits.rows() {
            for j in 0..logits.cols() {
                let p = sigmoid(logits.get(i, j));
                let is_edge = next < entries.len() && entries[next] == (i, j);
                let d = if is_edge {
                    next += 1;
                    pos_sum += clamped_ln(p);
                    if p > LOG_CLAMP {
                        -w_pos * (1.0 - p)
                    } else {
                        0.0
                    }
                } else {
                    neg_sum += clamped_ln(1.0 - p);
                    if 1.0 - p > LOG_CLAMP {
                        w_neg * p
                    } else {
                        0.0
                    }
                };
                if let Some(dl) = d_logits.as_mut() {
                    dl.set(i, j, d);
                }
            }
        }
        let term = -cells * (pos_sum / n_pos as f64 + neg_sum / n_neg as f64);
        pairs.insert((k, l), term);
        value += term;

        if let Some(dl) = d_logits {
            grad[k].add_scaled(1.0, &dl.matmul(zl)?)?;
            grad[l].add_scaled(1.0, &dl.matmul_tn(zk)?)?;
        }
    }
    Ok(LinkTerms { value, pairs, grad })
}

/// Class-balanced reconstruction loss summed over every selected pair.
///
/// Each pair contributes
/// `-N_k N_l [ (1/|E|) Σ_{edges} ln â + (1/(N_k N_l - |E|)) Σ_{non-edges} ln(1 - â) ]`
/// over all `N_k × N_l` cells, diagonal included for within-layer pairs.
pub fn link_loss(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    objective: &Objective,
) -> Result<LossBreakdown> {
    let t = link_terms(graph, z, objective.use_between_edges, false)?;
    Ok(LossBreakdown::new(t.value, t.pairs, 0.0, objective.lambda))
}

pub fn link_loss_with_grad(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    objective: &Objective,
) -> Result<LinkTerms> {
    link_terms(graph, z, objective.use_between_edges, true)
}

/// Label loss value with `∂L/∂logits` for each labeled layer (unscaled by λ).
pub struct LabelTerms {
    pub value: f64,
    pub grad: Vec<Option<DenseMatrix>>,
}

fn label_terms(
    graph: &MultiLayerGraph,
    predictions: &Predictions,
    split: &LabelSplit,
    want_grad: bool,
) -> Result<LabelTerms> {
    if split.layers.len() != graph.num_layers() {
        return Err(Error::Contract(format!(
            "split covers {} layers, graph has {}",
            split.layers.len(),
            graph.num_layers()
        )));
    }
    let mut value = 0.0;
    let mut grad = vec![None; graph.num_layers()];
    for (k, layer) in split.layers.iter().enumerate() {
        if layer.train.is_empty() {
            continue;
        }
        let probs = predictions.layers[k].as_ref().ok_or_else(|| {
            Error::Contract(format!(
                "layer {} has training nodes but no predictions",
                k + 1
            ))
        })?;
        let mut d = want_grad.then(|| DenseMatrix::zeros(probs.rows(), probs.cols()));
        for &i in &layer.train {
            let y = graph.labels[k].get(i).copied().flatten().ok_or_else(|| {
                Error::Contract(format!("training node {i} of layer {} is unlabeled", k + 1))
            })?;
            let p = probs.get(i, y);
            value -= clamped_ln(p);
            if let Some(d) = d.as_mut() {
                if p > LOG_CLAMP {
                    d.row_mut(i).copy_from_slice(probs.row(i));
                    d.set(i, y, p - 1.0);
                }
            }
        }
        grad[k] = d;
    }
    Ok(LabelTerms { value, grad })
}

/// Cross-entropy summed (not averaged) over the training nodes of every layer.
pub fn label_loss(
    graph: &MultiLayerGraph,
    predictions: &Predictions,
    split: &LabelSplit,
) -> Result<f64> {
    Ok(label_terms(graph, predictions, split, false)?.value)
}

pub fn label_loss_with_grad(
    graph: &MultiLayerGraph,
    predictions: &Predictions,
    split: &LabelSplit,
) -> Result<LabelTerms> {
    label_terms(graph, predictions, split, true)
}

/// `link + λ · label`. Labels are not touched when `predictions` is `None`.
pub fn total_loss(
    graph: &MultiLayerGraph,
    z: &EmbeddingSet,
    predictions: Option<&Predictions>,
    split: &LabelSplit,
    objective: &Objective,
) -> Result<LossBreakdown> {
    if !(objective.lambda >= 0.0 && objective.lambda.is_finite()) {
        return Err(Error::config("lambda", "must be finite and non-negative"));
    }
    let link = link_terms(graph, z, objective.use_between_edges, false)?;
    let label = match predictions {
        Some(p) => label_terms(graph, p, split, false)?.value,
        None => 0.0,
    };
    Ok(LossBreakdown::new(
        link.value,
        link.pairs,
        label,
        objective.lambda,
    ))
}
