use rand::seq::SliceRandom;

use super::MultiLayerGraph;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LayerSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test partition of the labeled nodes of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSplit {
    pub layers: Vec<LayerSplit>,
    pub ratio: f64,
    pub seed: u64,
    /// `(layer, class)` pairs with no training example.
    pub missing_classes: Vec<(usize, usize)>,
}

impl LabelSplit {
    pub fn has_warning(&self) -> bool {
        !self.missing_classes.is_empty()
    }

    pub fn n_train(&self) -> usize {
        self.layers.iter().map(|l| l.train.len()).sum()
    }

    pub fn n_test(&self) -> usize {
        self.layers.iter().map(|l| l.test.len()).sum()
    }

    /// A split with no training or test nodes, for fully unsupervised runs.
    pub fn empty(num_layers: usize) -> Self {
        Self {
            layers: vec![LayerSplit::default(); num_layers],
            ratio: 0.0,
            seed: 0,
            missing_classes: Vec::new(),
        }
    }
}

/// Moves `⌈ratio · n_labeled⌉` uniformly chosen labeled nodes of each layer
/// into the training set. Index lists are returned sorted.
pub fn split_labels(graph: &MultiLayerGraph, ratio: f64, seed: u64) -> Result<LabelSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("ratio", format!("{ratio} is outside (0, 1)")));
    }
    let mut rng = seed::rng(seed, Stream::Split);
    let mut layers = Vec::with_capacity(graph.num_layers());
    let mut missing_classes = Vec::new();
    for k in 0..graph.num_layers() {
        if !graph.has_labels(k) {
            layers.push(LayerSplit::default());
            continue;
        }
        let mut nodes = graph.labeled_nodes(k);
        let classes = graph.num_classes[k];
        if nodes.len() < classes {
            return Err(Error::TooFewLabels {
                layer: k + 1,
                needed: classes,
                found: nodes.len(),
            });
        }
        nodes.shuffle(&mut rng);
        let n_train = (ratio * nodes.len() as f64).ceil() as usize;
        let mut test = nodes.split_off(n_train.min(nodes.len()));
        let mut train = nodes;
        train.sort_unstable();
        test.sort_unstable();

        let mut seen = vec![false; classes];
        for &i in &train {
            if let Some(c) = graph.labels[k][i] {
                seen[c] = true;
            }
        }
        missing_classes.extend(
            seen.iter()
                .enumerate()
                .filter(|(_, &s)| !s)
                .map(|(c, _)| (k, c)),
        );
        layers.push(LayerSplit { train, test });
    }
    Ok(LabelSplit {
        layers,
        ratio,
        seed,
        missing_classes,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mlgraph::{Attributes, SparseBinaryMatrix};

    fn labeled(sizes: &[usize], classes: usize) -> MultiLayerGraph {
        let relations: BTreeMap<_, _> = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| ((k, k), SparseBinaryMatrix::empty(n, n)))
            .collect();
        MultiLayerGraph::new(
            sizes.to_vec(),
            relations,
            sizes.iter().map(|&n| Attributes::Identity(n)).collect(),
            sizes
                .iter()
                .map(|&n| (0..n).map(|i| Some(i % classes)).collect())
                .collect(),
            vec![classes; sizes.len()],
        )
        .unwrap()
    }

    #[test]
    fn half_of_ten() {
        let s = split_labels(&labeled(&[10], 2), 0.5, 1).unwrap();
        assert_eq!(s.layers[0].train.len(), 5);
        assert_eq!(s.layers[0].test.len(), 5);
    }

    #[test]
    fn infra_sized_ceilings() {
        let sizes = [2000, 3000, 3325];
        let s = split_labels(&labeled(&sizes, 5), 0.2, 4).unwrap();
        // Per-layer ceilings: 400, 600, 665.
        let per_layer: Vec<usize> = s.layers.iter().map(|l| l.train.len()).collect();
        assert_eq!(per_layer, vec![400, 600, 665]);
        let total = (0.2f64 * 8325.0).ceil() as usize;
        assert!(s.n_train() >= total && s.n_train() < total + sizes.len());
    }

    #[test]
    fn deterministic() {
        let g = labeled(&[30, 12], 3);
        assert_eq!(
            split_labels(&g, 0.2, 9).unwrap(),
            split_labels(&g, 0.2, 9).unwrap()
        );
    }

    #[test]
    fn warns_on_missing_class_and_rejects_bad_input() {
        let g = labeled(&[4], 4);
        let s = split_labels(&g, 0.2, 0).unwrap();
        assert_eq!(s.layers[0].train.len(), 1);
        assert!(s.has_warning());
        assert_eq!(s.missing_classes.len(), 3);

        assert!(split_labels(&g, 1.0, 0).is_err());
        assert!(split_labels(&labeled(&[3], 4).clone(), 0.5, 0).is_err());
    }
}
