//! Planted-partition generator for multi-layer graphs.
//!
//! All layers share the same `K` communities. Within a layer, two nodes are
//! linked with probability `p_in` when they share a community and `p_out`
//! otherwise; across layers the probabilities are `q_same` and `q_diff`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Attributes, MultiLayerGraph, SparseBinaryMatrix};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttributeMode {
    Identity,
    /// One-hot community indicator plus uniform noise in `[-noise, noise]`.
    OneHotCommunityNoisy {
        noise: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub layer_sizes: Vec<usize>,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub q_same: f64,
    pub q_diff: f64,
    pub attributes: AttributeMode,
    /// Layers (0-based) that keep their community labels; `None` keeps all.
    pub labeled_layers: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            layer_sizes: vec![200, 200],
            communities: 4,
            p_in: 0.10,
            p_out: 0.01,
            q_same: 0.10,
            q_diff: 0.005,
            attributes: AttributeMode::Identity,
            labeled_layers: None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() {
            return Err(Error::config("nodes", "at least one layer is required"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config(
                "nodes",
                "every layer needs at least one node",
            ));
        }
        if self.communities < 2 {
            return Err(Error::config(
                "communities",
                "at least 2 communities are required",
            ));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("q_same", self.q_same),
            ("q_diff", self.q_diff),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(
                    name,
                    format!("probability {p} is outside [0, 1]"),
                ));
            }
        }
        if self.p_in < self.p_out {
            return Err(Error::config("p_in", "must be at least p_out"));
        }
        if self.q_same < self.q_diff {
            return Err(Error::config("q_same", "must be at least q_diff"));
        }
        if let AttributeMode::OneHotCommunityNoisy { noise } = self.attributes {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Error::config(
                    "noise",
                    "must be a finite non-negative number",
                ));
            }
        }
        if let Some(layers) = &self.labeled_layers {
            if let Some(&bad) = layers.iter().find(|&&k| k >= self.layer_sizes.len()) {
                return Err(Error::config(
                    "labeled_layers",
                    format!("layer {} does not exist", bad + 1),
                ));
            }
        }
        Ok(())
    }
}

/// Draws a graph from `spec`. Community sizes within a layer differ by at
/// most one; which node gets which community is random.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiLayerGraph> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed, Stream::Synthetic);
    let m = spec.layer_sizes.len();
    let k_comm = spec.communities;

    let communities: Vec<Vec<usize>> = spec
        .layer_sizes
        .iter()
        .map(|&n| {
            let mut c: Vec<usize> = (0..n).map(|i| i % k_comm).collect();
            c.shuffle(&mut rng);
            c
        })
        .collect();

    let mut relations = BTreeMap::new();
    for k in 0..m {
        let ck = &communities[k];
        let mut entries = Vec::new();
        for i in 0..ck.len() {
            for j in i + 1..ck.len() {
                let p = if ck[i] == ck[j] {
                    spec.p_in
                } else {
                    spec.p_out
                };
                if rng.gen::<f64>() < p {
                    entries.push((i, j));
                    entries.push((j, i));
                }
            }
        }
        relations.insert((k, k), SparseBinaryMatrix::new(ck.len(), ck.len(), entries));

        for l in k + 1..m {
            let cl = &communities[l];
            let mut entries = Vec::new();
            for (i, &a) in ck.iter().enumerate() {
                for (j, &b) in cl.iter().enumerate() {
                    let q = if a == b { spec.q_same } else { spec.q_diff };
                    if rng.gen::<f64>() < q {
                        entries.push((i, j));
                    }
                }
            }
            relations.insert((k, l), SparseBinaryMatrix::new(ck.len(), cl.len(), entries));
        }
    }

    let attributes = communities
        .iter()
        .map(|c| match spec.attributes {
            AttributeMode::Identity => Attributes::Identity(c.len()),
            AttributeMode::OneHotCommunityNoisy { noise } => {
                let mut x = DenseMatrix::zeros(c.len(), k_comm);
                for (i, &ci) in c.iter().enumerate() {
                    for j in 0..k_comm {
                        let jitter = if noise > 0.0 {
                            rng.gen_range(-noise..=noise)
                        } else {
                            0.0
                        };
                        x.set(i, j, if j == ci { 1.0 } else { 0.0 } + jitter);
                    }
                }
                Attributes::Dense(x)
            }
        })
        .collect();

    let keep = |k: usize| {
        spec.labeled_layers
            .as_ref()
            .is_none_or(|layers| layers.contains(&k))
    };
    let labels = communities
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if keep(k) {
                c.iter().map(|&x| Some(x)).collect()
            } else {
                vec![None; c.len()]
            }
        })
        .collect();
    let num_classes = (0..m).map(|k| if keep(k) { k_comm } else { 0 }).collect();

    MultiLayerGraph::new(
        spec.layer_sizes.clone(),
        relations,
        attributes,
        labels,
        num_classes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            layer_sizes: vec![4],
            communities: 2,
            p_in: 1.0,
            p_out: 0.0,
            q_same: 0.0,
            q_diff: 0.0,
            attributes: AttributeMode::Identity,
            labeled_layers: None,
            seed: 3,
        }
    }

    #[test]
    fn degenerate_probabilities_give_two_cliques() {
        let g = generate_synthetic(&spec()).unwrap();
        let a = g.within(0);
        let c: Vec<usize> = g.labels[0].iter().map(|y| y.unwrap()).collect();
        assert_eq!(a.nnz(), 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.contains(i, j), i != j && c[i] == c[j], "({i},{j})");
            }
        }
    }

    #[test]
    fn cross_layer_matches_community_coincidence() {
        let s = SyntheticSpec {
            layer_sizes: vec![6, 5],
            communities: 3,
            p_in: 0.5,
            q_same: 1.0,
            q_diff: 0.0,
            ..spec()
        };
        let g = generate_synthetic(&s).unwrap();
        let b = g.pair(0, 1).unwrap();
        for i in 0..6 {
            for j in 0..5 {
                assert_eq!(b.contains(i, j), g.labels[0][i] == g.labels[1][j]);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = SyntheticSpec {
            layer_sizes: vec![20, 15],
            communities: 3,
            p_in: 0.5,
            p_out: 0.1,
            q_same: 0.3,
            q_diff: 0.05,
            attributes: AttributeMode::OneHotCommunityNoisy { noise: 0.3 },
            labeled_layers: None,
            seed: 7,
        };
        assert_eq!(
            generate_synthetic(&s).unwrap(),
            generate_synthetic(&s).unwrap()
        );
        let other = SyntheticSpec {
            seed: 8,
            ..s.clone()
        };
        assert_ne!(
            generate_synthetic(&s).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn labeled_layers_restricts_labels() {
        let s = SyntheticSpec {
            layer_sizes: vec![8, 8],
            p_in: 0.5,
            q_same: 0.5,
            labeled_layers: Some(vec![0]),
            ..spec()
        };
        let g = generate_synthetic(&s).unwrap();
        assert!(g.has_labels(0) && !g.has_labels(1));
        assert!(g.labels[1].iter().all(Option::is_none));
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let bad = SyntheticSpec {
            p_in: 1.2,
            ..spec()
        };
        match generate_synthetic(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "p_in"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = SyntheticSpec {
            q_same: 0.0,
            q_diff: 0.2,
            ..spec()
        };
        assert!(matches!(
            generate_synthetic(&bad),
            Err(Error::Config { .. })
        ));
    }
}
