//! Multi-layer graph data model.
//!
//! Layers are indexed from 0 in memory. Every user-facing surface (files,
//! messages, reports) numbers layers from 1.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{CsrMatrix, DenseMatrix};

pub mod io;
pub mod split;
pub mod synthetic;

pub use io::{graph_digest, load_graph, save_graph};
pub use split::{split_labels, LabelSplit};
pub use synthetic::{generate_synthetic, AttributeMode, SyntheticSpec};

/// Binary relation matrix stored as sorted, duplicate-free coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl SparseBinaryMatrix {
    /// Sorts and deduplicates `entries`. Range is not checked here; see
    /// [`MultiLayerGraph::validate`].
    pub fn new(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_unstable();
        entries.dedup();
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// Adds the transpose of every entry. Only meaningful for square matrices.
    pub fn symmetrized(&self) -> Self {
        Self::new(
            self.rows,
            self.cols,
            self.entries.iter().flat_map(|&(i, j)| [(i, j), (j, i)]),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.binary_search(&(i, j)).is_ok()
    }

    pub fn to_csr(&self) -> Result<CsrMatrix> {
        CsrMatrix::from_sorted_triplets(
            self.rows,
            self.cols,
            self.entries.iter().map(|&(i, j)| (i, j, 1.0)),
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j) in &self.entries {
            m.set(i, j, 1.0);
        }
        m
    }

    /// Reorders rows and columns: entry `(i, j)` moves to `(row_perm[i], col_perm[j])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Self::new(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .map(|&(i, j)| (row_perm[i], col_perm[j])),
        )
    }
}

/// Node attributes of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Attributes {
    /// `X = I_N`, never materialized.
    Identity(usize),
    Dense(DenseMatrix),
}

impl Attributes {
    pub fn rows(&self) -> usize {
        match self {
            Attributes::Identity(n) => *n,
            Attributes::Dense(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Attributes::Identity(n) => *n,
            Attributes::Dense(m) => m.cols(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerGraph {
    pub layer_sizes: Vec<usize>,
    /// Keyed by `(k, l)` with `k <= l`. Within-layer pairs are always present.
    pub relations: BTreeMap<(usize, usize), SparseBinaryMatrix>,
    pub attributes: Vec<Attributes>,
    /// Per layer, one entry per node; `None` marks an unlabeled node.
    pub labels: Vec<Vec<Option<usize>>>,
    /// Per layer; 0 marks a layer without labels.
    pub num_classes: Vec<usize>,
}

impl MultiLayerGraph {
    /// Assembles a graph and rejects it if any invariant fails.
    pub fn new(
        layer_sizes: Vec<usize>,
        relations: BTreeMap<(usize, usize), SparseBinaryMatrix>,
        attributes: Vec<Attributes>,
        labels: Vec<Vec<Option<usize>>>,
        num_classes: Vec<usize>,
    ) -> Result<Self> {
        let graph = Self {
            layer_sizes,
            relations,
            attributes,
            labels,
            num_classes,
        };
        graph.ensure_valid()?;
        Ok(graph)
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn within(&self, k: usize) -> &SparseBinaryMatrix {
        &self.relations[&(k, k)]
    }

    pub fn pair(&self, k: usize, l: usize) -> Option<&SparseBinaryMatrix> {
        self.relations.get(&(k, l))
    }

    pub fn has_labels(&self, k: usize) -> bool {
        self.num_classes[k] > 0
    }

    pub fn labeled_nodes(&self, k: usize) -> Vec<usize> {
        self.labels[k]
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|_| i))
            .collect()
    }

    /// Copy with every label removed and every layer marked unlabeled.
    pub fn without_labels(&self) -> Self {
        let mut g = self.clone();
        for (k, labels) in g.labels.iter_mut().enumerate() {
            *labels = vec![None; self.layer_sizes[k]];
        }
        g.num_classes = vec![0; self.num_layers()];
        g
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidGraph(msgs.join("; ")))
        }
    }

    /// Lists every broken invariant; empty when the graph is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.num_layers();
        if m == 0 {
            out.push(Violation::graph(Rule::NoLayers));
            return out;
        }
        if self.attributes.len() != m || self.labels.len() != m || self.num_classes.len() != m {
            out.push(Violation::graph(Rule::LayerCount));
            return out;
        }
        for (k, &n) in self.layer_sizes.iter().enumerate() {
            if n == 0 {
                out.push(Violation::layer(k, Rule::EmptyLayer, None));
            }
            if !self.relations.contains_key(&(k, k)) {
                out.push(Violation::pair(k, k, Rule::MissingWithinLayer, None));
            }
        }

        for (&(k, l), mat) in &self.relations {
            if k > l || l >= m {
                out.push(Violation::pair(k, l, Rule::BadPair, None));
                continue;
            }
            let (nk, nl) = (self.layer_sizes[k], self.layer_sizes[l]);
            if mat.shape() != (nk, nl) {
                out.push(Violation::pair(k, l, Rule::ShapeMismatch, None));
            }
            let mut in_range = true;
            for &(i, j) in mat.entries() {
                if i >= nk || j >= nl || i >= mat.rows() || j >= mat.cols() {
                    out.push(Violation::pair(k, l, Rule::IndexOutOfRange, Some((i, j))));
                    in_range = false;
                } else if k == l && i == j {
                    out.push(Violation::pair(k, l, Rule::SelfLoop, Some((i, j))));
                }
            }
            if k == l && in_range {
                for &(i, j) in mat.entries() {
                    if !mat.contains(j, i) {
                        out.push(Violation::pair(k, l, Rule::Asymmetric, Some((i, j))));
                    }
                }
            }
            if nk * nl > 0 && mat.nnz() >= nk * nl {
                out.push(Violation::pair(k, l, Rule::NoNonEdge, None));
            }
        }

        for k in 0..m {
            let n = self.layer_sizes[k];
            let attrs = &self.attributes[k];
            if attrs.rows() != n {
                out.push(Violation::layer(
                    k,
                    Rule::AttributeRows,
                    Some((attrs.rows(), n)),
                ));
            }
            if let Attributes::Dense(x) = attrs {
                if !x.is_finite() {
                    out.push(Violation::layer(k, Rule::NonFiniteAttribute, None));
                }
            }
            let labels = &self.labels[k];
            if labels.len() != n {
                out.push(Violation::layer(
                    k,
                    Rule::LabelLength,
                    Some((labels.len(), n)),
                ));
            }
            let classes = self.num_classes[k];
            if classes == 1 {
                out.push(Violation::layer(k, Rule::TooFewClasses, None));
            }
            for (i, y) in labels.iter().enumerate() {
                if let Some(c) = *y {
                    if classes == 0 || c >= classes {
                        out.push(Violation::layer(k, Rule::LabelOutOfRange, Some((i, c))));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NoLayers,
    LayerCount,
    EmptyLayer,
    MissingWithinLayer,
    BadPair,
    ShapeMismatch,
    IndexOutOfRange,
    SelfLoop,
    Asymmetric,
    NoNonEdge,
    AttributeRows,
    NonFiniteAttribute,
    LabelLength,
    TooFewClasses,
    LabelOutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Graph,
    Layer(usize),
    Pair(usize, usize),
}

/// A single broken invariant. `index` is the offending `(row, col)` entry for
/// relation rules, `(found, expected)` for count rules, and `(node, class)`
/// for label rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: Location,
    pub rule: Rule,
    pub index: Option<(usize, usize)>,
}

impl Violation {
    fn graph(rule: Rule) -> Self {
        Self {
            location: Location::Graph,
            rule,
            index: None,
        }
    }

    fn layer(k: usize, rule: Rule, index: Option<(usize, usize)>) -> Self {
        Self {
            location: Location::Layer(k),
            rule,
            index,
        }
    }

    fn pair(k: usize, l: usize, rule: Rule, index: Option<(usize, usize)>) -> Self {
        Self {
            location: Location::Pair(k, l),
            rule,
            index,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.rule {
            Rule::NoLayers => "graph has no layers",
            Rule::LayerCount => "per-layer vectors disagree on the number of layers",
            Rule::EmptyLayer => "layer has no nodes",
            Rule::MissingWithinLayer => "missing within-layer matrix",
            Rule::BadPair => "relation key must satisfy k <= l < M",
            Rule::ShapeMismatch => "matrix shape does not match layer sizes",
            Rule::IndexOutOfRange => "index out of range",
            Rule::SelfLoop => "self-loop",
            Rule::Asymmetric => "asymmetric within-layer entry",
            Rule::NoNonEdge => "every cell is an edge",
            Rule::AttributeRows => "attribute row count differs from node count",
            Rule::NonFiniteAttribute => "non-finite attribute",
            Rule::LabelLength => "label vector length differs from node count",
            Rule::TooFewClasses => "labeled layer needs at least 2 classes",
            Rule::LabelOutOfRange => "label out of range",
        };
        match self.location {
            Location::Graph => write!(f, "{what}")?,
            Location::Layer(k) => write!(f, "{what} in layer {}", k + 1)?,
            Location::Pair(k, l) if k == l => write!(f, "{what} in layer {}", k + 1)?,
            Location::Pair(k, l) => write!(f, "{what} in pair ({},{})", k + 1, l + 1)?,
        }
        if let Some((a, b)) = self.index {
            write!(f, " at ({a},{b})")?;
        }
        Ok(())
    }
}
