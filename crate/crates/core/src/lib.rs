//! Semi-supervised node embedding for multi-layer graphs.
//!
//! Each layer is encoded by its own graph convolution over within-layer
//! edges. Embeddings are trained to reconstruct both within-layer and
//! between-layer relations through an inner-product decoder, while a second
//! graph convolution per labeled layer predicts node classes.
//!
//! ```
//! use mgcn::mlgraph::{generate_synthetic, split_labels, SyntheticSpec};
//! use mgcn::train::{train, TrainConfig};
//! use mgcn::eval::evaluate;
//!
//! # fn main() -> mgcn::Result<()> {
//! let graph = generate_synthetic(&SyntheticSpec {
//!     layer_sizes: vec![40, 40],
//!     p_in: 0.3,
//!     p_out: 0.02,
//!     q_same: 0.2,
//!     q_diff: 0.01,
//!     ..SyntheticSpec::default()
//! })?;
//! let split = split_labels(&graph, 0.5, 1)?;
//! let cfg = TrainConfig { epochs: 20, embedding_dim: 8, ..TrainConfig::default() };
//! let out = train(&graph, &split, &cfg)?;
//! let scores = evaluate(&graph, &out.params, &split)?;
//! assert!(scores.micro_f1 >= 0.0 && scores.micro_f1 <= 1.0);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod eval;
pub mod loss;
pub mod mlgraph;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
pub use loss::{LossBreakdown, Objective};
pub use mlgraph::{LabelSplit, MultiLayerGraph, SparseBinaryMatrix};
pub use model::{EmbeddingSet, Mgcn, ModelParams, Predictions};
pub use numerics::DenseMatrix;
pub use train::{TrainConfig, TrainHistory};
