//! Full-batch training of all parameters against the combined objective.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::loss::{LossBreakdown, Objective};
use crate::mlgraph::{LabelSplit, MultiLayerGraph};
use crate::model::{init_params, EmbeddingSet, Mgcn, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    PlainGd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain-gd" | "gd" => Ok(Self::PlainGd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::config(
                "optimizer",
                format!("expected plain-gd or adam, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PlainGd => "plain-gd",
            Self::Adam => "adam",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    pub encoder_depth: usize,
    pub use_between_edges: bool,
    /// Print a progress line every this many epochs; 0 disables logging.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 32,
            lambda: 10.0,
            epochs: 200,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            seed: 0,
            encoder_depth: 1,
            use_between_edges: true,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding_dim", "must be at least 1"));
        }
        if self.encoder_depth == 0 {
            return Err(Error::config("encoder_depth", "must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "learning_rate",
                "must be finite and non-negative",
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            lambda: self.lambda,
            use_between_edges: self.use_between_edges,
        }
    }
}

/// Moment estimates for Adam; untouched by plain gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .map(|t| vec![0.0; t.as_slice().len()])
            .collect();
        Self {
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    kind: OptimizerKind,
    learning_rate: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let grads: Vec<&[f64]> = grads.tensors().map(|t| t.as_slice()).collect();
    let tensors: Vec<_> = params.tensors_mut().collect();
    if grads.len() != tensors.len() || state.first.len() != tensors.len() {
        return Err(Error::Contract(
            "gradient and parameter layouts differ".into(),
        ));
    }
    state.step += 1;
    match kind {
        OptimizerKind::PlainGd => {
            for (t, g) in tensors.into_iter().zip(grads) {
                for (p, &g) in t.as_mut_slice().iter_mut().zip(g) {
                    *p -= learning_rate * g;
                }
            }
        }
        OptimizerKind::Adam => {
            let t = state.step as i32;
            let c1 = 1.0 - ADAM_BETA1.powi(t);
            let c2 = 1.0 - ADAM_BETA2.powi(t);
            for (((tensor, g), m), v) in tensors
                .into_iter()
                .zip(grads)
                .zip(&mut state.first)
                .zip(&mut state.second)
            {
                for (((p, &g), m), v) in tensor
                    .as_mut_slice()
                    .iter_mut()
                    .zip(g)
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub params_digest: String,
}

impl TrainHistory {
    /// Tab-separated history: `epoch link_loss label_loss total`, nine
    /// significant digits per value.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# mgcn history v1\nepoch\tlink_loss\tlabel_loss\ttotal\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}\t{:.8e}\t{:.8e}\t{:.8e}",
                r.epoch, r.loss.link, r.loss.label, r.loss.total
            );
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub embeddings: EmbeddingSet,
    pub history: TrainHistory,
}

/// Epoch timer. The browser target has no monotonic clock through `std`,
/// so there it always reads zero.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

/// Initializes parameters and runs `cfg.epochs` full-batch updates. The loss
/// recorded for epoch `e` is evaluated before that epoch's update.
pub fn train(
    graph: &MultiLayerGraph,
    split: &LabelSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = init_params(graph, cfg.embedding_dim, cfg.encoder_depth, cfg.seed)?;
    train_from(graph, split, cfg, params)
}

/// Same as [`train`] but starting from the given parameters.
pub fn train_from(
    graph: &MultiLayerGraph,
    split: &LabelSplit,
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = Mgcn::new(graph)?;
    let objective = cfg.objective();
    let mut state = OptimizerState::new(&params);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Stopwatch::start();
        let (loss, grads) = match model.loss_and_gradient(&params, split, &objective) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                let loss = model.loss(&params, split, &objective)?;
                return Err(Error::Divergence {
                    epoch,
                    breakdown: Box::new(loss),
                });
            }
            Err(e) => return Err(e),
        };
        optimizer_step(
            &mut params,
            &grads,
            &mut state,
            cfg.optimizer,
            cfg.learning_rate,
        )?;
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            eprintln!("epoch {epoch:>5}  {loss}");
        }
        records.push(EpochRecord {
            epoch,
            loss,
            wall_time: start.elapsed(),
        });
    }
    if !params.is_finite() {
        let loss = model.loss(&params, split, &objective)?;
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            breakdown: Box::new(loss),
        });
    }
    let embeddings = model.encode(&params)?;
    Ok(TrainOutcome {
        history: TrainHistory {
            records,
            params_digest: params.digest(),
        },
        params,
        embeddings,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mlgraph::{Attributes, SparseBinaryMatrix};
    use crate::numerics::DenseMatrix;

    fn params_with(values: &[f64]) -> ModelParams {
        ModelParams {
            dim: values.len(),
            encoder: vec![vec![DenseMatrix::from_rows(&[values])]],
            classifier: vec![None],
        }
    }

    #[test]
    fn plain_gd_step() {
        let mut p = params_with(&[0.0, 0.0]);
        let g = params_with(&[1.5, -2.0]);
        let mut st = OptimizerState::new(&p);
        optimizer_step(&mut p, &g, &mut st, OptimizerKind::PlainGd, 1.0).unwrap();
        assert_eq!(p.to_flat(), vec![-1.5, 2.0]);
    }

    #[test]
    fn adam_first_step_is_sign_step() {
        for scale in [1e-3, 1.0, 1e4] {
            let mut p = params_with(&[0.0, 0.0, 0.0]);
            let g = params_with(&[scale, -3.0 * scale, 0.5 * scale]);
            let mut st = OptimizerState::new(&p);
            optimizer_step(&mut p, &g, &mut st, OptimizerKind::Adam, 0.01).unwrap();
            for (v, gi) in p.to_flat().iter().zip(g.to_flat()) {
                let expected = -0.01 * gi / (gi.abs() + ADAM_EPS);
                assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
                assert!((v.abs() - 0.01).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        for kind in [OptimizerKind::PlainGd, OptimizerKind::Adam] {
            let mut p = params_with(&[0.3, -0.7]);
            let before = p.clone();
            let mut st = OptimizerState::new(&p);
            for _ in 0..3 {
                let zero = p.zeros_like();
                optimizer_step(&mut p, &zero, &mut st, kind, 0.1).unwrap();
            }
            assert_eq!(p, before);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = params_with(&[0.0]);
        let g = params_with(&[f64::NAN]);
        let mut st = OptimizerState::new(&p);
        assert!(optimizer_step(&mut p, &g, &mut st, OptimizerKind::Adam, 0.1).is_err());
    }

    fn two_node() -> MultiLayerGraph {
        let mut rel = BTreeMap::new();
        rel.insert((0, 0), SparseBinaryMatrix::new(2, 2, [(0, 1), (1, 0)]));
        MultiLayerGraph::new(
            vec![2],
            rel,
            vec![Attributes::Identity(2)],
            vec![vec![None; 2]],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let g = two_node();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            lambda: 0.0,
            embedding_dim: 4,
            ..TrainConfig::default()
        };
        let out = train(&g, &LabelSplit::empty(1), &cfg).unwrap();
        assert_eq!(out.params, init_params(&g, 4, 1, cfg.seed).unwrap());
        assert_eq!(out.history.records.len(), 1);
    }

    #[test]
    fn plain_gd_decreases_link_loss_on_two_nodes() {
        // Both rows of Z coincide on this graph, so the loss bottoms out at
        // 8 ln 2 when Z = 0; seeds whose ReLU output is already zero sit there.
        let g = two_node();
        let floor = 8.0 * 2f64.ln();
        let mut checked = 0;
        for seed in 0..10 {
            let cfg = TrainConfig {
                epochs: 11,
                learning_rate: 0.1,
                lambda: 0.0,
                optimizer: OptimizerKind::PlainGd,
                embedding_dim: 4,
                seed,
                ..TrainConfig::default()
            };
            let out = train(&g, &LabelSplit::empty(1), &cfg).unwrap();
            let losses: Vec<f64> = out.history.records.iter().map(|r| r.loss.link).collect();
            if losses[0] <= floor + 1e-9 {
                continue;
            }
            checked += 1;
            for w in losses.windows(2) {
                assert!(w[1] < w[0], "seed {seed}: {losses:?}");
            }
        }
        assert!(checked >= 5);
    }

    #[test]
    fn history_format() {
        let g = two_node();
        let cfg = TrainConfig {
            epochs: 2,
            lambda: 0.0,
            embedding_dim: 2,
            ..TrainConfig::default()
        };
        let out = train(&g, &LabelSplit::empty(1), &cfg).unwrap();
        let tsv = out.history.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 4);
        let fields: Vec<&str> = lines[2].split('\t').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "0");
        // nine significant digits: d.dddddddde±x
        assert_eq!(
            fields[1].split('e').next().unwrap().replace('.', "").len(),
            9
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = two_node();
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&g, &LabelSplit::empty(1), &bad),
            Err(Error::Config { .. })
        ));
        assert!("sgd".parse::<OptimizerKind>().is_err());
    }
}
