//! Flat `key=value` text configuration for training runs and synthetic
//! datasets. Keys mirror the struct field names.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mlgraph::{AttributeMode, SyntheticSpec};
use crate::train::TrainConfig;

/// `(line, key, value)` triples; `#` comments and blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected key=value"))?;
        out.push((n + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, got `{value}`"),
        )),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl TrainConfig {
    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "embedding_dim" | "dim" => self.embedding_dim = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "learning_rate" | "lr" => self.learning_rate = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "encoder_depth" => self.encoder_depth = parse(key, value)?,
            "use_between_edges" => self.use_between_edges = parse_bool(key, value)?,
            "log_every" => self.log_every = parse(key, value)?,
            _ => return Err(Error::config(key, "unknown training option")),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (_, k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field, one per line, in a form [`TrainConfig::from_text`] accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "embedding_dim={}", self.embedding_dim);
        let _ = writeln!(s, "lambda={}", self.lambda);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "optimizer={}", self.optimizer);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "encoder_depth={}", self.encoder_depth);
        let _ = writeln!(s, "use_between_edges={}", self.use_between_edges);
        let _ = writeln!(s, "log_every={}", self.log_every);
        s
    }
}

impl SyntheticSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "layers" => {
                let m: usize = parse(key, value)?;
                let n = self.layer_sizes.first().copied().unwrap_or(1);
                self.layer_sizes.resize(m, n);
            }
            "nodes" => self.layer_sizes = parse_list(key, value)?,
            "communities" => self.communities = parse(key, value)?,
            "p_in" => self.p_in = parse(key, value)?,
            "p_out" => self.p_out = parse(key, value)?,
            "q_same" => self.q_same = parse(key, value)?,
            "q_diff" => self.q_diff = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "attributes" => {
                let noise = match self.attributes {
                    AttributeMode::OneHotCommunityNoisy { noise } => noise,
                    AttributeMode::Identity => 0.5,
                };
                self.attributes = match value {
                    "identity" => AttributeMode::Identity,
                    "one-hot-community-noisy" => AttributeMode::OneHotCommunityNoisy { noise },
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected identity or one-hot-community-noisy, got `{value}`"),
                        ))
                    }
                }
            }
            "noise" => {
                let noise = parse(key, value)?;
                self.attributes = AttributeMode::OneHotCommunityNoisy { noise };
            }
            "labeled_layers" => {
                let layers: Vec<usize> = parse_list(key, value)?;
                if layers.contains(&0) {
                    return Err(Error::config(key, "layers are numbered from 1"));
                }
                self.labeled_layers = Some(layers.into_iter().map(|k| k - 1).collect());
            }
            _ => return Err(Error::config(key, "unknown synthetic option")),
        }
        Ok(())
    }

    /// Parses a spec file. `layers`, when given, must agree with `nodes`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut declared_layers = None;
        let entries = parse_key_values(text)?;
        // `nodes` first so that `layers` can be checked against it.
        for (_, k, v) in entries.iter().filter(|(_, k, _)| k == "nodes") {
            spec.set(k, v)?;
        }
        for (_, k, v) in entries.iter().filter(|(_, k, _)| k != "nodes") {
            if k == "layers" {
                declared_layers = Some(parse::<usize>(k, v)?);
            } else if k == "attributes" {
                // applied after `noise` so an explicit mode wins
                continue;
            } else {
                spec.set(k, v)?;
            }
        }
        if let Some((_, k, v)) = entries.iter().rev().find(|(_, k, _)| k == "attributes") {
            spec.set(k, v)?;
        }
        if let Some(m) = declared_layers {
            if !entries.iter().any(|(_, k, _)| k == "nodes") {
                spec.set("layers", &m.to_string())?;
            } else if m != spec.layer_sizes.len() {
                return Err(Error::config(
                    "layers",
                    format!(
                        "declares {m} layers but `nodes` lists {}",
                        spec.layer_sizes.len()
                    ),
                ));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(s, "layers={}", self.layer_sizes.len());
        let _ = writeln!(s, "nodes={}", join(&self.layer_sizes));
        let _ = writeln!(s, "communities={}", self.communities);
        let _ = writeln!(s, "p_in={}", self.p_in);
        let _ = writeln!(s, "p_out={}", self.p_out);
        let _ = writeln!(s, "q_same={}", self.q_same);
        let _ = writeln!(s, "q_diff={}", self.q_diff);
        match self.attributes {
            AttributeMode::Identity => {
                let _ = writeln!(s, "attributes=identity");
            }
            AttributeMode::OneHotCommunityNoisy { noise } => {
                let _ = writeln!(s, "attributes=one-hot-community-noisy");
                let _ = writeln!(s, "noise={noise}");
            }
        }
        if let Some(layers) = &self.labeled_layers {
            let one_based: Vec<usize> = layers.iter().map(|k| k + 1).collect();
            let _ = writeln!(s, "labeled_layers={}", join(&one_based));
        }
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}
