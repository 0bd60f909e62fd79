//! `key = value` run configuration.
//!
//! Resolution order: built-in defaults, then the `--config` file, then
//! `--set key=value` flags, then `--seed` / `--out-dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Every accepted key with its default. An empty default means "unset": the
/// stage falls back to a preset or derived value.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "", "run seed (required)"),
    ("out_dir", "out", "artifact directory"),
    ("data.kind", "multitask", "multitask | ba-shapes"),
    ("data.path", "", "read this container instead of <out_dir>/data.txt"),
    ("ba.base_nodes", "300", "BA base graph size"),
    ("ba.attach_edges", "5", "edges per new BA node"),
    ("ba.houses", "80", "house motifs"),
    ("ba.perturbation", "0.1", "random extra edges as a fraction of all edges"),
    ("ba.feature_width", "10", "constant feature width"),
    ("mt.num_graphs", "500", "graphs in the multitask set"),
    ("mt.backbone_min", "10", "smallest backbone"),
    ("mt.backbone_max", "20", "largest backbone"),
    ("mt.motifs", "house,star,clique4", "one task per motif"),
    ("mt.motif_probability", "0.5", "chance each motif is attached"),
    ("mt.degree_buckets", "8", "width of the degree one-hot features"),
    ("mt.train_fraction", "0.7", "train split"),
    ("mt.val_fraction", "0.1", "validation split"),
    ("encoder.kind", "gin", "gcn | gin"),
    ("encoder.hidden", "32,32,32", "layer widths after the input"),
    ("pretrain.route", "grace-lite", "gae | grace-lite | supervised"),
    ("pretrain.epochs", "", "route default: gae 200, grace-lite 100, supervised 300"),
    ("pretrain.lr", "0.01", "pretraining learning rate"),
    ("grace.edge_drop", "0.2", "edge-drop rate per view"),
    ("grace.feature_mask", "0.2", "feature-column mask rate per view"),
    ("grace.temperature", "0.5", "InfoNCE temperature"),
    ("grace.batch_graphs", "32", "graphs per contrastive step"),
    ("supervised.task", "0", "graph-level task trained end to end"),
    ("supervised.train_fraction", "0.8", "node-level training fraction"),
    ("supervised.head_hidden", "20", "head width"),
    ("downstream.hidden", "32", "head width"),
    ("downstream.epochs", "300", "head epochs"),
    ("downstream.lr", "0.01", "head learning rate"),
    ("explainer.preset", "auto", "auto | graph | node | infonce"),
    ("explainer.loss", "", "jse | infonce"),
    ("explainer.lr", "", "learning rate"),
    ("explainer.batch_size", "", "instances per step"),
    ("explainer.epochs", "", "passes over the training instances"),
    ("explainer.laplace_scale", "", "Laplace scale of the sampled condition"),
    ("explainer.size", "", "size coefficient"),
    ("explainer.entropy", "", "entropy coefficient"),
    ("explainer.reduction", "", "mean | sum over edges"),
    ("explainer.hidden", "", "scorer hidden width"),
    ("explainer.per_sample", "", "one condition per instance (true | false)"),
    ("explainer.max_steps", "", "stop after this many steps"),
    ("eval.tasks", "", "task ids; empty means all"),
    ("eval.split", "test", "graph split to explain"),
    ("eval.targets", "", "node ids; empty means every node with a nonzero label"),
    ("eval.max_instances", "0", "cap on explained instances; 0 means no cap"),
    ("eval.k_list", "5,10,20,30,50", "top-k percentages for sweep"),
    ("eval.class_rule", "predicted", "predicted | best-of-classes"),
    ("eval.sparsity", "0.7", "target sparsity for evaluate and report"),
    ("eval.condition_norm", "max-abs", "max-abs | l2"),
];

/// Keys left out of the config hash.
const UNHASHED: &[&str] = &["out_dir"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> CliResult<()> {
    if KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown key `{key}`")))
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Applies the lines of a config file.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = split_pair(pair).ok_or_else(|| CliError::Config(format!("bad override `{pair}`")))?;
        self.set(k, v)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        known(key)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Checks the invariants every command relies on.
    pub fn validate(&self) -> CliResult<()> {
        if self.get("seed").is_empty() {
            return Err(CliError::Config("`seed` is required".into()));
        }
        self.seed()?;
        let path = self.get("data.path");
        if !path.is_empty() && !Path::new(path).exists() {
            return Err(CliError::Config(format!("data.path `{path}` does not exist")));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.get(key).is_empty()
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
    }

    /// `None` when the key is empty.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        if self.is_set(key) {
            self.parse(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{s}`")))
            })
            .collect()
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.parse("seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir"))
    }

    /// SHA-256 over the sorted `key=value` lines, `out_dir` excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Resolved configuration as text, in key order.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
