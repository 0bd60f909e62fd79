//! Text tensor dump for encoders, heads and explainers.
//!
//! ```text
//! TAGE-CHECKPOINT v1
//! kind <encoder|head|explainer>
//! meta <key> <value>
//! tensor <name> <rows> <cols>
//! <one line of values per row>
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so reading
//! back is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use diffnum::Tensor;

use crate::encoder::{DownstreamHead, Encoder, EncoderKind, GcnLayer, GinLayer, Layer, Pooling};
use crate::error::{Result, TageError};
use crate::explainer::{EmbeddingExplainer, ExplainerMode};
use crate::nn::Module;

const MAGIC: &str = "TAGE-CHECKPOINT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| TageError::InvalidConfig(format!("checkpoint lacks `{key}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| TageError::InvalidConfig(format!("checkpoint lacks tensor `{name}`")))
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(TageError::InvalidConfig(format!(
                "expected a {kind} checkpoint, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            for r in 0..t.rows() {
                let row: Vec<String> = t.row_slice(r).iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| TageError::Parse { line, message };
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, format!("expected `{MAGIC}`"))),
        }
        let (ln, kind) = lines.next().ok_or_else(|| err(2, "missing kind".into()))?;
        let kind = kind
            .strip_prefix("kind ")
            .ok_or_else(|| err(ln, "expected `kind <name>`".into()))?;
        let mut ck = Checkpoint::new(kind.trim());
        let mut last = ln;
        loop {
            let (ln, line) = lines.next().ok_or_else(|| err(last + 1, "missing `end`".into()))?;
            last = ln;
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.first().copied() {
                Some("end") => break,
                Some("meta") if parts.len() >= 3 => {
                    ck.meta.insert(parts[1].to_string(), parts[2..].join(" "));
                }
                Some("tensor") if parts.len() == 4 => {
                    let rows: usize = parts[2].parse().map_err(|_| err(ln, "bad row count".into()))?;
                    let cols: usize = parts[3].parse().map_err(|_| err(ln, "bad column count".into()))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rl, row) = lines.next().ok_or_else(|| err(last + 1, "truncated tensor".into()))?;
                        last = rl;
                        let before = data.len();
                        for v in row.split_whitespace() {
                            data.push(v.parse::<f64>().map_err(|_| err(rl, format!("bad value `{v}`")))?);
                        }
                        if data.len() - before != cols {
                            return Err(err(rl, format!("expected {cols} values")));
                        }
                    }
                    ck.tensors.push((parts[1].to_string(), Tensor::new(rows, cols, data)?));
                }
                _ => return Err(err(ln, format!("unexpected line `{line}`"))),
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn dims_string(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn encoder_checkpoint(encoder: &Encoder) -> Checkpoint {
    let mut ck = Checkpoint::new("encoder")
        .with_meta("layer_kind", encoder.kind().name())
        .with_meta("dims", dims_string(&encoder.dims()))
        .with_meta("pooling", encoder.pooling().name())
        .with_meta("checksum", encoder.checksum());
    for (i, layer) in encoder.layers().iter().enumerate() {
        match layer {
            Layer::Gcn(l) => {
                ck.tensors.push((format!("layer{i}.weight"), l.weight.clone()));
                ck.tensors.push((format!("layer{i}.bias"), l.bias.clone()));
            }
            Layer::Gin(l) => {
                ck.tensors.push((format!("layer{i}.w1"), l.w1.clone()));
                ck.tensors.push((format!("layer{i}.b1"), l.b1.clone()));
                ck.tensors.push((format!("layer{i}.w2"), l.w2.clone()));
                ck.tensors.push((format!("layer{i}.b2"), l.b2.clone()));
                ck.meta.insert(format!("layer{i}.eps"), format!("{:?}", l.eps));
            }
        }
    }
    ck
}

pub fn encoder_from_checkpoint(ck: &Checkpoint) -> Result<Encoder> {
    ck.expect_kind("encoder")?;
    let kind = EncoderKind::parse(ck.meta("layer_kind")?)
        .ok_or_else(|| TageError::InvalidConfig("unknown layer kind".into()))?;
    let pooling = Pooling::parse(ck.meta("pooling")?)
        .ok_or_else(|| TageError::InvalidConfig("unknown pooling".into()))?;
    let depth = ck.meta("dims")?.split(',').count().saturating_sub(1);
    let mut layers = Vec::with_capacity(depth);
    for i in 0..depth {
        let t = |n: &str| ck.tensor(&format!("layer{i}.{n}")).cloned();
        layers.push(match kind {
            EncoderKind::Gcn => Layer::Gcn(GcnLayer {
                weight: t("weight")?,
                bias: t("bias")?,
            }),
            EncoderKind::Gin => Layer::Gin(GinLayer {
                w1: t("w1")?,
                b1: t("b1")?,
                w2: t("w2")?,
                b2: t("b2")?,
                eps: ck
                    .meta(&format!("layer{i}.eps"))?
                    .parse()
                    .map_err(|_| TageError::InvalidConfig("bad eps".into()))?,
            }),
        });
    }
    let encoder = Encoder::from_layers(kind, layers, pooling)?;
    if let Ok(sum) = ck.meta("checksum") {
        if sum != encoder.checksum() {
            return Err(TageError::InvalidConfig("encoder checkpoint checksum mismatch".into()));
        }
    }
    Ok(encoder)
}

pub fn head_checkpoint(head: &DownstreamHead) -> Checkpoint {
    let mut ck = Checkpoint::new("head").with_meta("classes", head.num_classes());
    for (name, t) in ["w1", "b1", "w2", "b2"].iter().zip(head.parameters()) {
        ck.tensors.push((name.to_string(), t.clone()));
    }
    ck
}

pub fn head_from_checkpoint(ck: &Checkpoint) -> Result<DownstreamHead> {
    ck.expect_kind("head")?;
    DownstreamHead::from_parts(
        ck.tensor("w1")?.clone(),
        ck.tensor("b1")?.clone(),
        ck.tensor("w2")?.clone(),
        ck.tensor("b2")?.clone(),
    )
}

const EXPLAINER_NAMES: [&str; 6] = ["proj_w", "proj_b", "w1", "b1", "w2", "b2"];

pub fn explainer_checkpoint(explainer: &EmbeddingExplainer) -> Checkpoint {
    let mut ck = Checkpoint::new("explainer").with_meta("mode", explainer.mode().name());
    for (name, t) in EXPLAINER_NAMES.iter().zip(explainer.parameters()) {
        ck.tensors.push((name.to_string(), t.clone()));
    }
    ck
}

pub fn explainer_from_checkpoint(ck: &Checkpoint) -> Result<EmbeddingExplainer> {
    ck.expect_kind("explainer")?;
    let mode = ExplainerMode::parse(ck.meta("mode")?)
        .ok_or_else(|| TageError::InvalidConfig("unknown explainer mode".into()))?;
    let t = |n: &str| ck.tensor(n).cloned();
    EmbeddingExplainer::from_parts(
        mode,
        [t("proj_w")?, t("proj_b")?, t("w1")?, t("b1")?, t("w2")?, t("b2")?],
    )
}
