use diffnum::{Tape, Tensor};
use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::DownstreamHead;
use crate::error::{Result, TageError};
use crate::nn::Module;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionSource {
    Sampled,
    Downstream,
    OneHot,
    Uniform,
}

impl ConditionSource {
    pub fn name(self) -> &'static str {
        match self {
            ConditionSource::Sampled => "sampled",
            ConditionSource::Downstream => "downstream",
            ConditionSource::OneHot => "one-hot",
            ConditionSource::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditionNorm {
    #[default]
    MaxAbs,
    L2,
}

impl ConditionNorm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" | "max-abs" => Some(ConditionNorm::MaxAbs),
            "l2" => Some(ConditionNorm::L2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionNorm::MaxAbs => "max-abs",
            ConditionNorm::L2 => "l2",
        }
    }
}

/// Nonnegative weighting of embedding dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVector {
    values: Vec<f64>,
    source: ConditionSource,
}

impl ConditionVector {
    pub fn new(values: Vec<f64>, source: ConditionSource) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(TageError::InvalidConfig("condition entries must be finite and >= 0".into()));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(TageError::InvalidConfig("condition vector is all zero".into()));
        }
        Ok(Self { values, source })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            values: vec![1.0; d],
            source: ConditionSource::Uniform,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> ConditionSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_row(&self) -> Tensor {
        Tensor::row(self.values.clone())
    }
}

/// `|Laplace(0, b)|` draws divided by their maximum.
pub fn sample_condition(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<ConditionVector> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(TageError::InvalidConfig(format!("laplace scale must be positive, got {scale}")));
    }
    if d == 0 {
        return Err(TageError::InvalidConfig("condition width is zero".into()));
    }
    loop {
        // |Laplace(0, b)| is exponential with mean b.
        let draws: Vec<f64> = (0..d)
            .map(|_| -scale * (1.0 - rng.gen::<f64>()).ln())
            .collect();
        let max = draws.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && max.is_finite() {
            let values = draws.into_iter().map(|v| v / max).collect();
            return Ok(ConditionVector {
                values,
                source: ConditionSource::Sampled,
            });
        }
    }
}

pub fn one_hot_condition(k: usize, d: usize) -> Result<ConditionVector> {
    if k >= d {
        return Err(TageError::InvalidConfig(format!("dimension {k} outside width {d}")));
    }
    let mut values = vec![0.0; d];
    values[k] = 1.0;
    Ok(ConditionVector {
        values,
        source: ConditionSource::OneHot,
    })
}

/// Gradient of the largest class probability with respect to `z` (`1 x d`).
pub fn downstream_gradient(head: &DownstreamHead, z: &Tensor) -> Result<Tensor> {
    if z.rows() != 1 || z.cols() != head.input_dim() {
        return Err(TageError::DimMismatch(format!(
            "embedding {:?} for head input {}",
            z.shape(),
            head.input_dim()
        )));
    }
    let mut tape = Tape::new();
    let params = head.bind(&mut tape, false);
    let zv = tape.leaf(z.clone());
    let logits = head.logits(&mut tape, &params, zv)?;
    let probs = tape.softmax_rows(logits)?;
    let class = crate::encoder::argmax(tape.value(probs).row_slice(0));
    let top = tape.element(probs, 0, class)?;
    Ok(tape.backward(top)?.get(zv))
}

/// `ReLU(norm(g))` for the downstream gradient `g`; falls back to a uniform
/// condition (with a warning) when nothing survives the rectification.
pub fn downstream_condition(head: &DownstreamHead, z: &Tensor, norm: ConditionNorm) -> Result<ConditionVector> {
    let g = downstream_gradient(head, z)?;
    let denom = match norm {
        ConditionNorm::MaxAbs => g.data().iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        ConditionNorm::L2 => g.data().iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    let values: Vec<f64> = if denom > 0.0 {
        g.data().iter().map(|v| (v / denom).max(0.0)).collect()
    } else {
        vec![0.0; g.len()]
    };
    if values.iter().all(|&v| v == 0.0) {
        warn!("downstream gradient has no positive entry, using a uniform condition");
        return Ok(ConditionVector::uniform(g.len()));
    }
    Ok(ConditionVector {
        values,
        source: ConditionSource::Downstream,
    })
}
