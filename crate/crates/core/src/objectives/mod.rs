//! Conditioned contrastive losses, the size/entropy regularizer and the
//! self-supervised explainer training loop.
//!
//! Similarities are `s_ij = (p * z_i) . (p * zt_j)` where `z` are the original
//! embeddings, `zt` the embeddings of the soft-masked inputs and `p` the
//! condition. Both losses are minimized.

mod train;

use diffnum::{Tape, Tensor, Var};

use crate::error::{Result, TageError};

pub use train::{
    train_embedding_explainer, ExplainerTrainConfig, LossKind, TrainLogRow, TrainedExplainer,
};

/// `s = (z * q) zt^T` with `q = p * p`; `p` is one shared row or one row per
/// sample.
pub fn masked_similarity(tape: &mut Tape, z: Var, zt: Var, p: Var) -> Result<Var> {
    let [n, d] = tape.shape(z);
    if tape.shape(zt) != [n, d] {
        return Err(TageError::DimMismatch(format!(
            "embeddings {:?} and explained embeddings {:?}",
            tape.shape(z),
            tape.shape(zt)
        )));
    }
    let [pr, pc] = tape.shape(p);
    if pc != d || (pr != 1 && pr != n) {
        return Err(TageError::DimMismatch(format!("condition {:?} for {n} x {d} embeddings", [pr, pc])));
    }
    let zm = tape.mul(z, p)?;
    let zm = tape.mul(zm, p)?;
    let ztt = tape.transpose(zt)?;
    Ok(tape.matmul(zm, ztt)?)
}

fn off_diagonal(n: usize) -> Vec<bool> {
    (0..n * n).map(|i| i / n != i % n).collect()
}

fn check_batch(tape: &Tape, z: Var) -> Result<usize> {
    let n = tape.shape(z)[0];
    if n < 2 {
        return Err(TageError::InvalidConfig(format!("contrastive batch needs N >= 2, got {n}")));
    }
    Ok(n)
}

/// Jensen-Shannon estimator:
/// `-mean_i log sig(s_ii) - mean_{i != j} log(1 - sig(s_ij))`.
pub fn conditioned_jse(tape: &mut Tape, z: Var, zt: Var, p: Var) -> Result<Var> {
    let n = check_batch(tape, z)?;
    let s = masked_similarity(tape, z, zt, p)?;
    let pos = tape.diag(s)?;
    let pos = tape.log_sigmoid(pos)?;
    let pos = tape.mean(pos)?;
    let neg = tape.neg(s)?;
    let neg = tape.log_sigmoid(neg)?;
    let mask = Tensor::new(
        n,
        n,
        off_diagonal(n).into_iter().map(|b| f64::from(u8::from(b))).collect(),
    )?;
    let mask = tape.constant(mask);
    let neg = tape.mul(neg, mask)?;
    let neg = tape.sum(neg)?;
    let neg = tape.scale(neg, 1.0 / (n * n - n) as f64)?;
    let total = tape.add(pos, neg)?;
    Ok(tape.neg(total)?)
}

/// InfoNCE with the denominator over `j != i`:
/// `-mean_i [s_ii - log sum_{j != i} exp(s_ij)]`.
pub fn conditioned_infonce(tape: &mut Tape, z: Var, zt: Var, p: Var) -> Result<Var> {
    let n = check_batch(tape, z)?;
    let s = masked_similarity(tape, z, zt, p)?;
    let pos = tape.diag(s)?;
    let lse = tape.logsumexp_rows_masked(s, &off_diagonal(n))?;
    let diff = tape.sub(pos, lse)?;
    let mean = tape.mean(diff)?;
    Ok(tape.neg(mean)?)
}

/// Value of a loss on plain tensors.
pub fn loss_value(kind: LossKind, z: &Tensor, zt: &Tensor, p: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let ztv = tape.constant(zt.clone());
    let pv = tape.constant(Tensor::row(p.to_vec()));
    let l = match kind {
        LossKind::Jse => conditioned_jse(&mut tape, zv, ztv, pv)?,
        LossKind::InfoNce => conditioned_infonce(&mut tape, zv, ztv, pv)?,
    };
    Ok(tape.value(l).item())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Sum over the edges of an instance.
    Sum,
    /// Mean over the edges of an instance.
    Mean,
}

impl Reduction {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Reduction::Sum),
            "mean" => Some(Reduction::Mean),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Reduction::Sum => "sum",
            Reduction::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConfig {
    pub size: f64,
    pub entropy: f64,
    pub reduction: Reduction,
}

impl RegularizationConfig {
    pub fn new(size: f64, entropy: f64) -> Result<Self> {
        let cfg = Self {
            size,
            entropy,
            reduction: Reduction::Mean,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size >= 0.0 && self.entropy >= 0.0) {
            return Err(TageError::InvalidConfig("regularization coefficients must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            size: 0.05,
            entropy: 0.002,
            reduction: Reduction::Mean,
        }
    }
}

/// `lambda_s * w + lambda_e * H(w)` per edge, reduced per instance and
/// averaged over instances. `instance[e]` names the instance of edge `e`.
pub fn size_entropy_reg(
    tape: &mut Tape,
    w: Var,
    w_comp: Var,
    instance: &[usize],
    num_instances: usize,
    config: &RegularizationConfig,
) -> Result<Var> {
    let e = tape.shape(w)[0];
    if e == 0 || num_instances == 0 {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let lw = tape.log(w)?;
    let lc = tape.log(w_comp)?;
    let a = tape.mul(w, lw)?;
    let b = tape.mul(w_comp, lc)?;
    let h = tape.add(a, b)?;
    let h = tape.scale(h, -config.entropy)?;
    let s = tape.scale(w, config.size)?;
    let per_edge = tape.add(s, h)?;
    let total = match config.reduction {
        Reduction::Sum => tape.sum(per_edge)?,
        Reduction::Mean => {
            let mut counts = vec![0usize; num_instances];
            for &i in instance {
                counts[i] += 1;
            }
            let inv: Vec<f64> = instance.iter().map(|&i| 1.0 / counts[i] as f64).collect();
            let inv = tape.constant(Tensor::column(inv));
            let weighted = tape.mul(per_edge, inv)?;
            tape.sum(weighted)?
        }
    };
    Ok(tape.scale(total, 1.0 / num_instances as f64)?)
}

/// Regularizer value for one instance with scores `w`.
pub fn size_entropy_value(w: &[f64], config: &RegularizationConfig) -> Result<f64> {
    if w.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(TageError::InvalidConfig("edge scores must lie in (0, 1)".into()));
    }
    let mut tape = Tape::new();
    let wv = tape.constant(Tensor::column(w.to_vec()));
    let cv = tape.constant(Tensor::column(w.iter().map(|v| 1.0 - v).collect()));
    let r = size_entropy_reg(&mut tape, wv, cv, &vec![0; w.len()], 1, config)?;
    Ok(tape.value(r).item())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jse_of_zero_pair_is_two_log_two() {
        let z = Tensor::zeros(2, 3);
        let v = loss_value(LossKind::Jse, &z, &z, &[1.0, 1.0, 1.0]).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn infonce_hand_value() {
        let z = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = loss_value(LossKind::InfoNce, &z, &z, &[1.0, 1.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_sample_is_rejected() {
        let z = Tensor::zeros(1, 2);
        assert!(loss_value(LossKind::Jse, &z, &z, &[1.0, 1.0]).is_err());
        assert!(loss_value(LossKind::InfoNce, &z, &z, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn entropy_extremes() {
        let cfg = RegularizationConfig {
            size: 0.0,
            entropy: 1.0,
            reduction: Reduction::Sum,
        };
        let v = size_entropy_value(&[0.5, 0.5, 0.5], &cfg).unwrap();
        assert!((v - 3.0 * 2f64.ln()).abs() < 1e-14);
        let cfg = RegularizationConfig {
            size: 0.05,
            entropy: 0.002,
            reduction: Reduction::Sum,
        };
        assert!(size_entropy_value(&[1e-12; 4], &cfg).unwrap() < 1e-9);
        assert!(RegularizationConfig::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn mean_reduction_divides_by_edges() {
        let sum = RegularizationConfig {
            size: 1.0,
            entropy: 0.0,
            reduction: Reduction::Sum,
        };
        let mean = RegularizationConfig {
            reduction: Reduction::Mean,
            ..sum
        };
        let w = [0.2, 0.4, 0.9];
        let a = size_entropy_value(&w, &sum).unwrap();
        let b = size_entropy_value(&w, &mean).unwrap();
        assert!((a - 1.5).abs() < 1e-15);
        assert!((b - 0.5).abs() < 1e-15);
    }
}
