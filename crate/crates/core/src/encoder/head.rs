use diffnum::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TageError};
use crate::nn::{glorot, Module};

/// Two-layer perceptron `d -> hidden -> classes` with a row softmax on top.
#[derive(Debug, Clone, PartialEq)]
pub struct DownstreamHead {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl Module for DownstreamHead {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl DownstreamHead {
    pub fn new(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            w1: glorot(&mut rng, input, hidden),
            b1: Tensor::zeros(1, hidden),
            w2: glorot(&mut rng, hidden, classes),
            b2: Tensor::zeros(1, classes),
        }
    }

    pub fn from_parts(w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Result<Self> {
        if w1.cols() != b1.cols() || w1.cols() != w2.rows() || w2.cols() != b2.cols() {
            return Err(TageError::DimMismatch("head parameter shapes".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn logits(&self, tape: &mut Tape, params: &[Var], z: Var) -> Result<Var> {
        if tape.shape(z)[1] != self.input_dim() {
            return Err(TageError::DimMismatch(format!(
                "embedding width {} for head input {}",
                tape.shape(z)[1],
                self.input_dim()
            )));
        }
        let h = tape.matmul(z, params[0])?;
        let h = tape.add(h, params[1])?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, params[2])?;
        Ok(tape.add(o, params[3])?)
    }

    /// Class probabilities for every row of `z`.
    pub fn predict_proba(&self, z: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let logits = self.logits(&mut tape, &params, zv)?;
        let p = tape.softmax_rows(logits)?;
        Ok(tape.value(p).clone())
    }

    pub fn predict(&self, z: &Tensor) -> Result<Vec<usize>> {
        let p = self.predict_proba(z)?;
        Ok((0..p.rows()).map(|r| argmax(p.row_slice(r))).collect())
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
