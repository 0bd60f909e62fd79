//! Parameter plumbing shared by encoders, heads and explainers.

use diffnum::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub trait Module {
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    /// Records every parameter on `tape`, as differentiable leaves when
    /// `trainable`, as constants otherwise.
    fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|p| {
                if trainable {
                    tape.leaf(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect()
    }

    /// SHA-256 over the bit patterns of all parameters.
    fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for p in self.parameters() {
            hasher.update((p.rows() as u64).to_le_bytes());
            hasher.update((p.cols() as u64).to_le_bytes());
            for v in p.data() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Glorot-uniform `fan_in x fan_out` matrix.
pub fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor::new(fan_in, fan_out, data).expect("sized by construction")
}

pub(crate) fn all_finite(module: &impl Module) -> bool {
    module.parameters().iter().all(|p| p.is_finite())
}
