use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Mixed relative error `|a - b| / max(|a|, |b|, 1e-3)`. The floor keeps
/// near-zero partials from amplifying finite-difference roundoff.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares reverse-mode gradients of a scalar function with central
/// differences over every entry of every input; returns the largest
/// [`relative_error`].
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for k in 0..inputs[i].len() {
            let orig = inputs[i].data()[k];
            probe[i].data_mut()[k] = orig + step;
            let plus = eval(&probe)?;
            probe[i].data_mut()[k] = orig - step;
            let minus = eval(&probe)?;
            probe[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(analytic.data()[k], numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_zero_error() {
        let err = grad_check(
            |tape, _| Ok(tape.constant(Tensor::scalar(4.2))),
            &[Tensor::row(vec![1.0, 2.0])],
            1e-6,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }
}
