//! Shared primitive cases for finite-difference checks.

use diffnum::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect(),
    )
    .unwrap()
}

pub fn positive(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    random(rng, rows, cols).map(|v| v.abs() + 0.2)
}

pub type Case = (&'static str, fn(&mut Tape, &[Var]) -> diffnum::Result<Var>, fn(&mut ChaCha8Rng) -> Vec<Tensor>);

// Each primitive feeds a weighted sum so that the upstream gradient is not
// all ones.
pub fn weighted(tape: &mut Tape, v: Var) -> diffnum::Result<Var> {
    let [r, c] = tape.shape(v);
    let w = Tensor::new(r, c, (0..r * c).map(|k| 0.3 + 0.17 * k as f64).collect())?;
    let w = tape.constant(w);
    let p = tape.mul(v, w)?;
    tape.sum(p)
}

pub fn cases() -> Vec<Case> {
    vec![
        (
            "matmul",
            |t, v| {
                let y = t.matmul(v[0], v[1])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4), random(r, 4, 2)],
        ),
        (
            "transpose",
            |t, v| {
                let y = t.transpose(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 2)],
        ),
        (
            "add_broadcast_row",
            |t, v| {
                let y = t.add(v[0], v[1])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4), random(r, 1, 4)],
        ),
        (
            "sub_broadcast_col",
            |t, v| {
                let y = t.sub(v[0], v[1])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4), random(r, 3, 1)],
        ),
        (
            "mul_full_and_scalar",
            |t, v| {
                let y = t.mul(v[0], v[1])?;
                let z = t.mul(y, v[2])?;
                weighted(t, z)
            },
            |r| vec![random(r, 2, 3), random(r, 2, 3), random(r, 1, 1)],
        ),
        (
            "neg_scale_add_scalar",
            |t, v| {
                let a = t.neg(v[0])?;
                let b = t.scale(a, 2.5)?;
                let c = t.add_scalar(b, -0.7)?;
                let d = t.mul(c, c)?;
                weighted(t, d)
            },
            |r| vec![random(r, 2, 2)],
        ),
        (
            "concat_cols",
            |t, v| {
                let y = t.concat_cols(&[v[0], v[1], v[0]])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 2), random(r, 3, 1)],
        ),
        (
            "gather_rows",
            |t, v| {
                let y = t.gather_rows(v[0], &[2, 0, 2, 1, 2])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 2)],
        ),
        (
            "scatter_add_rows",
            |t, v| {
                let y = t.scatter_add_rows(v[0], &[1, 1, 3, 0], 4)?;
                weighted(t, y)
            },
            |r| vec![random(r, 4, 3)],
        ),
        (
            "sigmoid",
            |t, v| {
                let y = t.sigmoid(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 2, 3)],
        ),
        (
            "relu",
            |t, v| {
                let y = t.relu(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 3)],
        ),
        (
            "exp",
            |t, v| {
                let y = t.exp(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 2, 2)],
        ),
        (
            "log",
            |t, v| {
                let y = t.log(v[0])?;
                weighted(t, y)
            },
            |r| vec![positive(r, 2, 3)],
        ),
        (
            "log_sigmoid",
            |t, v| {
                let y = t.log_sigmoid(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 2, 3).map(|x| 4.0 * x)],
        ),
        (
            "powf",
            |t, v| {
                let y = t.powf(v[0], -0.5)?;
                weighted(t, y)
            },
            |r| vec![positive(r, 3, 1)],
        ),
        (
            "softmax_rows",
            |t, v| {
                let y = t.softmax_rows(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4)],
        ),
        (
            "log_softmax_rows",
            |t, v| {
                let y = t.log_softmax_rows(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4)],
        ),
        (
            "logsumexp_rows_masked",
            |t, v| {
                let mask = [false, true, true, true, false, true, true, true, false];
                let y = t.logsumexp_rows_masked(v[0], &mask)?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 3)],
        ),
        (
            "diag",
            |t, v| {
                let y = t.diag(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 3)],
        ),
        (
            "mean",
            |t, v| {
                let y = t.mul(v[0], v[0])?;
                t.mean(y)
            },
            |r| vec![random(r, 2, 3)],
        ),
        (
            "sum_over_rows_and_cols",
            |t, v| {
                let a = t.sum_over_rows(v[0])?;
                let b = t.sum_over_cols(v[0])?;
                let a2 = t.mul(a, a)?;
                let b2 = t.mul(b, b)?;
                let s1 = weighted(t, a2)?;
                let s2 = weighted(t, b2)?;
                t.add(s1, s2)
            },
            |r| vec![random(r, 3, 4)],
        ),
        (
            "element",
            |t, v| {
                let y = t.exp(v[0])?;
                t.element(y, 1, 2)
            },
            |r| vec![random(r, 2, 3)],
        ),
        (
            "max_abs_normalize",
            |t, v| {
                let y = t.max_abs_normalize(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 1, 5)],
        ),
        (
            "l2_normalize_rows",
            |t, v| {
                let y = t.l2_normalize_rows(v[0])?;
                weighted(t, y)
            },
            |r| vec![random(r, 3, 4)],
        ),
    ]
}
