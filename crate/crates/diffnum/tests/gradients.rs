mod common;

use common::primitives::{cases, random};
use diffnum::{grad_check, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-5;

#[test]
fn every_primitive_matches_central_differences_over_20_seeds() {
    for (name, f, make) in cases() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs = make(&mut rng);
            let err = grad_check(f, &inputs, STEP).unwrap();
            assert!(err <= TOL, "{name} seed {seed}: rel err {err:e}");
        }
    }
}

#[test]
fn sum_sigmoid_of_linear_map() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let w = random(&mut rng, 4, 3);
        let x = random(&mut rng, 3, 2);
        let err = grad_check(
            |t, v| {
                let h = t.matmul(v[0], v[1])?;
                let s = t.sigmoid(h)?;
                t.sum(s)
            },
            &[w, x],
            STEP,
        )
        .unwrap();
        assert!(err <= TOL, "seed {seed}: {err:e}");
    }
}

fn two_losses(tape: &mut Tape, x: Var) -> (Var, Var) {
    let s = tape.sigmoid(x).unwrap();
    let l1 = tape.sum(s).unwrap();
    let e = tape.mul(x, x).unwrap();
    let l2 = tape.mean(e).unwrap();
    (l1, l2)
}

#[test]
fn backward_is_linear() {
    let (a, b) = (0.7, -2.3);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let xv = random(&mut rng, 3, 3);

        let grad_of = |pick: u8| {
            let mut tape = Tape::new();
            let x = tape.leaf(xv.clone());
            let (l1, l2) = two_losses(&mut tape, x);
            let loss = match pick {
                1 => l1,
                2 => l2,
                _ => {
                    let s1 = tape.scale(l1, a).unwrap();
                    let s2 = tape.scale(l2, b).unwrap();
                    tape.add(s1, s2).unwrap()
                }
            };
            tape.backward(loss).unwrap().get(x)
        };
        let (g1, g2, gc) = (grad_of(1), grad_of(2), grad_of(0));
        for k in 0..gc.len() {
            let expect = a * g1.data()[k] + b * g2.data()[k];
            assert!((gc.data()[k] - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn identical_inputs_give_bitwise_identical_gradients() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tape = Tape::new();
        let w = tape.leaf(random(&mut rng, 5, 4));
        let x = tape.constant(random(&mut rng, 4, 3));
        let h = tape.matmul(w, x).unwrap();
        let p = tape.log_softmax_rows(h).unwrap();
        let l = tape.sum(p).unwrap();
        tape.backward(l).unwrap().get(w)
    };
    let (a, b) = (run(), run());
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}
