//! Independent evaluations of the metrics, losses and invariants.

use diffnum::{Tape, Tensor};
use rand::Rng;
use tage_core::encoder::{DownstreamHead, Encoder, EncoderKind, GinLayer, Layer, Pooling};
use tage_core::evaluation::{
    edge_auc, fidelity_prob, metric_point, pooled_edge_auc, sparsity, ClassRule, ExplanationInstance,
    MaskedInstance, Model,
};
use tage_core::explainer::one_hot_condition;
use tage_core::graph::Graph;
use tage_core::objectives::{loss_value, masked_similarity, LossKind};

use super::{random_graph, rng, uniform};

pub fn brute_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if truth[i] && !truth[j] {
                pairs += 1;
                twice += if a > b {
                    2
                } else if a == b {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Instances (out of `count`, plus the pooled union) where `edge_auc`
/// differs from the all-pairs count.
pub fn auc_mismatches(count: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut items = Vec::new();
    let mut bad = 0;
    for _ in 0..count {
        let n = r.gen_range(2..40);
        // Coarse grid so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.gen_range(0..8)) / 8.0).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| r.gen_bool(0.3)).collect();
        truth[0] = true;
        truth[1] = false;
        if edge_auc(&scores, &truth).unwrap() != brute_auc(&scores, &truth) {
            bad += 1;
        }
        items.push((scores, truth));
    }
    let all_scores: Vec<f64> = items.iter().flat_map(|(s, _)| s.clone()).collect();
    let all_truth: Vec<bool> = items.iter().flat_map(|(_, t)| t.clone()).collect();
    let pooled = pooled_edge_auc(items.iter().map(|(s, t)| (s.as_slice(), t.as_slice()))).unwrap();
    if pooled != brute_auc(&all_scores, &all_truth) {
        bad += 1;
    }
    bad
}

fn dot_similarity(z: &Tensor, zt: &Tensor, p: &[f64], i: usize, j: usize) -> f64 {
    (0..p.len()).map(|k| p[k] * z.get(i, k) * p[k] * zt.get(j, k)).sum()
}

pub fn scalar_infonce(z: &Tensor, zt: &Tensor, p: &[f64]) -> f64 {
    let n = z.rows();
    let mut total = 0.0;
    for i in 0..n {
        let denom: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dot_similarity(z, zt, p, i, j).exp())
            .sum();
        total += dot_similarity(z, zt, p, i, i) - denom.ln();
    }
    -total / n as f64
}

pub fn scalar_jse(z: &Tensor, zt: &Tensor, p: &[f64]) -> f64 {
    let n = z.rows();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let pos: f64 = (0..n).map(|i| sig(dot_similarity(z, zt, p, i, i)).ln()).sum::<f64>() / n as f64;
    let mut neg = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                neg += (1.0 - sig(dot_similarity(z, zt, p, i, j))).ln();
            }
        }
    }
    -pos - neg / (n * (n - 1)) as f64
}

/// Largest gap between the taped losses and the scalar code over `trials`
/// batches with N in 2..=4: `(infonce, jse)`.
pub fn loss_gaps(trials: u64) -> (f64, f64) {
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    for seed in 0..trials {
        let mut r = rng(seed);
        let n = 2 + (seed as usize % 3);
        let d = r.gen_range(1..6);
        let z = uniform(&mut r, n, d, 2.0);
        let zt = uniform(&mut r, n, d, 2.0);
        let p: Vec<f64> = (0..d).map(|_| r.gen_range(0.0..1.0)).collect();
        a = a.max((loss_value(LossKind::InfoNce, &z, &zt, &p).unwrap() - scalar_infonce(&z, &zt, &p)).abs());
        b = b.max((loss_value(LossKind::Jse, &z, &zt, &p).unwrap() - scalar_jse(&z, &zt, &p)).abs());
    }
    (a, b)
}

/// One GIN layer with identity weights: node embedding = own feature plus the
/// neighbours' features. Head logits are `(0, z)`, so `P(class 1) = sigmoid(z)`.
pub fn hand_model() -> (Encoder, DownstreamHead) {
    let layer = GinLayer {
        w1: Tensor::scalar(1.0),
        b1: Tensor::scalar(0.0),
        w2: Tensor::scalar(1.0),
        b2: Tensor::scalar(0.0),
        eps: 0.0,
    };
    let enc = Encoder::from_layers(EncoderKind::Gin, vec![Layer::Gin(layer)], Pooling::Mean).unwrap();
    let head = DownstreamHead::from_parts(
        Tensor::scalar(1.0),
        Tensor::scalar(0.0),
        Tensor::row(vec![0.0, 1.0]),
        Tensor::row(vec![0.0, 0.0]),
    )
    .unwrap();
    (enc, head)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn path_with_features(values: &[f64]) -> Graph {
    let n = values.len();
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect(), Tensor::column(values.to_vec())).unwrap()
}

/// `(case, computed, hand value)` for the toy fidelity and sparsity cases.
pub fn toy_cases() -> Vec<(&'static str, f64, f64)> {
    let (enc, head) = hand_model();
    let model = Model::new(&enc, &head).unwrap();
    let mut out = Vec::new();

    // Path 0-1-2-3 with features 1..4: node embeddings 3, 6, 9, 7, mean 6.25.
    // Removing nodes 1 and 2 leaves two isolated nodes with mean 2.5.
    let g = path_with_features(&[1.0, 2.0, 3.0, 4.0]);
    let mask = [false, true, true, false];
    let one = [MaskedInstance {
        graph: &g,
        target: None,
        mask: &mask,
    }];
    let a = sigmoid(6.25) - sigmoid(2.5);
    out.push(("path4 fidelity", fidelity_prob(&model, &one, ClassRule::Predicted).unwrap().mean, a));
    out.push(("path4 sparsity", sparsity(&one).unwrap(), 0.5));

    // Path 0-1-2 with features 2, 0, 2 (embeddings 2, 4, 2) and node 0
    // removed: the remaining pair embeds to 2, 2.
    let h = path_with_features(&[2.0, 0.0, 2.0]);
    let mask_h = [true, false, false];
    let both = [
        one[0],
        MaskedInstance {
            graph: &h,
            target: None,
            mask: &mask_h,
        },
    ];
    let b = sigmoid(8.0 / 3.0) - sigmoid(2.0);
    let f = fidelity_prob(&model, &both, ClassRule::Predicted).unwrap();
    out.push(("two-graph fidelity mean", f.mean, (a + b) / 2.0));
    out.push(("two-graph fidelity std", f.std, (a - b).abs() / 2.0));
    out.push(("two-graph sparsity", sparsity(&both).unwrap(), (0.5 + 1.0 / 3.0) / 2.0));
    // Class 0 only gains probability, so the best class is class 1.
    let best = fidelity_prob(&model, &both, ClassRule::BestOfClasses).unwrap();
    out.push(("best-of-classes fidelity", best.mean, (a + b) / 2.0));

    // Target 1 (embedding 6) is never removed even when the mask names it.
    let mask_t = [true, true, true, false];
    let node = [MaskedInstance {
        graph: &g,
        target: Some(1),
        mask: &mask_t,
    }];
    out.push((
        "node fidelity",
        fidelity_prob(&model, &node, ClassRule::Predicted).unwrap().mean,
        sigmoid(6.0) - sigmoid(2.0),
    ));

    // The top third of three edges is the middle one: nodes 1 and 2.
    let inst = ExplanationInstance {
        graph: g.clone(),
        target: None,
        scores: vec![0.1, 0.9, 0.2],
        ground_truth: None,
    };
    let p = metric_point(&model, &[inst], 100.0 / 3.0, ClassRule::Predicted).unwrap();
    out.push(("top-k sparsity", p.sparsity, 0.5));
    out.push(("top-k fidelity", p.fidelity_mean, a));
    out
}

/// Largest loss change when a zero-weighted column of both embeddings is
/// overwritten, over `trials` random batches.
pub fn locality_max_change(trials: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..trials {
        let mut r = rng(1000 + seed);
        let n = r.gen_range(2..6);
        let d = r.gen_range(2..7);
        let z = uniform(&mut r, n, d, 2.0);
        let zt = uniform(&mut r, n, d, 2.0);
        let k = r.gen_range(0..d);
        let mut p: Vec<f64> = (0..d).map(|_| r.gen_range(0.0..1.0)).collect();
        p[k] = 0.0;
        let (mut z2, mut zt2) = (z.clone(), zt.clone());
        for i in 0..n {
            z2.set(i, k, r.gen_range(-50.0..50.0));
            zt2.set(i, k, r.gen_range(-50.0..50.0));
        }
        for kind in [LossKind::Jse, LossKind::InfoNce] {
            let a = loss_value(kind, &z, &zt, &p).unwrap();
            let b = loss_value(kind, &z2, &zt2, &p).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Largest `|s_ij - z_ik zt_jk|` under `p = e_k`, over every k of `trials`
/// random batches.
pub fn one_hot_max_gap(trials: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..trials {
        let mut r = rng(2000 + seed);
        let (n, d) = (r.gen_range(2..6), r.gen_range(1..7));
        let z = uniform(&mut r, n, d, 1.0);
        let zt = uniform(&mut r, n, d, 1.0);
        for k in 0..d {
            let p = one_hot_condition(k, d).unwrap();
            let mut tape = Tape::new();
            let (zv, ztv) = (tape.constant(z.clone()), tape.constant(zt.clone()));
            let pv = tape.constant(p.as_row());
            let s = masked_similarity(&mut tape, zv, ztv, pv).unwrap();
            let s = tape.value(s);
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((s.get(i, j) - z.get(i, k) * zt.get(j, k)).abs());
                }
            }
        }
    }
    worst
}

/// Graphs (out of `count`, for GCN and for GIN) where a zero edge weight and
/// deleting the edge give different node or graph embeddings, bitwise.
pub fn zero_weight_mismatches(count: u64) -> usize {
    let mut bad = 0;
    for seed in 0..count {
        let mut r = rng(3000 + seed);
        let n = r.gen_range(3..16);
        let extra = r.gen_range(0..12);
        let g = random_graph(&mut r, n, extra, 3);
        let e = r.gen_range(0..g.num_edges());
        let mut w: Vec<f64> = (0..g.num_edges())
            .flat_map(|_| {
                let x = r.gen_range(0.05..1.0);
                [x, x]
            })
            .collect();
        w[2 * e] = 0.0;
        w[2 * e + 1] = 0.0;
        let reduced = g.remove_edges(&[e]).unwrap();
        let w_reduced: Vec<f64> = w.iter().enumerate().filter(|(i, _)| i / 2 != e).map(|(_, &v)| v).collect();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        for kind in [EncoderKind::Gcn, EncoderKind::Gin] {
            let enc = Encoder::new(kind, &[3, 8, 8, 6], Pooling::Mean, seed).unwrap();
            let same_nodes = bits(&enc.encode_nodes(&g, Some(&w)).unwrap())
                == bits(&enc.encode_nodes(&reduced, Some(&w_reduced)).unwrap());
            let same_graph = bits(&enc.encode_graph(&g, Some(&w)).unwrap())
                == bits(&enc.encode_graph(&reduced, Some(&w_reduced)).unwrap());
            if !(same_nodes && same_graph) {
                bad += 1;
            }
        }
    }
    bad
}
