//! Finite-difference checks of every loss and scorer, one seed at a time.
//! Each case returns the worst relative error over all inputs.

use diffnum::{grad_check, relative_error, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tage_core::encoder::{DownstreamHead, Encoder, EncoderKind, GraphBatch, Pooling};
use tage_core::explainer::{downstream_gradient, EmbeddingExplainer, ExplainerMode};
use tage_core::graph::Graph;
use tage_core::nn::Module;
use tage_core::objectives::{
    conditioned_infonce, conditioned_jse, size_entropy_reg, Reduction, RegularizationConfig,
};

use super::{lift, random_graph, rng, uniform};

pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-5;

pub type Case = (&'static str, fn(u64) -> f64);

pub const CASES: &[Case] = &[
    ("jse", jse_shared),
    ("jse_per_sample_condition", jse_per_sample),
    ("infonce", infonce_shared),
    ("infonce_per_sample_condition", infonce_per_sample),
    ("graph_scorer", graph_scorer),
    ("node_scorer", node_scorer),
    ("size_entropy_regularizer", regularizer),
    ("downstream_gradient", downstream),
    ("explainer_objective_jse_gcn", objective_jse_gcn),
    ("explainer_objective_infonce_gin", objective_infonce_gin),
    ("explainer_objective_node_gcn", objective_node_gcn),
];

fn weighted_sum(tape: &mut Tape, v: Var) -> diffnum::Result<Var> {
    let [r, c] = tape.shape(v);
    let w = Tensor::new(r, c, (0..r * c).map(|k| 0.4 + 0.13 * k as f64).collect())?;
    let w = tape.constant(w);
    let p = tape.mul(v, w)?;
    tape.sum(p)
}

fn condition(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Tensor {
    Tensor::new(rows, d, (0..rows * d).map(|_| rng.gen_range(0.2..1.0)).collect()).unwrap()
}

fn loss_check(seed: u64, infonce: bool, per_sample: bool) -> f64 {
    let mut r = rng(seed);
    let (n, d) = (4, 5);
    let z = uniform(&mut r, n, d, 1.5);
    let zt = uniform(&mut r, n, d, 1.5);
    let p = condition(&mut r, if per_sample { n } else { 1 }, d);
    grad_check(
        |t, v| {
            if infonce {
                lift(conditioned_infonce(t, v[0], v[1], v[2]))
            } else {
                lift(conditioned_jse(t, v[0], v[1], v[2]))
            }
        },
        &[z, zt, p],
        STEP,
    )
    .unwrap()
}

fn jse_shared(seed: u64) -> f64 {
    loss_check(seed, false, false)
}

fn jse_per_sample(seed: u64) -> f64 {
    loss_check(seed, false, true)
}

fn infonce_shared(seed: u64) -> f64 {
    loss_check(seed, true, false)
}

fn infonce_per_sample(seed: u64) -> f64 {
    loss_check(seed, true, true)
}

fn directed(graph: &Graph) -> (Vec<usize>, Vec<usize>) {
    graph.directed_edges()
}

/// Explainer parameters with nonzero biases. Dead encoder units give exactly
/// zero embedding rows, which would park a zero-bias ReLU on its kink.
fn with_random_biases(ex: &EmbeddingExplainer, r: &mut ChaCha8Rng) -> Vec<Tensor> {
    let mut params: Vec<Tensor> = ex.parameters().into_iter().cloned().collect();
    for b in [1, 3, 5] {
        params[b] = uniform(r, params[b].rows(), params[b].cols(), 0.5);
    }
    params
}

fn scorer_check(seed: u64, mode: ExplainerMode) -> f64 {
    let mut r = rng(seed);
    let d = 4;
    let g = random_graph(&mut r, 6, 3, 2);
    let ex = EmbeddingExplainer::new(mode, d, Some(6), seed).unwrap();
    let mut inputs = with_random_biases(&ex, &mut r);
    inputs.push(uniform(&mut r, 6, d, 1.0));
    inputs.push(condition(&mut r, 1, d));
    let (src, dst) = directed(&g);
    let targets = vec![2; src.len()];
    grad_check(
        |t, v| {
            let gate = lift(ex.gate(t, &v[..6], v[7]))?;
            let tg = (mode == ExplainerMode::Node).then_some(targets.as_slice());
            let logits = lift(ex.directed_logits(t, &v[..6], v[6], &src, &dst, tg, gate, None))?;
            let s = lift(ex.undirected(t, logits))?;
            weighted_sum(t, s.w)
        },
        &inputs,
        STEP,
    )
    .unwrap()
}

fn graph_scorer(seed: u64) -> f64 {
    scorer_check(seed, ExplainerMode::Graph)
}

fn node_scorer(seed: u64) -> f64 {
    scorer_check(seed, ExplainerMode::Node)
}

fn regularizer(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform(&mut r, 7, 1, 2.0);
    let instance = [0, 0, 0, 1, 1, 1, 1];
    let mean = RegularizationConfig {
        size: 0.3,
        entropy: 0.2,
        reduction: Reduction::Mean,
    };
    let sum = RegularizationConfig {
        reduction: Reduction::Sum,
        ..mean
    };
    grad_check(
        |t, v| {
            let w = t.sigmoid(v[0])?;
            let nx = t.neg(v[0])?;
            let wc = t.sigmoid(nx)?;
            let a = lift(size_entropy_reg(t, w, wc, &instance, 2, &mean))?;
            let b = lift(size_entropy_reg(t, w, wc, &instance, 2, &sum))?;
            let b = t.scale(b, 0.7)?;
            t.add(a, b)
        },
        &[x],
        STEP,
    )
    .unwrap()
}

/// The condition gradient against central differences of the head's
/// top-class probability.
fn downstream(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 6;
    let mut head = DownstreamHead::new(d, 8, 3, seed);
    head.b1 = uniform(&mut r, 1, 8, 0.3);
    head.b2 = uniform(&mut r, 1, 3, 0.3);
    let z = uniform(&mut r, 1, d, 1.5);
    let probs = head.predict_proba(&z).unwrap();
    let class = tage_core::encoder::argmax(probs.row_slice(0));
    let g = downstream_gradient(&head, &z).unwrap();
    let f = |z: &Tensor| head.predict_proba(z).unwrap().get(0, class);
    let mut worst: f64 = 0.0;
    let mut probe = z.clone();
    for k in 0..d {
        let orig = z.data()[k];
        probe.data_mut()[k] = orig + STEP;
        let plus = f(&probe);
        probe.data_mut()[k] = orig - STEP;
        let minus = f(&probe);
        probe.data_mut()[k] = orig;
        worst = worst.max(relative_error(g.data()[k], (plus - minus) / (2.0 * STEP)));
    }
    worst
}

/// Full training objective of one explainer step (scores, soft-masked
/// re-encoding, contrastive loss and regularizer) against the explainer
/// parameters.
fn objective(seed: u64, kind: EncoderKind, infonce: bool, mode: ExplainerMode) -> f64 {
    let mut r = rng(seed);
    let graphs: Vec<Graph> = (0..3).map(|_| random_graph(&mut r, 5, 2, 3)).collect();
    let refs: Vec<&Graph> = graphs.iter().collect();
    let batch = GraphBatch::new(&refs);
    let d = 4;
    let encoder = Encoder::new(kind, &[3, 5, d], Pooling::Mean, seed).unwrap();
    let ex = EmbeddingExplainer::new(mode, d, Some(5), seed + 1).unwrap();
    let p = condition(&mut r, 1, d);
    let instance: Vec<usize> = batch.edge_graph().into_iter().flat_map(|g| [g, g]).collect();
    let undirected_instance = batch.edge_graph();
    let targets: Vec<usize> = (0..3).map(|b| batch.node_offsets[b] + 1).collect();
    let edge_targets: Vec<usize> = instance.iter().map(|&b| targets[b]).collect();
    let reg = RegularizationConfig::default();
    let inputs = with_random_biases(&ex, &mut r);
    grad_check(
        |t, v| {
            let enc = encoder.bind(t, false);
            let pv = t.constant(p.clone());
            let nodes = lift(encoder.forward_batch(t, &enc, &batch, None))?;
            let pick = |t: &mut Tape, x: Var| -> diffnum::Result<Var> {
                match mode {
                    ExplainerMode::Graph => lift(encoder.mean_pool(t, x, &batch)),
                    ExplainerMode::Node => t.gather_rows(x, &targets),
                }
            };
            let z = pick(t, nodes)?;
            let gate = lift(ex.gate(t, v, pv))?;
            let tg = (mode == ExplainerMode::Node).then_some(edge_targets.as_slice());
            let logits = lift(ex.directed_logits(t, v, nodes, &batch.src, &batch.dst, tg, gate, Some(&instance)))?;
            let s = lift(ex.undirected(t, logits))?;
            let dw = lift(ex.directed_weights(t, s.w))?;
            let masked = lift(encoder.forward_batch(t, &enc, &batch, Some(dw)))?;
            let zt = pick(t, masked)?;
            let c = if infonce {
                lift(conditioned_infonce(t, z, zt, pv))?
            } else {
                lift(conditioned_jse(t, z, zt, pv))?
            };
            let rg = lift(size_entropy_reg(t, s.w, s.w_comp, &undirected_instance, 3, &reg))?;
            t.add(c, rg)
        },
        &inputs,
        STEP,
    )
    .unwrap()
}

fn objective_jse_gcn(seed: u64) -> f64 {
    objective(seed, EncoderKind::Gcn, false, ExplainerMode::Graph)
}

fn objective_infonce_gin(seed: u64) -> f64 {
    objective(seed, EncoderKind::Gin, true, ExplainerMode::Graph)
}

fn objective_node_gcn(seed: u64) -> f64 {
    objective(seed, EncoderKind::Gcn, false, ExplainerMode::Node)
}
