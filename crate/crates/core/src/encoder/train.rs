//! Pretraining routes and supervised/downstream training loops.

use std::collections::HashSet;

use diffnum::{Adam, AdamConfig, Tape, Tensor, Var};
use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::head::argmax;
use super::{DownstreamHead, Encoder, EncoderSpec, GraphBatch};
use crate::error::{Result, TageError};
use crate::graph::{Dataset, Graph, Split};
use crate::nn::{all_finite, Module};

/// Encoder plus the per-epoch training loss.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub encoder: Encoder,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaeConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraceConfig {
    pub epochs: usize,
    pub lr: f64,
    pub edge_drop: f64,
    pub feature_mask: f64,
    pub temperature: f64,
    /// Graphs per step; negatives come from the same step.
    pub batch_graphs: usize,
}

impl Default for GraceConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.01,
            edge_drop: 0.2,
            feature_mask: 0.2,
            temperature: 0.5,
            batch_graphs: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskLevel {
    /// Node classification from per-node labels.
    Node,
    /// Graph classification on one task's graph labels.
    Graph { task: usize },
}

#[derive(Debug, Clone)]
pub struct SupervisedConfig {
    pub level: TaskLevel,
    pub epochs: usize,
    pub lr: f64,
    pub head_hidden: usize,
    /// Fraction of nodes used for training at node level.
    pub train_fraction: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            level: TaskLevel::Node,
            epochs: 300,
            lr: 0.01,
            head_hidden: 20,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Supervised {
    pub encoder: Encoder,
    pub head: DownstreamHead,
    /// Training accuracy after every epoch.
    pub accuracy: Vec<f64>,
    pub train_nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct HeadConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Class count; inferred from the labels when `None`.
    pub classes: Option<usize>,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 300,
            lr: 0.01,
            classes: None,
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(TageError::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
    }
    Ok(())
}

fn adam_update(adam: &mut Adam, modules: &mut [&mut dyn ModuleMut], grads: &[Tensor]) -> Result<()> {
    let mut params: Vec<&mut Tensor> = Vec::new();
    for m in modules.iter_mut() {
        params.extend(m.params_mut());
    }
    adam.step(&mut params, grads)?;
    Ok(())
}

/// Object-safe view of [`Module::parameters_mut`].
trait ModuleMut {
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
}

impl<T: Module> ModuleMut for T {
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
}

fn finite_loss(value: f64, stage: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(TageError::NonFinite(format!("{stage} loss")))
    }
}

/// Row-wise dot products `z[a[i]] . z[b[i]]` as a column.
fn pair_scores(tape: &mut Tape, z: Var, a: &[usize], b: &[usize]) -> Result<Var> {
    let za = tape.gather_rows(z, a)?;
    let zb = tape.gather_rows(z, b)?;
    let prod = tape.mul(za, zb)?;
    Ok(tape.sum_over_cols(prod)?)
}

/// Up to `count` node pairs of the same graph that are not edges.
fn sample_non_edges(
    rng: &mut ChaCha8Rng,
    batch: &GraphBatch,
    existing: &HashSet<(usize, usize)>,
    count: usize,
) -> (Vec<usize>, Vec<usize>) {
    let counts = batch.node_counts();
    let eligible: Vec<usize> = (0..batch.num_graphs()).filter(|&g| counts[g] >= 2).collect();
    let (mut a, mut b) = (Vec::with_capacity(count), Vec::with_capacity(count));
    if eligible.is_empty() {
        return (a, b);
    }
    let mut tries = 0;
    while a.len() < count && tries < 50 * count.max(1) {
        tries += 1;
        let g = eligible[rng.gen_range(0..eligible.len())];
        let base = batch.node_offsets[g];
        let u = base + rng.gen_range(0..counts[g]);
        let v = base + rng.gen_range(0..counts[g]);
        if u == v || existing.contains(&(u.min(v), u.max(v))) {
            continue;
        }
        a.push(u);
        b.push(v);
    }
    (a, b)
}

/// Graph autoencoder: inner-product decoder with binary cross-entropy over
/// observed edges and as many sampled non-edges.
pub fn pretrain_gae(
    dataset: &Dataset,
    spec: &EncoderSpec,
    config: &GaeConfig,
    seed: u64,
) -> Result<Pretrained> {
    let graphs: Vec<_> = dataset.graphs().iter().collect();
    let batch = GraphBatch::new(&graphs);
    if batch.num_undirected() == 0 {
        return Err(TageError::InvalidGraph("link reconstruction needs at least one edge".into()));
    }
    let mut encoder = spec.build(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    let pos_a: Vec<usize> = batch.src.iter().step_by(2).copied().collect();
    let pos_b: Vec<usize> = batch.dst.iter().step_by(2).copied().collect();
    let existing: HashSet<(usize, usize)> =
        pos_a.iter().zip(&pos_b).map(|(&u, &v)| (u.min(v), u.max(v))).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr));
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (neg_a, neg_b) = sample_non_edges(&mut rng, &batch, &existing, pos_a.len());
        let mut tape = Tape::new();
        let params = encoder.bind(&mut tape, true);
        let z = encoder.forward_batch(&mut tape, &params, &batch, None)?;
        let pos = pair_scores(&mut tape, z, &pos_a, &pos_b)?;
        let pos = tape.log_sigmoid(pos)?;
        let pos = tape.mean(pos)?;
        let mut loss = tape.neg(pos)?;
        if !neg_a.is_empty() {
            let neg = pair_scores(&mut tape, z, &neg_a, &neg_b)?;
            let neg = tape.neg(neg)?;
            let neg = tape.log_sigmoid(neg)?;
            let neg = tape.mean(neg)?;
            loss = tape.sub(loss, neg)?;
        }
        let value = finite_loss(tape.value(loss).item(), "gae")?;
        losses.push(value);
        debug!("gae epoch {epoch} loss {value:.6}");
        let grads = tape.backward(loss)?.get_all(&params);
        adam_update(&mut adam, &mut [&mut encoder], &grads)?;
    }
    if !all_finite(&encoder) {
        return Err(TageError::NonFinite("gae parameters".into()));
    }
    Ok(Pretrained { encoder, losses })
}

/// Area under the ROC curve of inner-product link scores for `positives`
/// against `negatives` on one graph.
pub fn link_prediction_auc(
    encoder: &Encoder,
    graph: &crate::graph::Graph,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<f64> {
    let z = encoder.encode_nodes(graph, None)?;
    let score = |&(u, v): &(usize, usize)| -> f64 {
        z.row_slice(u).iter().zip(z.row_slice(v)).map(|(a, b)| a * b).sum()
    };
    let pos: Vec<f64> = positives.iter().map(score).collect();
    let neg: Vec<f64> = negatives.iter().map(score).collect();
    crate::evaluation::auc_from_scores(&pos, &neg)
}

/// Two stochastic views (edge drop, feature-column mask) contrasted node by
/// node with in-batch negatives from the other view.
pub fn pretrain_grace_lite(
    dataset: &Dataset,
    spec: &EncoderSpec,
    config: &GraceConfig,
    seed: u64,
) -> Result<Pretrained> {
    check_rate("edge_drop", config.edge_drop)?;
    check_rate("feature_mask", config.feature_mask)?;
    if config.temperature <= 0.0 {
        return Err(TageError::InvalidConfig("temperature must be positive".into()));
    }
    if config.batch_graphs == 0 {
        return Err(TageError::InvalidConfig("batch_graphs must be >= 1".into()));
    }
    let graphs: Vec<_> = dataset.graphs().iter().filter(|g| g.num_nodes() > 0).collect();
    if graphs.iter().map(|g| g.num_nodes()).sum::<usize>() < 2 {
        return Err(TageError::InvalidConfig("contrastive pretraining needs two nodes".into()));
    }
    let mut encoder = spec.build(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbb67_ae85_84ca_a73b);
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr));
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..graphs.len()).collect();
        order.shuffle(&mut rng);
        let (mut total, mut steps) = (0.0, 0);
        for chunk in order.chunks(config.batch_graphs) {
            let sel: Vec<&Graph> = chunk.iter().map(|&i| graphs[i]).collect();
            let batch = GraphBatch::new(&sel);
            if batch.num_nodes < 2 {
                continue;
            }
            total += grace_step(&mut encoder, &mut adam, &batch, config, &mut rng)?;
            steps += 1;
        }
        let value = total / steps.max(1) as f64;
        losses.push(value);
        debug!("grace-lite epoch {epoch} loss {value:.6}");
    }
    Ok(Pretrained { encoder, losses })
}

fn grace_step(
    encoder: &mut Encoder,
    adam: &mut Adam,
    batch: &GraphBatch,
    config: &GraceConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n = batch.num_nodes;
    let fdim = batch.features.cols();
    let mut tape = Tape::new();
    let params = encoder.bind(&mut tape, true);
    let mut views = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut w = Vec::with_capacity(batch.src.len());
        for _ in 0..batch.num_undirected() {
            let keep = if rng.gen::<f64>() < config.edge_drop { 0.0 } else { 1.0 };
            w.extend([keep, keep]);
        }
        let cols: Vec<f64> = (0..fdim)
            .map(|_| if rng.gen::<f64>() < config.feature_mask { 0.0 } else { 1.0 })
            .collect();
        let mut x = batch.features.clone();
        for r in 0..n {
            for (c, &m) in cols.iter().enumerate() {
                x.set(r, c, x.get(r, c) * m);
            }
        }
        let x = tape.constant(x);
        let w = tape.constant(Tensor::column(w));
        let z = encoder.forward_nodes(&mut tape, &params, batch, x, Some(w))?;
        views.push(unit_rows(&mut tape, z)?);
    }
    let zt = tape.transpose(views[1])?;
    let sim = tape.matmul(views[0], zt)?;
    let sim = tape.scale(sim, 1.0 / config.temperature)?;
    let logp = tape.log_softmax_rows(sim)?;
    let diag = tape.diag(logp)?;
    let mean = tape.mean(diag)?;
    let loss = tape.neg(mean)?;
    let value = finite_loss(tape.value(loss).item(), "grace-lite")?;
    let grads = tape.backward(loss)?.get_all(&params);
    adam_update(adam, &mut [encoder], &grads)?;
    Ok(value)
}

/// Rows scaled to unit length, safe for all-zero rows.
fn unit_rows(tape: &mut Tape, z: Var) -> Result<Var> {
    let sq = tape.mul(z, z)?;
    let norm = tape.sum_over_cols(sq)?;
    let norm = tape.add_scalar(norm, 1e-12)?;
    let inv = tape.powf(norm, -0.5)?;
    Ok(tape.mul(z, inv)?)
}

/// Mean cross-entropy of `logits` rows against `labels`.
fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], classes: usize) -> Result<Var> {
    let logp = tape.log_softmax_rows(logits)?;
    let mut onehot = Tensor::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        onehot.set(r, l, 1.0);
    }
    let onehot = tape.constant(onehot);
    let picked = tape.mul(logp, onehot)?;
    let total = tape.sum(picked)?;
    Ok(tape.scale(total, -1.0 / labels.len() as f64)?)
}

fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    let hits = (0..logits.rows())
        .filter(|&r| argmax(logits.row_slice(r)) == labels[r])
        .count();
    hits as f64 / labels.len().max(1) as f64
}

/// End-to-end cross-entropy training of encoder and head.
pub fn train_supervised(
    dataset: &Dataset,
    spec: &EncoderSpec,
    config: &SupervisedConfig,
    seed: u64,
) -> Result<Supervised> {
    let mut encoder = spec.build(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3c6e_f372_fe94_f82b);

    let (batch, rows, labels, train_nodes) = match config.level {
        TaskLevel::Node => {
            let graphs: Vec<_> = dataset.graphs().iter().collect();
            let batch = GraphBatch::new(&graphs);
            let mut all = Vec::with_capacity(batch.num_nodes);
            for g in &graphs {
                let labels = g
                    .node_labels()
                    .ok_or_else(|| TageError::MissingLabels("graph without node labels".into()))?;
                all.extend_from_slice(labels);
            }
            let mut order: Vec<usize> = (0..batch.num_nodes).collect();
            order.shuffle(&mut rng);
            let take = ((config.train_fraction * order.len() as f64).round() as usize).clamp(1, order.len());
            let mut rows = order[..take].to_vec();
            rows.sort_unstable();
            let labels: Vec<usize> = rows.iter().map(|&r| all[r]).collect();
            (batch, rows.clone(), labels, rows)
        }
        TaskLevel::Graph { task } => {
            let idx = dataset.indices(Split::Train);
            let graphs: Vec<_> = idx.iter().map(|&i| &dataset.graphs()[i]).collect();
            let mut labels = Vec::with_capacity(graphs.len());
            for g in &graphs {
                let l = g
                    .graph_labels()
                    .and_then(|l| l.get(task))
                    .ok_or_else(|| TageError::MissingLabels(format!("graph label for task {task}")))?;
                labels.push(*l);
            }
            let batch = GraphBatch::new(&graphs);
            let rows: Vec<usize> = (0..graphs.len()).collect();
            (batch, rows, labels, idx)
        }
    };
    if labels.is_empty() {
        return Err(TageError::MissingLabels("no training examples".into()));
    }
    let classes = labels.iter().max().unwrap() + 1;
    let mut head = DownstreamHead::new(encoder.embed_dim(), config.head_hidden, classes.max(2), seed.wrapping_add(1));
    let classes = head.num_classes();
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr));
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let enc_p = encoder.bind(&mut tape, true);
        let head_p = head.bind(&mut tape, true);
        let z = encoder.forward_batch(&mut tape, &enc_p, &batch, None)?;
        let z = match config.level {
            TaskLevel::Node => tape.gather_rows(z, &rows)?,
            TaskLevel::Graph { .. } => encoder.mean_pool(&mut tape, z, &batch)?,
        };
        let logits = head.logits(&mut tape, &head_p, z)?;
        trace.push(accuracy(tape.value(logits), &labels));
        let loss = cross_entropy(&mut tape, logits, &labels, classes)?;
        finite_loss(tape.value(loss).item(), "supervised")?;
        let all: Vec<Var> = enc_p.iter().chain(&head_p).copied().collect();
        let grads = tape.backward(loss)?.get_all(&all);
        adam_update(&mut adam, &mut [&mut encoder, &mut head], &grads)?;
    }
    // Final accuracy with the trained parameters.
    let mut tape = Tape::new();
    let enc_p = encoder.bind(&mut tape, false);
    let head_p = head.bind(&mut tape, false);
    let z = encoder.forward_batch(&mut tape, &enc_p, &batch, None)?;
    let z = match config.level {
        TaskLevel::Node => tape.gather_rows(z, &rows)?,
        TaskLevel::Graph { .. } => encoder.mean_pool(&mut tape, z, &batch)?,
    };
    let logits = head.logits(&mut tape, &head_p, z)?;
    trace.push(accuracy(tape.value(logits), &labels));
    Ok(Supervised {
        encoder,
        head,
        accuracy: trace,
        train_nodes,
    })
}

/// Trains a head on a frozen embedding table. Returns the head and its
/// training accuracy after every epoch.
pub fn train_downstream(
    embeddings: &Tensor,
    labels: &[usize],
    config: &HeadConfig,
    seed: u64,
) -> Result<(DownstreamHead, Vec<f64>)> {
    if embeddings.rows() != labels.len() {
        return Err(TageError::DimMismatch(format!(
            "{} embeddings for {} labels",
            embeddings.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(TageError::MissingLabels("no training examples".into()));
    }
    let classes = config
        .classes
        .unwrap_or_else(|| labels.iter().max().unwrap() + 1)
        .max(2);
    if labels.iter().any(|&l| l >= classes) {
        return Err(TageError::InvalidConfig(format!("label outside {classes} classes")));
    }
    let mut head = DownstreamHead::new(embeddings.cols(), config.hidden, classes, seed);
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr));
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let params = head.bind(&mut tape, true);
        let z = tape.constant(embeddings.clone());
        let logits = head.logits(&mut tape, &params, z)?;
        trace.push(accuracy(tape.value(logits), labels));
        let loss = cross_entropy(&mut tape, logits, labels, classes)?;
        finite_loss(tape.value(loss).item(), "downstream")?;
        let grads = tape.backward(loss)?.get_all(&params);
        adam_update(&mut adam, &mut [&mut head], &grads)?;
    }
    trace.push(accuracy(&head.predict_proba(embeddings)?, labels));
    Ok((head, trace))
}

/// Embedding table used by downstream heads: node embeddings of every graph
/// stacked in order (node level), or one pooled row per graph.
pub fn embed_nodes_or_graphs(encoder: &Encoder, dataset: &Dataset, level: TaskLevel) -> Result<Tensor> {
    let graphs: Vec<_> = dataset.graphs().iter().collect();
    match level {
        TaskLevel::Node => {
            let mut data = Vec::new();
            let mut rows = 0;
            for g in graphs {
                let z = encoder.encode_nodes(g, None)?;
                rows += z.rows();
                data.extend(z.into_data());
            }
            Ok(Tensor::new(rows, encoder.embed_dim(), data)?)
        }
        TaskLevel::Graph { .. } => encoder.encode_graphs(&graphs),
    }
}
