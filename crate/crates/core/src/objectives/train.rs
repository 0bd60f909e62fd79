use std::fmt::Write as _;

use diffnum::{Adam, AdamConfig, Tape, Tensor, Var};
use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{conditioned_infonce, conditioned_jse, size_entropy_reg, RegularizationConfig};
use crate::encoder::{Encoder, GraphBatch};
use crate::error::{Result, TageError};
use crate::explainer::{sample_condition, EmbeddingExplainer, ExplainerMode};
use crate::graph::{k_hop_subgraph, Dataset, Graph, Split, Subgraph};
use crate::nn::Module;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Jse,
    InfoNce,
}

impl LossKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jse" => Some(LossKind::Jse),
            "infonce" => Some(LossKind::InfoNce),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Jse => "jse",
            LossKind::InfoNce => "infonce",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainerTrainConfig {
    pub loss: LossKind,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub laplace_scale: f64,
    pub reg: RegularizationConfig,
    /// Explainer hidden width; the concatenated input width when `None`.
    pub hidden: Option<usize>,
    /// Draw one condition per sample instead of one per step.
    pub per_sample_condition: bool,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
}

impl ExplainerTrainConfig {
    /// Graph-level setting: lr 1e-4, batch 256, one epoch, Laplace(0, 0.2).
    pub fn graph_preset() -> Self {
        Self {
            loss: LossKind::Jse,
            lr: 1e-4,
            batch_size: 256,
            epochs: 1,
            laplace_scale: 0.2,
            reg: RegularizationConfig::default(),
            hidden: None,
            per_sample_condition: false,
            max_steps: None,
        }
    }

    /// Node-level setting: lr 5e-6, batch 4, Laplace(0, 0.1).
    pub fn node_preset() -> Self {
        Self {
            lr: 5e-6,
            batch_size: 4,
            laplace_scale: 0.1,
            ..Self::graph_preset()
        }
    }

    /// InfoNCE setting: lr 1e-4, batch 16, Laplace(0, 0.25), size 0.5, no entropy.
    pub fn infonce_preset() -> Self {
        Self {
            loss: LossKind::InfoNce,
            lr: 1e-4,
            batch_size: 16,
            laplace_scale: 0.25,
            reg: RegularizationConfig {
                size: 0.5,
                entropy: 0.0,
                ..RegularizationConfig::default()
            },
            ..Self::graph_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TageError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(TageError::InvalidConfig("contrastive batch size must be >= 2".into()));
        }
        if self.epochs == 0 {
            return Err(TageError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.laplace_scale > 0.0) {
            return Err(TageError::InvalidConfig("laplace scale must be positive".into()));
        }
        self.reg.validate()
    }
}

impl Default for ExplainerTrainConfig {
    fn default() -> Self {
        Self::graph_preset()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: usize,
    pub contrastive_loss: f64,
    pub reg_loss: f64,
    pub mean_edge_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedExplainer {
    pub explainer: EmbeddingExplainer,
    pub log: Vec<TrainLogRow>,
}

impl TrainedExplainer {
    /// Training log as CSV.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("step,contrastive_loss,reg_loss,mean_edge_score\n");
        for r in &self.log {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.step, r.contrastive_loss, r.reg_loss, r.mean_edge_score
            );
        }
        out
    }
}

enum Instances<'a> {
    Graphs(Vec<&'a Graph>),
    Nodes {
        list: Vec<(usize, usize)>,
        graphs: Vec<&'a Graph>,
        cache: Vec<Vec<Option<Subgraph>>>,
    },
}

impl<'a> Instances<'a> {
    fn len(&self) -> usize {
        match self {
            Instances::Graphs(g) => g.len(),
            Instances::Nodes { list, .. } => list.len(),
        }
    }
}

fn training_graphs(dataset: &Dataset) -> Vec<&Graph> {
    let train = dataset.indices(Split::Train);
    let idx = if train.is_empty() {
        (0..dataset.len()).collect()
    } else {
        train
    };
    idx.into_iter()
        .map(|i| &dataset.graphs()[i])
        .filter(|g| g.num_nodes() > 0)
        .collect()
}

/// Trains an embedding explainer against a frozen encoder without labels.
pub fn train_embedding_explainer(
    encoder: &Encoder,
    dataset: &Dataset,
    mode: ExplainerMode,
    config: &ExplainerTrainConfig,
    seed: u64,
) -> Result<TrainedExplainer> {
    config.validate()?;
    let checksum = encoder.checksum();
    let graphs = training_graphs(dataset);
    let mut instances = match mode {
        ExplainerMode::Graph => Instances::Graphs(graphs),
        ExplainerMode::Node => {
            let list: Vec<(usize, usize)> = graphs
                .iter()
                .enumerate()
                .flat_map(|(g, gr)| (0..gr.num_nodes()).map(move |v| (g, v)))
                .collect();
            let cache = graphs.iter().map(|g| vec![None; g.num_nodes()]).collect();
            Instances::Nodes { list, graphs, cache }
        }
    };
    if instances.len() < 2 {
        return Err(TageError::InvalidConfig("explainer training needs at least two instances".into()));
    }

    let mut explainer = EmbeddingExplainer::new(mode, encoder.embed_dim(), config.hidden, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa54f_f53a_5f1d_36f1);
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr));
    let mut log = Vec::new();
    let d = encoder.embed_dim();
    let enc_params_template = encoder.parameters().len();
    let mut step = 0;

    'outer: for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..instances.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| step >= m) {
                break 'outer;
            }
            if chunk.len() < 2 {
                continue;
            }
            // Assemble the batch and the target row of each instance.
            let (batch, targets) = match &mut instances {
                Instances::Graphs(gs) => {
                    let sel: Vec<&Graph> = chunk.iter().map(|&i| gs[i]).collect();
                    (GraphBatch::new(&sel), None)
                }
                Instances::Nodes { list, graphs, cache } => {
                    for &i in chunk {
                        let (g, v) = list[i];
                        if cache[g][v].is_none() {
                            cache[g][v] = Some(k_hop_subgraph(graphs[g], v, encoder.depth())?);
                        }
                    }
                    let subs: Vec<&Subgraph> = chunk
                        .iter()
                        .map(|&i| {
                            let (g, v) = list[i];
                            cache[g][v].as_ref().expect("filled above")
                        })
                        .collect();
                    let sel: Vec<&Graph> = subs.iter().map(|s| &s.graph).collect();
                    let batch = GraphBatch::new(&sel);
                    let t: Vec<usize> = subs
                        .iter()
                        .enumerate()
                        .map(|(b, s)| batch.node_offsets[b] + s.target)
                        .collect();
                    (batch, Some(t))
                }
            };
            if batch.src.is_empty() {
                continue;
            }
            let n = chunk.len();
            let p = if config.per_sample_condition {
                let mut rows = Vec::with_capacity(n * d);
                for _ in 0..n {
                    rows.extend_from_slice(sample_condition(d, config.laplace_scale, &mut rng)?.values());
                }
                Tensor::new(n, d, rows)?
            } else {
                sample_condition(d, config.laplace_scale, &mut rng)?.as_row()
            };

            let mut tape = Tape::new();
            let params = explainer.bind(&mut tape, true);
            let enc_p = encoder.bind(&mut tape, false);
            debug_assert_eq!(enc_p.len(), enc_params_template);
            let pv = tape.constant(p);

            let z_nodes = encoder.forward_batch(&mut tape, &enc_p, &batch, None)?;
            let z_nodes = tape.constant(tape.value(z_nodes).clone());
            let pick = |tape: &mut Tape, nodes: Var| -> Result<Var> {
                match &targets {
                    None => encoder.mean_pool(tape, nodes, &batch),
                    Some(t) => Ok(tape.gather_rows(nodes, t)?),
                }
            };
            let z = pick(&mut tape, z_nodes)?;

            let edge_instance = crate::explainer::batch_edge_instances(&batch);
            let edge_targets: Option<Vec<usize>> =
                targets.as_ref().map(|t| edge_instance.iter().map(|&b| t[b]).collect());
            let gate = explainer.gate(&mut tape, &params, pv)?;
            let logits = explainer.directed_logits(
                &mut tape,
                &params,
                z_nodes,
                &batch.src,
                &batch.dst,
                edge_targets.as_deref(),
                gate,
                Some(&edge_instance),
            )?;
            let scores = explainer.undirected(&mut tape, logits)?;
            let dw = explainer.directed_weights(&mut tape, scores.w)?;
            let zt_nodes = encoder.forward_batch(&mut tape, &enc_p, &batch, Some(dw))?;
            let zt = pick(&mut tape, zt_nodes)?;

            let contrastive = match config.loss {
                LossKind::Jse => conditioned_jse(&mut tape, z, zt, pv)?,
                LossKind::InfoNce => conditioned_infonce(&mut tape, z, zt, pv)?,
            };
            let reg = size_entropy_reg(&mut tape, scores.w, scores.w_comp, &batch.edge_graph(), n, &config.reg)?;
            let loss = tape.add(contrastive, reg)?;

            let row = TrainLogRow {
                step,
                contrastive_loss: tape.value(contrastive).item(),
                reg_loss: tape.value(reg).item(),
                mean_edge_score: tape.value(scores.w).sum() / batch.num_undirected() as f64,
            };
            if !tape.value(loss).item().is_finite() {
                return Err(TageError::NonFinite(format!("explainer loss at step {step}")));
            }
            debug!(
                "explainer step {step} contrastive {:.6} reg {:.6} mean score {:.4}",
                row.contrastive_loss, row.reg_loss, row.mean_edge_score
            );
            log.push(row);
            let grads = tape.backward(loss)?.get_all(&params);
            let mut ps = explainer.parameters_mut();
            adam.step(&mut ps, &grads)?;
            step += 1;
        }
    }

    if encoder.checksum() != checksum {
        return Err(TageError::EncoderMutated("explainer training"));
    }
    if !explainer.parameters().iter().all(|p| p.is_finite()) {
        return Err(TageError::NonFinite("explainer parameters".into()));
    }
    Ok(TrainedExplainer { explainer, log })
}
