//! Fidelity, sparsity and ground-truth edge AUC, fidelity-sparsity sweeps,
//! cheap baselines and the multitask timing report.

mod auc;
mod baseline;
mod report;

use diffnum::Tensor;

use crate::encoder::{DownstreamHead, Encoder};
use crate::error::{Result, TageError};
use crate::explainer::{
    downstream_condition, explain_graph, explain_node, select_topk_edges, target_embedding,
    ConditionNorm, EmbeddingExplainer,
};
use crate::graph::Graph;

pub use auc::{auc_from_scores, edge_auc, pooled_edge_auc};
pub use baseline::{random_edge_scores, saliency_edge_scores};
pub use report::{multitask_report, TaskMetrics, TimingReport};

/// Frozen `head(encoder(.))` composition used to read class probabilities.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub encoder: &'a Encoder,
    pub head: &'a DownstreamHead,
}

impl<'a> Model<'a> {
    pub fn new(encoder: &'a Encoder, head: &'a DownstreamHead) -> Result<Self> {
        if encoder.embed_dim() != head.input_dim() {
            return Err(TageError::DimMismatch(format!(
                "encoder width {} for head input {}",
                encoder.embed_dim(),
                head.input_dim()
            )));
        }
        Ok(Self { encoder, head })
    }

    /// Embedding read by the head: the target row at node level, the mean
    /// pooled graph embedding otherwise. A graph with every node deleted
    /// pools to the zero vector.
    pub fn embedding(&self, graph: &Graph, target: Option<usize>) -> Result<Tensor> {
        match target {
            Some(t) => {
                if t >= graph.num_nodes() {
                    return Err(TageError::InvalidGraph(format!("target {t} outside graph")));
                }
                let z = self.encoder.encode_nodes(graph, None)?;
                Ok(Tensor::row(z.row_slice(t).to_vec()))
            }
            None if graph.num_nodes() == 0 => Ok(Tensor::zeros(1, self.encoder.embed_dim())),
            None => self.encoder.encode_graph(graph, None),
        }
    }

    pub fn proba(&self, graph: &Graph, target: Option<usize>) -> Result<Vec<f64>> {
        let z = self.embedding(graph, target)?;
        Ok(self.head.predict_proba(&z)?.into_data())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassRule {
    /// Class predicted on the full input.
    #[default]
    Predicted,
    /// Best mean fidelity over all classes.
    BestOfClasses,
}

impl ClassRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "predicted" => Some(ClassRule::Predicted),
            "best" | "best-of-classes" => Some(ClassRule::BestOfClasses),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassRule::Predicted => "predicted",
            ClassRule::BestOfClasses => "best-of-classes",
        }
    }
}

/// A scored explanation target: a whole graph, or the receptive field of a
/// target node.
#[derive(Debug, Clone)]
pub struct ExplanationInstance {
    pub graph: Graph,
    pub target: Option<usize>,
    /// One score per edge of `graph`.
    pub scores: Vec<f64>,
    /// Ground-truth flags aligned with `graph.edges()`, when known.
    pub ground_truth: Option<Vec<bool>>,
}

impl ExplanationInstance {
    /// Node mask for the top `percent`% edges (0 selects nothing).
    pub fn mask_at(&self, percent: f64) -> Result<Vec<bool>> {
        let selected = if percent <= 0.0 || self.scores.is_empty() {
            vec![false; self.scores.len()]
        } else {
            select_topk_edges(&self.scores, percent)?
        };
        node_mask_from_edges(&self.graph, &selected, self.target)
    }
}

/// Endpoints of the selected edges; the target is never part of the mask.
pub fn node_mask_from_edges(graph: &Graph, selected: &[bool], target: Option<usize>) -> Result<Vec<bool>> {
    if selected.len() != graph.num_edges() {
        return Err(TageError::DimMismatch(format!(
            "{} selection flags for {} edges",
            selected.len(),
            graph.num_edges()
        )));
    }
    let mut mask = vec![false; graph.num_nodes()];
    for (&(u, v), &s) in graph.edges().iter().zip(selected) {
        if s {
            mask[u] = true;
            mask[v] = true;
        }
    }
    if let Some(t) = target {
        mask[t] = false;
    }
    Ok(mask)
}

/// A graph (or target) with the nodes chosen for removal.
#[derive(Debug, Clone, Copy)]
pub struct MaskedInstance<'a> {
    pub graph: &'a Graph,
    pub target: Option<usize>,
    pub mask: &'a [bool],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityStats {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> FidelityStats {
    if values.is_empty() {
        return FidelityStats { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    FidelityStats { mean, std: var.sqrt() }
}

/// Probabilities on the full and on the node-deleted input.
fn before_after(model: &Model, inst: &MaskedInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    if inst.mask.len() != inst.graph.num_nodes() {
        return Err(TageError::DimMismatch("node mask length".into()));
    }
    let before = model.proba(inst.graph, inst.target)?;
    if !inst.mask.iter().any(|&m| m) {
        return Ok((before.clone(), before));
    }
    let mut mask = inst.mask.to_vec();
    if let Some(t) = inst.target {
        mask[t] = false;
    }
    let (reduced, index) = inst.graph.remove_nodes(&mask)?;
    let target = inst.target.map(|t| index[t].expect("target is never removed"));
    let after = model.proba(&reduced, target)?;
    Ok((before, after))
}

/// Mean and standard deviation of `f(G)_c - f(G without mask)_c`.
pub fn fidelity_prob(model: &Model, instances: &[MaskedInstance], rule: ClassRule) -> Result<FidelityStats> {
    let pairs = instances
        .iter()
        .map(|i| before_after(model, i))
        .collect::<Result<Vec<_>>>()?;
    match rule {
        ClassRule::Predicted => {
            let diffs: Vec<f64> = pairs
                .iter()
                .map(|(b, a)| {
                    let c = crate::encoder::argmax(b);
                    b[c] - a[c]
                })
                .collect();
            Ok(mean_std(&diffs))
        }
        ClassRule::BestOfClasses => {
            let classes = model.head.num_classes();
            let mut best: Option<FidelityStats> = None;
            for c in 0..classes {
                let diffs: Vec<f64> = pairs.iter().map(|(b, a)| b[c] - a[c]).collect();
                let s = mean_std(&diffs);
                if best.map_or(true, |b| s.mean > b.mean) {
                    best = Some(s);
                }
            }
            Ok(best.unwrap_or(FidelityStats { mean: 0.0, std: 0.0 }))
        }
    }
}

/// Mean masked fraction `|m| / |V|`.
pub fn sparsity(instances: &[MaskedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in instances {
        if i.graph.num_nodes() == 0 {
            return Err(TageError::EmptyGraph);
        }
        total += i.mask.iter().filter(|&&m| m).count() as f64 / i.graph.num_nodes() as f64;
    }
    Ok(total / instances.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPoint {
    pub k_percent: f64,
    /// Masked fraction.
    pub sparsity: f64,
    /// `1 - sparsity`: fraction of nodes left in place.
    pub sparsity_retained: f64,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
}

fn masks_at(instances: &[ExplanationInstance], percent: f64) -> Result<Vec<Vec<bool>>> {
    instances.iter().map(|i| i.mask_at(percent)).collect()
}

fn masked<'a>(instances: &'a [ExplanationInstance], masks: &'a [Vec<bool>]) -> Vec<MaskedInstance<'a>> {
    instances
        .iter()
        .zip(masks)
        .map(|(i, m)| MaskedInstance {
            graph: &i.graph,
            target: i.target,
            mask: m,
        })
        .collect()
}

/// Fidelity and sparsity at one selection fraction.
pub fn metric_point(model: &Model, instances: &[ExplanationInstance], percent: f64, rule: ClassRule) -> Result<MetricPoint> {
    let masks = masks_at(instances, percent)?;
    let m = masked(instances, &masks);
    let s = sparsity(&m)?;
    let f = fidelity_prob(model, &m, rule)?;
    Ok(MetricPoint {
        k_percent: percent,
        sparsity: s,
        sparsity_retained: 1.0 - s,
        fidelity_mean: f.mean,
        fidelity_std: f.std,
    })
}

/// One metric point per entry of `k_list`.
pub fn sweep_curve(model: &Model, instances: &[ExplanationInstance], k_list: &[f64], rule: ClassRule) -> Result<Vec<MetricPoint>> {
    k_list
        .iter()
        .map(|&k| metric_point(model, instances, k, rule))
        .collect()
}

/// Fidelity at the selection fraction whose masked fraction is closest to
/// `target` (binary search on k, stopping within `tolerance`).
pub fn fidelity_at_sparsity(
    model: &Model,
    instances: &[ExplanationInstance],
    target: f64,
    tolerance: f64,
    rule: ClassRule,
) -> Result<MetricPoint> {
    let sparsity_at = |k: f64| -> Result<f64> {
        let masks = masks_at(instances, k)?;
        sparsity(&masked(instances, &masks))
    };
    let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let s = sparsity_at(mid)?;
        let gap = (s - target).abs();
        if gap < best.0 {
            best = (gap, mid);
        }
        if gap <= tolerance {
            break;
        }
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    metric_point(model, instances, best.1, rule)
}

/// Graph-level instances explained with the downstream-gradient condition.
pub fn explain_graphs_for_head(
    encoder: &Encoder,
    explainer: &EmbeddingExplainer,
    head: &DownstreamHead,
    graphs: &[&Graph],
    task: Option<usize>,
    norm: ConditionNorm,
) -> Result<Vec<ExplanationInstance>> {
    graphs
        .iter()
        .map(|g| {
            let z = encoder.encode_graph(g, None)?;
            let p = downstream_condition(head, &z, norm)?;
            let scores = explain_graph(encoder, explainer, g, &p)?;
            Ok(ExplanationInstance {
                graph: (*g).clone(),
                target: None,
                scores: scores.values,
                ground_truth: task.and_then(|t| g.ground_truth_for(t).map(<[bool]>::to_vec)),
            })
        })
        .collect()
}

/// Node-level instances on the receptive fields of `targets`, explained with
/// the downstream-gradient condition of each target.
pub fn explain_nodes_for_head(
    encoder: &Encoder,
    explainer: &EmbeddingExplainer,
    head: &DownstreamHead,
    graph: &Graph,
    targets: &[usize],
    task: Option<usize>,
    norm: ConditionNorm,
) -> Result<Vec<ExplanationInstance>> {
    targets
        .iter()
        .map(|&t| {
            let z = target_embedding(encoder, graph, t)?;
            let p = downstream_condition(head, &z, norm)?;
            let ex = explain_node(encoder, explainer, graph, t, &p)?;
            let sub = ex.subgraph;
            Ok(ExplanationInstance {
                ground_truth: task.and_then(|k| sub.graph.ground_truth_for(k).map(<[bool]>::to_vec)),
                target: Some(sub.target),
                scores: ex.scores.values,
                graph: sub.graph,
            })
        })
        .collect()
}

/// Same instances with their scores replaced.
pub fn rescored(instances: &[ExplanationInstance], mut score: impl FnMut(usize, &ExplanationInstance) -> Result<Vec<f64>>) -> Result<Vec<ExplanationInstance>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let scores = score(i, inst)?;
            if scores.len() != inst.graph.num_edges() {
                return Err(TageError::DimMismatch("replacement scores".into()));
            }
            Ok(ExplanationInstance {
                scores,
                ..inst.clone()
            })
        })
        .collect()
}

/// Metrics CSV with one row per (task, method, point).
pub fn metrics_csv(rows: &[(String, String, MetricPoint, Option<f64>)]) -> String {
    use std::fmt::Write as _;
    let mut out =
        String::from("task,method,k_percent,sparsity,sparsity_retained,fidelity_mean,fidelity_std,auc\n");
    for (task, method, p, auc) in rows {
        let auc = auc.map_or_else(String::new, |a| format!("{a}"));
        let _ = writeln!(
            out,
            "{task},{method},{},{},{},{},{},{auc}",
            p.k_percent, p.sparsity, p.sparsity_retained, p.fidelity_mean, p.fidelity_std
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderKind, Pooling};

    fn path(n: usize) -> Graph {
        Graph::with_unit_features(n, (0..n - 1).map(|i| (i, i + 1)).collect(), 2).unwrap()
    }

    #[test]
    fn node_mask_rules() {
        let g = path(4);
        assert_eq!(node_mask_from_edges(&g, &[false; 3], None).unwrap(), vec![false; 4]);
        assert_eq!(
            node_mask_from_edges(&g, &[false, true, false], None).unwrap(),
            vec![false, true, true, false]
        );
        assert_eq!(
            node_mask_from_edges(&g, &[false, true, false], Some(1)).unwrap(),
            vec![false, false, true, false]
        );
    }

    #[test]
    fn sparsity_cases() {
        let g = Graph::with_unit_features(10, vec![], 1).unwrap();
        let full = vec![true; 10];
        let none = vec![false; 10];
        let mut two = vec![false; 10];
        two[3] = true;
        two[7] = true;
        let s = |m: &[bool]| sparsity(&[MaskedInstance { graph: &g, target: None, mask: m }]).unwrap();
        assert_eq!(s(&full), 1.0);
        assert_eq!(s(&none), 0.0);
        assert_eq!(s(&two), 0.2);
    }

    #[test]
    fn empty_mask_has_zero_fidelity() {
        let enc = Encoder::new(EncoderKind::Gin, &[2, 4], Pooling::Mean, 0).unwrap();
        let head = DownstreamHead::new(4, 4, 2, 0);
        let model = Model::new(&enc, &head).unwrap();
        let g = path(5);
        let mask = vec![false; 5];
        for rule in [ClassRule::Predicted, ClassRule::BestOfClasses] {
            let f = fidelity_prob(&model, &[MaskedInstance { graph: &g, target: None, mask: &mask }], rule).unwrap();
            assert_eq!(f.mean, 0.0);
            assert_eq!(f.std, 0.0);
        }
    }

    #[test]
    fn zero_percent_point_is_origin() {
        let enc = Encoder::new(EncoderKind::Gcn, &[2, 3], Pooling::Mean, 1).unwrap();
        let head = DownstreamHead::new(3, 4, 2, 1);
        let model = Model::new(&enc, &head).unwrap();
        let inst = ExplanationInstance {
            graph: path(6),
            target: None,
            scores: vec![0.1, 0.9, 0.4, 0.3, 0.2],
            ground_truth: None,
        };
        let curve = sweep_curve(&model, &[inst], &[0.0, 20.0, 60.0, 100.0], ClassRule::Predicted).unwrap();
        assert_eq!(curve[0].sparsity, 0.0);
        assert_eq!(curve[0].fidelity_mean, 0.0);
        assert!(curve.windows(2).all(|w| w[0].sparsity <= w[1].sparsity));
        assert_eq!(curve[3].sparsity, 1.0);
    }
}
