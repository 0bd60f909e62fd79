use std::fmt::Write as _;
use std::time::Instant;

use super::{explain_graphs_for_head, fidelity_at_sparsity, pooled_edge_auc, ClassRule, MetricPoint, Model};
use crate::encoder::{DownstreamHead, Encoder};
use crate::error::Result;
use crate::explainer::{ConditionNorm, EmbeddingExplainer};
use crate::graph::Graph;

/// Wall-clock structure of task-agnostic explanation over `tasks` heads.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub tasks: usize,
    pub training_invocations: usize,
    pub training_seconds: f64,
    /// Condition plus scoring time for each task.
    pub inference_seconds: Vec<f64>,
    /// `training + sum(inference)`.
    pub total_task_agnostic: f64,
    /// `training * tasks`: one explainer per task.
    pub total_per_task_baseline: f64,
    pub speedup: f64,
}

impl TimingReport {
    pub fn new(training_seconds: f64, inference_seconds: Vec<f64>, training_invocations: usize) -> Self {
        let tasks = inference_seconds.len();
        let total_task_agnostic = training_seconds + inference_seconds.iter().sum::<f64>();
        let total_per_task_baseline = training_seconds * tasks as f64;
        let speedup = if total_task_agnostic > 0.0 {
            total_per_task_baseline / total_task_agnostic
        } else {
            0.0
        };
        Self {
            tasks,
            training_invocations,
            training_seconds,
            inference_seconds,
            total_task_agnostic,
            total_per_task_baseline,
            speedup,
        }
    }

    /// Flat `key=value` text.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tasks={}", self.tasks);
        let _ = writeln!(out, "training_invocations={}", self.training_invocations);
        let _ = writeln!(out, "training_seconds={:.6}", self.training_seconds);
        for (t, s) in self.inference_seconds.iter().enumerate() {
            let _ = writeln!(out, "inference_seconds_task{t}={s:.6}");
        }
        let _ = writeln!(out, "total_task_agnostic_seconds={:.6}", self.total_task_agnostic);
        let _ = writeln!(out, "total_per_task_baseline_seconds={:.6}", self.total_per_task_baseline);
        let _ = writeln!(out, "speedup={:.4}", self.speedup);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMetrics {
    pub task: usize,
    pub point: MetricPoint,
    /// Pooled edge AUC over graphs that contain the task's motif.
    pub auc: Option<f64>,
}

/// Trains one explainer through `train` (called exactly once), then explains
/// `graphs` for every `(task, head)` with its downstream-gradient condition.
#[allow(clippy::too_many_arguments)]
pub fn multitask_report<F>(
    train: F,
    encoder: &Encoder,
    heads: &[(usize, DownstreamHead)],
    graphs: &[&Graph],
    target_sparsity: f64,
    rule: ClassRule,
    norm: ConditionNorm,
) -> Result<(EmbeddingExplainer, TimingReport, Vec<TaskMetrics>)>
where
    F: FnOnce() -> Result<EmbeddingExplainer>,
{
    let mut invocations = 0;
    let start = Instant::now();
    let explainer = {
        invocations += 1;
        train()?
    };
    let training_seconds = start.elapsed().as_secs_f64();

    let mut inference = Vec::with_capacity(heads.len());
    let mut metrics = Vec::with_capacity(heads.len());
    for &(task, ref head) in heads {
        let start = Instant::now();
        let instances = explain_graphs_for_head(encoder, &explainer, head, graphs, Some(task), norm)?;
        inference.push(start.elapsed().as_secs_f64());

        let model = Model::new(encoder, head)?;
        let point = fidelity_at_sparsity(&model, &instances, target_sparsity, 0.02, rule)?;
        let labelled: Vec<(&[f64], &[bool])> = instances
            .iter()
            .filter_map(|i| {
                let gt = i.ground_truth.as_deref()?;
                gt.iter().any(|&b| b).then_some((i.scores.as_slice(), gt))
            })
            .collect();
        let auc = if labelled.is_empty() {
            None
        } else {
            pooled_edge_auc(labelled).ok()
        };
        metrics.push(TaskMetrics { task, point, auc });
    }
    Ok((explainer, TimingReport::new(training_seconds, inference, invocations), metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        let r = TimingReport::new(10.0, vec![1.0, 2.0, 3.0], 1);
        assert_eq!(r.total_task_agnostic, 16.0);
        assert_eq!(r.total_per_task_baseline, 30.0);
        assert!((r.speedup - 30.0 / 16.0).abs() < 1e-15);
        assert!(r.to_key_values().contains("training_invocations=1\n"));
    }
}
