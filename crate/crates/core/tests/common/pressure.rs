//! Size-coefficient pressure on a fixed synthetic dataset.

use tage_core::encoder::{Encoder, EncoderKind, Pooling};
use tage_core::explainer::ExplainerMode;
use tage_core::graph::{generate_motif_multitask, Dataset, FeatureMode, MultitaskConfig};
use tage_core::objectives::{train_embedding_explainer, ExplainerTrainConfig, RegularizationConfig};

pub const LOW: f64 = 0.05;
pub const HIGH: f64 = 0.5;

pub fn dataset() -> Dataset {
    let cfg = MultitaskConfig {
        num_graphs: 48,
        features: FeatureMode::DegreeOneHot(8),
        min_positive_rate: 0.0,
        max_positive_rate: 1.0,
        train_fraction: 1.0,
        val_fraction: 0.0,
        ..MultitaskConfig::default()
    };
    generate_motif_multitask(&cfg, 2024).unwrap()
}

/// Mean edge score over the last epoch of explainer training.
pub fn converged_mean_score(data: &Dataset, size: f64, seed: u64) -> f64 {
    let encoder = Encoder::new(EncoderKind::Gin, &[8, 16, 16], Pooling::Mean, 7).unwrap();
    let config = ExplainerTrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 6,
        reg: RegularizationConfig {
            size,
            ..RegularizationConfig::default()
        },
        ..ExplainerTrainConfig::graph_preset()
    };
    let trained = train_embedding_explainer(&encoder, data, ExplainerMode::Graph, &config, seed).unwrap();
    let per_epoch = trained.log.len() / config.epochs;
    let tail = &trained.log[trained.log.len() - per_epoch..];
    tail.iter().map(|r| r.mean_edge_score).sum::<f64>() / tail.len() as f64
}
