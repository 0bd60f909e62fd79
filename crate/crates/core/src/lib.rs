//! Task-agnostic explanations for graph neural network embeddings.
//!
//! The pipeline has two stages. An encoder is pretrained (or trained) and then
//! frozen; an embedding explainer learns, without labels, which edges keep a
//! conditioned view of each embedding intact. Downstream heads trained later
//! turn their input gradients into condition vectors, so one explainer serves
//! every task.
//!
//! ```
//! use tage_core::encoder::{Encoder, EncoderKind, Pooling};
//! use tage_core::explainer::{explain_graph, one_hot_condition, EmbeddingExplainer, ExplainerMode};
//! use tage_core::graph::Graph;
//!
//! let g = Graph::with_unit_features(3, vec![(0, 1), (1, 2)], 2).unwrap();
//! let enc = Encoder::new(EncoderKind::Gin, &[2, 8, 8], Pooling::Mean, 0).unwrap();
//! let ex = EmbeddingExplainer::new(ExplainerMode::Graph, 8, None, 0).unwrap();
//! let scores = explain_graph(&enc, &ex, &g, &one_hot_condition(5, 8).unwrap()).unwrap();
//! assert_eq!(scores.len(), 2);
//! ```

pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod explainer;
pub mod graph;
pub mod nn;
pub mod objectives;

pub use error::{Result, TageError};
