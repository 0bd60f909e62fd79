//! Embedding explainer: a conditioned edge scorer over frozen node embeddings.
//!
//! Graph mode scores a directed edge `(i, j)` from `[z_i; z_j]`, node mode
//! appends the target embedding. The concatenation is gated elementwise by
//! `sigmoid(f(p))` and passed through a two-layer perceptron. Undirected
//! scores average the sigmoids of both orientations.

mod condition;
mod select;

use diffnum::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{Encoder, GraphBatch};
use crate::error::{Result, TageError};
use crate::graph::{k_hop_subgraph, Graph, Subgraph};
use crate::nn::{glorot, Module};

pub use condition::{
    downstream_condition, downstream_gradient, one_hot_condition, sample_condition,
    ConditionNorm, ConditionSource, ConditionVector,
};
pub use select::{select_topk_edges, topk_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplainerMode {
    Graph,
    Node,
}

impl ExplainerMode {
    pub fn name(self) -> &'static str {
        match self {
            ExplainerMode::Graph => "graph",
            ExplainerMode::Node => "node",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "graph" => Some(ExplainerMode::Graph),
            "node" => Some(ExplainerMode::Node),
            _ => None,
        }
    }

    /// Number of embeddings concatenated per directed edge.
    pub fn arity(self) -> usize {
        match self {
            ExplainerMode::Graph => 2,
            ExplainerMode::Node => 3,
        }
    }
}

/// Per-undirected-edge importance in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    pub values: Vec<f64>,
}

impl EdgeScores {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Undirected scores on a tape, `w` and `1 - w` kept separately so both
/// logarithms stay accurate near 0 and 1.
#[derive(Debug, Clone, Copy)]
pub struct TapeScores {
    pub w: Var,
    pub w_comp: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingExplainer {
    mode: ExplainerMode,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl Module for EmbeddingExplainer {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.proj_w, &self.proj_b, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.proj_w,
            &mut self.proj_b,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }
}

impl EmbeddingExplainer {
    /// Fresh explainer for `embed_dim`-wide embeddings. `hidden` defaults to
    /// the concatenated input width.
    pub fn new(mode: ExplainerMode, embed_dim: usize, hidden: Option<usize>, seed: u64) -> Result<Self> {
        if embed_dim == 0 {
            return Err(TageError::InvalidConfig("explainer embedding width is zero".into()));
        }
        let input = mode.arity() * embed_dim;
        let hidden = hidden.unwrap_or(input);
        if hidden == 0 {
            return Err(TageError::InvalidConfig("explainer hidden width is zero".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            mode,
            proj_w: glorot(&mut rng, embed_dim, input),
            proj_b: Tensor::zeros(1, input),
            w1: glorot(&mut rng, input, hidden),
            b1: Tensor::zeros(1, hidden),
            w2: glorot(&mut rng, hidden, 1),
            b2: Tensor::zeros(1, 1),
        })
    }

    pub fn from_parts(mode: ExplainerMode, params: [Tensor; 6]) -> Result<Self> {
        let [proj_w, proj_b, w1, b1, w2, b2] = params;
        let input = mode.arity() * proj_w.rows();
        let ok = proj_w.cols() == input
            && proj_b.shape() == [1, input]
            && w1.rows() == input
            && b1.shape() == [1, w1.cols()]
            && w2.shape() == [w1.cols(), 1]
            && b2.shape() == [1, 1];
        if !ok {
            return Err(TageError::DimMismatch("explainer parameter shapes".into()));
        }
        Ok(Self {
            mode,
            proj_w,
            proj_b,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn mode(&self) -> ExplainerMode {
        self.mode
    }

    pub fn embed_dim(&self) -> usize {
        self.proj_w.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    /// `sigmoid(p W_f + b_f)` for every row of `p`.
    pub fn gate(&self, tape: &mut Tape, params: &[Var], p: Var) -> Result<Var> {
        if tape.shape(p)[1] != self.embed_dim() {
            return Err(TageError::DimMismatch(format!(
                "condition width {} for explainer width {}",
                tape.shape(p)[1],
                self.embed_dim()
            )));
        }
        let g = tape.matmul(p, params[0])?;
        let g = tape.add(g, params[1])?;
        Ok(tape.sigmoid(g)?)
    }

    /// Raw logits for directed edges `src[e] -> dst[e]` (`E x 1`).
    ///
    /// `targets[e]` is the row of the target node for edge `e` (node mode).
    /// `gate` is either one row shared by all edges or one row per instance,
    /// picked per edge by `instance[e]`.
    #[allow(clippy::too_many_arguments)]
    pub fn directed_logits(
        &self,
        tape: &mut Tape,
        params: &[Var],
        z: Var,
        src: &[usize],
        dst: &[usize],
        targets: Option<&[usize]>,
        gate: Var,
        instance: Option<&[usize]>,
    ) -> Result<Var> {
        if tape.shape(z)[1] != self.embed_dim() {
            return Err(TageError::DimMismatch(format!(
                "embedding width {} for explainer width {}",
                tape.shape(z)[1],
                self.embed_dim()
            )));
        }
        let zi = tape.gather_rows(z, src)?;
        let zj = tape.gather_rows(z, dst)?;
        let x = match (self.mode, targets) {
            (ExplainerMode::Graph, None) => tape.concat_cols(&[zi, zj])?,
            (ExplainerMode::Node, Some(t)) => {
                let zt = tape.gather_rows(z, t)?;
                tape.concat_cols(&[zi, zj, zt])?
            }
            (ExplainerMode::Graph, Some(_)) => {
                return Err(TageError::InvalidConfig("graph-mode explainer given a target".into()))
            }
            (ExplainerMode::Node, None) => {
                return Err(TageError::InvalidConfig("node-mode explainer needs a target".into()))
            }
        };
        let gate = match instance {
            Some(idx) if tape.shape(gate)[0] > 1 => tape.gather_rows(gate, idx)?,
            _ => gate,
        };
        let x = tape.mul(x, gate)?;
        let h = tape.matmul(x, params[2])?;
        let h = tape.add(h, params[3])?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, params[4])?;
        Ok(tape.add(o, params[5])?)
    }

    /// Symmetric reduction of interleaved directed logits (`2E x 1`) to
    /// undirected scores (`E x 1`).
    pub fn undirected(&self, tape: &mut Tape, logits: Var) -> Result<TapeScores> {
        let n = tape.shape(logits)[0] / 2;
        let even: Vec<usize> = (0..n).map(|e| 2 * e).collect();
        let odd: Vec<usize> = (0..n).map(|e| 2 * e + 1).collect();
        let fwd = tape.gather_rows(logits, &even)?;
        let bwd = tape.gather_rows(logits, &odd)?;
        let half = |tape: &mut Tape, a: Var, b: Var| -> Result<Var> {
            let sa = tape.sigmoid(a)?;
            let sb = tape.sigmoid(b)?;
            let s = tape.add(sa, sb)?;
            Ok(tape.scale(s, 0.5)?)
        };
        let w = half(tape, fwd, bwd)?;
        let nf = tape.neg(fwd)?;
        let nb = tape.neg(bwd)?;
        let w_comp = half(tape, nf, nb)?;
        Ok(TapeScores { w, w_comp })
    }

    /// Expands undirected scores back onto the doubled directed list.
    pub fn directed_weights(&self, tape: &mut Tape, w: Var) -> Result<Var> {
        let n = tape.shape(w)[0];
        let idx: Vec<usize> = (0..2 * n).map(|d| d / 2).collect();
        Ok(tape.gather_rows(w, &idx)?)
    }

    fn score_inner(&self, z: &Tensor, p: &ConditionVector, edges: &[(usize, usize)], target: Option<usize>) -> Result<EdgeScores> {
        for &(u, v) in edges {
            if u >= z.rows() || v >= z.rows() {
                return Err(TageError::DimMismatch(format!(
                    "edge ({u}, {v}) outside {} embedding rows",
                    z.rows()
                )));
            }
        }
        if edges.is_empty() {
            return Ok(EdgeScores { values: Vec::new() });
        }
        let mut src = Vec::with_capacity(2 * edges.len());
        let mut dst = Vec::with_capacity(2 * edges.len());
        for &(u, v) in edges {
            src.extend([u, v]);
            dst.extend([v, u]);
        }
        let targets = target.map(|t| vec![t; src.len()]);
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let pv = tape.constant(Tensor::row(p.values().to_vec()));
        let gate = self.gate(&mut tape, &params, pv)?;
        let logits =
            self.directed_logits(&mut tape, &params, zv, &src, &dst, targets.as_deref(), gate, None)?;
        let s = self.undirected(&mut tape, logits)?;
        Ok(EdgeScores {
            values: tape.value(s.w).data().to_vec(),
        })
    }

    /// Graph-mode scores for `edges` given node embeddings `z`.
    pub fn score_edges_graph(&self, z: &Tensor, p: &ConditionVector, edges: &[(usize, usize)]) -> Result<EdgeScores> {
        if self.mode != ExplainerMode::Graph {
            return Err(TageError::InvalidConfig("explainer is not in graph mode".into()));
        }
        self.score_inner(z, p, edges, None)
    }

    /// Node-mode scores for `edges` with respect to `target`.
    pub fn score_edges_node(
        &self,
        z: &Tensor,
        target: usize,
        p: &ConditionVector,
        edges: &[(usize, usize)],
    ) -> Result<EdgeScores> {
        if self.mode != ExplainerMode::Node {
            return Err(TageError::InvalidConfig("explainer is not in node mode".into()));
        }
        if target >= z.rows() {
            return Err(TageError::InvalidGraph(format!(
                "target {target} outside {} nodes",
                z.rows()
            )));
        }
        self.score_inner(z, p, edges, Some(target))
    }
}

/// Scores every edge of `graph` with a graph-mode explainer.
pub fn explain_graph(
    encoder: &Encoder,
    explainer: &EmbeddingExplainer,
    graph: &Graph,
    p: &ConditionVector,
) -> Result<EdgeScores> {
    let z = encoder.encode_nodes(graph, None)?;
    explainer.score_edges_graph(&z, p, graph.edges())
}

/// Node-level explanation restricted to the target's receptive field.
#[derive(Debug, Clone)]
pub struct NodeExplanation {
    pub subgraph: Subgraph,
    /// Aligned with `subgraph.graph.edges()`.
    pub scores: EdgeScores,
}

/// Scores the edges of the `encoder.depth()`-hop subgraph around `target`.
pub fn explain_node(
    encoder: &Encoder,
    explainer: &EmbeddingExplainer,
    graph: &Graph,
    target: usize,
    p: &ConditionVector,
) -> Result<NodeExplanation> {
    let subgraph = k_hop_subgraph(graph, target, encoder.depth())?;
    let z = encoder.encode_nodes(&subgraph.graph, None)?;
    let scores = explainer.score_edges_node(&z, subgraph.target, p, subgraph.graph.edges())?;
    Ok(NodeExplanation { subgraph, scores })
}

/// Target embedding of a node inside its receptive field (`1 x d`).
pub fn target_embedding(encoder: &Encoder, graph: &Graph, target: usize) -> Result<Tensor> {
    let sub = k_hop_subgraph(graph, target, encoder.depth())?;
    let z = encoder.encode_nodes(&sub.graph, None)?;
    Ok(Tensor::row(z.row_slice(sub.target).to_vec()))
}

/// Helper for batched training: directed edge index lists of a batch with
/// the instance of every directed edge.
pub(crate) fn batch_edge_instances(batch: &GraphBatch) -> Vec<usize> {
    batch
        .edge_graph()
        .into_iter()
        .flat_map(|g| [g, g])
        .collect()
}
