//! GNN embedding models.
//!
//! Both layer kinds accept an optional weight per directed edge. For GCN the
//! weight multiplies the edge's adjacency entry and the degrees used for
//! symmetric normalization are the weighted degrees, so a zero weight is
//! exactly equivalent to deleting the edge. Self-loops are never weighted.

mod batch;
mod head;
mod train;

use diffnum::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TageError};
use crate::graph::Graph;
use crate::nn::{glorot, Module};

pub use batch::GraphBatch;
pub use head::{argmax, DownstreamHead};
pub use train::{
    embed_nodes_or_graphs, link_prediction_auc, pretrain_gae, pretrain_grace_lite,
    train_downstream, train_supervised, GaeConfig, GraceConfig, HeadConfig, Pretrained,
    SupervisedConfig, Supervised, TaskLevel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Gcn,
    Gin,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Gin => "gin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gcn" => Some(EncoderKind::Gcn),
            "gin" => Some(EncoderKind::Gin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    None,
    Mean,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::None => "none",
            Pooling::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Pooling::None),
            "mean" => Some(Pooling::Mean),
            _ => None,
        }
    }
}

/// Architecture of an encoder; `dims[0]` is the input feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub dims: Vec<usize>,
    pub pooling: Pooling,
}

impl EncoderSpec {
    pub fn build(&self, seed: u64) -> Result<Encoder> {
        Encoder::new(self.kind, &self.dims, self.pooling, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Gcn(GcnLayer),
    Gin(GinLayer),
}

impl Layer {
    fn output_dim(&self) -> usize {
        match self {
            Layer::Gcn(l) => l.weight.cols(),
            Layer::Gin(l) => l.w2.cols(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Layer::Gcn(l) => l.weight.rows(),
            Layer::Gin(l) => l.w1.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    kind: EncoderKind,
    layers: Vec<Layer>,
    pooling: Pooling,
}

impl Module for Encoder {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Gcn(g) => vec![&g.weight, &g.bias],
                Layer::Gin(g) => vec![&g.w1, &g.b1, &g.w2, &g.b2],
            })
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                Layer::Gcn(g) => vec![&mut g.weight, &mut g.bias],
                Layer::Gin(g) => vec![&mut g.w1, &mut g.b1, &mut g.w2, &mut g.b2],
            })
            .collect()
    }
}

impl Encoder {
    /// Fresh encoder with Glorot weights and zero biases. GIN layers use a
    /// hidden width equal to their output width and `eps = 0`.
    pub fn new(kind: EncoderKind, dims: &[usize], pooling: Pooling, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(TageError::InvalidConfig(format!(
                "encoder dims {dims:?} need an input and at least one layer"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| match kind {
                EncoderKind::Gcn => Layer::Gcn(GcnLayer {
                    weight: glorot(&mut rng, w[0], w[1]),
                    bias: Tensor::zeros(1, w[1]),
                }),
                EncoderKind::Gin => Layer::Gin(GinLayer {
                    w1: glorot(&mut rng, w[0], w[1]),
                    b1: Tensor::zeros(1, w[1]),
                    w2: glorot(&mut rng, w[1], w[1]),
                    b2: Tensor::zeros(1, w[1]),
                    eps: 0.0,
                }),
            })
            .collect();
        Ok(Self {
            kind,
            layers,
            pooling,
        })
    }

    /// Rebuilds an encoder from explicit layers (checkpoint loading).
    pub fn from_layers(kind: EncoderKind, layers: Vec<Layer>, pooling: Pooling) -> Result<Self> {
        if layers.is_empty() {
            return Err(TageError::InvalidConfig("encoder without layers".into()));
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(TageError::DimMismatch("encoder layer dims do not chain".into()));
            }
        }
        Ok(Self {
            kind,
            layers,
            pooling,
        })
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::output_dim)
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    /// Node embeddings (`n x d`) of a batch on `tape`. `params` come from
    /// [`Module::bind`]; `weights` is a `2E x 1` column over the batch's
    /// directed edges.
    pub fn forward_nodes(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &GraphBatch,
        features: Var,
        weights: Option<Var>,
    ) -> Result<Var> {
        if tape.shape(features) != [batch.num_nodes, self.input_dim()] {
            return Err(TageError::DimMismatch(format!(
                "features {:?} for encoder input {}",
                tape.shape(features),
                self.input_dim()
            )));
        }
        let n = batch.num_nodes;
        let w = match weights {
            Some(w) => {
                if tape.shape(w) != [batch.src.len(), 1] {
                    return Err(TageError::DimMismatch(format!(
                        "edge weights {:?} for {} directed edges",
                        tape.shape(w),
                        batch.src.len()
                    )));
                }
                w
            }
            None => tape.constant(Tensor::ones(batch.src.len(), 1)),
        };

        // Weighted symmetric normalization, shared by every GCN layer.
        let gcn_norm = if self.kind == EncoderKind::Gcn {
            let deg = tape.scatter_add_rows(w, &batch.dst, n)?;
            let deg = tape.add_scalar(deg, 1.0)?;
            let inv = tape.powf(deg, -0.5)?;
            let inv_src = tape.gather_rows(inv, &batch.src)?;
            let inv_dst = tape.gather_rows(inv, &batch.dst)?;
            let coef = tape.mul(w, inv_src)?;
            let coef = tape.mul(coef, inv_dst)?;
            let self_coef = tape.mul(inv, inv)?;
            Some((coef, self_coef))
        } else {
            None
        };

        let mut h = features;
        let mut it = params.iter().copied();
        let mut next = || {
            it.next()
                .ok_or_else(|| TageError::DimMismatch("too few encoder parameters".into()))
        };
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Gcn(_) => {
                    let (weight, bias) = (next()?, next()?);
                    let (coef, self_coef) = gcn_norm.expect("gcn normalization");
                    let hw = tape.matmul(h, weight)?;
                    let msg = tape.gather_rows(hw, &batch.src)?;
                    let msg = tape.mul(msg, coef)?;
                    let agg = tape.scatter_add_rows(msg, &batch.dst, n)?;
                    let own = tape.mul(hw, self_coef)?;
                    let out = tape.add(agg, own)?;
                    tape.add(out, bias)?
                }
                Layer::Gin(g) => {
                    let (w1, b1, w2, b2) = (next()?, next()?, next()?, next()?);
                    let msg = tape.gather_rows(h, &batch.src)?;
                    let msg = tape.mul(msg, w)?;
                    let agg = tape.scatter_add_rows(msg, &batch.dst, n)?;
                    let own = tape.scale(h, 1.0 + g.eps)?;
                    let z = tape.add(own, agg)?;
                    let z = tape.matmul(z, w1)?;
                    let z = tape.add(z, b1)?;
                    let z = tape.relu(z)?;
                    let z = tape.matmul(z, w2)?;
                    tape.add(z, b2)?
                }
            };
            if i != last {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Mean of node embeddings per graph of the batch (`G x d`).
    pub fn mean_pool(&self, tape: &mut Tape, nodes: Var, batch: &GraphBatch) -> Result<Var> {
        if batch.node_counts().contains(&0) {
            return Err(TageError::EmptyGraph);
        }
        let sums = tape.scatter_add_rows(nodes, &batch.node_graph, batch.num_graphs())?;
        let inv: Vec<f64> = batch.node_counts().iter().map(|&c| 1.0 / c as f64).collect();
        let inv = tape.constant(Tensor::column(inv));
        Ok(tape.mul(sums, inv)?)
    }

    /// Convenience forward on a fresh tape with frozen parameters.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &GraphBatch,
        weights: Option<Var>,
    ) -> Result<Var> {
        let x = tape.constant(batch.features.clone());
        self.forward_nodes(tape, params, batch, x, weights)
    }

    pub fn encode_nodes(&self, graph: &Graph, weights: Option<&[f64]>) -> Result<Tensor> {
        let batch = GraphBatch::single(graph);
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let w = weights.map(|w| tape.constant(Tensor::column(w.to_vec())));
        let z = self.forward_batch(&mut tape, &params, &batch, w)?;
        Ok(tape.value(z).clone())
    }

    pub fn encode_graph(&self, graph: &Graph, weights: Option<&[f64]>) -> Result<Tensor> {
        if graph.num_nodes() == 0 {
            return Err(TageError::EmptyGraph);
        }
        let batch = GraphBatch::single(graph);
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let w = weights.map(|w| tape.constant(Tensor::column(w.to_vec())));
        let z = self.forward_batch(&mut tape, &params, &batch, w)?;
        let pooled = self.mean_pool(&mut tape, z, &batch)?;
        Ok(tape.value(pooled).clone())
    }

    /// Mean-pooled embeddings of many graphs (`G x d`), one row per graph.
    pub fn encode_graphs(&self, graphs: &[&Graph]) -> Result<Tensor> {
        let mut rows = Vec::with_capacity(graphs.len() * self.embed_dim());
        for chunk in graphs.chunks(128) {
            let batch = GraphBatch::new(chunk);
            let mut tape = Tape::new();
            let params = self.bind(&mut tape, false);
            let z = self.forward_batch(&mut tape, &params, &batch, None)?;
            let pooled = self.mean_pool(&mut tape, z, &batch)?;
            rows.extend_from_slice(tape.value(pooled).data());
        }
        Ok(Tensor::new(graphs.len(), self.embed_dim(), rows)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_plus_tail() -> Graph {
        let x = Tensor::from_rows(&[
            vec![1.0, 0.0, 0.5],
            vec![0.0, 1.0, -0.5],
            vec![0.3, 0.3, 0.3],
            vec![-1.0, 2.0, 0.0],
        ])
        .unwrap();
        Graph::new(4, vec![(0, 1), (1, 2), (2, 0), (2, 3)], x).unwrap()
    }

    #[test]
    fn unit_weights_reproduce_unweighted_bitwise() {
        for kind in [EncoderKind::Gcn, EncoderKind::Gin] {
            let enc = Encoder::new(kind, &[3, 5, 4], Pooling::None, 1).unwrap();
            let g = triangle_plus_tail();
            let a = enc.encode_nodes(&g, None).unwrap();
            let b = enc.encode_nodes(&g, Some(&vec![1.0; 8])).unwrap();
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn single_node_pooling_equals_node_embedding() {
        let g = Graph::new(1, vec![], Tensor::row(vec![0.2, -0.1, 0.7])).unwrap();
        let enc = Encoder::new(EncoderKind::Gin, &[3, 4, 4], Pooling::Mean, 2).unwrap();
        assert_eq!(enc.encode_graph(&g, None).unwrap(), enc.encode_nodes(&g, None).unwrap());
    }

    #[test]
    fn dim_mismatch_is_reported() {
        let enc = Encoder::new(EncoderKind::Gcn, &[2, 4], Pooling::None, 0).unwrap();
        assert!(matches!(
            enc.encode_nodes(&triangle_plus_tail(), None),
            Err(TageError::DimMismatch(_))
        ));
        let enc = Encoder::new(EncoderKind::Gcn, &[3, 4], Pooling::None, 0).unwrap();
        assert!(enc.encode_nodes(&triangle_plus_tail(), Some(&[1.0; 3])).is_err());
    }

    #[test]
    fn empty_graph_cannot_be_pooled() {
        let g = Graph::new(0, vec![], Tensor::zeros(0, 3)).unwrap();
        let enc = Encoder::new(EncoderKind::Gin, &[3, 4], Pooling::Mean, 0).unwrap();
        assert!(matches!(enc.encode_graph(&g, None), Err(TageError::EmptyGraph)));
    }
}
