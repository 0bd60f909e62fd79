use diffnum::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Model;
use crate::encoder::GraphBatch;
use crate::error::{Result, TageError};
use crate::graph::Graph;
use crate::nn::Module;

/// Seeded uniform scores in (0, 1).
pub fn random_edge_scores(num_edges: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_edges).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect()
}

/// `|d max_c f(G)_c / d w_e|` at all-ones edge weights, one shared weight per
/// undirected edge.
pub fn saliency_edge_scores(model: &Model, graph: &Graph, target: Option<usize>) -> Result<Vec<f64>> {
    if let Some(t) = target {
        if t >= graph.num_nodes() {
            return Err(TageError::InvalidGraph(format!("target {t} outside graph")));
        }
    } else if graph.num_nodes() == 0 {
        return Err(TageError::EmptyGraph);
    }
    if graph.num_edges() == 0 {
        return Ok(Vec::new());
    }
    let batch = GraphBatch::single(graph);
    let mut tape = Tape::new();
    let enc_p = model.encoder.bind(&mut tape, false);
    let head_p = model.head.bind(&mut tape, false);
    let w = tape.leaf(Tensor::ones(graph.num_edges(), 1));
    let idx: Vec<usize> = (0..2 * graph.num_edges()).map(|d| d / 2).collect();
    let dw = tape.gather_rows(w, &idx)?;
    let z = model.encoder.forward_batch(&mut tape, &enc_p, &batch, Some(dw))?;
    let z = match target {
        Some(t) => tape.gather_rows(z, &[t])?,
        None => model.encoder.mean_pool(&mut tape, z, &batch)?,
    };
    let logits = model.head.logits(&mut tape, &head_p, z)?;
    let probs = tape.softmax_rows(logits)?;
    let class = crate::encoder::argmax(tape.value(probs).row_slice(0));
    let top = tape.element(probs, 0, class)?;
    let g = tape.backward(top)?.get(w);
    Ok(g.data().iter().map(|v| v.abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{DownstreamHead, Encoder, EncoderKind, Pooling};

    #[test]
    fn random_is_reproducible() {
        assert_eq!(random_edge_scores(10, 3), random_edge_scores(10, 3));
        assert_ne!(random_edge_scores(10, 3), random_edge_scores(10, 4));
    }

    #[test]
    fn disconnected_edge_has_no_influence() {
        // Target 0 sits in component {0, 1}; edge (2, 3) cannot reach it.
        let g = Graph::new(
            4,
            vec![(0, 1), (2, 3)],
            Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0], vec![0.2, 0.2], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let enc = Encoder::new(EncoderKind::Gcn, &[2, 4, 4], Pooling::None, 4).unwrap();
        let head = DownstreamHead::new(4, 4, 3, 4);
        let model = Model::new(&enc, &head).unwrap();
        let s = saliency_edge_scores(&model, &g, Some(0)).unwrap();
        assert_eq!(s[1], 0.0);
        assert!(s[0] > 0.0);
    }
}
