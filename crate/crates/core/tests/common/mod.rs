//! Helpers shared by the integration tests (and by the acceptance suite).

#![allow(dead_code)]

pub mod grad_cases;
pub mod oracle;
pub mod pressure;

use std::collections::BTreeSet;

use diffnum::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tage_core::graph::Graph;
use tage_core::TageError;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Simple undirected graph: a random spanning tree plus `extra` random
/// edges, with uniform features in [-1, 1).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize, feat_dim: usize) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut set = BTreeSet::new();
    let mut edges = Vec::new();
    for i in 1..n {
        let u = order[i];
        let v = order[rng.gen_range(0..i)];
        set.insert((u.min(v), u.max(v)));
        edges.push((u, v));
    }
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 50 * (extra + 1) {
        tries += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && set.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    let x = uniform(rng, n, feat_dim, 1.0);
    Graph::new(n, edges, x).unwrap()
}

/// Unwraps the autodiff error of a core call; other errors are bugs here.
pub fn lift<T>(r: tage_core::Result<T>) -> diffnum::Result<T> {
    r.map_err(|e| match e {
        TageError::Diff(d) => d,
        other => panic!("{other}"),
    })
}
