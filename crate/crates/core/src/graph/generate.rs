//! Synthetic datasets with explanation ground truth.

use std::collections::HashSet;

use diffnum::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Graph, Split};
use crate::error::{Result, TageError};

pub const BASE_CLASS: usize = 0;
pub const HOUSE_TOP: usize = 1;
pub const HOUSE_MIDDLE: usize = 2;
pub const HOUSE_BOTTOM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureMode {
    /// All-ones rows of the given width.
    Ones(usize),
    /// One-hot node degree; degrees at or above `width - 1` share the last slot.
    DegreeOneHot(usize),
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::Ones(w) | FeatureMode::DegreeOneHot(w) => w,
        }
    }

    fn build(self, num_nodes: usize, edges: &[(usize, usize)]) -> Tensor {
        match self {
            FeatureMode::Ones(w) => Tensor::ones(num_nodes, w),
            FeatureMode::DegreeOneHot(w) => {
                let mut deg = vec![0usize; num_nodes];
                for &(u, v) in edges {
                    deg[u] += 1;
                    deg[v] += 1;
                }
                let mut x = Tensor::zeros(num_nodes, w);
                for (i, d) in deg.into_iter().enumerate() {
                    x.set(i, d.min(w - 1), 1.0);
                }
                x
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaShapesConfig {
    pub base_nodes: usize,
    pub attach_edges: usize,
    pub houses: usize,
    /// Random extra edges, as a fraction of the edge count before perturbation.
    pub perturbation: f64,
    pub features: FeatureMode,
}

impl Default for BaShapesConfig {
    fn default() -> Self {
        Self {
            base_nodes: 300,
            attach_edges: 5,
            houses: 80,
            perturbation: 0.1,
            features: FeatureMode::Ones(10),
        }
    }
}

/// Barabási–Albert growth from an initial star on `m + 1` nodes; each new
/// node links to `m` distinct existing nodes chosen proportionally to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|leaf| (0, leaf)).collect();
    let mut repeated: Vec<usize> = Vec::new();
    for &(u, v) in &edges {
        repeated.push(u);
        repeated.push(v);
    }
    for source in (m + 1)..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = repeated[rng.gen_range(0..repeated.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((source, t));
            repeated.push(t);
            repeated.push(source);
        }
    }
    edges
}

fn add_random_edges(
    edges: &mut Vec<(usize, usize)>,
    num_nodes: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) {
    let mut present: HashSet<(usize, usize)> =
        edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    let capacity = num_nodes * num_nodes.saturating_sub(1) / 2;
    let mut added = 0;
    while added < count && present.len() < capacity {
        let u = rng.gen_range(0..num_nodes);
        let v = rng.gen_range(0..num_nodes);
        if u != v && present.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
            added += 1;
        }
    }
}

/// BA base graph with five-node houses attached by one edge each.
///
/// House layout: top `t`, middles `m1, m2`, bottoms `b1, b2`; edges
/// `t-m1, t-m2, m1-m2, m1-b1, m2-b2, b1-b2`, with `b1` linked to a random base
/// node. The six house edges are the ground truth; the attachment edge and
/// perturbation edges are not.
pub fn generate_ba_shapes(config: &BaShapesConfig, seed: u64) -> Result<Graph> {
    let m = config.attach_edges;
    if m == 0 || m >= config.base_nodes {
        return Err(TageError::InvalidConfig(format!(
            "BA attachment {m} must be in [1, {})",
            config.base_nodes
        )));
    }
    if !(0.0..=1.0).contains(&config.perturbation) {
        return Err(TageError::InvalidConfig("perturbation must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = config.base_nodes;
    let mut edges = barabasi_albert(n0, m, &mut rng);
    let mut truth = vec![false; edges.len()];
    let mut labels = vec![BASE_CLASS; n0];

    for h in 0..config.houses {
        let start = n0 + 5 * h;
        let (t, m1, m2, b1, b2) = (start, start + 1, start + 2, start + 3, start + 4);
        labels.extend([HOUSE_TOP, HOUSE_MIDDLE, HOUSE_MIDDLE, HOUSE_BOTTOM, HOUSE_BOTTOM]);
        for e in [(t, m1), (t, m2), (m1, m2), (m1, b1), (m2, b2), (b1, b2)] {
            edges.push(e);
            truth.push(true);
        }
        edges.push((b1, rng.gen_range(0..n0)));
        truth.push(false);
    }

    let num_nodes = n0 + 5 * config.houses;
    let extra = (config.perturbation * edges.len() as f64).round() as usize;
    let before = edges.len();
    add_random_edges(&mut edges, num_nodes, extra, &mut rng);
    truth.resize(before + (edges.len() - before), false);

    let features = config.features.build(num_nodes, &edges);
    Graph::new(num_nodes, edges, features)?
        .with_node_labels(labels)?
        .with_ground_truth(vec![truth])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotifKind {
    Triangle,
    Square,
    House,
    /// Centre with five leaves.
    Star,
    /// Complete graph on four nodes.
    Clique4,
}

impl MotifKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "triangle" => Some(Self::Triangle),
            "square" => Some(Self::Square),
            "house" => Some(Self::House),
            "star" => Some(Self::Star),
            "clique4" => Some(Self::Clique4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Triangle => "triangle",
            Self::Square => "square",
            Self::House => "house",
            Self::Star => "star",
            Self::Clique4 => "clique4",
        }
    }

    /// Node count and edges in local indices; node 0 is the attachment point.
    fn layout(self) -> (usize, Vec<(usize, usize)>) {
        match self {
            Self::Triangle => (3, vec![(0, 1), (1, 2), (2, 0)]),
            Self::Square => (4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]),
            Self::House => (5, vec![(4, 1), (4, 2), (1, 2), (1, 0), (2, 3), (0, 3)]),
            Self::Star => (6, (1..6).map(|l| (0, l)).collect()),
            Self::Clique4 => (4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskConfig {
    pub num_graphs: usize,
    pub backbone_min: usize,
    pub backbone_max: usize,
    /// Task `m` asks whether motif `motifs[m]` is present.
    pub motifs: Vec<MotifKind>,
    pub motif_probability: f64,
    pub features: FeatureMode,
    pub train_fraction: f64,
    pub val_fraction: f64,
    /// Accepted per-task positive rate.
    pub min_positive_rate: f64,
    pub max_positive_rate: f64,
    pub max_attempts: usize,
}

impl Default for MultitaskConfig {
    fn default() -> Self {
        Self {
            num_graphs: 500,
            backbone_min: 10,
            backbone_max: 20,
            motifs: vec![MotifKind::House, MotifKind::Star, MotifKind::Clique4],
            motif_probability: 0.5,
            features: FeatureMode::DegreeOneHot(8),
            train_fraction: 0.7,
            val_fraction: 0.1,
            min_positive_rate: 0.4,
            max_positive_rate: 0.6,
            max_attempts: 200,
        }
    }
}

fn motif_graph(config: &MultitaskConfig, present: &[bool], rng: &mut ChaCha8Rng) -> Result<Graph> {
    let backbone = rng.gen_range(config.backbone_min..=config.backbone_max);
    // random recursive tree
    let mut edges: Vec<(usize, usize)> = (1..backbone).map(|i| (rng.gen_range(0..i), i)).collect();
    let mut owner: Vec<Option<usize>> = vec![None; edges.len()];
    let mut num_nodes = backbone;
    for (task, &kind) in config.motifs.iter().enumerate() {
        if !present[task] {
            continue;
        }
        let (size, local) = kind.layout();
        for (a, b) in local {
            edges.push((num_nodes + a, num_nodes + b));
            owner.push(Some(task));
        }
        edges.push((num_nodes, rng.gen_range(0..backbone)));
        owner.push(None);
        num_nodes += size;
    }

    // Shuffle node ids and edge order so that position carries no signal.
    let mut perm: Vec<usize> = (0..num_nodes).collect();
    perm.shuffle(rng);
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let edges_shuffled: Vec<(usize, usize)> = order
        .iter()
        .map(|&e| {
            let (u, v) = edges[e];
            if rng.gen_bool(0.5) {
                (perm[u], perm[v])
            } else {
                (perm[v], perm[u])
            }
        })
        .collect();
    let truth: Vec<Vec<bool>> = (0..config.motifs.len())
        .map(|t| order.iter().map(|&e| owner[e] == Some(t)).collect())
        .collect();
    let labels = present.iter().map(|&p| usize::from(p)).collect();
    let features = config.features.build(num_nodes, &edges_shuffled);
    Graph::new(num_nodes, edges_shuffled, features)?
        .with_ground_truth(truth)
        .map(|g| g.with_graph_labels(labels))
}

/// Random-tree backbones with independently sampled motifs; task `m` is the
/// presence of motif `m`. Whole datasets are redrawn until every task's
/// positive rate falls inside the configured band.
pub fn generate_motif_multitask(config: &MultitaskConfig, seed: u64) -> Result<Dataset> {
    if config.motifs.is_empty() {
        return Err(TageError::InvalidConfig("no motifs configured".into()));
    }
    if config.backbone_min == 0 || config.backbone_min > config.backbone_max {
        return Err(TageError::InvalidConfig("backbone size range".into()));
    }
    if !(0.0..=1.0).contains(&config.motif_probability)
        || config.train_fraction + config.val_fraction > 1.0
    {
        return Err(TageError::InvalidConfig("probabilities out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks = config.motifs.len();
    for _ in 0..config.max_attempts {
        let presence: Vec<Vec<bool>> = (0..config.num_graphs)
            .map(|_| (0..tasks).map(|_| rng.gen_bool(config.motif_probability)).collect())
            .collect();
        let feasible = (0..tasks).all(|t| {
            let rate = presence.iter().filter(|p| p[t]).count() as f64
                / config.num_graphs.max(1) as f64;
            (config.min_positive_rate..=config.max_positive_rate).contains(&rate)
        });
        if !feasible {
            continue;
        }
        let graphs = presence
            .iter()
            .map(|p| motif_graph(config, p, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let n = config.num_graphs;
        let n_train = (config.train_fraction * n as f64).round() as usize;
        let n_val = (config.val_fraction * n as f64).round() as usize;
        let splits = (0..n)
            .map(|i| {
                if i < n_train {
                    Split::Train
                } else if i < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                }
            })
            .collect();
        return Dataset::new(graphs, splits, tasks, config.features.width());
    }
    Err(TageError::InvalidConfig(format!(
        "no dataset with positive rates in [{}, {}] after {} attempts",
        config.min_positive_rate, config.max_positive_rate, config.max_attempts
    )))
}
