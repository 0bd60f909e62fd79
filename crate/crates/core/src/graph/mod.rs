//! Graph data model.
//!
//! Undirected edges are stored once. Message passing and edge scoring work on
//! the doubled directed list where directed edge `2e` is `u -> v` and `2e + 1`
//! is `v -> u` for undirected edge `e = {u, v}`.

mod container;
mod generate;
mod khop;
mod normalize;

use std::collections::HashSet;

use diffnum::Tensor;

use crate::error::{Result, TageError};

pub use container::{read_container, read_container_str, write_container, write_container_string};
pub use generate::{
    generate_ba_shapes, generate_motif_multitask, BaShapesConfig, FeatureMode, MotifKind,
    MultitaskConfig, BASE_CLASS, HOUSE_BOTTOM, HOUSE_MIDDLE, HOUSE_TOP,
};
pub use khop::{k_hop_nodes, k_hop_subgraph, Subgraph};
pub use normalize::{sym_normalize, NormalizedAdjacency};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Tensor,
    node_labels: Option<Vec<usize>>,
    graph_labels: Option<Vec<usize>>,
    /// `ground_truth[task][edge]`; empty when there is no ground truth.
    ground_truth: Vec<Vec<bool>>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>, features: Tensor) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(TageError::InvalidGraph(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                num_nodes
            )));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(TageError::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(TageError::InvalidGraph(format!("self-loop on node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(TageError::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self {
            num_nodes,
            edges,
            features,
            node_labels: None,
            graph_labels: None,
            ground_truth: Vec::new(),
        })
    }

    /// Graph with all-ones features of width `feature_dim`.
    pub fn with_unit_features(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        feature_dim: usize,
    ) -> Result<Self> {
        Self::new(num_nodes, edges, Tensor::ones(num_nodes, feature_dim))
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(TageError::InvalidGraph(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.num_nodes
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_graph_labels(mut self, labels: Vec<usize>) -> Self {
        self.graph_labels = Some(labels);
        self
    }

    pub fn with_ground_truth(mut self, truth: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(bad) = truth.iter().find(|t| t.len() != self.edges.len()) {
            return Err(TageError::InvalidGraph(format!(
                "{} ground-truth flags for {} edges",
                bad.len(),
                self.edges.len()
            )));
        }
        self.ground_truth = truth;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn graph_labels(&self) -> Option<&[usize]> {
        self.graph_labels.as_deref()
    }

    pub fn ground_truth(&self) -> &[Vec<bool>] {
        &self.ground_truth
    }

    pub fn ground_truth_for(&self, task: usize) -> Option<&[bool]> {
        self.ground_truth.get(task).map(Vec::as_slice)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Sources and targets of the doubled directed edge list.
    pub fn directed_edges(&self) -> (Vec<usize>, Vec<usize>) {
        let mut src = Vec::with_capacity(2 * self.edges.len());
        let mut dst = Vec::with_capacity(2 * self.edges.len());
        for &(u, v) in &self.edges {
            src.push(u);
            dst.push(v);
            src.push(v);
            dst.push(u);
        }
        (src, dst)
    }

    /// Induced subgraph on `nodes` (in the given order). Returns the graph and
    /// the original index of each kept edge.
    pub fn induced(&self, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
        let mut remap = vec![usize::MAX; self.num_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new;
        }
        let mut edges = Vec::new();
        let mut kept = Vec::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if remap[u] != usize::MAX && remap[v] != usize::MAX {
                edges.push((remap[u], remap[v]));
                kept.push(e);
            }
        }
        let mut g = Graph::new(nodes.len(), edges, self.features.select_rows(nodes))?;
        if let Some(labels) = &self.node_labels {
            g.node_labels = Some(nodes.iter().map(|&i| labels[i]).collect());
        }
        g.graph_labels = self.graph_labels.clone();
        g.ground_truth = self
            .ground_truth
            .iter()
            .map(|t| kept.iter().map(|&e| t[e]).collect())
            .collect();
        Ok((g, kept))
    }

    /// Deletes the masked nodes and their incident edges; remaining nodes keep
    /// their relative order. Returns the graph and the new index of every old
    /// node (`None` when deleted).
    pub fn remove_nodes(&self, mask: &[bool]) -> Result<(Graph, Vec<Option<usize>>)> {
        if mask.len() != self.num_nodes {
            return Err(TageError::DimMismatch(format!(
                "node mask of length {} for {} nodes",
                mask.len(),
                self.num_nodes
            )));
        }
        let keep: Vec<usize> = (0..self.num_nodes).filter(|&i| !mask[i]).collect();
        let mut new_index = vec![None; self.num_nodes];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = Some(new);
        }
        let (g, _) = self.induced(&keep)?;
        Ok((g, new_index))
    }

    /// Same graph without the listed undirected edges.
    pub fn remove_edges(&self, drop: &[usize]) -> Result<Graph> {
        let drop: HashSet<usize> = drop.iter().copied().collect();
        let kept: Vec<usize> = (0..self.edges.len()).filter(|e| !drop.contains(e)).collect();
        let mut g = Graph::new(
            self.num_nodes,
            kept.iter().map(|&e| self.edges[e]).collect(),
            self.features.clone(),
        )?;
        g.node_labels = self.node_labels.clone();
        g.graph_labels = self.graph_labels.clone();
        g.ground_truth = self
            .ground_truth
            .iter()
            .map(|t| kept.iter().map(|&e| t[e]).collect())
            .collect();
        Ok(g)
    }

    /// Relabels node `i` as `perm[i]`. Edge order is preserved.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(TageError::DimMismatch("permutation length".into()));
        }
        let mut inverse = vec![0; self.num_nodes];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut g = Graph::new(
            self.num_nodes,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
            self.features.select_rows(&inverse),
        )?;
        if let Some(labels) = &self.node_labels {
            g.node_labels = Some(inverse.iter().map(|&old| labels[old]).collect());
        }
        g.graph_labels = self.graph_labels.clone();
        g.ground_truth = self.ground_truth.clone();
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    graphs: Vec<Graph>,
    splits: Vec<Split>,
    num_tasks: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(
        graphs: Vec<Graph>,
        splits: Vec<Split>,
        num_tasks: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        if graphs.len() != splits.len() {
            return Err(TageError::InvalidGraph(format!(
                "{} splits for {} graphs",
                splits.len(),
                graphs.len()
            )));
        }
        if let Some(g) = graphs.iter().find(|g| g.feature_dim() != feature_dim) {
            return Err(TageError::DimMismatch(format!(
                "graph feature dim {} in dataset with dim {}",
                g.feature_dim(),
                feature_dim
            )));
        }
        Ok(Self {
            graphs,
            splits,
            num_tasks,
            feature_dim,
        })
    }

    /// Every graph assigned to the training split.
    pub fn single(graph: Graph, num_tasks: usize) -> Self {
        let feature_dim = graph.feature_dim();
        Self {
            graphs: vec![graph],
            splits: vec![Split::Train],
            num_tasks,
            feature_dim,
        }
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.graphs.len()).filter(|&i| self.splits[i] == split).collect()
    }
}
