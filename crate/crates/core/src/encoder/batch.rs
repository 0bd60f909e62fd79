use diffnum::Tensor;

use crate::graph::Graph;

/// Disjoint union of graphs laid out for one forward pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub num_nodes: usize,
    /// Directed edge endpoints in union node indices; per graph, the doubled
    /// list of that graph.
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub features: Tensor,
    /// Graph index of every union node.
    pub node_graph: Vec<usize>,
    /// First union node of each graph (plus a final sentinel).
    pub node_offsets: Vec<usize>,
    /// First undirected edge of each graph (plus a final sentinel).
    pub edge_offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&Graph]) -> Self {
        let num_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let num_edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
        let cols = graphs.first().map_or(0, |g| g.feature_dim());
        let mut src = Vec::with_capacity(2 * num_edges);
        let mut dst = Vec::with_capacity(2 * num_edges);
        let mut feats = Vec::with_capacity(num_nodes * cols);
        let mut node_graph = Vec::with_capacity(num_nodes);
        let mut node_offsets = vec![0];
        let mut edge_offsets = vec![0];
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            for &(u, v) in g.edges() {
                src.extend([u + offset, v + offset]);
                dst.extend([v + offset, u + offset]);
            }
            feats.extend_from_slice(g.features().data());
            node_graph.extend(std::iter::repeat(gi).take(g.num_nodes()));
            offset += g.num_nodes();
            node_offsets.push(offset);
            edge_offsets.push(edge_offsets.last().unwrap() + g.num_edges());
        }
        Self {
            num_nodes,
            src,
            dst,
            features: Tensor::new(num_nodes, cols, feats).expect("rows sum to node count"),
            node_graph,
            node_offsets,
            edge_offsets,
        }
    }

    pub fn single(graph: &Graph) -> Self {
        Self::new(&[graph])
    }

    pub fn num_graphs(&self) -> usize {
        self.node_offsets.len() - 1
    }

    pub fn num_undirected(&self) -> usize {
        self.src.len() / 2
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.node_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Graph index of every undirected edge.
    pub fn edge_graph(&self) -> Vec<usize> {
        self.edge_offsets
            .windows(2)
            .enumerate()
            .flat_map(|(g, w)| std::iter::repeat(g).take(w[1] - w[0]))
            .collect()
    }
}
