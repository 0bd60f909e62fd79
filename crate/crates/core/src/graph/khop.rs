use std::collections::VecDeque;

use super::Graph;
use crate::error::{Result, TageError};

/// Induced neighbourhood of a target node.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: Graph,
    /// Original node index of every subgraph node.
    pub nodes: Vec<usize>,
    /// Original edge index of every subgraph edge.
    pub edges: Vec<usize>,
    /// Index of the target inside `graph`.
    pub target: usize,
}

/// Nodes within `k` hops of `target` in BFS order (target first).
pub fn k_hop_nodes(graph: &Graph, target: usize, k: usize) -> Vec<usize> {
    let adj = graph.adjacency_lists();
    let mut dist = vec![usize::MAX; graph.num_nodes()];
    let mut order = vec![target];
    let mut queue = VecDeque::from([target]);
    dist[target] = 0;
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    order
}

/// Induced subgraph on the `k`-hop neighbourhood of `target`. Nodes keep
/// their original relative order so edge order is preserved as well.
pub fn k_hop_subgraph(graph: &Graph, target: usize, k: usize) -> Result<Subgraph> {
    if target >= graph.num_nodes() {
        return Err(TageError::InvalidGraph(format!(
            "target {target} outside graph of {} nodes",
            graph.num_nodes()
        )));
    }
    let mut nodes = k_hop_nodes(graph, target, k);
    nodes.sort_unstable();
    let (sub, edges) = graph.induced(&nodes)?;
    let target = nodes.binary_search(&target).expect("target is in its own neighbourhood");
    Ok(Subgraph {
        graph: sub,
        nodes,
        edges,
        target,
    })
}
