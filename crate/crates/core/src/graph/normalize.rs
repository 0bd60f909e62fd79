use super::Graph;

/// Coefficients of `D^{-1/2} (A + I) D^{-1/2}` laid out along the doubled
/// directed edge list, plus one self-loop coefficient per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub edge_coefficients: Vec<f64>,
    pub self_coefficients: Vec<f64>,
}

pub fn sym_normalize(graph: &Graph) -> NormalizedAdjacency {
    let inv_sqrt: Vec<f64> = graph
        .degrees()
        .into_iter()
        .map(|d| (d as f64 + 1.0).powf(-0.5))
        .collect();
    let (src, dst) = graph.directed_edges();
    let edge_coefficients = src
        .iter()
        .zip(&dst)
        .map(|(&s, &t)| inv_sqrt[s] * inv_sqrt[t])
        .collect();
    let self_coefficients = inv_sqrt.iter().map(|v| v * v).collect();
    NormalizedAdjacency {
        edge_coefficients,
        self_coefficients,
    }
}
