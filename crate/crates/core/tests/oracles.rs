//! Independent re-implementations of the metrics and losses.

mod common;

use common::oracle::{auc_mismatches, loss_gaps, one_hot_max_gap, toy_cases, zero_weight_mismatches};
use common::{random_graph, rng};

#[test]
fn auc_equals_all_pairs_on_100_instances() {
    assert_eq!(auc_mismatches(100, 11), 0);
}

#[test]
fn conditioned_losses_match_scalar_evaluation() {
    let (infonce, jse) = loss_gaps(60);
    assert!(infonce < 1e-10, "{infonce:e}");
    assert!(jse < 1e-10, "{jse:e}");
}

#[test]
fn one_hot_condition_keeps_a_single_column() {
    assert_eq!(one_hot_max_gap(20), 0.0);
}

#[test]
fn fidelity_and_sparsity_toy_graphs() {
    for (case, got, want) in toy_cases() {
        assert!((got - want).abs() <= 1e-14, "{case}: {got} vs {want}");
    }
}

#[test]
fn zero_weight_matches_deletion_on_50_graphs() {
    assert_eq!(zero_weight_mismatches(50), 0);
}

#[test]
fn random_graph_helper_is_simple_and_connected() {
    let mut r = rng(3);
    for _ in 0..20 {
        let g = random_graph(&mut r, 12, 6, 2);
        assert!(g.num_edges() >= 11);
        let reach = tage_core::graph::k_hop_nodes(&g, 0, 12);
        assert_eq!(reach.len(), 12);
    }
}
