#[path = "support/decision_tree.rs"]
mod decision_tree;

use convention_lab::engine::PopulationConfig;
use convention_lab::experiments::run_batch;
use decision_tree::{binned, consensus_time_distribution, total_variation};

#[test]
fn two_agents_enumerate_to_step_two() {
    let dist = consensus_time_distribution(2, 6);
    assert!((dist[1] - 1.0).abs() < 1e-12, "{dist:?}");
}

#[test]
fn four_agent_tree_is_a_distribution() {
    let dist = consensus_time_distribution(4, 10);
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // Three agents must hear the name before anyone can settle.
    assert_eq!(&dist[..3], &[0.0, 0.0, 0.0]);
    assert!(dist[3] > 0.0);
}

#[test]
fn four_agent_consensus_time_matches_enumeration() {
    let depth = 10;
    let exact = consensus_time_distribution(4, depth);
    let times = run_batch(&PopulationConfig::minimal_ng(4).with_seed(404), 100_000, |_, t| t.consensus_step).unwrap();
    let tv = total_variation(&exact, &binned(&times, depth));
    assert!(tv < 0.01, "total variation {tv}");
}
