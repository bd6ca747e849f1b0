//! Fixed instances shared by the benchmarks.

use gso_core::graph::{self, Graph};
use gso_core::solver::GsoConfig;
use gso_core::Problem;

pub const SEED: u64 = 7;

pub fn sk_problem(n: usize) -> Problem {
    graph::generate_sk(n, SEED).expect("valid size").into()
}

pub fn random_graph(n: usize, p: f64) -> Graph {
    Graph::random(n, p, SEED)
}

/// A short run so one iteration stays in the tens of milliseconds.
pub fn short_gso(replicas: usize, steps: usize) -> GsoConfig {
    GsoConfig {
        n_replicas: replicas,
        max_steps: steps,
        seed: SEED,
        ..GsoConfig::default()
    }
}
