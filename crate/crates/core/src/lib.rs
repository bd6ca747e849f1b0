//! Gumbel-softmax relaxation solvers for combinatorial optimization on graphs.
//!
//! Discrete node-state problems are relaxed into a product of independent
//! per-node categorical distributions. Populations of parameter replicas are
//! sampled with Gumbel-softmax, pushed down analytic gradients, and
//! periodically recombined with evolutionary operators.

pub mod baselines;
pub mod error;
pub mod graph;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod relaxation;
pub mod rng;
pub mod solver;
pub mod testfunctions;

pub use error::{Error, Result};
pub use graph::{Graph, SkInstance};
pub use objectives::{EnergyReport, Objective, ObjectiveKind, ObjectiveSpec, Problem};
