//! Exhaustive enumeration for small instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Objective;

/// Largest state space `K^N` the oracle will enumerate.
pub const MAX_STATES: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub energy: f64,
    /// First optimal assignment in lexicographic order (node 0 most
    /// significant).
    pub labels: Vec<usize>,
    pub metric: f64,
    /// Number of feasible assignments attaining the optimum.
    pub optimal_count: u64,
}

/// Minimum feasible energy over all `K^N` assignments.
pub fn exhaustive_optimum(obj: &Objective<'_>) -> Result<OracleResult> {
    let n = obj.n_nodes();
    let k = obj.n_states();
    let total = (k as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_STATES)
        .ok_or_else(|| Error::InvalidSize(format!("{k}^{n} states exceed the oracle limit {MAX_STATES}")))?;
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>, u64)> = None;
    for _ in 0..total {
        if obj.feasible_unchecked(&labels) {
            let e = obj.energy_unchecked(&labels);
            match &mut best {
                Some((b, _, count)) if (e - *b).abs() <= 1e-12 * b.abs().max(1.0) => *count += 1,
                Some((b, l, count)) if e < *b => {
                    *b = e;
                    l.copy_from_slice(&labels);
                    *count = 1;
                }
                None => best = Some((e, labels.clone(), 1)),
                _ => {}
            }
        }
        // Odometer increment, last node fastest.
        for slot in labels.iter_mut().rev() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    let (energy, labels, optimal_count) = best.ok_or(Error::NoFeasibleSolution)?;
    Ok(OracleResult {
        metric: obj.metric(&labels, energy),
        energy,
        labels,
        optimal_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, SkInstance};
    use crate::objectives::{ObjectiveSpec, Problem};

    #[test]
    fn two_spin_ferromagnet() {
        let p: Problem = SkInstance::from_couplings(2, vec![1.0]).unwrap().into();
        let obj = Objective::new(ObjectiveSpec::sk(), &p).unwrap();
        let r = exhaustive_optimum(&obj).unwrap();
        assert_eq!(r.energy, -1.0);
        assert_eq!(r.labels, vec![0, 0]);
        assert_eq!(r.optimal_count, 2);
    }

    #[test]
    fn path_mis_and_mvc() {
        let p: Problem = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap().into();
        let mis = exhaustive_optimum(&Objective::new(ObjectiveSpec::mis(3.0), &p).unwrap()).unwrap();
        assert_eq!(mis.labels, vec![1, 0, 1]);
        assert_eq!(mis.metric, 2.0);
        let mvc = exhaustive_optimum(&Objective::new(ObjectiveSpec::mvc(3.0), &p).unwrap()).unwrap();
        assert_eq!(mvc.labels, vec![0, 1, 0]);
    }

    #[test]
    fn refuses_huge_spaces() {
        let p: Problem = crate::graph::generate_sk(40, 0).unwrap().into();
        let obj = Objective::new(ObjectiveSpec::sk(), &p).unwrap();
        assert!(matches!(exhaustive_optimum(&obj), Err(Error::InvalidSize(_))));
    }
}
