//! Population operators over parameter replicas.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{substitution_count, EvoConfig};
use crate::relaxation::ThetaPopulation;

/// What overwrites a losing replica during selective substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstitutionMode {
    #[default]
    BestCopy,
    /// Donor parameters plus `Normal(0, 0.1)` noise per entry.
    BestPlusNoise,
    Reinitialize,
}

const SUBSTITUTION_NOISE: f64 = 0.1;
const ROULETTE_EPS: f64 = 1e-9;

/// Indices sorted best (lowest fitness) first; ties keep index order.
fn ranked(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Overwrites the worst `⌊N_bs·u_inverse⌋` replicas, pairing the `i`-th
/// worst with the `i`-th best.
///
/// Does nothing unless the fitness variance exceeds `variance_threshold`.
/// Returns the `(replaced, donor)` pairs.
pub fn selective_substitution<R: Rng + ?Sized>(
    theta: &mut ThetaPopulation,
    fitness: &[f64],
    u_inverse: f64,
    variance_threshold: f64,
    mode: SubstitutionMode,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let n_bs = theta.n_replicas();
    assert_eq!(fitness.len(), n_bs, "one fitness value per replica");
    let count = substitution_count(n_bs, u_inverse).min(n_bs / 2);
    if count == 0 || !(variance(fitness) > variance_threshold) {
        return Vec::new();
    }
    let order = ranked(fitness);
    let pairs: Vec<(usize, usize)> = (0..count)
        .map(|i| (order[n_bs - 1 - i], order[i]))
        .collect();
    let noise = Normal::new(0.0, SUBSTITUTION_NOISE).expect("valid sigma");
    for &(dst, src) in &pairs {
        match mode {
            SubstitutionMode::BestCopy => {
                let donor = theta.replica(src).to_vec();
                theta.replica_mut(dst).copy_from_slice(&donor);
            }
            SubstitutionMode::BestPlusNoise => {
                let donor = theta.replica(src).to_vec();
                for (d, s) in theta.replica_mut(dst).iter_mut().zip(donor) {
                    *d = s + noise.sample(rng);
                }
            }
            SubstitutionMode::Reinitialize => {
                theta
                    .replica_mut(dst)
                    .iter_mut()
                    .for_each(|d| *d = rng.sample(StandardNormal));
            }
        }
    }
    pairs
}

/// Provenance of one row after a GA phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaRow {
    Elite,
    Child {
        parents: (usize, usize),
        /// Crossover point in the flattened `N·K` vector, if crossover ran.
        cut: Option<usize>,
        mutations: usize,
    },
}

fn roulette<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty population");
    let x = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

/// Elitism, roulette selection, single-point crossover and re-draw mutation.
///
/// The top `⌈elite_ratio·N_bs⌉` replicas keep their slots and parameters.
/// Every other slot receives a child of two roulette-selected parents
/// (weights `max f − f_i + ε`), crossed at a uniform cut with probability
/// `crossover_rate`, then each entry is re-drawn from `Normal(0, 1)` with
/// probability `mutation_rate`.
pub fn ga_phase<R: Rng + ?Sized>(
    theta: &ThetaPopulation,
    fitness: &[f64],
    evo: &EvoConfig,
    rng: &mut R,
) -> (ThetaPopulation, Vec<GaRow>) {
    let n_bs = theta.n_replicas();
    assert_eq!(fitness.len(), n_bs, "one fitness value per replica");
    let order = ranked(fitness);
    let n_elite = ((evo.elite_ratio * n_bs as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut is_elite = vec![false; n_bs];
    for &r in order.iter().take(n_elite.min(n_bs)) {
        is_elite[r] = true;
    }

    let worst = fitness
        .iter()
        .copied()
        .filter(|f| f.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    let cumulative: Vec<f64> = fitness
        .iter()
        .map(|&f| {
            let w = if f.is_finite() { worst - f } else { 0.0 };
            acc += w + ROULETTE_EPS;
            acc
        })
        .collect();

    let len = theta.n_nodes() * theta.n_states();
    let mut next = theta.clone();
    let mut rows = Vec::with_capacity(n_bs);
    for slot in 0..n_bs {
        if is_elite[slot] {
            rows.push(GaRow::Elite);
            continue;
        }
        let a = roulette(&cumulative, rng);
        let b = roulette(&cumulative, rng);
        let child = next.replica_mut(slot);
        child.copy_from_slice(theta.replica(a));
        let cut = if len > 1 && rng.random::<f64>() < evo.crossover_rate {
            let cut = rng.random_range(1..len);
            child[cut..].copy_from_slice(&theta.replica(b)[cut..]);
            Some(cut)
        } else {
            None
        };
        let mut mutations = 0;
        if evo.mutation_rate > 0.0 {
            for v in child.iter_mut() {
                if rng.random::<f64>() < evo.mutation_rate {
                    *v = rng.sample(StandardNormal);
                    mutations += 1;
                }
            }
        }
        rows.push(GaRow::Child {
            parents: (a, b),
            cut,
            mutations,
        });
    }
    (next, rows)
}
