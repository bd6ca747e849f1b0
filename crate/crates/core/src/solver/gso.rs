use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::convergence::ConvergenceTracker;
use super::evolution::{ga_phase, selective_substitution, GaRow, SubstitutionMode};
use super::optimizer::Optimizer;
use super::{EvoConfig, GsoConfig, RunResult};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::relaxation::{
    backprop_rows, binary_relaxed_rows, decode_rows, fill_gumbel, gumbel_softmax_rows,
    logistic_from_uniform, softmax_rows, ThetaPopulation,
};
use crate::rng::{self, Purpose};

/// Batched Gumbel-softmax optimization.
///
/// Each step samples every replica, evaluates relaxed energies and their
/// gradients, updates the parameters, and hard-decodes the same samples to
/// track the best feasible discrete solution seen so far.
pub fn gso_run(objective: &Objective<'_>, config: &GsoConfig) -> Result<RunResult> {
    run(objective, config, &EvoConfig::disabled())
}

/// GSO with selective substitution every `t1` steps and a GA phase every
/// `t2` steps once the running best first stalls.
pub fn evo_gso_run(objective: &Objective<'_>, gso: &GsoConfig, evo: &EvoConfig) -> Result<RunResult> {
    run(objective, gso, evo)
}

struct Buffers {
    probs: Vec<f64>,
    noise: Vec<f64>,
    p_hat: Vec<f64>,
    grad_phat: Vec<f64>,
    grad_theta: Vec<f64>,
    labels: Vec<usize>,
    soft: Vec<f64>,
    hard: Vec<f64>,
    feasible: Vec<bool>,
}

impl Buffers {
    fn new(n_bs: usize, n: usize, k: usize) -> Self {
        let len = n_bs * n * k;
        Buffers {
            probs: vec![0.0; len],
            noise: vec![0.0; len],
            p_hat: vec![0.0; len],
            grad_phat: vec![0.0; len],
            grad_theta: vec![0.0; len],
            labels: vec![0; n_bs * n],
            soft: vec![0.0; n_bs],
            hard: vec![0.0; n_bs],
            feasible: vec![true; n_bs],
        }
    }
}

fn run(obj: &Objective<'_>, cfg: &GsoConfig, evo: &EvoConfig) -> Result<RunResult> {
    cfg.validate()?;
    evo.validate(cfg.n_replicas)?;
    let start = Instant::now();

    let n_bs = cfg.n_replicas;
    let n = obj.n_nodes();
    let k = obj.n_states();
    let per = n * k;
    let schedule = cfg.schedule()?;
    let constrained = obj.kind().is_constrained();

    let mut theta = ThetaPopulation::random(n_bs, n, k, cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, n_bs, per);
    let mut buf = Buffers::new(n_bs, n, k);

    // Best discrete energy each replica has reached (penalized for MIS/MVC).
    let mut fitness = vec![f64::INFINITY; n_bs];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut trajectory = Vec::with_capacity(cfg.max_steps);
    let mut tracker = ConvergenceTracker::new(cfg.convergence);
    let mut next_ga: Option<usize> = None;
    let mut events = super::EvoEvents::default();

    let mut steps = 0;
    for step in 0..cfg.max_steps {
        let tau = schedule.at(step);
        let seed = cfg.seed;

        (
            theta.as_slice().par_chunks(per),
            buf.probs.par_chunks_mut(per),
            buf.noise.par_chunks_mut(per),
            buf.p_hat.par_chunks_mut(per),
            buf.labels.par_chunks_mut(n),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(r, (th, p, g, q, lab))| {
                let mut rng = rng::stream(seed, Purpose::Gumbel, r as u64, step as u64);
                if k == 2 {
                    let g = &mut g[..n];
                    g.iter_mut()
                        .for_each(|v| *v = logistic_from_uniform(rng.random::<f64>()));
                    binary_relaxed_rows(th, g, tau, p, q);
                } else {
                    softmax_rows(th, k, p);
                    fill_gumbel(&mut rng, g);
                    gumbel_softmax_rows(p, g, tau, k, q);
                }
                decode_rows(q, k, lab);
            });

        obj.evaluate_population(
            &buf.p_hat,
            &buf.labels,
            &mut buf.grad_phat,
            &mut buf.soft,
            &mut buf.hard,
        );

        (
            theta.as_slice_mut().par_chunks_mut(per),
            opt.replica_states().into_par_iter(),
            buf.grad_theta.par_chunks_mut(per),
            buf.grad_phat.par_chunks(per),
            buf.probs.par_chunks(per),
            buf.p_hat.par_chunks(per),
        )
            .into_par_iter()
            .for_each(|(th, mut state, gt, gp, p, q)| {
                backprop_rows(gp, p, q, tau, k, gt);
                state.apply(th, gt);
            });

        if constrained {
            buf.feasible
                .par_iter_mut()
                .zip(buf.labels.par_chunks(n))
                .for_each(|(f, lab)| *f = obj.feasible_unchecked(lab));
        }

        let mut step_best: Option<(f64, usize)> = None;
        for r in 0..n_bs {
            let e = buf.hard[r];
            if e < fitness[r] {
                fitness[r] = e;
            }
            if buf.feasible[r] && step_best.is_none_or(|(b, _)| e < b) {
                step_best = Some((e, r));
            }
        }
        if let Some((e, r)) = step_best {
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, buf.labels[r * n..(r + 1) * n].to_vec()));
            }
        }
        let step_energy = step_best.map(|(e, _)| e);
        trajectory.push(step_energy);
        tracker.push(step_energy);
        steps = step + 1;

        if steps == cfg.max_steps {
            break;
        }

        if let Some(t1) = evo.t1 {
            if steps % t1 == 0 {
                let mut rng = rng::stream(cfg.seed, Purpose::Substitution, step as u64, 0);
                let pairs = selective_substitution(
                    &mut theta,
                    &fitness,
                    evo.u_inverse,
                    evo.variance_threshold,
                    evo.substitution,
                    &mut rng,
                );
                for &(dst, src) in &pairs {
                    match evo.substitution {
                        SubstitutionMode::BestCopy | SubstitutionMode::BestPlusNoise => {
                            fitness[dst] = fitness[src];
                            opt.copy_replica(src, dst);
                        }
                        SubstitutionMode::Reinitialize => opt.reset_replica(dst),
                    }
                }
                if !pairs.is_empty() {
                    events.substitution_steps.push(steps);
                }
            }
        }

        match evo.t2 {
            Some(t2) => {
                if next_ga.is_none() && tracker.converged() {
                    next_ga = Some(steps);
                }
                if next_ga == Some(steps) {
                    let mut rng = rng::stream(cfg.seed, Purpose::Genetic, step as u64, 0);
                    let (next, rows) = ga_phase(&theta, &fitness, evo, &mut rng);
                    theta = next;
                    opt.reset();
                    // A child's fitness is the energy of its distribution's mode.
                    let mut mode = vec![0usize; n];
                    for (r, row) in rows.iter().enumerate() {
                        if let GaRow::Child { .. } = row {
                            decode_rows(theta.replica(r), k, &mut mode);
                            fitness[r] = obj.energy_unchecked(&mode);
                        }
                    }
                    events.ga_steps.push(steps);
                    next_ga = Some(steps + t2);
                }
            }
            None => {
                if cfg.stop_on_convergence && tracker.converged() {
                    break;
                }
            }
        }
    }

    let wall_seconds = start.elapsed().as_secs_f64();
    let (_, best_labels) = best.ok_or(Error::NoFeasibleSolution)?;
    // Batched SK energies can differ from a direct evaluation in the last
    // bits; report the value a caller would get by re-scoring the labels.
    let best_energy = obj.energy_unchecked(&best_labels);
    Ok(RunResult {
        best_metric: obj.metric(&best_labels, best_energy),
        best_labels,
        best_energy,
        trajectory,
        steps,
        wall_seconds,
        seed: cfg.seed,
        feasible: true,
        events,
    })
}
