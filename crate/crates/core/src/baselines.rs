//! Reference solvers: simulated annealing, a label-string GA and greedy
//! independent-set heuristics.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::objectives::{Objective, ObjectiveKind};
use crate::rng::{self, Purpose};
use crate::solver::{EvoEvents, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub t_init: f64,
    pub t_final: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            t_init: 2.0,
            t_final: 0.01,
            sweeps: 1000,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_init >= self.t_final && self.t_init.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "SA needs t_init >= t_final > 0, got {} and {}",
                self.t_init, self.t_final
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("SA needs at least one sweep".into()));
        }
        Ok(())
    }

    /// Geometric factor applied to the temperature after each sweep.
    pub fn cooling_ratio(&self) -> f64 {
        if self.sweeps < 2 {
            return 1.0;
        }
        (self.t_final / self.t_init).powf(1.0 / (self.sweeps - 1) as f64)
    }
}

/// Metropolis rule: downhill and neutral moves are always taken.
#[inline]
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    delta <= 0.0 || u < (-delta / temperature).exp()
}

/// Labels plus the auxiliary sums that make single-site moves `O(degree)`
/// (`O(N)` for SK).
pub(crate) struct LocalState<'a> {
    obj: &'a Objective<'a>,
    labels: Vec<usize>,
    /// SK: local fields `h_i = Σ_j J_ij σ_j`. MIS: selected-neighbor counts.
    /// MVC: unselected-neighbor counts. Modularity: unused.
    aux: Vec<f64>,
    /// Modularity: per-community degree totals.
    comm_degree: Vec<f64>,
    /// Number of violated edges (MIS/MVC).
    violations: usize,
    energy: f64,
}

impl<'a> LocalState<'a> {
    pub(crate) fn new(obj: &'a Objective<'a>, labels: Vec<usize>) -> Self {
        let n = obj.n_nodes();
        let mut aux = vec![0.0; n];
        let mut comm_degree = Vec::new();
        match obj.kind() {
            ObjectiveKind::Sk => {
                let dense = obj.sk().expect("sk instance").dense();
                for (i, h) in aux.iter_mut().enumerate() {
                    *h = dense
                        .row(i)
                        .iter()
                        .zip(&labels)
                        .map(|(j, &l)| j * spin(l))
                        .sum();
                }
            }
            ObjectiveKind::Mis | ObjectiveKind::Mvc => {
                let g = obj.graph().expect("graph instance");
                let target = if obj.kind() == ObjectiveKind::Mis { 1 } else { 0 };
                for (i, a) in aux.iter_mut().enumerate() {
                    *a = g.neighbors(i).iter().filter(|&&j| labels[j] == target).count() as f64;
                }
            }
            ObjectiveKind::Modularity => {
                let g = obj.graph().expect("graph instance");
                comm_degree = vec![0.0; obj.n_states()];
                for (i, &l) in labels.iter().enumerate() {
                    comm_degree[l] += g.degree(i) as f64;
                }
            }
        }
        let violations = match obj.kind() {
            ObjectiveKind::Mis => count_violations(obj.graph().unwrap(), &labels, 1),
            ObjectiveKind::Mvc => count_violations(obj.graph().unwrap(), &labels, 0),
            _ => 0,
        };
        let energy = obj.energy_unchecked(&labels);
        LocalState {
            obj,
            labels,
            aux,
            comm_degree,
            violations,
            energy,
        }
    }

    pub(crate) fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub(crate) fn energy(&self) -> f64 {
        self.energy
    }

    pub(crate) fn feasible(&self) -> bool {
        self.violations == 0
    }

    /// Energy change of setting node `i` to label `to`.
    pub(crate) fn delta(&self, i: usize, to: usize) -> f64 {
        let from = self.labels[i];
        if from == to {
            return 0.0;
        }
        let alpha = self.obj.spec().alpha;
        match self.obj.kind() {
            ObjectiveKind::Sk => 2.0 * spin(from) * self.aux[i],
            ObjectiveKind::Mis => {
                let sign = if to == 1 { 1.0 } else { -1.0 };
                sign * (-1.0 + alpha * self.aux[i])
            }
            ObjectiveKind::Mvc => {
                let sign = if to == 1 { 1.0 } else { -1.0 };
                sign * (1.0 - alpha * self.aux[i])
            }
            ObjectiveKind::Modularity => {
                let g = self.obj.graph().unwrap();
                let m = g.edge_count() as f64;
                let k_i = g.degree(i) as f64;
                let (mut to_from, mut to_to) = (0.0, 0.0);
                for &j in g.neighbors(i) {
                    if self.labels[j] == from {
                        to_from += 1.0;
                    } else if self.labels[j] == to {
                        to_to += 1.0;
                    }
                }
                let d_a = self.comm_degree[from];
                let d_b = self.comm_degree[to];
                let null = ((d_a - k_i).powi(2) + (d_b + k_i).powi(2) - d_a * d_a - d_b * d_b)
                    / (4.0 * m * m);
                -((to_to - to_from) / m - null)
            }
        }
    }

    pub(crate) fn apply(&mut self, i: usize, to: usize, delta: f64) {
        let from = self.labels[i];
        if from == to {
            return;
        }
        match self.obj.kind() {
            ObjectiveKind::Sk => {
                let dense = self.obj.sk().unwrap().dense();
                let step = spin(to) - spin(from);
                for (h, &j) in self.aux.iter_mut().zip(dense.row(i)) {
                    *h += j * step;
                }
            }
            ObjectiveKind::Mis | ObjectiveKind::Mvc => {
                let g = self.obj.graph().unwrap();
                let target = if self.obj.kind() == ObjectiveKind::Mis { 1 } else { 0 };
                let step = if to == target { 1.0 } else { -1.0 };
                let mut bad_neighbors = 0usize;
                for &j in g.neighbors(i) {
                    self.aux[j] += step;
                    if self.labels[j] == target {
                        bad_neighbors += 1;
                    }
                }
                if to == target {
                    self.violations += bad_neighbors;
                } else {
                    self.violations -= bad_neighbors;
                }
            }
            ObjectiveKind::Modularity => {
                let k_i = self.obj.graph().unwrap().degree(i) as f64;
                self.comm_degree[from] -= k_i;
                self.comm_degree[to] += k_i;
            }
        }
        self.labels[i] = to;
        self.energy += delta;
    }
}

fn count_violations(g: &Graph, labels: &[usize], target: usize) -> usize {
    g.edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == target && labels[v] == target)
        .count()
}

#[inline]
fn spin(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

fn random_other_label<R: Rng + ?Sized>(rng: &mut R, current: usize, k: usize) -> usize {
    let r = rng.random_range(0..k - 1);
    if r >= current {
        r + 1
    } else {
        r
    }
}

/// Scale that puts a unit temperature on the order of one typical move.
///
/// Modularity moves change `Q` by roughly `1/|E|`, so its temperatures are
/// measured in units of `1/|E|`; the other energies are already in unit
/// steps.
fn energy_scale(obj: &Objective<'_>) -> f64 {
    match obj.kind() {
        ObjectiveKind::Modularity => 1.0 / obj.graph().unwrap().edge_count() as f64,
        _ => 1.0,
    }
}

fn finish(
    obj: &Objective<'_>,
    best: Option<Vec<usize>>,
    trajectory: Vec<Option<f64>>,
    steps: usize,
    start: Instant,
    seed: u64,
) -> Result<RunResult> {
    let best_labels = best.ok_or(Error::NoFeasibleSolution)?;
    let best_energy = obj.energy_unchecked(&best_labels);
    Ok(RunResult {
        best_metric: obj.metric(&best_labels, best_energy),
        best_labels,
        best_energy,
        trajectory,
        steps,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed,
        feasible: true,
        events: EvoEvents::default(),
    })
}

/// Single-site Metropolis annealing with geometric cooling.
///
/// One sweep is `N` proposals at uniformly random sites. The trajectory holds
/// the energy at the end of each sweep (`None` while infeasible).
pub fn simulated_annealing(obj: &Objective<'_>, cfg: &SaConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = obj.n_nodes();
    let k = obj.n_states();
    let scale = energy_scale(obj);
    let mut rng = rng::stream(cfg.seed, Purpose::Baseline, 0, 0);
    let init: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut state = LocalState::new(obj, init);

    let mut best: Option<(f64, Vec<usize>)> = None;
    let record = |state: &LocalState<'_>, best: &mut Option<(f64, Vec<usize>)>| {
        if state.feasible() && best.as_ref().is_none_or(|(e, _)| state.energy() < *e - 1e-12) {
            *best = Some((state.energy(), state.labels().to_vec()));
        }
    };
    record(&state, &mut best);

    let ratio = cfg.cooling_ratio();
    let mut temperature = cfg.t_init;
    let mut trajectory = Vec::with_capacity(cfg.sweeps);
    for _ in 0..cfg.sweeps {
        let t = temperature * scale;
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let to = random_other_label(&mut rng, state.labels()[i], k);
            let delta = state.delta(i, to);
            if metropolis_accept(delta, t, rng.random()) {
                state.apply(i, to, delta);
                if delta < 0.0 {
                    record(&state, &mut best);
                }
            }
        }
        record(&state, &mut best);
        trajectory.push(state.feasible().then(|| state.energy()));
        temperature *= ratio;
    }
    finish(obj, best.map(|(_, l)| l), trajectory, cfg.sweeps, start, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_ratio: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 64,
            crossover_rate: 0.8,
            mutation_rate: 0.001,
            elite_ratio: 0.125,
            generations: 1000,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.population < 2 {
            return bad(format!("GA population must be >= 2, got {}", self.population));
        }
        if self.generations == 0 {
            return bad("GA needs at least one generation".into());
        }
        for (name, v) in [
            ("crossover rate", self.crossover_rate),
            ("mutation rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.elite_ratio) {
            return bad(format!("elite ratio must lie in [0, 1), got {}", self.elite_ratio));
        }
        Ok(())
    }
}

/// Generational GA over label strings.
///
/// Fitness is the (penalized) discrete energy. Each generation keeps the top
/// `⌈elite_ratio·P⌉` strings and fills the rest with roulette-selected,
/// single-point-crossed, per-site-mutated children. Returns
/// [`Error::NoFeasibleSolution`] if no feasible string ever appears.
pub fn label_ga(obj: &Objective<'_>, cfg: &GaConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = obj.n_nodes();
    let k = obj.n_states();
    let pop = cfg.population;
    let mut rng = rng::stream(cfg.seed, Purpose::Baseline, 1, 0);
    let mut genomes: Vec<Vec<usize>> = (0..pop)
        .map(|_| (0..n).map(|_| rng.random_range(0..k)).collect())
        .collect();
    let n_elite = ((cfg.elite_ratio * pop as f64) - 1e-9).ceil().max(0.0) as usize;

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut trajectory = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let fitness: Vec<f64> = genomes.iter().map(|g| obj.energy_unchecked(g)).collect();
        let mut gen_best: Option<(f64, usize)> = None;
        for (r, g) in genomes.iter().enumerate() {
            if obj.feasible_unchecked(g) && gen_best.is_none_or(|(e, _)| fitness[r] < e) {
                gen_best = Some((fitness[r], r));
            }
        }
        if let Some((e, r)) = gen_best {
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, genomes[r].clone()));
            }
        }
        trajectory.push(gen_best.map(|(e, _)| e));
        if generation + 1 == cfg.generations {
            break;
        }

        let mut order: Vec<usize> = (0..pop).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let worst = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let cumulative: Vec<f64> = fitness
            .iter()
            .map(|&f| {
                acc += worst - f + 1e-9;
                acc
            })
            .collect();
        let pick = |rng: &mut crate::rng::StreamRng| {
            let x = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= x).min(pop - 1)
        };

        let mut next: Vec<Vec<usize>> = order.iter().take(n_elite).map(|&r| genomes[r].clone()).collect();
        while next.len() < pop {
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            let mut child = genomes[a].clone();
            if n > 1 && rng.random::<f64>() < cfg.crossover_rate {
                let cut = rng.random_range(1..n);
                child[cut..].copy_from_slice(&genomes[b][cut..]);
            }
            for site in child.iter_mut() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    *site = random_other_label(&mut rng, *site, k);
                }
            }
            next.push(child);
        }
        genomes = next;
    }
    finish(obj, best.map(|(_, l)| l), trajectory, cfg.generations, start, cfg.seed)
}

/// Minimum-degree greedy independent set.
///
/// Repeatedly takes a node of minimum residual degree (lowest id on ties),
/// then deletes it and its neighbors. Returns the set sorted by id.
pub fn md_greedy_mis(graph: &Graph) -> Vec<usize> {
    let n = graph.n();
    let mut degree: Vec<usize> = graph.degrees().to_vec();
    let mut alive = vec![true; n];
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (degree[i], i)).collect();
    let mut chosen = Vec::new();
    while let Some((_, v)) = queue.pop_first() {
        chosen.push(v);
        alive[v] = false;
        for &u in graph.neighbors(v) {
            if !alive[u] {
                continue;
            }
            alive[u] = false;
            queue.remove(&(degree[u], u));
            for &w in graph.neighbors(u) {
                if alive[w] {
                    queue.remove(&(degree[w], w));
                    degree[w] -= 1;
                    queue.insert((degree[w], w));
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyOrder {
    ById,
    Random(u64),
}

/// Scans nodes in `order`, keeping each node with no kept neighbor.
pub fn greedy_mis(graph: &Graph, order: GreedyOrder) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..graph.n()).collect();
    if let GreedyOrder::Random(seed) = order {
        nodes.shuffle(&mut rng::stream(seed, Purpose::Baseline, 2, 0));
    }
    let mut taken = vec![false; graph.n()];
    for v in nodes {
        if !graph.neighbors(v).iter().any(|&u| taken[u]) {
            taken[v] = true;
        }
    }
    (0..graph.n()).filter(|&v| taken[v]).collect()
}

/// Subset as a 0/1 label vector.
pub fn subset_labels(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut labels = vec![0; n];
    for &v in subset {
        labels[v] = 1;
    }
    labels
}
