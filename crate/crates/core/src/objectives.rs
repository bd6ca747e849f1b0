//! Problem energies in discrete and relaxed form.
//!
//! Every objective is minimized. Modularity is handled as `E = -Q`. Relaxed
//! energies substitute the soft sample `p̂` for the discrete state:
//! `δ(s_i, s_j) → Σ_k p̂_ik p̂_jk` (modularity), `σ_i → p̂_i1 − p̂_i0` (SK) and
//! `x_i → p̂_i1` (MIS/MVC). At a one-hot `p̂` the two forms coincide.
//!
//! Flat buffers are laid out `[node][state]` for a single replica and
//! `[replica][node][state]` for a population.

use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SkInstance};

pub const DEFAULT_ALPHA: f64 = 3.0;
pub const MAX_COMMUNITIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Modularity,
    Sk,
    Mis,
    Mvc,
}

impl ObjectiveKind {
    pub fn is_constrained(self) -> bool {
        matches!(self, ObjectiveKind::Mis | ObjectiveKind::Mvc)
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Modularity => "modularity",
            ObjectiveKind::Sk => "sk",
            ObjectiveKind::Mis => "mis",
            ObjectiveKind::Mvc => "mvc",
        })
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "modularity" => Ok(ObjectiveKind::Modularity),
            "sk" => Ok(ObjectiveKind::Sk),
            "mis" => Ok(ObjectiveKind::Mis),
            "mvc" => Ok(ObjectiveKind::Mvc),
            other => Err(Error::InvalidSpec(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    #[serde(default = "default_states")]
    pub n_states: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_states() -> usize {
    2
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ObjectiveSpec {
    pub fn modularity(n_communities: usize) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Modularity,
            n_states: n_communities,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn sk() -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Sk,
            n_states: 2,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn mis(alpha: f64) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Mis,
            n_states: 2,
            alpha,
        }
    }

    pub fn mvc(alpha: f64) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Mvc,
            n_states: 2,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ObjectiveKind::Modularity => {
                if !(2..=MAX_COMMUNITIES).contains(&self.n_states) {
                    return Err(Error::InvalidSpec(format!(
                        "modularity needs 2..={MAX_COMMUNITIES} communities, got {}",
                        self.n_states
                    )));
                }
            }
            _ => {
                if self.n_states != 2 {
                    return Err(Error::InvalidSpec(format!(
                        "{} is binary; got K = {}",
                        self.kind, self.n_states
                    )));
                }
            }
        }
        if self.kind.is_constrained() && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "penalty alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// An instance the objectives can be evaluated on.
#[derive(Debug, Clone)]
pub enum Problem {
    Graph(Graph),
    Sk(SkInstance),
}

impl Problem {
    pub fn n(&self) -> usize {
        match self {
            Problem::Graph(g) => g.n(),
            Problem::Sk(sk) => sk.n(),
        }
    }
}

impl From<Graph> for Problem {
    fn from(g: Graph) -> Self {
        Problem::Graph(g)
    }
}

impl From<SkInstance> for Problem {
    fn from(sk: SkInstance) -> Self {
        Problem::Sk(sk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub feasible: bool,
    /// Q for modularity, E/N for SK, subset size for MIS/MVC.
    pub derived_metric: f64,
}

/// An objective bound to a validated problem instance.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    spec: ObjectiveSpec,
    inner: Bound<'a>,
}

#[derive(Debug, Clone, Copy)]
enum Bound<'a> {
    Modularity(&'a Graph),
    Sk(&'a SkInstance),
    Mis(&'a Graph),
    Mvc(&'a Graph),
}

impl<'a> Objective<'a> {
    pub fn new(spec: ObjectiveSpec, problem: &'a Problem) -> Result<Self> {
        spec.validate()?;
        let inner = match (spec.kind, problem) {
            (ObjectiveKind::Modularity, Problem::Graph(g)) => {
                if g.edge_count() == 0 {
                    return Err(Error::InvalidSpec("modularity needs at least one edge".into()));
                }
                Bound::Modularity(g)
            }
            (ObjectiveKind::Mis, Problem::Graph(g)) => Bound::Mis(g),
            (ObjectiveKind::Mvc, Problem::Graph(g)) => Bound::Mvc(g),
            (ObjectiveKind::Sk, Problem::Sk(sk)) => Bound::Sk(sk),
            (kind, _) => {
                return Err(Error::InvalidSpec(format!(
                    "objective {kind} does not apply to this problem type"
                )))
            }
        };
        Ok(Objective { spec, inner })
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.spec.kind
    }

    pub fn n_nodes(&self) -> usize {
        match self.inner {
            Bound::Modularity(g) | Bound::Mis(g) | Bound::Mvc(g) => g.n(),
            Bound::Sk(sk) => sk.n(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.spec.n_states
    }

    pub fn graph(&self) -> Option<&'a Graph> {
        match self.inner {
            Bound::Modularity(g) | Bound::Mis(g) | Bound::Mvc(g) => Some(g),
            Bound::Sk(_) => None,
        }
    }

    pub fn sk(&self) -> Option<&'a SkInstance> {
        match self.inner {
            Bound::Sk(sk) => Some(sk),
            _ => None,
        }
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.n_nodes() {
            return Err(Error::InvalidSpec(format!(
                "expected {} labels, got {}",
                self.n_nodes(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.n_states()) {
            return Err(Error::InvalidSpec(format!(
                "label {bad} out of range for K = {}",
                self.n_states()
            )));
        }
        Ok(())
    }

    /// Exact discrete energy plus feasibility and the reported metric.
    pub fn hard_energy(&self, labels: &[usize]) -> Result<EnergyReport> {
        self.check_labels(labels)?;
        let energy = self.energy_unchecked(labels);
        Ok(EnergyReport {
            energy,
            feasible: self.feasible_unchecked(labels),
            derived_metric: self.metric_from_energy(labels, energy),
        })
    }

    /// Discrete energy without label validation.
    pub fn energy_unchecked(&self, labels: &[usize]) -> f64 {
        match self.inner {
            Bound::Modularity(g) => -hard_modularity(g, labels, self.n_states()),
            Bound::Sk(sk) => {
                let spins: Vec<f64> = labels.iter().map(|&l| spin(l)).collect();
                sk_energy(sk, &spins)
            }
            Bound::Mis(g) => {
                let size = labels.iter().filter(|&&l| l == 1).count() as f64;
                -size + self.spec.alpha * count_edges(g, |u, v| labels[u] == 1 && labels[v] == 1) as f64
            }
            Bound::Mvc(g) => {
                let size = labels.iter().filter(|&&l| l == 1).count() as f64;
                size + self.spec.alpha * count_edges(g, |u, v| labels[u] == 0 && labels[v] == 0) as f64
            }
        }
    }

    pub fn feasible_unchecked(&self, labels: &[usize]) -> bool {
        match self.inner {
            Bound::Mis(g) => count_edges(g, |u, v| labels[u] == 1 && labels[v] == 1) == 0,
            Bound::Mvc(g) => count_edges(g, |u, v| labels[u] == 0 && labels[v] == 0) == 0,
            _ => true,
        }
    }

    /// Constraint check; only defined for MIS and MVC.
    pub fn is_feasible(&self, labels: &[usize]) -> Result<bool> {
        if !self.kind().is_constrained() {
            return Err(Error::InvalidSpec(format!(
                "{} has no constraints to check",
                self.kind()
            )));
        }
        self.check_labels(labels)?;
        Ok(self.feasible_unchecked(labels))
    }

    pub fn derived_metric(&self, labels: &[usize]) -> Result<f64> {
        Ok(self.hard_energy(labels)?.derived_metric)
    }

    fn metric_from_energy(&self, labels: &[usize], energy: f64) -> f64 {
        match self.kind() {
            ObjectiveKind::Modularity => -energy,
            ObjectiveKind::Sk => energy / self.n_nodes() as f64,
            ObjectiveKind::Mis | ObjectiveKind::Mvc => {
                labels.iter().filter(|&&l| l == 1).count() as f64
            }
        }
    }

    /// Reported metric for a solution whose energy is already known.
    pub fn metric(&self, labels: &[usize], energy: f64) -> f64 {
        self.metric_from_energy(labels, energy)
    }

    /// Relaxed energy of one replica's `N × K` soft sample.
    pub fn soft_energy(&self, p_hat: &[f64]) -> f64 {
        let mut scratch = vec![0.0; p_hat.len()];
        self.soft_energy_grad(p_hat, &mut scratch)
    }

    /// Relaxed energy and its gradient w.r.t. `p̂` (written to `grad`).
    pub fn soft_energy_grad(&self, p_hat: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.n_states();
        debug_assert_eq!(p_hat.len(), self.n_nodes() * k);
        debug_assert_eq!(grad.len(), p_hat.len());
        match self.inner {
            Bound::Modularity(g) => soft_modularity_grad(g, p_hat, k, grad),
            Bound::Sk(sk) => {
                let m: Vec<f64> = p_hat.chunks_exact(2).map(|r| r[1] - r[0]).collect();
                let mut h = vec![0.0; m.len()];
                sk_fields(sk, &m, 1, &mut h);
                for (gr, &hi) in grad.chunks_exact_mut(2).zip(&h) {
                    gr[0] = hi;
                    gr[1] = -hi;
                }
                -0.5 * m.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>()
            }
            Bound::Mis(g) => {
                let alpha = self.spec.alpha;
                let x: Vec<f64> = p_hat.chunks_exact(2).map(|r| r[1]).collect();
                let mut energy = 0.0;
                for (i, gr) in grad.chunks_exact_mut(2).enumerate() {
                    let s: f64 = g.neighbors(i).iter().map(|&j| x[j]).sum();
                    gr[0] = 0.0;
                    gr[1] = -1.0 + alpha * s;
                    energy += -x[i] + 0.5 * alpha * x[i] * s;
                }
                energy
            }
            Bound::Mvc(g) => {
                let alpha = self.spec.alpha;
                let x: Vec<f64> = p_hat.chunks_exact(2).map(|r| r[1]).collect();
                let mut energy = 0.0;
                for (i, gr) in grad.chunks_exact_mut(2).enumerate() {
                    let s: f64 = g.neighbors(i).iter().map(|&j| 1.0 - x[j]).sum();
                    gr[0] = 0.0;
                    gr[1] = 1.0 - alpha * s;
                    energy += x[i] + 0.5 * alpha * (1.0 - x[i]) * s;
                }
                energy
            }
        }
    }

    /// Evaluates a whole population in one pass.
    ///
    /// `p_hat` and `grad` are `[replica][node][state]`, `labels` is
    /// `[replica][node]`. Writes relaxed energies to `soft` and discrete
    /// energies to `hard`, one per replica.
    pub fn evaluate_population(
        &self,
        p_hat: &[f64],
        labels: &[usize],
        grad: &mut [f64],
        soft: &mut [f64],
        hard: &mut [f64],
    ) {
        let n = self.n_nodes();
        let k = self.n_states();
        let n_bs = soft.len();
        debug_assert_eq!(p_hat.len(), n_bs * n * k);
        debug_assert_eq!(labels.len(), n_bs * n);
        if let Bound::Sk(sk) = self.inner {
            sk_population(sk, p_hat, labels, n_bs, grad, soft, hard);
            return;
        }
        grad.par_chunks_exact_mut(n * k)
            .zip(soft.par_iter_mut())
            .zip(hard.par_iter_mut())
            .enumerate()
            .for_each(|(r, ((g, s), h))| {
                *s = self.soft_energy_grad(&p_hat[r * n * k..(r + 1) * n * k], g);
                *h = self.energy_unchecked(&labels[r * n..(r + 1) * n]);
            });
    }
}

#[inline]
fn spin(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

fn count_edges(g: &Graph, pred: impl Fn(usize, usize) -> bool) -> usize {
    g.edges().iter().filter(|&&(u, v)| pred(u, v)).count()
}

/// `Q = Σ_c [e_c/|E| − (d_c / 2|E|)²]`, with `e_c` intra-community edges and
/// `d_c` the community's degree total.
fn hard_modularity(g: &Graph, labels: &[usize], k: usize) -> f64 {
    let m = g.edge_count() as f64;
    let mut intra = vec![0usize; k];
    let mut degree = vec![0usize; k];
    for &(u, v) in g.edges() {
        if labels[u] == labels[v] {
            intra[labels[u]] += 1;
        }
    }
    for (i, &l) in labels.iter().enumerate() {
        degree[l] += g.degree(i);
    }
    intra
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum()
}

/// Relaxed `E = −Q` via per-community aggregates, `O(|E|K + NK)`.
fn soft_modularity_grad(g: &Graph, p_hat: &[f64], k: usize, grad: &mut [f64]) -> f64 {
    let m = g.edge_count() as f64;
    let two_m = 2.0 * m;
    // D_k = Σ_i k_i p̂_ik
    let mut comm_degree = vec![0.0; k];
    for (i, row) in p_hat.chunks_exact(k).enumerate() {
        let deg = g.degree(i) as f64;
        for (d, &p) in comm_degree.iter_mut().zip(row) {
            *d += deg * p;
        }
    }
    // S_ik = Σ_{j ∈ N(i)} p̂_jk is written into grad, then transformed.
    let mut inner = 0.0;
    for (i, gr) in grad.chunks_exact_mut(k).enumerate() {
        gr.iter_mut().for_each(|v| *v = 0.0);
        for &j in g.neighbors(i) {
            for (v, &p) in gr.iter_mut().zip(&p_hat[j * k..(j + 1) * k]) {
                *v += p;
            }
        }
        let row = &p_hat[i * k..(i + 1) * k];
        inner += gr.iter().zip(row).map(|(s, p)| s * p).sum::<f64>();
        let deg = g.degree(i) as f64;
        for (v, &d) in gr.iter_mut().zip(&comm_degree) {
            // dE/dp̂_ik = −(2 S_ik − k_i D_k / |E|) / 2|E|
            *v = -(2.0 * *v - deg * d / m) / two_m;
        }
    }
    let null: f64 = comm_degree.iter().map(|d| d * d).sum::<f64>() / two_m;
    -(inner - null) / two_m
}

fn sk_energy(sk: &SkInstance, spins: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..sk.n() {
        let tail = &spins[i + 1..];
        let dot: f64 = sk.row(i).iter().zip(tail).map(|(j, s)| j * s).sum();
        e -= spins[i] * dot;
    }
    e
}

/// `H = J X` for a row-major `n × cols` matrix `X`.
pub(crate) fn sk_fields(sk: &SkInstance, x: &[f64], cols: usize, h: &mut [f64]) {
    let n = sk.n();
    let x = ArrayView2::from_shape((n, cols), x).expect("x is n × cols");
    let mut h = ArrayViewMut2::from_shape((n, cols), h).expect("h is n × cols");
    general_mat_mul(1.0, sk.dense(), &x, 0.0, &mut h);
}

/// SK population step: soft and hard fields share one pass over `J`.
fn sk_population(
    sk: &SkInstance,
    p_hat: &[f64],
    labels: &[usize],
    n_bs: usize,
    grad: &mut [f64],
    soft: &mut [f64],
    hard: &mut [f64],
) {
    let n = sk.n();
    let cols = 2 * n_bs;
    let mut x = vec![0.0; n * cols];
    for r in 0..n_bs {
        for i in 0..n {
            let row = &p_hat[(r * n + i) * 2..(r * n + i) * 2 + 2];
            x[i * cols + r] = row[1] - row[0];
            x[i * cols + n_bs + r] = spin(labels[r * n + i]);
        }
    }
    let mut h = vec![0.0; n * cols];
    sk_fields(sk, &x, cols, &mut h);
    soft.iter_mut().for_each(|v| *v = 0.0);
    hard.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let xr = &x[i * cols..(i + 1) * cols];
        let hr = &h[i * cols..(i + 1) * cols];
        for r in 0..n_bs {
            soft[r] -= 0.5 * xr[r] * hr[r];
            hard[r] -= 0.5 * xr[n_bs + r] * hr[n_bs + r];
            let g = &mut grad[(r * n + i) * 2..(r * n + i) * 2 + 2];
            g[0] = hr[r];
            g[1] = -hr[r];
        }
    }
}
