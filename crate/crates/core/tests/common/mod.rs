//! Reference implementations written straight from the textbook formulas,
//! sharing no code with the library.

#![allow(dead_code)]

use gso_core::{Graph, SkInstance};
use rand::Rng;

/// `Q = (1/2m) Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j)` over ordered pairs.
pub fn modularity(g: &Graph, labels: &[usize]) -> f64 {
    let n = g.n();
    let two_m = 2.0 * g.edge_count() as f64;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                continue;
            }
            let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
            q += a - (g.degree(i) * g.degree(j)) as f64 / two_m;
        }
    }
    q / two_m
}

/// Soft modularity with per-node community distributions `p[i][c]`.
pub fn soft_modularity(g: &Graph, p: &[f64], k: usize) -> f64 {
    let n = g.n();
    let two_m = 2.0 * g.edge_count() as f64;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            let overlap: f64 = (0..k).map(|c| p[i * k + c] * p[j * k + c]).sum();
            let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
            q += (a - (g.degree(i) * g.degree(j)) as f64 / two_m) * overlap;
        }
    }
    q / two_m
}

/// `E = −Σ_{i<j} J_ij s_i s_j` with label 1 ↦ +1, label 0 ↦ −1.
pub fn sk_energy(sk: &SkInstance, labels: &[usize]) -> f64 {
    let s: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    sk_soft_energy(sk, &s)
}

pub fn sk_soft_energy(sk: &SkInstance, m: &[f64]) -> f64 {
    let n = sk.n();
    let mut e = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            e -= sk.get(i, j) * m[i] * m[j];
        }
    }
    e
}

/// `−Σ x_i + α Σ_edges x_i x_j`.
pub fn mis_energy(g: &Graph, x: &[f64], alpha: f64) -> f64 {
    let mut e = -x.iter().sum::<f64>();
    for &(u, v) in g.edges() {
        e += alpha * x[u] * x[v];
    }
    e
}

/// `Σ x_i + α Σ_edges (1 − x_i)(1 − x_j)`.
pub fn mvc_energy(g: &Graph, x: &[f64], alpha: f64) -> f64 {
    let mut e = x.iter().sum::<f64>();
    for &(u, v) in g.edges() {
        e += alpha * (1.0 - x[u]) * (1.0 - x[v]);
    }
    e
}

pub fn is_independent(g: &Graph, labels: &[usize]) -> bool {
    g.edges().iter().all(|&(u, v)| !(labels[u] == 1 && labels[v] == 1))
}

pub fn is_cover(g: &Graph, labels: &[usize]) -> bool {
    g.edges().iter().all(|&(u, v)| labels[u] == 1 || labels[v] == 1)
}

/// Erdős–Rényi graph with at least one edge, drawn from `rng`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Graph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::from_edges(n, edges).unwrap();
        }
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Relaxed sample for one node: `softmax((log softmax(θ) + g) / τ)`.
pub fn relaxed_row(theta: &[f64], g: &[f64], tau: f64) -> Vec<f64> {
    let p = softmax(theta);
    let z: Vec<f64> = p.iter().zip(g).map(|(pk, gk)| (pk.ln() + gk) / tau).collect();
    softmax(&z)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Relaxed energy of `p_hat` (`N × K`, row-major) for any objective.
pub fn soft_energy(spec: &gso_core::ObjectiveSpec, problem: &gso_core::Problem, p_hat: &[f64]) -> f64 {
    use gso_core::{ObjectiveKind, Problem};
    let k = spec.n_states;
    let x: Vec<f64> = p_hat.chunks(k).map(|r| r[k - 1]).collect();
    match (spec.kind, problem) {
        (ObjectiveKind::Modularity, Problem::Graph(g)) => -soft_modularity(g, p_hat, k),
        (ObjectiveKind::Sk, Problem::Sk(sk)) => {
            let m: Vec<f64> = p_hat.chunks(2).map(|r| r[1] - r[0]).collect();
            sk_soft_energy(sk, &m)
        }
        (ObjectiveKind::Mis, Problem::Graph(g)) => mis_energy(g, &x, spec.alpha),
        (ObjectiveKind::Mvc, Problem::Graph(g)) => mvc_energy(g, &x, spec.alpha),
        _ => panic!("objective does not match problem"),
    }
}

/// `E(θ)` through the relaxation with fixed noise `g`.
pub fn energy_of_theta(
    spec: &gso_core::ObjectiveSpec,
    problem: &gso_core::Problem,
    theta: &[f64],
    g: &[f64],
    tau: f64,
) -> f64 {
    let k = spec.n_states;
    let p_hat: Vec<f64> = theta
        .chunks(k)
        .zip(g.chunks(k))
        .flat_map(|(t, gr)| relaxed_row(t, gr, tau))
        .collect();
    soft_energy(spec, problem, &p_hat)
}

/// Central differences of [`energy_of_theta`] with step `eps`.
pub fn finite_difference_gradient(
    spec: &gso_core::ObjectiveSpec,
    problem: &gso_core::Problem,
    theta: &[f64],
    g: &[f64],
    tau: f64,
    eps: f64,
) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + eps;
            let up = energy_of_theta(spec, problem, &t, g, tau);
            t[i] = theta[i] - eps;
            let down = energy_of_theta(spec, problem, &t, g, tau);
            t[i] = theta[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Library gradient `dE/dθ` for one replica.
pub fn analytic_gradient(obj: &gso_core::Objective<'_>, theta: &[f64], g: &[f64], tau: f64) -> Vec<f64> {
    use gso_core::relaxation::{backprop_rows, gumbel_softmax_rows, softmax_rows};
    let k = obj.n_states();
    let mut p = vec![0.0; theta.len()];
    softmax_rows(theta, k, &mut p);
    let mut p_hat = vec![0.0; theta.len()];
    gumbel_softmax_rows(&p, g, tau, k, &mut p_hat);
    let mut d = vec![0.0; theta.len()];
    obj.soft_energy_grad(&p_hat, &mut d);
    let mut out = vec![0.0; theta.len()];
    backprop_rows(&d, &p, &p_hat, tau, k, &mut out);
    out
}

/// `max |a − b| / max |b|`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Twenty gradient-check instances: five per objective, `N ≤ 12`, `K ≤ 4`.
pub fn gradient_cases(seed: u64) -> Vec<(gso_core::ObjectiveSpec, gso_core::Problem)> {
    use gso_core::{graph, ObjectiveSpec};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for i in 0..5 {
        let n = rng.random_range(4..=12);
        let k = rng.random_range(2..=4);
        cases.push((ObjectiveSpec::modularity(k), random_graph(&mut rng, n, 0.4).into()));
        cases.push((ObjectiveSpec::sk(), graph::generate_sk(n, seed + i).unwrap().into()));
        let alpha = rng.random_range(1.0..5.0);
        cases.push((ObjectiveSpec::mis(alpha), random_graph(&mut rng, n, 0.4).into()));
        cases.push((ObjectiveSpec::mvc(alpha), random_graph(&mut rng, n, 0.4).into()));
    }
    cases
}
