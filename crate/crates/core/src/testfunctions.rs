//! Continuous test functions and the gradient / evolution-strategy variants
//! run on them.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Griewank,
    Rastrigin,
    /// `Σ x_i²`, a convex sanity check.
    Bowl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: FunctionKind,
    pub dim: usize,
    /// Per-axis bounds `[lo, hi]`.
    pub lo: f64,
    pub hi: f64,
}

impl TestFunction {
    pub fn new(kind: FunctionKind, dim: usize) -> Self {
        let half = match kind {
            FunctionKind::Griewank => 600.0,
            FunctionKind::Rastrigin => 5.12,
            FunctionKind::Bowl => 10.0,
        };
        TestFunction {
            kind,
            dim,
            lo: -half,
            hi: half,
        }
    }

    pub fn griewank(dim: usize) -> Self {
        Self::new(FunctionKind::Griewank, dim)
    }

    pub fn rastrigin(dim: usize) -> Self {
        Self::new(FunctionKind::Rastrigin, dim)
    }

    pub fn bowl(dim: usize) -> Self {
        Self::new(FunctionKind::Bowl, dim)
    }

    pub fn domain_width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match self.kind {
            FunctionKind::Griewank => {
                let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let prod: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                1.0 + sum - prod
            }
            FunctionKind::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
            FunctionKind::Bowl => x.iter().map(|v| v * v).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self.kind {
            FunctionKind::Griewank => {
                let scaled: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v / ((i + 1) as f64).sqrt())
                    .collect();
                for (i, g) in grad.iter_mut().enumerate() {
                    // Product of the other cosines, computed directly so a
                    // zero cosine elsewhere does not poison a division.
                    let others: f64 = scaled
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, s)| s.cos())
                        .product();
                    *g = x[i] / 2000.0 + scaled[i].sin() / ((i + 1) as f64).sqrt() * others;
                }
            }
            FunctionKind::Rastrigin => {
                for (g, v) in grad.iter_mut().zip(x) {
                    *g = 2.0 * v + 20.0 * PI * (2.0 * PI * v).sin();
                }
            }
            FunctionKind::Bowl => {
                for (g, v) in grad.iter_mut().zip(x) {
                    *g = 2.0 * v;
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(self.lo..=self.hi)).collect()
    }

    fn clamp(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.lo, self.hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

impl Minimum {
    /// `f < 1e-4` and every coordinate within `1e-2` of the origin.
    pub fn is_global(&self) -> bool {
        self.value < 1e-4 && self.x.iter().all(|v| v.abs() < 1e-2)
    }

    fn offer(&mut self, x: &[f64], value: f64) {
        if value < self.value {
            self.value = value;
            self.x.copy_from_slice(x);
        }
    }
}

fn gd_step(f: &TestFunction, x: &mut [f64], grad: &mut [f64], lr: f64) {
    f.gradient(x, grad);
    for (v, g) in x.iter_mut().zip(grad.iter()) {
        *v -= lr * g;
    }
}

/// Plain gradient descent from `x0`; returns the best point visited.
pub fn gd_minimize(f: &TestFunction, x0: &[f64], lr: f64, steps: usize) -> Minimum {
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; f.dim];
    let mut best = Minimum {
        x: x.clone(),
        value: f.evaluate(&x),
    };
    for _ in 0..steps {
        gd_step(f, &mut x, &mut grad, lr);
        best.offer(&x, f.evaluate(&x));
    }
    best
}

/// Gradient descent re-started uniformly in the domain every `cycle` steps.
pub fn gd_restart<R: Rng + ?Sized>(
    f: &TestFunction,
    lr: f64,
    steps: usize,
    cycle: usize,
    rng: &mut R,
) -> Minimum {
    let mut x = f.sample(rng);
    let mut grad = vec![0.0; f.dim];
    let mut best = Minimum {
        x: x.clone(),
        value: f.evaluate(&x),
    };
    for step in 1..=steps {
        gd_step(f, &mut x, &mut grad, lr);
        best.offer(&x, f.evaluate(&x));
        if cycle > 0 && step % cycle == 0 && step < steps {
            x = f.sample(rng);
            best.offer(&x, f.evaluate(&x));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    pub population: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub cycle: usize,
    pub u_inverse: f64,
    /// Perturbation sigma as a fraction of the domain width.
    pub noise_fraction: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            population: 64,
            learning_rate: 0.01,
            steps: 20_000,
            cycle: 1000,
            u_inverse: 0.25,
            noise_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    pub best: Minimum,
    /// Best-ever value after each step.
    pub trace: Vec<f64>,
}

/// Parallel gradient descent with selective substitution.
///
/// Every `cycle` steps the worst `⌊N_bs·u_inverse⌋` points are replaced by
/// the population's best point plus `Normal(0, noise_fraction·width)` noise,
/// clamped to the domain.
pub fn hybrid_gd_es<R: Rng + ?Sized>(f: &TestFunction, cfg: &HybridConfig, rng: &mut R) -> Result<HybridResult> {
    if cfg.population == 0 || !(cfg.u_inverse > 0.0 && cfg.u_inverse <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "hybrid needs a population and u_inverse in (0, 0.5], got {} and {}",
            cfg.population, cfg.u_inverse
        )));
    }
    let noise = Normal::new(0.0, cfg.noise_fraction * f.domain_width())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut xs: Vec<Vec<f64>> = (0..cfg.population).map(|_| f.sample(rng)).collect();
    let mut values: Vec<f64> = xs.iter().map(|x| f.evaluate(x)).collect();
    let mut best = Minimum {
        x: xs[0].clone(),
        value: f64::INFINITY,
    };
    for (x, &v) in xs.iter().zip(&values) {
        best.offer(x, v);
    }
    let replace = crate::solver::substitution_count(cfg.population, cfg.u_inverse).min(cfg.population / 2);
    let mut grad = vec![0.0; f.dim];
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        for (x, v) in xs.iter_mut().zip(values.iter_mut()) {
            gd_step(f, x, &mut grad, cfg.learning_rate);
            *v = f.evaluate(x);
            best.offer(x, *v);
        }
        if cfg.cycle > 0 && step % cfg.cycle == 0 && step < cfg.steps && replace > 0 {
            let mut order: Vec<usize> = (0..cfg.population).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let donor = xs[order[0]].clone();
            for &r in order.iter().rev().take(replace) {
                let x = &mut xs[r];
                for (v, d) in x.iter_mut().zip(&donor) {
                    *v = d + noise.sample(rng);
                }
                f.clamp(x);
                values[r] = f.evaluate(x);
                best.offer(x, values[r]);
            }
        }
        trace.push(best.value);
    }
    Ok(HybridResult { best, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gd,
    GdRestart,
    Hybrid,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Gd, Variant::GdRestart, Variant::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gd => "gd",
            Variant::GdRestart => "gd-restart",
            Variant::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub variant: Variant,
    pub value: f64,
    pub x: Vec<f64>,
    pub success: bool,
}

/// One seeded trial. All variants share the step budget and cycle of `cfg`;
/// plain GD starts from a uniform point drawn from the trial's stream.
pub fn run_trial(f: &TestFunction, variant: Variant, cfg: &HybridConfig, seed: u64) -> Result<TrialRecord> {
    let mut rng: StreamRng = rng::stream(seed, Purpose::TestFunction, variant as u64, 0);
    let best = match variant {
        Variant::Gd => {
            let x0 = f.sample(&mut rng);
            gd_minimize(f, &x0, cfg.learning_rate, cfg.steps)
        }
        Variant::GdRestart => gd_restart(f, cfg.learning_rate, cfg.steps, cfg.cycle, &mut rng),
        Variant::Hybrid => hybrid_gd_es(f, cfg, &mut rng)?.best,
    };
    Ok(TrialRecord {
        seed,
        variant,
        success: best.is_global(),
        value: best.value,
        x: best.x,
    })
}

/// Every variant on every seed, in (seed, variant) order.
pub fn run_trials(f: &TestFunction, cfg: &HybridConfig, seeds: &[u64]) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(u64, Variant)> = seeds
        .iter()
        .flat_map(|&s| Variant::ALL.into_iter().map(move |v| (s, v)))
        .collect();
    jobs.par_iter().map(|&(s, v)| run_trial(f, v, cfg, s)).collect()
}

/// Success counts per variant, in [`Variant::ALL`] order.
pub fn success_counts(records: &[TrialRecord]) -> [usize; 3] {
    let mut counts = [0; 3];
    for r in records.iter().filter(|r| r.success) {
        counts[r.variant as usize] += 1;
    }
    counts
}

/// Writes `seed,variant,value,x,success` rows; `x` is `;`-joined.
pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "variant", "value", "x", "success"])?;
    for r in records {
        let x: Vec<String> = r.x.iter().map(|v| format!("{v:e}")).collect();
        w.write_record([
            r.seed.to_string(),
            r.variant.name().to_string(),
            format!("{:e}", r.value),
            x.join(";"),
            r.success.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
