//! Mean-field categorical parameterization and Gumbel-softmax sampling.
//!
//! Parameters are stored as an `N_bs × N × K` array of logits. Each length-`K`
//! row is mapped to a categorical distribution with a softmax; a relaxed
//! sample of that distribution is
//!
//! ```text
//! p̂_k = softmax_k((log p_k + g_k) / τ),   g_k ~ Gumbel(0, 1)
//! ```
//!
//! The row-level functions work on flat `&[f64]` slices so solvers can run
//! them per replica without allocating; the array-level functions wrap them.

use ndarray::{Array2, Array3, ArrayView3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Learnable logits, shape `N_bs × N × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPopulation {
    values: Array3<f64>,
}

impl ThetaPopulation {
    pub fn new(values: Array3<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ThetaPopulation {
            values: values.as_standard_layout().into_owned(),
        }
    }

    /// I.i.d. `Normal(0, 1)` logits; replica `r` draws from its own stream.
    pub fn random(n_replicas: usize, n_nodes: usize, n_states: usize, seed: u64) -> Self {
        let mut values = Array3::zeros((n_replicas, n_nodes, n_states));
        for (r, mut replica) in values.axis_iter_mut(Axis(0)).enumerate() {
            let mut rng = rng::stream(seed, Purpose::ThetaInit, r as u64, 0);
            replica.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        }
        ThetaPopulation { values }
    }

    pub fn n_replicas(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_nodes(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_states(&self) -> usize {
        self.values.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    /// Flat `N × K` slice of one replica.
    pub fn replica(&self, r: usize) -> &[f64] {
        let per = self.n_nodes() * self.n_states();
        &self.values.as_slice().expect("standard layout")[r * per..(r + 1) * per]
    }

    pub fn replica_mut(&mut self, r: usize) -> &mut [f64] {
        let per = self.n_nodes() * self.n_states();
        &mut self.values.as_slice_mut().expect("standard layout")[r * per..(r + 1) * per]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.values.as_slice_mut().expect("standard layout")
    }
}

/// Row-stochastic relaxed sample, shape `N_bs × N × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    pub probs: Array3<f64>,
}

/// Discrete labels, shape `N_bs × N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardAssignment {
    pub labels: Array2<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnealMode {
    #[default]
    Exponential,
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub tau_init: f64,
    pub tau_final: f64,
    pub total_steps: usize,
    #[serde(default)]
    pub mode: AnnealMode,
}

impl TemperatureSchedule {
    pub fn new(tau_init: f64, tau_final: f64, total_steps: usize, mode: AnnealMode) -> Result<Self> {
        let schedule = TemperatureSchedule {
            tau_init,
            tau_final,
            total_steps,
            mode,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn constant(tau: f64, total_steps: usize) -> Result<Self> {
        Self::new(tau, tau, total_steps, AnnealMode::Constant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_final > 0.0) || !self.tau_final.is_finite() {
            return Err(Error::InvalidTemperature(self.tau_final));
        }
        if !(self.tau_init >= self.tau_final) || !self.tau_init.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau_init ({}) must be >= tau_final ({})",
                self.tau_init, self.tau_final
            )));
        }
        Ok(())
    }

    /// Temperature at `step`; out-of-range steps clamp to the endpoints.
    pub fn at(&self, step: usize) -> f64 {
        if self.mode == AnnealMode::Constant || self.total_steps <= 1 {
            return self.tau_init;
        }
        let last = self.total_steps - 1;
        if step >= last {
            return self.tau_final;
        }
        let frac = step as f64 / last as f64;
        match self.mode {
            AnnealMode::Exponential => self.tau_init * (self.tau_final / self.tau_init).powf(frac),
            AnnealMode::Linear => self.tau_init + (self.tau_final - self.tau_init) * frac,
            AnnealMode::Constant => unreachable!(),
        }
    }
}

pub fn temperature_at(schedule: &TemperatureSchedule, step: usize) -> f64 {
    schedule.at(step)
}

/// Softmax of each length-`k` row of `theta` into `out`.
pub fn softmax_rows(theta: &[f64], k: usize, out: &mut [f64]) {
    for (row, dst) in theta.chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &t) in dst.iter_mut().zip(row) {
            *d = (t - max).exp();
            sum += *d;
        }
        dst.iter_mut().for_each(|d| *d /= sum);
    }
}

/// Row-wise softmax over the state axis.
pub fn probabilities(theta: &ThetaPopulation) -> Array3<f64> {
    let mut out = Array3::zeros(theta.values().dim());
    softmax_rows(
        theta.as_slice(),
        theta.n_states(),
        out.as_slice_mut().expect("fresh array"),
    );
    out
}

/// Maps a uniform draw to a standard Gumbel variate, `-ln(-ln u)`.
#[inline]
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    -(-u.ln()).ln()
}

pub fn fill_gumbel<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    out.iter_mut()
        .for_each(|g| *g = gumbel_from_uniform(rng.random::<f64>()));
}

/// Standard Gumbel noise of the given shape.
pub fn gumbel_noise<R: Rng + ?Sized>(shape: (usize, usize, usize), rng: &mut R) -> Array3<f64> {
    let mut g = Array3::zeros(shape);
    fill_gumbel(rng, g.as_slice_mut().expect("fresh array"));
    g
}

/// Relaxed sample of each row: `softmax((log max(p, floor) + g) / τ)`.
pub fn gumbel_softmax_rows(p: &[f64], g: &[f64], tau: f64, k: usize, out: &mut [f64]) {
    debug_assert!(tau > 0.0);
    for ((prow, grow), dst) in p
        .chunks_exact(k)
        .zip(g.chunks_exact(k))
        .zip(out.chunks_exact_mut(k))
    {
        let mut max = f64::NEG_INFINITY;
        for ((d, &pk), &gk) in dst.iter_mut().zip(prow).zip(grow) {
            *d = (pk.max(PROB_FLOOR).ln() + gk) / tau;
            max = max.max(*d);
        }
        let mut sum = 0.0;
        for d in dst.iter_mut() {
            *d = (*d - max).exp();
            sum += *d;
        }
        dst.iter_mut().for_each(|d| *d /= sum);
    }
}

/// Standard logistic variate `ln(u / (1 − u))`, distributed as the
/// difference of two independent standard Gumbel variates.
#[inline]
pub fn logistic_from_uniform(u: f64) -> f64 {
    let u = u.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    (u / (1.0 - u)).ln()
}

#[inline]
fn sigmoid_pair(x: f64) -> (f64, f64) {
    // Returns (1 − σ(x), σ(x)) without cancellation on either side.
    if x >= 0.0 {
        let e = (-x).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = x.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    }
}

/// Two-state specialization of [`softmax_rows`] followed by
/// [`gumbel_softmax_rows`].
///
/// With two states only the noise difference `g₁ − g₀` matters, so one
/// logistic variate per node replaces two Gumbel variates, and the softmaxes
/// reduce to sigmoids of logit differences. `p` and `p_hat` receive the same
/// rows the general path produces for noise with that difference.
pub fn binary_relaxed_rows(theta: &[f64], logistic: &[f64], tau: f64, p: &mut [f64], p_hat: &mut [f64]) {
    for (((th, &l), pr), qr) in theta
        .chunks_exact(2)
        .zip(logistic)
        .zip(p.chunks_exact_mut(2))
        .zip(p_hat.chunks_exact_mut(2))
    {
        let d = th[1] - th[0];
        let (p0, p1) = sigmoid_pair(d);
        pr[0] = p0;
        pr[1] = p1;
        // ln max(p₁, floor) − ln max(p₀, floor); the floor only binds once
        // the other probability is within 1e-12 of one.
        let log_odds = if p0 < PROB_FLOOR || p1 < PROB_FLOOR {
            p1.max(PROB_FLOOR).ln() - p0.max(PROB_FLOOR).ln()
        } else {
            d
        };
        let (q0, q1) = sigmoid_pair((log_odds + l) / tau);
        qr[0] = q0;
        qr[1] = q1;
    }
}

pub fn gumbel_softmax_sample(
    p: ArrayView3<f64>,
    g: ArrayView3<f64>,
    tau: f64,
) -> Result<SoftAssignment> {
    if !(tau > 0.0) {
        return Err(Error::InvalidTemperature(tau));
    }
    if p.dim() != g.dim() {
        return Err(Error::InvalidSize(format!(
            "probability shape {:?} != noise shape {:?}",
            p.dim(),
            g.dim()
        )));
    }
    let k = p.dim().2;
    let p = p.as_standard_layout();
    let g = g.as_standard_layout();
    let mut out = Array3::zeros(p.dim());
    gumbel_softmax_rows(
        p.as_slice().expect("standard layout"),
        g.as_slice().expect("standard layout"),
        tau,
        k,
        out.as_slice_mut().expect("fresh array"),
    );
    Ok(SoftAssignment { probs: out })
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn decode_rows(p_hat: &[f64], k: usize, out: &mut [usize]) {
    for (row, label) in p_hat.chunks_exact(k).zip(out.iter_mut()) {
        *label = argmax(row);
    }
}

pub fn hard_decode(p_hat: &SoftAssignment) -> HardAssignment {
    let (bs, n, _) = p_hat.probs.dim();
    let labels = Array2::from_shape_fn((bs, n), |(r, i)| {
        argmax(p_hat.probs.slice(ndarray::s![r, i, ..]).as_slice().unwrap())
    });
    HardAssignment { labels }
}

/// Chain rule from `dE/dp̂` back to `dE/dθ` for each row.
///
/// With `z = (log p + g)/τ` and `p̂ = softmax(z)`:
/// `dE/dz = p̂ ⊙ (d − ⟨p̂, d⟩)`, `a = dE/dz / τ` is the gradient w.r.t.
/// `log p`, and `log p = θ − logsumexp(θ)` gives `dE/dθ = a − p·Σa`.
/// Floored entries of `p` have a constant log and contribute nothing.
pub fn backprop_rows(
    d_phat: &[f64],
    p: &[f64],
    p_hat: &[f64],
    tau: f64,
    k: usize,
    out: &mut [f64],
) {
    for (((drow, prow), qrow), dst) in d_phat
        .chunks_exact(k)
        .zip(p.chunks_exact(k))
        .zip(p_hat.chunks_exact(k))
        .zip(out.chunks_exact_mut(k))
    {
        let mean: f64 = drow.iter().zip(qrow).map(|(d, q)| d * q).sum();
        let mut total = 0.0;
        for ((o, (&d, &q)), &pk) in dst.iter_mut().zip(drow.iter().zip(qrow)).zip(prow) {
            *o = if pk >= PROB_FLOOR {
                q * (d - mean) / tau
            } else {
                0.0
            };
            total += *o;
        }
        for (o, &pk) in dst.iter_mut().zip(prow) {
            *o -= pk * total;
        }
    }
}

/// Array-level backward pass; recomputes `p̂` from `(p, g, τ)`.
pub fn backprop_theta(
    d_phat: ArrayView3<f64>,
    p: ArrayView3<f64>,
    g: ArrayView3<f64>,
    tau: f64,
    theta: &ThetaPopulation,
) -> Result<Array3<f64>> {
    let dim = theta.values().dim();
    if d_phat.dim() != dim || p.dim() != dim || g.dim() != dim {
        return Err(Error::InvalidSize("backprop shapes do not match theta".into()));
    }
    let p_hat = gumbel_softmax_sample(p, g, tau)?;
    let d = d_phat.as_standard_layout();
    let p = p.as_standard_layout();
    let mut out = Array3::zeros(dim);
    backprop_rows(
        d.as_slice().unwrap(),
        p.as_slice().unwrap(),
        p_hat.probs.as_slice().unwrap(),
        tau,
        dim.2,
        out.as_slice_mut().unwrap(),
    );
    Ok(out)
}
