//! Batched Gumbel-softmax optimization and its evolutionary extension.

mod convergence;
mod evolution;
mod gso;
mod optimizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;
use crate::relaxation::{AnnealMode, TemperatureSchedule};

pub use convergence::{detect_convergence, ConvergenceRule, ConvergenceTracker};
pub use evolution::{ga_phase, selective_substitution, GaRow, SubstitutionMode};
pub use gso::{evo_gso_run, gso_run};
pub use optimizer::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsoConfig {
    pub n_replicas: usize,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub tau_init: f64,
    pub tau_final: f64,
    #[serde(default)]
    pub anneal: AnnealMode,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub convergence: ConvergenceRule,
    /// Stop once the running best stalls. Ignored while a GA phase is
    /// configured, where stalling triggers recombination instead.
    #[serde(default)]
    pub stop_on_convergence: bool,
}

impl Default for GsoConfig {
    fn default() -> Self {
        GsoConfig {
            n_replicas: 128,
            learning_rate: 1.0,
            max_steps: 2000,
            tau_init: 20.0,
            tau_final: 1.0,
            anneal: AnnealMode::Exponential,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            convergence: ConvergenceRule::default(),
            stop_on_convergence: false,
        }
    }
}

impl GsoConfig {
    /// Per-objective starting points.
    ///
    /// Modularity and the penalty problems use Adam at `lr = 0.01` (sharp
    /// temperatures, tiny raw gradients); SK uses plain gradient steps with a
    /// hot start.
    pub fn preset(kind: ObjectiveKind) -> Self {
        let base = GsoConfig::default();
        match kind {
            ObjectiveKind::Modularity => GsoConfig {
                n_replicas: 256,
                learning_rate: 0.01,
                max_steps: 10000,
                tau_init: 0.5,
                tau_final: 0.1,
                optimizer: OptimizerKind::Adam,
                ..base
            },
            ObjectiveKind::Sk => GsoConfig {
                learning_rate: 10.0,
                tau_init: 10.0,
                tau_final: 1.0,
                ..base
            },
            ObjectiveKind::Mis | ObjectiveKind::Mvc => GsoConfig {
                learning_rate: 0.01,
                max_steps: 20000,
                tau_init: 1.0,
                tau_final: 1.0,
                anneal: AnnealMode::Constant,
                optimizer: OptimizerKind::Adam,
                ..base
            },
        }
    }

    pub fn schedule(&self) -> Result<TemperatureSchedule> {
        TemperatureSchedule::new(self.tau_init, self.tau_final, self.max_steps, self.anneal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replicas == 0 {
            return Err(Error::InvalidConfig("n_replicas must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        if self.convergence.window == 0 {
            return Err(Error::InvalidConfig("convergence window must be >= 1".into()));
        }
        self.schedule().map(|_| ())
    }
}

/// Evolutionary operators layered on the gradient loop.
///
/// `t1`/`t2` of `None` disable substitution / the GA phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub t1: Option<usize>,
    pub u_inverse: f64,
    pub variance_threshold: f64,
    #[serde(default)]
    pub substitution: SubstitutionMode,
    pub t2: Option<usize>,
    pub mutation_rate: f64,
    pub elite_ratio: f64,
    pub crossover_rate: f64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            t1: Some(100),
            u_inverse: 0.125,
            variance_threshold: 1e-6,
            substitution: SubstitutionMode::BestCopy,
            t2: None,
            mutation_rate: 0.001,
            elite_ratio: 0.0625,
            crossover_rate: 0.8,
        }
    }
}

impl EvoConfig {
    /// Both operators off; the run reduces to plain GSO.
    pub fn disabled() -> Self {
        EvoConfig {
            t1: None,
            t2: None,
            ..EvoConfig::default()
        }
    }

    pub fn validate(&self, n_replicas: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.t1 == Some(0) || self.t2 == Some(0) {
            return bad("evolution cycles must be >= 1".into());
        }
        if let (Some(t1), Some(t2)) = (self.t1, self.t2) {
            if t2 <= t1 {
                return bad(format!("t2 ({t2}) must exceed t1 ({t1})"));
            }
        }
        if self.t1.is_some() {
            if !(self.u_inverse > 0.0 && self.u_inverse <= 0.5) {
                return bad(format!("u_inverse must lie in (0, 0.5], got {}", self.u_inverse));
            }
            if substitution_count(n_replicas, self.u_inverse) == 0 {
                return bad(format!(
                    "substitution ratio {} replaces no replica of {n_replicas}",
                    self.u_inverse
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation rate must lie in [0, 1], got {}", self.mutation_rate));
        }
        if !(0.0..1.0).contains(&self.elite_ratio) {
            return bad(format!("elite ratio must lie in [0, 1), got {}", self.elite_ratio));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!(
                "crossover rate must lie in [0, 1], got {}",
                self.crossover_rate
            ));
        }
        Ok(())
    }
}

pub(crate) fn substitution_count(n_replicas: usize, u_inverse: f64) -> usize {
    // Tolerate representation error in ratios such as 1/8.
    ((n_replicas as f64) * u_inverse + 1e-9).floor() as usize
}

/// Best solution found by a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_labels: Vec<usize>,
    pub best_energy: f64,
    pub best_metric: f64,
    /// Lowest feasible discrete energy seen at each step (`None` when no
    /// replica was feasible at that step).
    pub trajectory: Vec<Option<f64>>,
    pub steps: usize,
    pub wall_seconds: f64,
    pub seed: u64,
    pub feasible: bool,
    #[serde(default)]
    pub events: EvoEvents,
}

/// Steps (counted from 1) after which evolutionary operators fired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvoEvents {
    pub substitution_steps: Vec<usize>,
    pub ga_steps: Vec<usize>,
}

impl RunResult {
    /// Running minimum of the trajectory.
    pub fn running_best(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.trajectory
            .iter()
            .map(|e| {
                if let Some(e) = *e {
                    best = Some(best.map_or(e, |b: f64| b.min(e)));
                }
                best
            })
            .collect()
    }
}
