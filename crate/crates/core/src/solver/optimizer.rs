use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-replica first-order optimizer over a flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    per_replica: usize,
    moment1: Vec<f64>,
    moment2: Vec<f64>,
    steps: Vec<u32>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_replicas: usize, per_replica: usize) -> Self {
        let len = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => n_replicas * per_replica,
        };
        Optimizer {
            kind,
            lr,
            per_replica,
            moment1: vec![0.0; len],
            moment2: vec![0.0; len],
            steps: vec![0; n_replicas],
        }
    }

    /// Updates one replica's parameters in place.
    pub fn step_replica(&mut self, r: usize, params: &mut [f64], grad: &[f64]) {
        let Optimizer {
            kind,
            lr,
            per_replica,
            moment1,
            moment2,
            steps,
        } = self;
        match kind {
            OptimizerKind::Sgd => {
                steps[r] += 1;
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            OptimizerKind::Adam => {
                let range = r * *per_replica..(r + 1) * *per_replica;
                adam_update(
                    *lr,
                    &mut steps[r],
                    params,
                    grad,
                    &mut moment1[range.clone()],
                    &mut moment2[range],
                );
            }
        }
    }

    /// Splits the state so replicas can be stepped in parallel.
    pub fn replica_states(&mut self) -> Vec<ReplicaState<'_>> {
        let lr = self.lr;
        let kind = self.kind;
        let per = self.per_replica;
        match kind {
            OptimizerKind::Sgd => self
                .steps
                .iter_mut()
                .map(|t| ReplicaState {
                    kind,
                    lr,
                    step: t,
                    moment1: &mut [],
                    moment2: &mut [],
                })
                .collect(),
            OptimizerKind::Adam => self
                .moment1
                .chunks_mut(per)
                .zip(self.moment2.chunks_mut(per))
                .zip(self.steps.iter_mut())
                .map(|((m1, m2), t)| ReplicaState {
                    kind,
                    lr,
                    step: t,
                    moment1: m1,
                    moment2: m2,
                })
                .collect(),
        }
    }

    /// Clears moment estimates for every replica.
    pub fn reset(&mut self) {
        self.moment1.iter_mut().for_each(|v| *v = 0.0);
        self.moment2.iter_mut().for_each(|v| *v = 0.0);
        self.steps.iter_mut().for_each(|t| *t = 0);
    }

    /// Copies replica `src`'s state onto `dst`.
    pub fn copy_replica(&mut self, src: usize, dst: usize) {
        if self.kind == OptimizerKind::Adam {
            let per = self.per_replica;
            self.moment1.copy_within(src * per..(src + 1) * per, dst * per);
            self.moment2.copy_within(src * per..(src + 1) * per, dst * per);
        }
        self.steps[dst] = self.steps[src];
    }

    pub fn reset_replica(&mut self, r: usize) {
        if self.kind == OptimizerKind::Adam {
            let per = self.per_replica;
            self.moment1[r * per..(r + 1) * per].iter_mut().for_each(|v| *v = 0.0);
            self.moment2[r * per..(r + 1) * per].iter_mut().for_each(|v| *v = 0.0);
        }
        self.steps[r] = 0;
    }
}

pub struct ReplicaState<'a> {
    kind: OptimizerKind,
    lr: f64,
    step: &'a mut u32,
    moment1: &'a mut [f64],
    moment2: &'a mut [f64],
}

impl ReplicaState<'_> {
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                *self.step += 1;
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                adam_update(self.lr, self.step, params, grad, self.moment1, self.moment2)
            }
        }
    }
}

fn adam_update(lr: f64, step: &mut u32, params: &mut [f64], grad: &[f64], m1: &mut [f64], m2: &mut [f64]) {
    *step += 1;
    let t = *step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(m1.iter_mut()).zip(m2.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
    }
}
