use serde::{Deserialize, Serialize};

/// Stall criterion on the running-best energy.
///
/// Converged when the running best improved by less than
/// `rel_tol·|best| + abs_tol` over the last `window` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceRule {
    pub window: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule {
            window: 500,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
        }
    }
}

impl ConvergenceRule {
    fn stalled(&self, older: Option<f64>, current: Option<f64>) -> bool {
        match (older, current) {
            (Some(old), Some(cur)) => old - cur < self.rel_tol * cur.abs() + self.abs_tol,
            _ => false,
        }
    }
}

/// `trajectory[t]` is the best energy observed at step `t`, if any.
pub fn detect_convergence(trajectory: &[Option<f64>], rule: &ConvergenceRule) -> bool {
    let window = rule.window.max(1);
    if trajectory.len() < window {
        return false;
    }
    let mut running: Option<f64> = None;
    let mut at_window_start = None;
    let start = trajectory.len() - window;
    for (t, e) in trajectory.iter().enumerate() {
        if let Some(e) = *e {
            running = Some(running.map_or(e, |b| b.min(e)));
        }
        if t == start {
            at_window_start = running;
        }
    }
    rule.stalled(at_window_start, running)
}

/// Incremental form of [`detect_convergence`] for use inside a run loop.
#[derive(Debug, Clone)]
pub struct ConvergenceTracker {
    rule: ConvergenceRule,
    running: Vec<Option<f64>>,
}

impl ConvergenceTracker {
    pub fn new(rule: ConvergenceRule) -> Self {
        ConvergenceTracker {
            rule,
            running: Vec::new(),
        }
    }

    pub fn push(&mut self, step_best: Option<f64>) {
        let prev = self.running.last().copied().flatten();
        let next = match (prev, step_best) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.running.push(next);
    }

    pub fn converged(&self) -> bool {
        let window = self.rule.window.max(1);
        let len = self.running.len();
        if len < window {
            return false;
        }
        self.rule
            .stalled(self.running[len - window], self.running[len - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(window: usize) -> ConvergenceRule {
        ConvergenceRule {
            window,
            ..ConvergenceRule::default()
        }
    }

    #[test]
    fn constant_trajectory_converges() {
        let t = vec![Some(-3.0); 10];
        assert!(detect_convergence(&t, &rule(10)));
        assert!(detect_convergence(&t, &rule(4)));
    }

    #[test]
    fn strictly_decreasing_does_not_converge() {
        let t: Vec<_> = (0..50).map(|i| Some(-(i as f64))).collect();
        assert!(!detect_convergence(&t, &rule(10)));
    }

    #[test]
    fn short_trajectory_does_not_converge() {
        let t = vec![Some(1.0); 9];
        assert!(!detect_convergence(&t, &rule(10)));
    }

    #[test]
    fn no_solution_yet_does_not_converge() {
        let t = vec![None; 20];
        assert!(!detect_convergence(&t, &rule(5)));
        let mut t = vec![None; 20];
        t.push(Some(1.0));
        assert!(!detect_convergence(&t, &rule(5)));
    }

    #[test]
    fn tracker_agrees_with_batch_form() {
        let series: Vec<Option<f64>> = (0..200)
            .map(|i| match i % 7 {
                0 => None,
                _ => Some(((i / 40) as f64).mul_add(-1.0, (i % 5) as f64)),
            })
            .collect();
        let r = rule(25);
        let mut tracker = ConvergenceTracker::new(r);
        for (t, &e) in series.iter().enumerate() {
            tracker.push(e);
            assert_eq!(tracker.converged(), detect_convergence(&series[..=t], &r), "step {t}");
        }
    }
}
