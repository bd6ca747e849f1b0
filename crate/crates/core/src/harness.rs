//! Multi-instance experiments: configuration, dispatch, persistence and
//! aggregation.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::baselines::{self, GaConfig, GreedyOrder, SaConfig};
use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::objectives::{Objective, ObjectiveKind, ObjectiveSpec, Problem};
use crate::rng;
use crate::solver::{self, EvoConfig, GsoConfig, RunResult};
use crate::testfunctions::{self, FunctionKind, HybridConfig, TestFunction, Variant};

/// SK sizes at or above this need `allow_large`.
pub const LARGE_SK: usize = 8192;
/// Trajectories are persisted every this many steps.
pub const TRAJECTORY_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProblemSource {
    EdgeList {
        path: PathBuf,
    },
    Dataset {
        name: String,
    },
    Sk {
        n: usize,
        #[serde(default)]
        allow_large: bool,
    },
    TestFunction {
        kind: FunctionKind,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gso,
    Evogso,
    Sa,
    Ga,
    Greedy,
    MdGreedy,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::InvalidConfig(format!("unknown solver {s:?}")))
    }
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gso => "gso",
            SolverKind::Evogso => "evogso",
            SolverKind::Sa => "sa",
            SolverKind::Ga => "ga",
            SolverKind::Greedy => "greedy",
            SolverKind::MdGreedy => "md-greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveSpec,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default)]
    pub gso: GsoConfig,
    #[serde(default)]
    pub evo: EvoConfig,
    #[serde(default)]
    pub sa: SaConfig,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default = "default_hybrid")]
    pub hybrid: HybridConfig,
    /// Scan order for the plain greedy solver.
    #[serde(default)]
    pub greedy_random: bool,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_objective() -> ObjectiveSpec {
    ObjectiveSpec::sk()
}

fn default_solver() -> SolverKind {
    SolverKind::Gso
}

fn default_hybrid() -> HybridConfig {
    HybridConfig::default()
}

fn default_instances() -> usize {
    1
}

impl ExperimentConfig {
    /// Starts from the objective's GSO preset. Configs read from TOML use
    /// the generic defaults for any omitted field instead.
    pub fn new(problem: ProblemSource, objective: ObjectiveSpec, solver: SolverKind) -> Self {
        ExperimentConfig {
            problem,
            objective,
            solver,
            gso: GsoConfig::preset(objective.kind),
            evo: EvoConfig::default(),
            sa: SaConfig::default(),
            ga: GaConfig::default(),
            hybrid: HybridConfig::default(),
            greedy_random: false,
            instances: 1,
            seed: 0,
            sweep: None,
            output: None,
            workers: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::InvalidConfig("instances must be >= 1".into()));
        }
        if let ProblemSource::Sk { n, allow_large } = self.problem {
            if n >= LARGE_SK && !allow_large {
                return Err(Error::InvalidConfig(format!(
                    "SK with n = {n} needs allow_large (dense couplings take {} MB)",
                    n * n * 8 / 1_000_000
                )));
            }
        }
        if matches!(self.problem, ProblemSource::TestFunction { .. }) {
            return Ok(());
        }
        self.objective.validate()?;
        match self.solver {
            SolverKind::Gso => self.gso.validate(),
            SolverKind::Evogso => {
                self.gso.validate()?;
                self.evo.validate(self.gso.n_replicas)
            }
            SolverKind::Sa => self.sa.validate(),
            SolverKind::Ga => self.ga.validate(),
            SolverKind::Greedy | SolverKind::MdGreedy => {
                if !matches!(self.objective.kind, ObjectiveKind::Mis | ObjectiveKind::Mvc) {
                    return Err(Error::InvalidConfig(format!(
                        "{} solves mis/mvc only",
                        self.solver.name()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Stable hex digest of every field that can change results.
    ///
    /// Output location, worker count, the sweep description and the configs
    /// of solvers not in use are excluded.
    pub fn digest(&self) -> String {
        let mut parts = serde_json::Map::new();
        parts.insert("problem".into(), to_value(&self.problem));
        parts.insert("instances".into(), self.instances.into());
        parts.insert("seed".into(), self.seed.into());
        if let ProblemSource::TestFunction { .. } = self.problem {
            parts.insert("hybrid".into(), to_value(&self.hybrid));
        } else {
            parts.insert("objective".into(), to_value(&self.objective));
            parts.insert("solver".into(), to_value(&self.solver));
            match self.solver {
                SolverKind::Gso => {
                    parts.insert("gso".into(), to_value(&GsoConfig { seed: 0, ..self.gso.clone() }));
                }
                SolverKind::Evogso => {
                    parts.insert("gso".into(), to_value(&GsoConfig { seed: 0, ..self.gso.clone() }));
                    parts.insert("evo".into(), to_value(&self.evo));
                }
                SolverKind::Sa => {
                    parts.insert("sa".into(), to_value(&SaConfig { seed: 0, ..self.sa.clone() }));
                }
                SolverKind::Ga => {
                    parts.insert("ga".into(), to_value(&GaConfig { seed: 0, ..self.ga.clone() }));
                }
                SolverKind::Greedy => {
                    parts.insert("greedy_random".into(), self.greedy_random.into());
                }
                SolverKind::MdGreedy => {}
            }
        }
        let canonical = serde_json::to_string(&Value::Object(parts)).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Sets a field addressed by a dotted path (`gso.learning_rate`) or one
    /// of the short aliases accepted by [`resolve_param`].
    pub fn set_param(&mut self, param: &str, value: Value) -> Result<()> {
        let path = resolve_param(param);
        let mut tree = to_value(&*self);
        let mut node = &mut tree;
        let keys: Vec<&str> = path.split('.').collect();
        for (depth, key) in keys.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| unknown_param(param))?;
            if !obj.contains_key(*key) {
                return Err(unknown_param(param));
            }
            if depth + 1 == keys.len() {
                obj.insert((*key).to_string(), value.clone());
                break;
            }
            node = obj.get_mut(*key).expect("checked above");
        }
        *self = serde_json::from_value(tree)
            .map_err(|e| Error::InvalidConfig(format!("{param} = {value}: {e}")))?;
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn unknown_param(param: &str) -> Error {
    Error::InvalidConfig(format!("unknown sweep parameter {param:?}"))
}

/// Maps short parameter names to dotted config paths.
pub fn resolve_param(name: &str) -> String {
    let path = match name {
        "lr" | "learning_rate" => "gso.learning_rate",
        "batch" | "n_replicas" => "gso.n_replicas",
        "steps" | "max_steps" => "gso.max_steps",
        "tau_init" => "gso.tau_init",
        "tau_final" => "gso.tau_final",
        "anneal" => "gso.anneal",
        "optimizer" => "gso.optimizer",
        "ncoms" | "n_states" => "objective.n_states",
        "alpha" => "objective.alpha",
        "t1" => "evo.t1",
        "t2" => "evo.t2",
        "u_inverse" => "evo.u_inverse",
        "mutation" | "mutation_rate" => "evo.mutation_rate",
        "elite" | "elite_ratio" => "evo.elite_ratio",
        "crossover" | "crossover_rate" => "evo.crossover_rate",
        "sweeps" => "sa.sweeps",
        other => return other.replace('-', "_"),
    };
    path.to_string()
}

/// Everything persisted about one instance. Contains no timing, so reruns
/// with the same seed serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub digest: String,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<Value>,
    pub instance: usize,
    pub seed: u64,
    pub solver: String,
    pub objective: String,
    pub n: usize,
    /// `None` when the solver found no feasible solution.
    pub best_metric: Option<f64>,
    pub best_energy: Option<f64>,
    pub best_labels: Vec<usize>,
    /// Non-empty communities in the best partition (modularity only).
    pub communities: Option<usize>,
    pub steps: usize,
    /// Per-step best energy, every [`TRAJECTORY_STRIDE`]-th step.
    pub trajectory: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub digest: String,
    pub instance: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean ± SEM over instances.
    Mean,
    /// Highest metric over instances.
    Max,
    /// Lowest metric over instances.
    Min,
    /// Number of instances marked successful.
    Successes,
}

impl Aggregation {
    pub fn for_objective(kind: ObjectiveKind) -> Self {
        match kind {
            ObjectiveKind::Sk => Aggregation::Mean,
            ObjectiveKind::Modularity | ObjectiveKind::Mis => Aggregation::Max,
            ObjectiveKind::Mvc => Aggregation::Min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub digest: String,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<Value>,
    pub solver: String,
    pub objective: String,
    pub instances: usize,
    pub feasible_instances: usize,
    pub aggregation: Aggregation,
    /// Mean, best, or success count depending on `aggregation`.
    pub value: Option<f64>,
    pub sem: f64,
    /// Set when SEM rests on fewer than two values.
    pub sem_flagged: bool,
    /// Communities of the winning partition (modularity best-of rows).
    pub communities: Option<usize>,
    pub mean_wall_seconds: f64,
    #[serde(skip)]
    pub per_instance: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
    pub flagged: bool,
}

/// Mean and standard error (`n − 1` divisor). A single value gets SEM 0 and
/// the flag; an empty slice gives NaN.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            sem: 0.0,
            flagged: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary {
            mean,
            sem: 0.0,
            flagged: true,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Summary {
        mean,
        sem: (var / n as f64).sqrt(),
        flagged: false,
    }
}

/// Seed of instance `i` under master seed `seed`.
pub fn instance_seed(seed: u64, instance: usize) -> u64 {
    rng::derive_seed(seed, &[0x696e_7374, instance as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    pub records: Vec<InstanceRecord>,
    pub timings: Vec<Timing>,
}

/// Fixed input shared by every instance of a graph experiment.
enum Loaded {
    Graph(Graph),
    Sk { n: usize },
    Function(TestFunction),
}

fn load(source: &ProblemSource) -> Result<Loaded> {
    Ok(match source {
        ProblemSource::EdgeList { path } => Loaded::Graph(graph::load_edge_list_file(path)?),
        ProblemSource::Dataset { name } => Loaded::Graph(
            graph::dataset(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown dataset {name:?}")))?,
        ),
        ProblemSource::Sk { n, .. } => Loaded::Sk { n: *n },
        ProblemSource::TestFunction { kind, dim } => Loaded::Function(TestFunction::new(*kind, *dim)),
    })
}

/// Runs every sweep point (or the single configuration) over all instances.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let points: Vec<(Option<(String, Value)>, ExperimentConfig)> = match &cfg.sweep {
        None => vec![(None, cfg.clone())],
        Some(sweep) => sweep
            .values
            .iter()
            .map(|v| {
                let mut point = cfg.clone();
                point.sweep = None;
                point.set_param(&sweep.param, v.clone())?;
                Ok((Some((sweep.param.clone(), v.clone())), point))
            })
            .collect::<Result<_>>()?,
    };
    for (_, point) in &points {
        point.validate()?;
    }
    let loaded = load(&cfg.problem)?;
    let run = || -> Result<ExperimentOutput> {
        let mut out = ExperimentOutput {
            rows: Vec::new(),
            records: Vec::new(),
            timings: Vec::new(),
        };
        for (value, point) in &points {
            let (records, timings) = run_point(point, value.clone(), &loaded)?;
            out.rows.extend(rows_from_records(point, &records, &timings));
            out.records.extend(records);
            out.timings.extend(timings);
        }
        Ok(out)
    };
    let out = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    if let Some(dir) = &cfg.output {
        write_outputs(dir, &out)?;
    }
    Ok(out)
}

fn run_point(
    cfg: &ExperimentConfig,
    sweep: Option<(String, Value)>,
    loaded: &Loaded,
) -> Result<(Vec<InstanceRecord>, Vec<Timing>)> {
    let digest = cfg.digest();
    let results: Vec<(InstanceRecord, Timing)> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let seed = instance_seed(cfg.seed, i);
            let (record, wall) = run_instance(cfg, loaded, i, seed, &digest, sweep.clone())?;
            Ok((
                record,
                Timing {
                    digest: digest.clone(),
                    instance: i,
                    wall_seconds: wall,
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().unzip())
}

fn run_instance(
    cfg: &ExperimentConfig,
    loaded: &Loaded,
    instance: usize,
    seed: u64,
    digest: &str,
    sweep: Option<(String, Value)>,
) -> Result<(InstanceRecord, f64)> {
    let (sweep_param, sweep_value) = sweep.unzip();
    let mut record = InstanceRecord {
        digest: digest.to_string(),
        sweep_param,
        sweep_value,
        instance,
        seed,
        solver: cfg.solver.name().to_string(),
        objective: cfg.objective.kind.to_string(),
        n: 0,
        best_metric: None,
        best_energy: None,
        best_labels: Vec::new(),
        communities: None,
        steps: 0,
        trajectory: Vec::new(),
    };
    let problem: Problem = match loaded {
        Loaded::Graph(g) => g.clone().into(),
        Loaded::Sk { n } => graph::generate_sk(*n, seed)?.into(),
        Loaded::Function(f) => {
            let start = std::time::Instant::now();
            let variant = Variant::Hybrid;
            let trial = testfunctions::run_trial(f, variant, &cfg.hybrid, seed)?;
            record.solver = variant.name().to_string();
            record.objective = format!("{:?}", f.kind).to_ascii_lowercase();
            record.n = f.dim;
            record.best_metric = Some(if trial.success { 1.0 } else { 0.0 });
            record.best_energy = Some(trial.value);
            record.steps = cfg.hybrid.steps;
            return Ok((record, start.elapsed().as_secs_f64()));
        }
    };
    record.n = problem.n();
    let obj = Objective::new(cfg.objective, &problem)?;
    match solve(cfg, &obj, seed) {
        Ok(r) => {
            record.communities = (obj.kind() == ObjectiveKind::Modularity)
                .then(|| r.best_labels.iter().collect::<BTreeSet<_>>().len());
            record.best_metric = Some(r.best_metric);
            record.best_energy = Some(r.best_energy);
            record.best_labels = r.best_labels;
            record.steps = r.steps;
            record.trajectory = r.trajectory.iter().step_by(TRAJECTORY_STRIDE).copied().collect();
            Ok((record, r.wall_seconds))
        }
        Err(Error::NoFeasibleSolution) => Ok((record, 0.0)),
        Err(e) => Err(e),
    }
}

/// Runs the configured solver once on `obj` with `seed`.
pub fn solve(cfg: &ExperimentConfig, obj: &Objective<'_>, seed: u64) -> Result<RunResult> {
    match cfg.solver {
        SolverKind::Gso => solver::gso_run(obj, &GsoConfig { seed, ..cfg.gso.clone() }),
        SolverKind::Evogso => solver::evo_gso_run(obj, &GsoConfig { seed, ..cfg.gso.clone() }, &cfg.evo),
        SolverKind::Sa => baselines::simulated_annealing(obj, &SaConfig { seed, ..cfg.sa.clone() }),
        SolverKind::Ga => baselines::label_ga(obj, &GaConfig { seed, ..cfg.ga.clone() }),
        SolverKind::Greedy | SolverKind::MdGreedy => {
            let g = obj
                .graph()
                .ok_or_else(|| Error::InvalidConfig("greedy solvers need a graph".into()))?;
            let start = std::time::Instant::now();
            let set = if cfg.solver == SolverKind::MdGreedy {
                baselines::md_greedy_mis(g)
            } else if cfg.greedy_random {
                baselines::greedy_mis(g, GreedyOrder::Random(seed))
            } else {
                baselines::greedy_mis(g, GreedyOrder::ById)
            };
            let set = match obj.kind() {
                ObjectiveKind::Mis => set,
                ObjectiveKind::Mvc => graph::complement_set(g, &set)?,
                other => return Err(Error::InvalidConfig(format!("greedy solvers do not support {other}"))),
            };
            let labels = baselines::subset_labels(g.n(), &set);
            let energy = obj.energy_unchecked(&labels);
            Ok(RunResult {
                best_metric: obj.metric(&labels, energy),
                best_labels: labels,
                best_energy: energy,
                trajectory: vec![Some(energy)],
                steps: 1,
                wall_seconds: start.elapsed().as_secs_f64(),
                seed,
                feasible: true,
                events: Default::default(),
            })
        }
    }
}

/// Aggregates one configuration's records into a report row.
pub fn rows_from_records(cfg: &ExperimentConfig, records: &[InstanceRecord], timings: &[Timing]) -> Vec<ReportRow> {
    let aggregation = match cfg.problem {
        ProblemSource::TestFunction { .. } => Aggregation::Successes,
        _ => Aggregation::for_objective(cfg.objective.kind),
    };
    let per_instance: Vec<Option<f64>> = records.iter().map(|r| r.best_metric).collect();
    let feasible: Vec<f64> = per_instance.iter().flatten().copied().collect();
    let summary = summarize(&feasible);
    let pick = |better: fn(f64, f64) -> bool| {
        let mut best: Option<(f64, &InstanceRecord)> = None;
        for r in records {
            if let Some(m) = r.best_metric {
                if best.is_none_or(|(b, _)| better(m, b)) {
                    best = Some((m, r));
                }
            }
        }
        best
    };
    let (value, communities, sem, flagged) = match aggregation {
        Aggregation::Mean => ((!feasible.is_empty()).then_some(summary.mean), None, summary.sem, summary.flagged),
        Aggregation::Max | Aggregation::Min => {
            let best = if aggregation == Aggregation::Max {
                pick(|a, b| a > b)
            } else {
                pick(|a, b| a < b)
            };
            (best.map(|b| b.0), best.and_then(|b| b.1.communities), 0.0, false)
        }
        Aggregation::Successes => (Some(feasible.iter().sum()), None, 0.0, false),
    };
    let walls: Vec<f64> = timings.iter().map(|t| t.wall_seconds).collect();
    vec![ReportRow {
        digest: cfg.digest(),
        sweep_param: records.first().and_then(|r| r.sweep_param.clone()),
        sweep_value: records.first().and_then(|r| r.sweep_value.clone()),
        solver: records
            .first()
            .map_or_else(|| cfg.solver.name().to_string(), |r| r.solver.clone()),
        objective: records
            .first()
            .map_or_else(|| cfg.objective.kind.to_string(), |r| r.objective.clone()),
        instances: records.len(),
        feasible_instances: feasible.len(),
        aggregation,
        value,
        sem,
        sem_flagged: flagged,
        communities,
        mean_wall_seconds: if walls.is_empty() {
            0.0
        } else {
            walls.iter().sum::<f64>() / walls.len() as f64
        },
        per_instance,
    }]
}

/// Best row of a sweep under the rows' own aggregation direction.
pub fn best_row(rows: &[ReportRow]) -> Option<&ReportRow> {
    rows.iter().filter(|r| r.value.is_some()).reduce(|a, b| {
        let (va, vb) = (a.value.unwrap(), b.value.unwrap());
        let b_wins = match a.aggregation {
            Aggregation::Mean | Aggregation::Min => vb < va,
            Aggregation::Max | Aggregation::Successes => vb > va,
        };
        if b_wins {
            b
        } else {
            a
        }
    })
}

/// Writes `records/<digest>-<instance>.json`, `summary.csv` and
/// `timings.csv` under `dir`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    let records_dir = dir.join("records");
    fs::create_dir_all(&records_dir).map_err(|e| Error::io(&records_dir, e))?;
    for r in &out.records {
        let path = records_dir.join(format!("{}-{:04}.json", r.digest, r.instance));
        let text = serde_json::to_string_pretty(r)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    }
    write_csv(&dir.join("summary.csv"), |w| {
        w.write_record([
            "digest",
            "sweep_param",
            "sweep_value",
            "solver",
            "objective",
            "instances",
            "feasible_instances",
            "aggregation",
            "value",
            "sem",
            "sem_flagged",
            "communities",
            "mean_wall_seconds",
        ])?;
        for row in &out.rows {
            w.write_record([
                row.digest.clone(),
                row.sweep_param.clone().unwrap_or_default(),
                row.sweep_value.as_ref().map(|v| v.to_string()).unwrap_or_default(),
                row.solver.clone(),
                row.objective.clone(),
                row.instances.to_string(),
                row.feasible_instances.to_string(),
                to_value(&row.aggregation).as_str().unwrap_or_default().to_string(),
                row.value.map(|v| v.to_string()).unwrap_or_default(),
                row.sem.to_string(),
                row.sem_flagged.to_string(),
                row.communities.map(|c| c.to_string()).unwrap_or_default(),
                format!("{:.6}", row.mean_wall_seconds),
            ])?;
        }
        Ok(())
    })?;
    write_csv(&dir.join("timings.csv"), |w| {
        w.write_record(["digest", "instance", "wall_seconds"])?;
        for t in &out.timings {
            w.write_record([t.digest.clone(), t.instance.to_string(), format!("{:.6}", t.wall_seconds)])?;
        }
        Ok(())
    })
}

fn write_csv(path: &Path, body: impl FnOnce(&mut csv::Writer<fs::File>) -> Result<()>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads every per-instance record under `dir/records`, sorted by file name.
pub fn read_records(dir: &Path) -> Result<Vec<InstanceRecord>> {
    let records_dir = dir.join("records");
    let mut paths: Vec<PathBuf> = fs::read_dir(&records_dir)
        .map_err(|e| Error::io(&records_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
