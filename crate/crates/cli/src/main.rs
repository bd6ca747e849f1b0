use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gso_core::harness::{self, ExperimentConfig, ExperimentOutput, ProblemSource, SolverKind, Sweep};
use gso_core::oracle;
use gso_core::testfunctions::FunctionKind;
use gso_core::objectives::DEFAULT_ALPHA;
use gso_core::{graph, Error, Objective, ObjectiveKind, ObjectiveSpec, Problem};
use serde_json::Value;

/// Exit code reserved for runs that produced no feasible solution.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "gso", version, about = "Gumbel-softmax optimization on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instance and print the best solution as JSON.
    Solve(Common),
    /// Run all instances and print the aggregate report.
    Bench(Common),
    /// Vary one parameter over a list of values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary, e.g. `ncoms`, `lr` or `evo.t1`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `2,3,4`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Exhaustively enumerate a small instance.
    Oracle(Common),
}

#[derive(Args, Default)]
struct Common {
    /// TOML experiment file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Edge-list file.
    #[arg(long, group = "source")]
    graph: Option<PathBuf>,
    /// Built-in dataset name (`karate`).
    #[arg(long, group = "source")]
    dataset: Option<String>,
    /// Size of a freshly drawn SK instance.
    #[arg(long, group = "source")]
    sk_n: Option<usize>,
    /// Continuous test function (`griewank`, `rastrigin`, `bowl`).
    #[arg(long, group = "source")]
    function: Option<String>,
    /// Dimension of the test function.
    #[arg(long, requires = "function")]
    dim: Option<usize>,
    /// Permit SK instances of 8192 spins or more.
    #[arg(long)]
    allow_large: bool,

    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    ncoms: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau_init: Option<f64>,
    #[arg(long)]
    tau_final: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// `exponential`, `linear` or `constant`.
    #[arg(long)]
    anneal: Option<String>,
    /// `sgd` or `adam`.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    t1: Option<usize>,
    #[arg(long)]
    t2: Option<usize>,
    #[arg(long)]
    u_inverse: Option<f64>,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long)]
    elite: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for records and CSV summaries.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn source(&self) -> anyhow::Result<Option<ProblemSource>> {
        Ok(if let Some(path) = &self.graph {
            Some(ProblemSource::EdgeList { path: path.clone() })
        } else if let Some(name) = &self.dataset {
            Some(ProblemSource::Dataset { name: name.clone() })
        } else if let Some(n) = self.sk_n {
            Some(ProblemSource::Sk {
                n,
                allow_large: self.allow_large,
            })
        } else if let Some(name) = &self.function {
            let kind: FunctionKind = serde_json::from_value(Value::String(name.to_ascii_lowercase()))
                .with_context(|| format!("unknown test function {name:?}"))?;
            Some(ProblemSource::TestFunction {
                kind,
                dim: self.dim.unwrap_or(2),
            })
        } else {
            None
        })
    }

    fn overrides(&self) -> Vec<(&'static str, Value)> {
        let mut out = Vec::new();
        let mut push = |name: &'static str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        push("objective.kind", self.objective.as_ref().map(|s| Value::from(s.to_ascii_lowercase())));
        push("ncoms", self.ncoms.map(Value::from));
        push("alpha", self.alpha.map(Value::from));
        push("solver", self.solver.as_ref().map(|s| Value::from(s.to_ascii_lowercase())));
        push("batch", self.batch.map(Value::from));
        push("lr", self.lr.map(Value::from));
        push("tau_init", self.tau_init.map(Value::from));
        push("tau_final", self.tau_final.map(Value::from));
        push("steps", self.steps.map(Value::from));
        push("anneal", self.anneal.as_ref().map(|s| Value::from(s.to_ascii_lowercase())));
        push("optimizer", self.optimizer.as_ref().map(|s| Value::from(s.to_ascii_lowercase())));
        push("t1", self.t1.map(Value::from));
        push("t2", self.t2.map(Value::from));
        push("u_inverse", self.u_inverse.map(Value::from));
        push("mutation", self.mutation.map(Value::from));
        push("elite", self.elite.map(Value::from));
        push("sweeps", self.sweeps.map(Value::from));
        push("instances", self.instances.map(Value::from));
        push("seed", self.seed.map(Value::from));
        out
    }

    fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        let source = self.source()?;
        let mut cfg = match (&self.config, source) {
            (Some(path), source) => {
                let mut cfg = ExperimentConfig::from_toml_file(path)?;
                if let Some(s) = source {
                    cfg.problem = s;
                }
                cfg
            }
            (None, Some(s)) => {
                let kind: ObjectiveKind = self.objective.as_deref().unwrap_or("sk").parse()?;
                let spec = match kind {
                    ObjectiveKind::Modularity => ObjectiveSpec::modularity(self.ncoms.unwrap_or(2)),
                    ObjectiveKind::Sk => ObjectiveSpec::sk(),
                    ObjectiveKind::Mis => ObjectiveSpec::mis(DEFAULT_ALPHA),
                    ObjectiveKind::Mvc => ObjectiveSpec::mvc(DEFAULT_ALPHA),
                };
                ExperimentConfig::new(s, spec, SolverKind::Gso)
            }
            (None, None) => bail!("no problem given; pass --config, --graph, --dataset, --sk-n or --function"),
        };
        // Binary objectives ignore a community count inherited from a config file.
        if self.objective.as_deref().is_some_and(|o| !o.eq_ignore_ascii_case("modularity")) {
            cfg.objective.n_states = 2;
        }
        for (name, value) in self.overrides() {
            cfg.set_param(name, value)?;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(cfg)
    }
}

fn infeasible(out: &ExperimentOutput) -> bool {
    !out.records.is_empty() && out.records.iter().all(|r| r.best_metric.is_none())
}

fn print_rows(out: &ExperimentOutput) -> anyhow::Result<()> {
    for row in &out.rows {
        println!("{}", serde_json::to_string(row)?);
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(common) => {
            let mut cfg = common.experiment()?;
            cfg.instances = 1;
            let out = harness::run_experiment(&cfg)?;
            let record = &out.records[0];
            println!("{}", serde_json::to_string_pretty(record)?);
            if infeasible(&out) {
                eprintln!("error: {}", Error::NoFeasibleSolution);
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        }
        Command::Bench(common) => {
            let cfg = common.experiment()?;
            let out = harness::run_experiment(&cfg)?;
            print_rows(&out)?;
            if infeasible(&out) {
                eprintln!("error: {}", Error::NoFeasibleSolution);
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        }
        Command::Sweep { common, param, values } => {
            let mut cfg = common.experiment()?;
            let values = values
                .iter()
                .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone())))
                .collect();
            cfg.sweep = Some(Sweep { param, values });
            let out = harness::run_experiment(&cfg)?;
            print_rows(&out)?;
            if let Some(best) = harness::best_row(&out.rows) {
                log::info!("best: {} = {:?}", best.sweep_param.as_deref().unwrap_or(""), best.sweep_value);
            }
            if infeasible(&out) {
                eprintln!("error: {}", Error::NoFeasibleSolution);
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        }
        Command::Oracle(common) => {
            let cfg = common.experiment()?;
            let problem: Problem = match &cfg.problem {
                ProblemSource::EdgeList { path } => graph::load_edge_list_file(path)?.into(),
                ProblemSource::Dataset { name } => graph::dataset(name)
                    .with_context(|| format!("unknown dataset {name:?}"))?
                    .into(),
                ProblemSource::Sk { n, .. } => graph::generate_sk(*n, harness::instance_seed(cfg.seed, 0))?.into(),
                ProblemSource::TestFunction { .. } => bail!("the oracle only enumerates discrete problems"),
            };
            let obj = Objective::new(cfg.objective, &problem)?;
            match oracle::exhaustive_optimum(&obj) {
                Ok(r) => println!("{}", serde_json::to_string_pretty(&r)?),
                Err(Error::NoFeasibleSolution) => {
                    eprintln!("error: {}", Error::NoFeasibleSolution);
                    return Ok(ExitCode::from(EXIT_INFEASIBLE));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors must not share exit code 2 with "no feasible solution".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
