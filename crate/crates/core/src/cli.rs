//! Command-line front end. Every JSON document carries `schema_version` and
//! is printed with sorted keys so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 validation failure or infeasible result, 2 usage
//! error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::afptas::{run_afptas_with, SolveOptions, Strategy, DEFAULT_MEMORY_BUDGET};
use crate::chernoff::{is_surrogate_feasible, DEFAULT_TILT_TOL};
use crate::error::{Error, Result};
use crate::exact::{
    exact_errors, exact_opt, OptOptions, Problem, DEFAULT_PLAN_BUDGET, DEFAULT_PROFILE_BUDGET, PROB_SLACK,
};
use crate::experiments::{guarantee_csv, guarantee_sweep, tightness_sweep, InstanceFamily};
use crate::hardness::{reduce, ReductionParams, SetCoverInstance, DEFAULT_DELTA_DOUBLE_PRIME, DEFAULT_ETA};
use crate::likelihood::TiePolicy;
use crate::model::{read_calibration_log, Instance, InstanceTemplate, QueryPlan, DEFAULT_SMOOTHING, SCHEMA_VERSION};
use crate::montecarlo::simulate_error;

#[derive(Debug, Parser)]
#[command(
    name = "query-design",
    version,
    about = "Minimum-cost query plans for MAP classification"
)]
pub struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TieArg {
    LowestIndex,
    CountTieAsError,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::LowestIndex => TiePolicy::LowestIndex,
            TieArg::CountTieAsError => TiePolicy::CountTieAsError,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    True,
    Surrogate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct InstanceArg {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file against every invariant.
    Validate(InstanceArg),
    /// Build an instance from a template and a CSV response log.
    Calibrate {
        /// Template JSON: labels, prior, tolerances, model names and costs.
        #[arg(long)]
        template: PathBuf,
        /// CSV with columns model,label,response.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
        smoothing: f64,
    },
    /// Approximately optimal plan for the surrogate problem, with certificate.
    Solve {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long)]
        epsilon: f64,
        /// Largest DP table, in entries.
        #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET)]
        memory_budget: usize,
        /// Run the recursion on a dense table at every grid point.
        #[arg(long, conflicts_with = "sparse")]
        dense: bool,
        /// Run the recursion on reachable states only at every grid point.
        #[arg(long)]
        sparse: bool,
        /// Skip the comparison with the exact surrogate optimum.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Exact statewise errors of a plan, or the exact optimum when no plan is given.
    Exact {
        #[command(flatten)]
        instance: InstanceArg,
        /// Plan as a JSON array or a file holding one.
        #[arg(long)]
        plan: Option<String>,
        #[arg(long, value_enum, default_value = "true")]
        problem: ProblemArg,
        #[arg(long, value_enum, default_value = "lowest-index")]
        tie_policy: TieArg,
        #[arg(long, default_value_t = DEFAULT_PROFILE_BUDGET)]
        profile_budget: f64,
        #[arg(long, default_value_t = DEFAULT_PLAN_BUDGET)]
        plan_budget: usize,
    },
    /// Monte Carlo estimate of one label's error under a plan.
    Simulate {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long)]
        plan: String,
        /// True label name.
        #[arg(long)]
        truth: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "lowest-index")]
        tie_policy: TieArg,
    },
    /// Surrogate bound and, when affordable, exact errors of a plan.
    Verify {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long)]
        plan: String,
    },
    /// Instance encoding a weighted set-cover problem.
    ReduceSetcover {
        /// Universe size; must match the sets file.
        #[arg(long)]
        universe: Option<usize>,
        /// Set-cover JSON: n, sets, weights, budget.
        #[arg(long)]
        sets: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Discriminator cost; defaults to a thousandth of the smallest weight.
        #[arg(long)]
        delta_prime: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_DELTA_DOUBLE_PRIME)]
        delta_double_prime: f64,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
    },
    /// Exact and surrogate optima over a tolerance schedule.
    SweepTightness {
        #[command(flatten)]
        instance: InstanceArg,
        /// Comma-separated tolerances, loosest first.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long, value_enum, default_value = "lowest-index")]
        tie_policy: TieArg,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Solver cost against the exact surrogate optimum on random instances.
    SweepGuarantee {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        labels: usize,
        #[arg(long, default_value_t = 3)]
        max_models: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Outcome of a subcommand: rendered text and whether it signals failure.
struct Outcome {
    text: String,
    failed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, failed: false }
    }
}

/// Serializes with sorted keys and a top-level `schema_version`.
pub fn render_json(value: &impl Serialize) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn read_plan(text: &str) -> Result<QueryPlan> {
    let t = text.trim();
    if t.starts_with('[') {
        QueryPlan::parse(t)
    } else {
        QueryPlan::parse(&fs::read_to_string(Path::new(t))?)
    }
}

fn load(arg: &InstanceArg) -> Result<Instance> {
    Instance::load(&arg.instance)
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Validate(arg) => {
            let inst = Instance::load_unchecked(&arg.instance)?;
            let violations = inst.validate();
            let text = render_json(&serde_json::json!({
                "valid": violations.is_empty(),
                "violations": violations,
            }))?;
            Ok(Outcome {
                failed: !violations.is_empty(),
                text,
            })
        }
        Command::Calibrate {
            template,
            log,
            smoothing,
        } => {
            let t = InstanceTemplate::from_json_str(&fs::read_to_string(template)?)?;
            let records = read_calibration_log(fs::File::open(log)?)?;
            Ok(Outcome::ok(t.calibrate(&records, smoothing)?.to_json_string()))
        }
        Command::Solve {
            instance,
            epsilon,
            memory_budget,
            dense,
            sparse,
            no_oracle,
        } => {
            let inst = load(&instance)?;
            let strategy = match (dense, sparse) {
                (true, _) => Strategy::GridDense,
                (_, true) => Strategy::GridSparse,
                _ => Strategy::Auto,
            };
            let opts = SolveOptions {
                strategy,
                memory_budget,
                oracle_check: !no_oracle,
                ..SolveOptions::default()
            };
            Ok(Outcome::ok(render_json(&run_afptas_with(&inst, epsilon, &opts)?)?))
        }
        Command::Exact {
            instance,
            plan,
            problem,
            tie_policy,
            profile_budget,
            plan_budget,
        } => {
            let inst = load(&instance)?;
            let policy: TiePolicy = tie_policy.into();
            match plan {
                Some(p) => {
                    let plan = read_plan(&p)?;
                    let e = exact_errors(&inst, &plan, profile_budget)?;
                    let errors = e.for_policy(policy).to_vec();
                    let feasible = errors.iter().zip(inst.tolerances()).all(|(p, a)| *p <= a + PROB_SLACK);
                    let text = render_json(&serde_json::json!({
                        "plan": plan,
                        "cost": inst.plan_cost(&plan)?,
                        "tie_policy": policy,
                        "labels": inst.labels(),
                        "errors": errors,
                        "tolerances": inst.tolerances(),
                        "feasible": feasible,
                        "profiles": e.profiles,
                    }))?;
                    Ok(Outcome {
                        text,
                        failed: !feasible,
                    })
                }
                None => {
                    let problem = match problem {
                        ProblemArg::True => Problem::True,
                        ProblemArg::Surrogate => Problem::Surrogate,
                    };
                    let opts = OptOptions {
                        tie_policy: policy,
                        plan_budget,
                        profile_budget,
                        ..OptOptions::default()
                    };
                    Ok(Outcome::ok(render_json(&exact_opt(&inst, problem, &opts)?)?))
                }
            }
        }
        Command::Simulate {
            instance,
            plan,
            truth,
            trials,
            seed,
            tie_policy,
        } => {
            let inst = load(&instance)?;
            let plan = read_plan(&plan)?;
            let y = inst.label_index(&truth)?;
            let est = simulate_error(&inst, &plan, y, trials, seed, tie_policy.into())?;
            Ok(Outcome::ok(render_json(&serde_json::json!({
                "plan": plan,
                "truth": truth,
                "estimate": est,
            }))?))
        }
        Command::Verify { instance, plan } => {
            let inst = load(&instance)?;
            let plan = read_plan(&plan)?;
            let report = is_surrogate_feasible(&inst, &plan, DEFAULT_TILT_TOL)?;
            let exact = match exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET) {
                Ok(e) => Some(e),
                Err(Error::Budget { .. }) => None,
                Err(e) => return Err(e),
            };
            let text = render_json(&serde_json::json!({
                "plan": plan,
                "cost": inst.plan_cost(&plan)?,
                "feasible": report.feasible,
                "surrogate": report,
                "exact": exact,
            }))?;
            Ok(Outcome {
                text,
                failed: !report.feasible,
            })
        }
        Command::ReduceSetcover {
            universe,
            sets,
            epsilon,
            delta_prime,
            delta_double_prime,
            eta,
        } => {
            let sc = SetCoverInstance::from_json_str(&fs::read_to_string(sets)?)?;
            if let Some(n) = universe {
                if n != sc.n {
                    return Err(Error::Argument(format!(
                        "--universe {n} but the sets file has n = {}",
                        sc.n
                    )));
                }
            }
            let params = ReductionParams {
                epsilon,
                delta_prime,
                delta_double_prime,
                eta,
            };
            Ok(Outcome::ok(reduce(&sc, &params)?.to_json_string()))
        }
        Command::SweepTightness {
            instance,
            alphas,
            tie_policy,
            format,
        } => {
            let inst = load(&instance)?;
            let table = tightness_sweep(&inst, &alphas, tie_policy.into(), &OptOptions::default())?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => render_json(&serde_json::json!({
                    "table": table,
                    "series": table.series(),
                }))?,
            };
            Ok(Outcome {
                text,
                failed: !table.complete,
            })
        }
        Command::SweepGuarantee {
            seed,
            count,
            epsilons,
            alpha,
            labels,
            max_models,
            format,
        } => {
            let family = InstanceFamily {
                labels,
                max_models,
                alpha,
                ..InstanceFamily::default()
            };
            let rows = guarantee_sweep(seed, &family, count, &epsilons, &SolveOptions::default())?;
            let failed = rows.iter().any(|r| !r.pass || !r.sound);
            let text = match format {
                Format::Csv => guarantee_csv(&rows),
                Format::Json => render_json(&serde_json::json!({ "family": family, "rows": rows }))?,
            };
            Ok(Outcome { text, failed })
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match execute(cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &outcome.text),
        None => std::io::stdout().write_all(outcome.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 1;
    }
    i32::from(outcome.failed)
}
