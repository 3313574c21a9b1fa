//! `lsgd` command line: single runs, step-size tuning, closed-form
//! complexities, tree validation and theory comparison.
//!
//! Exit codes: 0 success, 1 I/O failure while writing results, 2 bad
//! arguments or configuration, 3 a computation tree failed validation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use lsgd_core::complexity::{self, ComplexityQuery, Setting};
use lsgd_core::ctree::{minimal_admissible_r, validate_conditions};
use lsgd_core::harness::{self, ExperimentPlan};
use lsgd_core::methods::{traces_to_csv, traces_to_json};
use lsgd_core::problems::ProblemConfig;
use lsgd_core::{ComputationTree, MethodConfig, TimeModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVALID_TREE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lsgd", version, about = "Local SGD variants under a computation/communication time model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one method on one problem and write its per-round trace.
    Run(RunArgs),
    /// Sweep η_g over a grid for every method of a plan, across seeds.
    Tune(PlanArgs),
    /// Evaluate closed-form time complexities.
    Complexity(ComplexityArgs),
    /// Validate a recorded computation tree.
    TreeCheck(TreeCheckArgs),
    /// Pair simulated time-to-ε with the matching closed-form complexity.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output directory (default: $LSGD_OUT_DIR, else ./lsgd-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct TimeArgs {
    /// Seconds per stochastic gradient (overrides the config).
    #[arg(long = "h-seconds", allow_negative_numbers = true)]
    h: Option<f64>,
    /// Seconds per synchronization (overrides the config).
    #[arg(long = "tau-seconds", allow_negative_numbers = true)]
    tau: Option<f64>,
}

impl TimeArgs {
    fn apply(&self, tm: &mut TimeModel) -> anyhow::Result<()> {
        if let Some(h) = self.h {
            tm.h = h;
        }
        if let Some(tau) = self.tau {
            tm.tau = tau;
        }
        tm.validate()?;
        Ok(())
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON file `{"problem": {...}, "method": {...}}`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Also record and write the computation tree.
    #[arg(long)]
    tree: bool,
    #[command(flatten)]
    time: TimeArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Experiment plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Replace the plan's seeds with 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[command(flatten)]
    time: TimeArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long, value_parser = parse_setting)]
    setting: Option<Setting>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long = "L", alias = "l", default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Δ (nonconvex settings; default 1).
    #[arg(long)]
    delta: Option<f64>,
    /// B² (convex setting; default 1).
    #[arg(long = "B2", alias = "b2")]
    b2: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long = "tau-seconds", default_value_t = 1.0, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long = "h-seconds", default_value_t = 1.0, allow_negative_numbers = true)]
    h: f64,
}

impl QueryArgs {
    fn query(&self) -> anyhow::Result<ComplexityQuery> {
        let Some(setting) = self.setting else {
            bail!("--setting is required unless --grid is given");
        };
        let Some(epsilon) = self.eps else {
            bail!("--eps is required unless --grid is given");
        };
        let convex = setting == Setting::Convex;
        let q = ComplexityQuery {
            epsilon,
            l: self.l,
            sigma2: self.sigma2,
            delta: (!convex).then(|| self.delta.unwrap_or(1.0)),
            b2: convex.then(|| self.b2.unwrap_or(1.0)),
            n: self.n,
            tau: self.tau,
            h: self.h,
            setting,
        };
        if convex && self.delta.is_some() {
            bail!("--delta applies to nonconvex settings only");
        }
        if !convex && self.b2.is_some() {
            bail!("--B2 applies to the convex setting only");
        }
        q.validate()?;
        Ok(q)
    }
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse().map_err(|e: lsgd_core::Error| e.to_string())
}

#[derive(Args, Debug)]
struct ComplexityArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// JSON list of queries, evaluated instead of the flags.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Print only this formula's value.
    #[arg(long)]
    formula: Option<String>,
    /// Emit the Local SGD / Minibatch-Hero ratio table, flagging ratios
    /// above each threshold.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    regime: Option<Vec<f64>>,
    /// Write `complexity.csv` (or `.json`) here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct TreeCheckArgs {
    /// Tree in text or JSON form (chosen by a `.json` extension).
    file: PathBuf,
    /// Main-branch step size γ_g.
    #[arg(long = "gamma-g")]
    gamma_g: f64,
    /// R bound; defaults to the smallest admissible one.
    #[arg(long = "r-bound")]
    r_bound: Option<u64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Query JSON file; defaults to the plan's problem constants.
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long, value_parser = parse_setting, default_value = "nonconvex")]
    setting: Setting,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    problem: ProblemConfig,
    method: MethodConfig,
}

/// A tree that failed validation; maps to exit code 3.
#[derive(Debug)]
struct TreeRejected(String);

impl std::fmt::Display for TreeRejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tree rejected: {}", self.0)
    }
}

impl std::error::Error for TreeRejected {}

/// Failure writing results; maps to exit code 1.
#[derive(Debug)]
struct WriteFailed(std::io::Error);

impl std::fmt::Display for WriteFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write output: {}", self.0)
    }
}

impl std::error::Error for WriteFailed {}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    match harness::write_output(dir, name, contents) {
        Ok(path) => {
            println!("wrote {}", path.display());
            Ok(())
        }
        Err(lsgd_core::Error::Io(e)) => Err(WriteFailed(e).into()),
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let file: RunFile = read_json(&args.config)?;
    let spec = file.problem.build()?;
    let mut method = file.method;
    if let Some(seed) = args.seed {
        method.seed = seed;
    }
    method.record_tree |= args.tree;
    args.time.apply(&mut method.time_model)?;
    let out = lsgd_core::run(&spec, &method)?;
    let dir = harness::resolve_out_dir(args.output.out.as_deref());
    match args.output.format {
        Format::Csv => emit(&dir, "trace.csv", &traces_to_csv(&out.traces, method.active_workers()))?,
        Format::Json => emit(&dir, "trace.json", &traces_to_json(&out.traces)?)?,
    }
    if let Some(tree) = &out.tree {
        match args.output.format {
            Format::Csv => emit(&dir, "tree.txt", &tree.to_text())?,
            Format::Json => emit(&dir, "tree.json", &tree.to_json()?)?,
        }
    }
    if let Some(t) = out.diverged_at {
        eprintln!("warning: iterate became non-finite after round {t}");
    }
    Ok(())
}

fn load_plan(args: &PlanArgs) -> anyhow::Result<ExperimentPlan> {
    let mut plan: ExperimentPlan = read_json(&args.plan)?;
    if let Some(n) = args.seeds {
        plan.seeds = (0..n).collect();
    }
    args.time.apply(&mut plan.time_model)?;
    plan.validate()?;
    Ok(plan)
}

fn plan_dir(args: &PlanArgs, plan: &ExperimentPlan) -> PathBuf {
    let from_plan = plan.output_path.as_deref().map(Path::new);
    harness::resolve_out_dir(args.output.out.as_deref().or(from_plan))
}

fn cmd_tune(args: &PlanArgs) -> anyhow::Result<()> {
    let plan = load_plan(args)?;
    let res = harness::tune(&plan)?;
    let dir = plan_dir(args, &plan);
    match args.output.format {
        Format::Csv => {
            emit(&dir, "summary.csv", &harness::summary_to_csv(&res.rows))?;
            emit(&dir, "curves.csv", &harness::curves_to_csv(&res.cells))?;
        }
        Format::Json => emit(&dir, "summary.json", &serde_json::to_string_pretty(&res.rows)?)?,
    }
    for (method, eta) in harness::select_best(&res.rows) {
        println!("best {method} eta_g={eta}");
    }
    Ok(())
}

fn cmd_complexity(args: &ComplexityArgs) -> anyhow::Result<()> {
    let queries: Vec<ComplexityQuery> = match &args.grid {
        Some(path) => read_json(path)?,
        None => vec![args.query.query()?],
    };
    for q in &queries {
        q.validate()?;
    }
    if let Some(name) = &args.formula {
        for q in &queries {
            let all = complexity::evaluate_all(q)?;
            let Some((_, v)) = all.iter().find(|(k, _)| k == name) else {
                let known: Vec<&str> = all.iter().map(|(k, _)| *k).collect();
                bail!("unknown formula `{name}` for the {} setting (known: {})", q.setting, known.join(", "));
            };
            println!("{v}");
        }
        return Ok(());
    }
    let (name, body) = match (&args.regime, args.format) {
        (Some(th), Format::Csv) => ("regime.csv", complexity::regime_to_csv(&complexity::regime_report(&queries, th)?)),
        (Some(th), Format::Json) => (
            "regime.json",
            serde_json::to_string_pretty(&complexity::regime_report(&queries, th)?)?,
        ),
        (None, Format::Csv) => ("complexity.csv", complexity::formulas_to_csv(&queries)?),
        (None, Format::Json) => {
            let rows: Vec<_> = queries
                .iter()
                .map(|q| complexity::evaluate_all(q).map(|v| (q, v)))
                .collect::<Result<_, _>>()?;
            ("complexity.json", serde_json::to_string_pretty(&rows)?)
        }
    };
    match &args.out {
        Some(dir) => emit(dir, name, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_tree_check(args: &TreeCheckArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let is_json = args.file.extension().is_some_and(|e| e == "json");
    let tree = if is_json {
        ComputationTree::from_json(&text)
    } else {
        ComputationTree::from_text(&text)
    }
    .with_context(|| format!("loading {}", args.file.display()))?;
    let r_bound = match args.r_bound {
        Some(r) => r,
        None => minimal_admissible_r(&tree, args.gamma_g)?
            .ok_or_else(|| TreeRejected(format!("main-branch steps differ from gamma_g = {}", args.gamma_g)))?,
    };
    let report = validate_conditions(&tree, args.gamma_g, r_bound)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !report.all_ok() {
        return Err(TreeRejected(format!("{} violation(s) at R = {r_bound}", report.violations.len())).into());
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let plan = load_plan(&args.plan)?;
    let query = match &args.query {
        Some(path) => read_json(path)?,
        None => {
            let spec = plan.problem.build()?;
            let tm = plan.time_model;
            let n = spec.workers_n as u64;
            match args.setting {
                Setting::Convex => {
                    let b = spec.dist_b.context("problem has no known minimizer")?;
                    ComplexityQuery::convex(plan.epsilon_target, spec.smoothness_l, spec.noise_sigma2, b * b, n, tm.tau, tm.h)
                }
                s => ComplexityQuery {
                    setting: s,
                    ..ComplexityQuery::nonconvex(
                        plan.epsilon_target,
                        spec.smoothness_l,
                        spec.noise_sigma2,
                        spec.delta_gap,
                        n,
                        tm.tau,
                        tm.h,
                    )
                },
            }
        }
    };
    let rows = harness::compare_theory(&plan, &query)?;
    let dir = plan_dir(&args.plan, &plan);
    match args.plan.output.format {
        Format::Csv => emit(&dir, "compare.csv", &harness::theory_to_csv(&rows)),
        Format::Json => emit(&dir, "compare.json", &serde_json::to_string_pretty(&rows)?),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<TreeRejected>().is_some() {
        EXIT_INVALID_TREE
    } else if err.downcast_ref::<WriteFailed>().is_some() {
        EXIT_IO
    } else {
        EXIT_CONFIG
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::TreeCheck(a) => cmd_tree_check(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
