//! `mbp`: command-line driver for the minimum bisection pipeline.
//!
//! Exit codes: 0 ok, 1 other failure, 2 usage, 3 λ strategy unavailable,
//! 4 solver capability exceeded, 5 data problem.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mbp_core::gbr::{train_lambda_models, GbrParams, LambdaModels};
use mbp_core::graph::{generate_er, load_graph, save_graph};
use mbp_core::harness::{
    audit, compare_report, extract_lambda_ranges, run_instance, scan, success_heatmap, sweep, Multipliers,
    RecordFilter, RecordStore, SweepConfig, SweepStrategy,
};
use mbp_core::penalty::{lambda_from_gbr, resolve_lambda, LambdaStrategy};
use mbp_core::qubo::build_mbp_qubo;
use mbp_core::solvers::{Registry, SaParams, Temperature, ID_HYBRID_STANDIN, ID_MULTILEVEL};
use mbp_core::MbpError;

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_STRATEGY: u8 = 3;
const EXIT_CAPABILITY: u8 = 4;
const EXIT_DATA: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "mbp",
    version,
    about = "Minimum bisection via QUBO: solvers, λ tuning and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a G(n, p) graph and write it as an edge list.
    Generate(GenerateArgs),
    /// Solve one graph with one solver.
    Solve(SolveArgs),
    /// Run a factorial sweep over sizes, probabilities, seeds and λ values.
    Sweep(SweepArgs),
    /// Fit the λ_min / λ_max regressors from a record store.
    Train(TrainArgs),
    /// Predict λ for a graph from trained models.
    Predict(PredictArgs),
    /// Write comparison, success heatmap and λ-range CSVs.
    Report(ReportArgs),
    /// Recompute stored graph summaries and optionally replay solves.
    Audit(AuditArgs),
    /// Write the QUBO matrix of a graph.
    DumpQubo(DumpQuboArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of nodes.
    #[arg(long)]
    nodes: usize,
    /// Edge probability in [0, 1].
    #[arg(long)]
    prob: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output edge-list path.
    #[arg(long)]
    out: PathBuf,
}

/// λ strategy as given on the command line.
#[derive(Debug, Clone)]
enum StrategyArg {
    Maxcut,
    Est,
    Mult(f64),
    Gbr(PathBuf),
    Fixed(f64),
}

fn parse_strategy(s: &str) -> Result<StrategyArg, String> {
    let number = |v: &str| v.parse::<f64>().map_err(|e| format!("bad number `{v}`: {e}"));
    match s.split_once(':') {
        None if s == "maxcut" => Ok(StrategyArg::Maxcut),
        None if s == "est" => Ok(StrategyArg::Est),
        Some(("mult", v)) => Ok(StrategyArg::Mult(number(v)?)),
        Some(("fixed", v)) => Ok(StrategyArg::Fixed(number(v)?)),
        Some(("gbr", dir)) if !dir.is_empty() => Ok(StrategyArg::Gbr(PathBuf::from(dir))),
        _ => Err(format!(
            "unknown λ strategy `{s}`; expected maxcut, est, mult:<v>, gbr:<modeldir> or fixed:<v>"
        )),
    }
}

impl StrategyArg {
    fn resolve(&self) -> Result<LambdaStrategy, MbpError> {
        Ok(match self {
            StrategyArg::Maxcut => LambdaStrategy::MaxcutP,
            StrategyArg::Est => LambdaStrategy::Est,
            StrategyArg::Mult(m) => LambdaStrategy::EstTimesMult(*m),
            StrategyArg::Fixed(v) => LambdaStrategy::Fixed(*v),
            StrategyArg::Gbr(dir) => LambdaStrategy::Gbr(Arc::new(LambdaModels::load(dir)?)),
        })
    }
}

/// Parameters of the `sa` and `sa-mbp` solvers.
#[derive(Debug, Args)]
struct SaArgs {
    /// Sweeps per restart.
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,
    /// Independent restarts.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Geometric cooling factor per sweep, in (0, 1).
    #[arg(long, default_value_t = 0.97)]
    cooling: f64,
    /// Initial temperature, or `auto` for the 95th percentile of sampled |ΔE|.
    #[arg(long, default_value = "auto")]
    t_initial: String,
    /// Temperature floor; defaults to 1e-3 × initial temperature.
    #[arg(long)]
    t_final: Option<f64>,
}

impl SaArgs {
    fn params(&self) -> Result<SaParams, MbpError> {
        let t_initial = match self.t_initial.as_str() {
            "auto" => Temperature::Auto,
            v => Temperature::Fixed(v.parse().map_err(|_| {
                MbpError::InvalidArgument(format!("--t-initial `{v}` is neither `auto` nor a number"))
            })?),
        };
        let p = SaParams {
            sweeps: self.sweeps,
            restarts: self.restarts,
            t_initial,
            cooling: self.cooling,
            t_final: self.t_final,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Solver id: exact-qubo, exact-bisection, sa, sa-mbp, hybrid-standin, kl, multilevel.
    #[arg(long)]
    solver: String,
    /// maxcut | est | mult:<v> | gbr:<modeldir> | fixed:<v>
    #[arg(long, value_parser = parse_strategy, default_value = "est")]
    lambda_strategy: StrategyArg,
    #[command(flatten)]
    sa: SaArgs,
    /// Base seed; the solver seed derives from it and the solver id.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append the result to this record store.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',', required = true)]
    nodes_list: Vec<usize>,
    /// Comma-separated edge probabilities.
    #[arg(long, value_delimiter = ',', required = true)]
    probs_list: Vec<f64>,
    /// Graphs per (n, p) cell.
    #[arg(long, default_value_t = 1)]
    seeds_per_cell: usize,
    /// `table1` for the size-keyed multiplier table, or a comma-separated list.
    #[arg(long, default_value = "table1")]
    multipliers: String,
    /// Use one λ strategy per graph instead of a multiplier sweep.
    #[arg(long, value_parser = parse_strategy, conflicts_with = "multipliers")]
    lambda_strategy: Option<StrategyArg>,
    /// Comma-separated solver ids.
    #[arg(long, value_delimiter = ',', default_value = "hybrid-standin,multilevel")]
    solvers: Vec<String>,
    /// Record store (created if missing; existing records are skipped).
    #[arg(long)]
    store: PathBuf,
    /// Seed controlling every graph and solver seed.
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Graphs processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    sa: SaArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Record store with a multiplier sweep.
    #[arg(long)]
    store: PathBuf,
    /// Directory for the two model files and the training report.
    #[arg(long)]
    model_out: PathBuf,
    /// Seed of the 80/20 train/test split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Solver whose balanced runs define the λ ranges.
    #[arg(long, default_value = ID_HYBRID_STANDIN)]
    solver: String,
    /// Boosting rounds.
    #[arg(long, default_value_t = GbrParams::default().n_trees)]
    n_trees: usize,
    /// Shrinkage per round.
    #[arg(long, default_value_t = GbrParams::default().learning_rate)]
    learning_rate: f64,
    /// Maximum tree depth.
    #[arg(long, default_value_t = GbrParams::default().max_depth)]
    max_depth: usize,
    /// Minimum samples per leaf.
    #[arg(long, default_value_t = GbrParams::default().min_samples_leaf)]
    min_samples_leaf: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Record store.
    #[arg(long)]
    store: PathBuf,
    /// Baseline solver id.
    #[arg(long, default_value = ID_MULTILEVEL)]
    baseline: String,
    /// Subject solver id.
    #[arg(long, default_value = ID_HYBRID_STANDIN)]
    subject: String,
    /// Compare the baseline after exact balance repair instead of before.
    #[arg(long)]
    repaired_baseline: bool,
    /// Comparison CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Success heatmap CSV path (subject solver, by size and density bin).
    #[arg(long)]
    heatmap_out: Option<PathBuf>,
    /// Success rate by size and multiplier CSV path.
    #[arg(long)]
    multiplier_out: Option<PathBuf>,
    /// λ-range CSV path (subject solver).
    #[arg(long)]
    ranges_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Record store.
    #[arg(long)]
    store: PathBuf,
    /// Also re-run every solve and compare cut and balance.
    #[arg(long)]
    replay: bool,
}

#[derive(Debug, Args)]
struct DumpQuboArgs {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// maxcut | est | mult:<v> | gbr:<modeldir> | fixed:<v>
    #[arg(long, value_parser = parse_strategy, default_value = "est")]
    lambda_strategy: StrategyArg,
    /// Output path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<MbpError> for Failure {
    fn from(e: MbpError) -> Self {
        let code = match &e {
            MbpError::InvalidArgument(_) | MbpError::UnknownSolver(_) => EXIT_USAGE,
            MbpError::StrategyUnavailable(_) | MbpError::UntrainedModel(_) => EXIT_STRATEGY,
            MbpError::Capability(_) => EXIT_CAPABILITY,
            MbpError::DegenerateInstance(_)
            | MbpError::InsufficientData(_)
            | MbpError::Parse { .. }
            | MbpError::Schema { .. }
            | MbpError::Io(_)
            | MbpError::Json(_) => EXIT_DATA,
            MbpError::DuplicateSolver(_) => EXIT_OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_DATA, message: format!("{}: {e}", path.display()) }
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn show_config(config: serde_json::Value) {
    eprintln!("config: {config}");
}

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    show_config(
        json!({"command": "generate", "nodes": a.nodes, "prob": a.prob, "seed": a.seed, "out": a.out}),
    );
    let g = generate_er(a.nodes, a.prob, a.seed)?;
    save_graph(&g, &a.out)?;
    println!("generated n={} edges={} -> {}", g.node_count(), g.edge_count(), a.out.display());
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let sa = a.sa.params()?;
    show_config(json!({
        "command": "solve", "graph": a.graph, "solver": a.solver,
        "lambda_strategy": format!("{:?}", a.lambda_strategy), "sa": sa, "seed": a.seed, "store": a.store,
    }));
    let registry = Registry::with_builtins(sa);
    registry.get(&a.solver)?;
    let g = load_graph(&a.graph)?;
    let strategy = a.lambda_strategy.resolve()?;
    let records = run_instance(&registry, &g, &strategy, &[a.solver.as_str()], a.seed)?;
    for r in &records {
        match &r.lambda_spec {
            Some(s) => println!(
                "lambda: {} via {} (est {}, multiplier {}, p {})",
                s.lambda,
                s.strategy,
                opt(s.lambda_est),
                opt(s.multiplier),
                opt(s.p_used)
            ),
            None => println!("lambda: none (edgeless graph, trivial partition)"),
        }
        println!("solver: {}", r.solver_id);
        println!("cut: {}", r.inter_edges);
        println!("balanced: {} (deviation {})", r.balanced, r.balance_deviation);
        println!("energy: {}", r.energy);
        if let Some(p) = r.pre_repair {
            println!("pre-repair cut: {} (deviation {})", p.inter_edges, p.balance_deviation);
        }
        println!("time: {:.6}s", r.wall_time_solve);
    }
    if let Some(path) = &a.store {
        RecordStore::open(path)?.append(&records)?;
        println!("appended {} record(s) to {}", records.len(), path.display());
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let sa = a.sa.params()?;
    let strategy = match &a.lambda_strategy {
        Some(s) => SweepStrategy::Single(s.resolve()?),
        None if a.multipliers == "table1" => SweepStrategy::Multipliers(Multipliers::Table),
        None => {
            let list = a
                .multipliers
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| {
                    MbpError::InvalidArgument(format!(
                        "--multipliers `{}` is neither `table1` nor a list of numbers",
                        a.multipliers
                    ))
                })?;
            SweepStrategy::Multipliers(Multipliers::List(list))
        }
    };
    show_config(json!({
        "command": "sweep", "nodes_list": a.nodes_list, "probs_list": a.probs_list,
        "seeds_per_cell": a.seeds_per_cell, "multipliers": a.multipliers,
        "lambda_strategy": a.lambda_strategy.as_ref().map(|s| format!("{s:?}")),
        "solvers": a.solvers, "store": a.store, "master_seed": a.master_seed, "jobs": a.jobs, "sa": sa,
    }));
    let registry = Registry::with_builtins(sa);
    for id in &a.solvers {
        registry.get(id)?;
    }
    let cfg = SweepConfig {
        n_list: a.nodes_list.clone(),
        p_list: a.probs_list.clone(),
        seeds_per_cell: a.seeds_per_cell,
        strategy,
        solver_ids: a.solvers.clone(),
        master_seed: a.master_seed,
        jobs: a.jobs,
    };
    let mut store = RecordStore::open(&a.store)?;
    let out = sweep(&cfg, &registry, &mut store)?;
    println!("written: {}", out.written);
    println!("skipped (already stored): {}", out.skipped);
    println!("failures: {}", out.failures.len());
    for f in &out.failures {
        println!("  {}: {}", f.record_id, f.message);
    }
    if !out.failures.is_empty() && out.written == 0 && out.skipped == 0 {
        return Err(Failure { code: EXIT_OTHER, message: "every sweep cell failed".into() });
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let params = GbrParams {
        n_trees: a.n_trees,
        learning_rate: a.learning_rate,
        max_depth: a.max_depth,
        min_samples_leaf: a.min_samples_leaf,
    };
    show_config(json!({
        "command": "train", "store": a.store, "model_out": a.model_out,
        "split_seed": a.split_seed, "solver": a.solver, "gbr": params,
    }));
    let records = scan(&a.store, &RecordFilter::default())?.records;
    let ranges = extract_lambda_ranges(&records, &a.solver);
    println!(
        "λ-range rows: {} ({} graphs without a balanced run excluded)",
        ranges.rows.len(),
        ranges.excluded
    );
    let models = train_lambda_models(&ranges.rows, a.split_seed, params)?;
    models.save(&a.model_out)?;
    if let Some(rep) = &models.report {
        println!("train rows: {}, test rows: {}", rep.n_train, rep.n_test);
        println!("{:<10} {:>10} {:>10} {:>10}", "target", "rmse", "mae", "r2");
        for (name, m) in [("lambda_min", &rep.min), ("lambda_max", &rep.max)] {
            println!("{name:<10} {:>10.4} {:>10.4} {:>10.4}", m.rmse, m.mae, m.r2);
        }
    }
    println!("models written to {}", a.model_out.display());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> CmdResult {
    show_config(json!({"command": "predict", "graph": a.graph, "models": a.models}));
    let models = LambdaModels::load(&a.models)?;
    let g = load_graph(&a.graph)?;
    let spec = lambda_from_gbr(&models, &g)?;
    println!("{}", serde_json::to_string_pretty(&spec).map_err(MbpError::from)?);
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    show_config(json!({
        "command": "report", "store": a.store, "baseline": a.baseline, "subject": a.subject,
        "repaired_baseline": a.repaired_baseline, "out": a.out, "heatmap_out": a.heatmap_out,
        "multiplier_out": a.multiplier_out, "ranges_out": a.ranges_out,
    }));
    let records = scan(&a.store, &RecordFilter::default())?.records;
    let cmp = compare_report(&records, &a.baseline, &a.subject, !a.repaired_baseline);
    if cmp.rows.is_empty() {
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("no graph has both a {} and a {} record", a.subject, a.baseline),
        });
    }
    print!("{}", cmp.to_text());
    if let Some(p) = &a.out {
        write_file(p, &cmp.to_csv())?;
    }
    let heat = success_heatmap(&records, &a.subject);
    if let Some(p) = &a.heatmap_out {
        write_file(p, &heat.to_csv())?;
    }
    if let Some(p) = &a.multiplier_out {
        write_file(p, &heat.multiplier_csv())?;
    }
    if let Some(p) = &a.ranges_out {
        write_file(p, &extract_lambda_ranges(&records, &a.subject).to_csv())?;
    }
    Ok(())
}

fn cmd_audit(a: &AuditArgs) -> CmdResult {
    show_config(json!({"command": "audit", "store": a.store, "replay": a.replay}));
    let records = scan(&a.store, &RecordFilter::default())?.records;
    let report = audit(&records, &Registry::with_builtins(SaParams::default()), a.replay)?;
    println!(
        "checked: {}, replayed: {}, mismatches: {}",
        report.checked,
        report.replayed,
        report.mismatches.len()
    );
    for m in &report.mismatches {
        println!("  {m}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_DATA, message: "audit found mismatches".into() })
    }
}

fn cmd_dump_qubo(a: &DumpQuboArgs) -> CmdResult {
    show_config(json!({
        "command": "dump-qubo", "graph": a.graph,
        "lambda_strategy": format!("{:?}", a.lambda_strategy), "out": a.out,
    }));
    let g = load_graph(&a.graph)?;
    let spec = resolve_lambda(&g, &a.lambda_strategy.resolve()?)?;
    let dump = build_mbp_qubo(&g, spec.lambda)?.to_dump();
    match &a.out {
        Some(p) => write_file(p, &dump),
        None => {
            print!("{dump}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Report(a) => cmd_report(a),
        Command::Audit(a) => cmd_audit(a),
        Command::DumpQubo(a) => cmd_dump_qubo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
