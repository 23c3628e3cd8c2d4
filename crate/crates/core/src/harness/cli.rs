//! The `hwf` command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::grid::{preset, run_grid, CellResult, ExperimentGrid, SolverKind};
use crate::harness::output::emit_csv;
use crate::harness::plot::{emit_heatmap, emit_trace_plot, reference_curve, TraceSeries};
use crate::harness::seed::trial_rng;
use crate::hwf::{init_random, init_spiked, run_multi_restart, run_single, HwfConfig, RunResult};
use crate::model::{generate_measurements, generate_signal, relative_error, Instance, SignalModel};
use crate::sparta::{run_sparta, run_sparta_support, SpartaConfig};

#[derive(Debug, Parser)]
#[command(name = "hwf", version, about = "Sparse phase retrieval by Hadamard Wirtinger flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Gen(GenArgs),
    /// Solve one instance read from JSON.
    Run(RunArgs),
    /// Support-recovery experiment (one-step HWF vs top-k marginal).
    Support(SupportArgs),
    /// Success-rate sweep over an (m, k) grid.
    Sweep(SweepArgs),
    /// Record and plot convergence traces for one instance.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// flat, max:<x>, maxpow:<p>, gaussian or gaussian-raw.
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunSolver {
    Hwf,
    Sparta,
    SpartaSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitKind {
    Spiked,
    Random,
}

#[derive(Debug, Args)]
struct HwfArgs {
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    kappa: f64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    risk_stop: f64,
}

impl HwfArgs {
    fn config(&self) -> HwfConfig {
        HwfConfig {
            eta: self.eta,
            alpha: self.alpha,
            max_iters: self.max_iters,
            restarts: self.restarts,
            kappa: self.kappa,
            risk_stop: self.risk_stop,
            record_trace: false,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Instance JSON written by `hwf gen`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = RunSolver::Hwf)]
    solver: RunSolver,
    #[command(flatten)]
    hwf: HwfArgs,
    /// Sparsity for the SPARTA solvers; defaults to the instance's k.
    #[arg(long)]
    k: Option<usize>,
    /// Seed for random initialization (only used with --init random).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitKind::Spiked)]
    init: InitKind,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Write the winning restart's trace (SVG, plus CSV alongside).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the estimate as a JSON array.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated list of m values.
    #[arg(long, value_delimiter = ',')]
    m_list: Vec<usize>,
    /// Comma-separated list of k values.
    #[arg(long, value_delimiter = ',')]
    k_list: Vec<usize>,
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for trials.csv and cells.csv.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Leave wall_time_s empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    OneStep,
    Topk,
    Both,
}

#[derive(Debug, Args)]
struct SupportArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    /// Run a bundled preset instead of an explicit grid.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Run a bundled preset (fig1-small, fig2-small, fig3-small, fig4-small).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "hwf")]
    solver: String,
    #[command(flatten)]
    hwf: HwfArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Also render a success heatmap per experiment.
    #[arg(long)]
    heatmap: bool,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initializations to overlay.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [InitKind::Spiked, InitKind::Random])]
    init: Vec<InitKind>,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[command(flatten)]
    hwf: HwfArgs,
    /// SVG path; the raw trace goes next to it as CSV.
    #[arg(long, default_value = "trace.svg")]
    out: PathBuf,
}

fn workers(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn parse_model(s: &str) -> Result<SignalModel> {
    s.parse()
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let mut rng = trial_rng(args.seed);
    let signal = generate_signal(model, args.n, args.k, &mut rng)?;
    let meas = generate_measurements(&signal, args.m, &mut rng)?;
    Instance::new(&signal, &meas, args.seed).save(&args.out)?;
    log::info!("wrote instance n={} m={} k={} to {}", args.n, args.m, args.k, args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let inst = Instance::load(&args.input)?;
    let k = args.k.unwrap_or(inst.k);
    let (signal, meas) = inst.into_parts()?;
    let mut hcfg = args.hwf.config();
    hcfg.record_trace = args.trace.is_some();
    let scfg = SpartaConfig::new(k);

    let result: RunResult = match (args.solver, args.init) {
        (RunSolver::Hwf, InitKind::Spiked) => run_multi_restart(&meas, &hcfg, Some(&signal))?,
        (RunSolver::Hwf, InitKind::Random) => {
            let init = init_random(meas.n(), args.sigma, &mut trial_rng(args.seed))?;
            run_single(&meas, &hcfg, init, Some(&signal))?
        }
        (RunSolver::Sparta, _) => run_sparta(&meas, &scfg)?,
        (RunSolver::SpartaSupport, _) => run_sparta_support(&meas, k, &hcfg, &scfg)?,
    };
    let rel = relative_error(&result.x_hat, &signal)?;

    if let Some(path) = &args.trace {
        match &result.trace {
            Some(t) => {
                emit_trace_plot(&[TraceSeries::from_trace("hwf", t)], path)?;
            }
            None => log::warn!("solver records no trace; {} not written", path.display()),
        }
    }
    if let Some(path) = &args.out {
        let text = serde_json::to_string(&result.x_hat).expect("finite vector serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    let summary = json!({
        "rel_error": rel,
        "success": rel < 0.01,
        "restart_index": result.restart_index,
        "iterations": result.total_iterations(),
        "final_risk": result.final_risk,
        "stop_reason": result.stop_reason,
        "failed_restarts": result.failed_restarts.len(),
    });
    println!("{summary}");
    Ok(())
}

fn explicit_grid(id: &str, args: &GridArgs, solver: SolverKind) -> Result<ExperimentGrid> {
    let n = args
        .n
        .ok_or_else(|| Error::param("--n is required unless --preset is given"))?;
    let mut g = ExperimentGrid::new(id, n, parse_model(&args.model)?, solver);
    g.m_values = args.m_list.clone();
    g.k_values = args.k_list.clone();
    Ok(g)
}

/// Applies the shared run-control flags. Seeds, trials and threshold are
/// only overridden for explicit grids, so presets keep their own values
/// unless the flags were given.
fn finish_grid(g: &mut ExperimentGrid, args: &GridArgs, is_preset: bool) {
    if !is_preset {
        g.trials = args.trials;
    }
    g.master_seed = args.seed;
    g.threshold = args.threshold;
    g.record_timing = !args.no_timing;
}

fn run_all(grids: &[ExperimentGrid], args: &GridArgs) -> Result<Vec<CellResult>> {
    let workers = workers(args.workers);
    let mut results = Vec::new();
    for g in grids {
        log::info!(
            "experiment {} ({}, {} cells x {} trials, {} workers)",
            g.experiment_id,
            g.solver,
            g.cells().len(),
            g.trials,
            workers
        );
        results.extend(run_grid(g, workers)?);
    }
    let (trials, cells) = emit_csv(&results, &args.out)?;
    for c in &results {
        println!(
            "{}\t{}\tm={}\tk={}\t{}\tsuccess={:.3}\trecovered={:.3}",
            c.experiment_id,
            c.solver,
            c.m,
            c.k,
            c.model,
            c.success_rate(),
            c.mean_recovered_fraction
        );
    }
    log::info!("wrote {} and {}", trials.display(), cells.display());
    Ok(results)
}

fn cmd_support(args: SupportArgs) -> Result<()> {
    let solvers: &[SolverKind] = match args.method {
        MethodArg::OneStep => &[SolverKind::OneStepSupportOnly],
        MethodArg::Topk => &[SolverKind::TopkSupportOnly],
        MethodArg::Both => &[SolverKind::OneStepSupportOnly, SolverKind::TopkSupportOnly],
    };
    let mut grids = match &args.preset {
        Some(name) => preset(name, args.grid.seed)?
            .into_iter()
            .filter(|g| solvers.contains(&g.solver))
            .collect(),
        None => solvers
            .iter()
            .map(|&s| explicit_grid("support", &args.grid, s))
            .collect::<Result<Vec<_>>>()?,
    };
    if grids.iter().any(|g| !g.solver.is_support_only()) {
        return Err(Error::param("support presets must contain support-only experiments"));
    }
    for g in &mut grids {
        finish_grid(g, &args.grid, args.preset.is_some());
        g.hwf.eta = args.eta;
        g.hwf.alpha = args.alpha;
    }
    run_all(&grids, &args.grid).map(|_| ())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut grids = match &args.preset {
        Some(name) => preset(name, args.grid.seed)?,
        None => {
            let mut g = explicit_grid("sweep", &args.grid, args.solver.parse()?)?;
            g.hwf = args.hwf.config();
            vec![g]
        }
    };
    for g in &mut grids {
        finish_grid(g, &args.grid, args.preset.is_some());
    }
    let results = run_all(&grids, &args.grid)?;
    if args.heatmap {
        let mut rng = trial_rng(args.grid.seed);
        for g in &grids {
            let cells: Vec<CellResult> = results
                .iter()
                .filter(|c| c.experiment_id == g.experiment_id && c.solver == g.solver.to_string())
                .cloned()
                .collect();
            if cells.is_empty() {
                continue;
            }
            let curve = reference_curve(g.n, &g.k_values, 100_000, &mut rng)?;
            let path = args.grid.out.join(format!("{}-{}.svg", g.experiment_id, g.solver));
            emit_heatmap(&cells, &path, Some(&curve))?;
        }
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    if args.init.is_empty() {
        return Err(Error::param("at least one --init is required"));
    }
    let mut rng = trial_rng(args.seed);
    let signal = generate_signal(parse_model(&args.model)?, args.n, args.k, &mut rng)?;
    let meas = generate_measurements(&signal, args.m, &mut rng)?;
    let mut cfg = args.hwf.config();
    cfg.record_trace = true;

    let mut series = Vec::new();
    for init in &args.init {
        let (label, state) = match init {
            InitKind::Spiked => ("spiked", init_spiked(&meas, cfg.alpha, 1)?),
            InitKind::Random => ("random", init_random(meas.n(), args.sigma, &mut rng)?),
        };
        let r = run_single(&meas, &cfg, state, Some(&signal))?;
        let rel = relative_error(&r.x_hat, &signal)?;
        println!("{label}\titerations={}\trel_error={rel:.3e}", r.total_iterations());
        series.push(TraceSeries::from_trace(label, r.trace.as_deref().unwrap_or(&[])));
    }
    let csv = emit_trace_plot(&series, &args.out)?;
    log::info!("wrote {} and {}", args.out.display(), csv.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Support(a) => cmd_support(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Trace(a) => cmd_trace(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}
