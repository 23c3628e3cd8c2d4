//! Declarative experiment grids and their execution.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::seed::{derive_trial_seed, trial_rng};
use crate::hwf::{run_multi_restart, HwfConfig};
use crate::model::{generate_measurements, generate_signal, relative_error, SignalModel, SparseSignal};
use crate::select::top_k_sorted;
use crate::sparta::{run_sparta, run_sparta_support, SpartaConfig};
use crate::support::{
    recover_support_one_step, recover_support_topk_marginal, recovered_fraction, SupportEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Hadamard Wirtinger flow with multiple restarts.
    Hwf,
    /// One HWF step for the support, then SPARTA.
    SpartaSupport,
    /// SPARTA with its own marginal-statistics support estimate.
    Sparta,
    TopkSupportOnly,
    OneStepSupportOnly,
}

impl SolverKind {
    pub fn is_support_only(&self) -> bool {
        matches!(self, SolverKind::TopkSupportOnly | SolverKind::OneStepSupportOnly)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Hwf => "hwf",
            SolverKind::SpartaSupport => "sparta-support",
            SolverKind::Sparta => "sparta",
            SolverKind::TopkSupportOnly => "topk-support-only",
            SolverKind::OneStepSupportOnly => "one-step-support-only",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hwf" => Ok(SolverKind::Hwf),
            "sparta-support" => Ok(SolverKind::SpartaSupport),
            "sparta" => Ok(SolverKind::Sparta),
            "topk-support-only" | "topk" => Ok(SolverKind::TopkSupportOnly),
            "one-step-support-only" | "one-step" => Ok(SolverKind::OneStepSupportOnly),
            _ => Err(Error::param(format!("unknown solver {s:?}"))),
        }
    }
}

/// A sweep over `m × k` for one signal model and one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub experiment_id: String,
    pub n: usize,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub model: SignalModel,
    pub solver: SolverKind,
    pub trials: usize,
    pub master_seed: u64,
    pub hwf: HwfConfig,
    /// SPARTA settings; `k` is overwritten per cell.
    pub sparta: SpartaConfig,
    /// A trial succeeds when its relative error is below this.
    pub threshold: f64,
    /// Measure wall time per trial. Disable for byte-reproducible CSV.
    pub record_timing: bool,
}

impl ExperimentGrid {
    pub fn new(experiment_id: impl Into<String>, n: usize, model: SignalModel, solver: SolverKind) -> Self {
        ExperimentGrid {
            experiment_id: experiment_id.into(),
            n,
            m_values: Vec::new(),
            k_values: Vec::new(),
            model,
            solver,
            trials: 100,
            master_seed: 0,
            hwf: HwfConfig::default(),
            sparta: SpartaConfig::new(1),
            threshold: 0.01,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("success threshold must lie in (0, 1)"));
        }
        if self.n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(Error::param(format!("k={k} outside 1..={}", self.n)));
        }
        if self.m_values.contains(&0) {
            return Err(Error::param("m values must be positive"));
        }
        self.hwf.validate()?;
        if matches!(self.solver, SolverKind::Hwf | SolverKind::SpartaSupport) && self.hwf.restarts > self.n {
            return Err(Error::param("restarts exceed n"));
        }
        Ok(())
    }

    /// Cells in deterministic order: `m` outer, `k` inner.
    pub fn cells(&self) -> Vec<CellKey> {
        self.m_values
            .iter()
            .flat_map(|&m| {
                self.k_values.iter().map(move |&k| CellKey {
                    n: self.n,
                    m,
                    k,
                    model: self.model,
                    solver: self.solver,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub model: SignalModel,
    pub solver: SolverKind,
}

/// One per-trial CSV row. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment_id: String,
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub model: String,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    /// Empty for support-only solvers and failed runs.
    pub rel_error: Option<f64>,
    pub recovered_fraction: f64,
    pub iterations: usize,
    pub restart_index: Option<usize>,
    pub wall_time_s: Option<f64>,
}

/// Aggregate of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub experiment_id: String,
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub model: String,
    pub trials: usize,
    pub success_count: usize,
    pub mean_rel_error: Option<f64>,
    pub mean_recovered_fraction: f64,
    pub mean_wall_time_s: Option<f64>,
    pub rows: Vec<TrialRow>,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.trials as f64
    }

    fn aggregate(rows: Vec<TrialRow>) -> Self {
        let first = rows.first().expect("cell has at least one trial");
        let mean = |vals: Vec<f64>| {
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        CellResult {
            experiment_id: first.experiment_id.clone(),
            solver: first.solver.clone(),
            n: first.n,
            m: first.m,
            k: first.k,
            model: first.model.clone(),
            trials: rows.len(),
            success_count: rows.iter().filter(|r| r.success).count(),
            mean_rel_error: mean(rows.iter().filter_map(|r| r.rel_error).collect()),
            mean_recovered_fraction: rows.iter().map(|r| r.recovered_fraction).sum::<f64>() / rows.len() as f64,
            mean_wall_time_s: mean(rows.iter().filter_map(|r| r.wall_time_s).collect()),
            rows,
        }
    }
}

struct SolverOutcome {
    rel_error: Option<f64>,
    recovered_fraction: f64,
    success: bool,
    iterations: usize,
    restart_index: Option<usize>,
}

fn top_k_estimate(x: &[f64], k: usize) -> Result<SupportEstimate> {
    let mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    SupportEstimate::from_indices(&top_k_sorted(&mags, k), x.len())
}

fn is_solver_failure(err: &Error) -> bool {
    matches!(
        err,
        Error::Divergence { .. } | Error::AllRestartsFailed { .. } | Error::Degenerate(_)
    )
}

fn solve(grid: &ExperimentGrid, cell: &CellKey, signal: &SparseSignal, meas: &crate::model::MeasurementSet) -> Result<SolverOutcome> {
    let k = cell.k;
    let reconstruction = |run: Result<crate::hwf::RunResult>| -> Result<SolverOutcome> {
        match run {
            Ok(r) => {
                let rel = relative_error(&r.x_hat, signal)?;
                Ok(SolverOutcome {
                    rel_error: Some(rel),
                    recovered_fraction: recovered_fraction(&top_k_estimate(&r.x_hat, k)?, signal),
                    success: rel < grid.threshold,
                    iterations: r.total_iterations(),
                    restart_index: Some(r.restart_index),
                })
            }
            Err(e) if is_solver_failure(&e) => {
                log::debug!("trial failed: {e}");
                Ok(SolverOutcome {
                    rel_error: None,
                    recovered_fraction: 0.0,
                    success: false,
                    iterations: 0,
                    restart_index: None,
                })
            }
            Err(e) => Err(e),
        }
    };
    let support_only = |est: SupportEstimate, iterations: usize| {
        let frac = recovered_fraction(&est, signal);
        Ok(SolverOutcome {
            rel_error: None,
            recovered_fraction: frac,
            success: frac == 1.0,
            iterations,
            restart_index: None,
        })
    };
    let sparta = SpartaConfig { k, ..grid.sparta };
    match cell.solver {
        SolverKind::Hwf => reconstruction(run_multi_restart(meas, &grid.hwf, None)),
        SolverKind::SpartaSupport => reconstruction(run_sparta_support(meas, k, &grid.hwf, &sparta)),
        SolverKind::Sparta => reconstruction(run_sparta(meas, &sparta)),
        SolverKind::TopkSupportOnly => support_only(recover_support_topk_marginal(meas, k)?, 0),
        SolverKind::OneStepSupportOnly => {
            support_only(recover_support_one_step(meas, k, grid.hwf.eta, grid.hwf.alpha)?, 1)
        }
    }
}

/// Runs one Monte Carlo trial of `cell`. Solver failures (divergence,
/// degenerate data) become unsuccessful rows rather than errors.
pub fn run_trial(grid: &ExperimentGrid, cell: &CellKey, trial: usize) -> Result<TrialRow> {
    let seed = derive_trial_seed(grid.master_seed, cell.n, cell.m, cell.k, &cell.model, trial);
    let mut rng = trial_rng(seed);
    let signal = generate_signal(cell.model, cell.n, cell.k, &mut rng)?;
    let meas = generate_measurements(&signal, cell.m, &mut rng)?;

    let start = Instant::now();
    let out = solve(grid, cell, &signal, &meas)?;
    let elapsed = start.elapsed().as_secs_f64();

    Ok(TrialRow {
        experiment_id: grid.experiment_id.clone(),
        solver: cell.solver.to_string(),
        n: cell.n,
        m: cell.m,
        k: cell.k,
        model: cell.model.to_string(),
        trial,
        seed,
        success: out.success,
        rel_error: out.rel_error,
        recovered_fraction: out.recovered_fraction,
        iterations: out.iterations,
        restart_index: out.restart_index,
        wall_time_s: grid.record_timing.then_some(elapsed),
    })
}

/// Runs every `(cell, trial)` pair on a pool of `workers` threads and
/// aggregates per cell. Output order (cells, then trials) does not depend on
/// the worker count.
pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> Result<Vec<CellResult>> {
    grid.validate()?;
    let cells = grid.cells();
    if cells.is_empty() {
        log::warn!("experiment {:?} has no cells (empty m or k list)", grid.experiment_id);
        return Ok(Vec::new());
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<TrialRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(grid, &cells[c], t))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut results = Vec::with_capacity(cells.len());
    let mut rows = rows.into_iter();
    for _ in 0..cells.len() {
        let cell_rows: Vec<TrialRow> = rows.by_ref().take(grid.trials).collect();
        results.push(CellResult::aggregate(cell_rows));
    }
    Ok(results)
}

/// Names of the bundled presets.
pub const PRESETS: &[&str] = &["fig1-small", "fig2-small", "fig3-small", "fig4-small"];

/// Desk-scale versions of the published experiments.
///
/// * `fig1-small`: support recovery, n = 1000, m = 500, four signal models, both methods.
/// * `fig2-small`: HWF success rate, n = 1000, 20 trials, t̄ = 20000, b̄ = 5;
///   against m at k = 20 and against k at m = 500.
/// * `fig3-small`: HWF and SPARTA-support against k for the three fixed-max models.
/// * `fig4-small`: HWF success heatmap over (k, m) at n = 256.
pub fn preset(name: &str, master_seed: u64) -> Result<Vec<ExperimentGrid>> {
    let gaussian = SignalModel::Gaussian { normalize: true };
    let fixed_models = [
        SignalModel::FlatSigns,
        SignalModel::FixedMaxPower(0.25),
        SignalModel::FixedMax(0.7),
    ];
    let desk_hwf = HwfConfig {
        max_iters: 20_000,
        restarts: 5,
        ..HwfConfig::default()
    };
    let mut grids = Vec::new();
    match name {
        "fig1-small" => {
            let models = [fixed_models[0], fixed_models[1], fixed_models[2], gaussian];
            for (mi, model) in models.into_iter().enumerate() {
                for solver in [SolverKind::OneStepSupportOnly, SolverKind::TopkSupportOnly] {
                    let mut g = ExperimentGrid::new(format!("fig1-small-{}", mi + 1), 1000, model, solver);
                    g.m_values = vec![500];
                    g.k_values = vec![5, 10, 15, 20, 30, 45, 60];
                    g.trials = 20;
                    g.master_seed = master_seed;
                    grids.push(g);
                }
            }
        }
        "fig2-small" => {
            let mut left = ExperimentGrid::new("fig2-small-m", 1000, gaussian, SolverKind::Hwf);
            left.m_values = vec![200, 300, 400, 500, 600, 700];
            left.k_values = vec![20];
            let mut right = ExperimentGrid::new("fig2-small-k", 1000, gaussian, SolverKind::Hwf);
            right.m_values = vec![500];
            right.k_values = vec![10, 15, 20, 25, 30, 35, 40];
            for mut g in [left, right] {
                g.trials = 20;
                g.hwf = desk_hwf;
                g.master_seed = master_seed;
                grids.push(g);
            }
        }
        "fig3-small" => {
            for (mi, model) in fixed_models.into_iter().enumerate() {
                for solver in [SolverKind::Hwf, SolverKind::SpartaSupport] {
                    let mut g = ExperimentGrid::new(format!("fig3-small-{}", mi + 1), 1000, model, solver);
                    g.m_values = vec![500];
                    g.k_values = vec![10, 20, 30, 40, 50, 60];
                    g.trials = 10;
                    g.hwf = desk_hwf;
                    g.master_seed = master_seed;
                    grids.push(g);
                }
            }
        }
        "fig4-small" => {
            let mut g = ExperimentGrid::new("fig4-small", 256, gaussian, SolverKind::Hwf);
            g.m_values = (1..=10).map(|i| 25 * i).collect();
            g.k_values = vec![2, 4, 6, 8, 10, 12, 14, 16];
            g.trials = 10;
            g.hwf = HwfConfig {
                max_iters: 10_000,
                restarts: 5,
                ..HwfConfig::default()
            };
            g.master_seed = master_seed;
            grids.push(g);
        }
        _ => {
            return Err(Error::param(format!(
                "unknown preset {name:?} (available: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(grids)
}
