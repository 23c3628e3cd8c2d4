//! Monte Carlo experiment harness: seeded trials, declarative sweep grids,
//! CSV and SVG output, and the command-line front end.

pub mod cli;
pub mod grid;
pub mod output;
pub mod plot;
pub mod seed;

pub use grid::{
    preset, run_grid, run_trial, CellKey, CellResult, ExperimentGrid, SolverKind, TrialRow,
};
pub use output::{emit_csv, read_cells_csv, read_trials_csv, write_cells_csv, write_trials_csv};
pub use plot::{emit_heatmap, emit_trace_plot, mean_max_coordinate, reference_curve, TraceSeries};
pub use seed::{derive_trial_seed, trial_rng, TrialRng};
