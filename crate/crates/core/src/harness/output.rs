//! Per-trial and per-cell CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::grid::{CellResult, TrialRow};

pub const TRIAL_COLUMNS: [&str; 14] = [
    "experiment_id",
    "solver",
    "n",
    "m",
    "k",
    "model",
    "trial",
    "seed",
    "success",
    "rel_error",
    "recovered_fraction",
    "iterations",
    "restart_index",
    "wall_time_s",
];

pub const CELL_COLUMNS: [&str; 11] = [
    "experiment_id",
    "solver",
    "n",
    "m",
    "k",
    "model",
    "trials",
    "success_rate",
    "mean_rel_error",
    "mean_recovered_fraction",
    "mean_wall_time_s",
];

#[derive(Debug, Serialize, Deserialize)]
struct CellRow {
    experiment_id: String,
    solver: String,
    n: usize,
    m: usize,
    k: usize,
    model: String,
    trials: usize,
    success_rate: f64,
    mean_rel_error: Option<f64>,
    mean_recovered_fraction: f64,
    mean_wall_time_s: Option<f64>,
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    Ok(w)
}

/// Writes one row per trial, cells in order, trials in order.
pub fn write_trials_csv(results: &[CellResult], path: &Path) -> Result<()> {
    let mut w = writer(path, &TRIAL_COLUMNS)?;
    for row in results.iter().flat_map(|c| &c.rows) {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one summary row per cell.
pub fn write_cells_csv(results: &[CellResult], path: &Path) -> Result<()> {
    let mut w = writer(path, &CELL_COLUMNS)?;
    for c in results {
        w.serialize(CellRow {
            experiment_id: c.experiment_id.clone(),
            solver: c.solver.clone(),
            n: c.n,
            m: c.m,
            k: c.k,
            model: c.model.clone(),
            trials: c.trials,
            success_rate: c.success_rate(),
            mean_rel_error: c.mean_rel_error,
            mean_recovered_fraction: c.mean_recovered_fraction,
            mean_wall_time_s: c.mean_wall_time_s,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `trials.csv` and `cells.csv` into `dir` (created if missing).
pub fn emit_csv(results: &[CellResult], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trials = dir.join("trials.csv");
    let cells = dir.join("cells.csv");
    write_trials_csv(results, &trials)?;
    write_cells_csv(results, &cells)?;
    Ok((trials, cells))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRow>, _>>()
        .map_err(csv_err(path))
}

/// Reads a per-cell CSV back into [`CellResult`]s (without per-trial rows).
pub fn read_cells_csv(path: &Path) -> Result<Vec<CellResult>> {
    let rows = reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<CellRow>, _>>()
        .map_err(csv_err(path))?;
    Ok(rows
        .into_iter()
        .map(|r| CellResult {
            success_count: (r.success_rate * r.trials as f64).round() as usize,
            experiment_id: r.experiment_id,
            solver: r.solver,
            n: r.n,
            m: r.m,
            k: r.k,
            model: r.model,
            trials: r.trials,
            mean_rel_error: r.mean_rel_error,
            mean_recovered_fraction: r.mean_recovered_fraction,
            mean_wall_time_s: r.mean_wall_time_s,
            rows: Vec::new(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, rel: Option<f64>) -> TrialRow {
        TrialRow {
            experiment_id: "e".into(),
            solver: "hwf".into(),
            n: 10,
            m: 20,
            k: 2,
            model: "max:0.7".into(),
            trial,
            seed: 0xdead_beef_u64 * (trial as u64 + 1),
            success: rel.is_some_and(|e| e < 0.01),
            rel_error: rel,
            recovered_fraction: 0.5 * trial as f64,
            iterations: 17 + trial,
            restart_index: rel.map(|_| trial),
            wall_time_s: None,
        }
    }

    fn cell() -> CellResult {
        CellResult {
            experiment_id: "e".into(),
            solver: "hwf".into(),
            n: 10,
            m: 20,
            k: 2,
            model: "max:0.7".into(),
            trials: 2,
            success_count: 1,
            mean_rel_error: Some(0.1 / 3.0),
            mean_recovered_fraction: 0.25,
            mean_wall_time_s: Some(1.0 / 7.0),
            rows: vec![row(0, Some(1e-3)), row(1, None)],
        }
    }

    #[test]
    fn empty_results_write_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let (t, c) = emit_csv(&[], dir.path()).unwrap();
        assert_eq!(fs::read_to_string(t).unwrap(), TRIAL_COLUMNS.join(",") + "\n");
        assert_eq!(fs::read_to_string(c).unwrap(), CELL_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn one_cell_two_trials_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (t, c) = emit_csv(&[cell()], dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&t).unwrap().lines().count(), 3);
        assert_eq!(fs::read_to_string(&c).unwrap().lines().count(), 2);
        assert_eq!(read_trials_csv(&t).unwrap(), cell().rows);
        let back = read_cells_csv(&c).unwrap();
        assert_eq!(back, vec![CellResult { rows: Vec::new(), ..cell() }]);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = read_trials_csv(Path::new("/nonexistent/dir/trials.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/trials.csv"));
        assert_eq!(err.exit_code(), 3);
    }
}
