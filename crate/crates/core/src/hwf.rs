//! Hadamard Wirtinger flow: gradient descent on the empirical risk under the
//! parametrization `x = u⊙u − v⊙v`.
//!
//! In this parametrization the additive gradient step becomes multiplicative,
//!
//! ```text
//! u ← u ⊙ (1 − 2η ∇F(x)),    v ← v ⊙ (1 + 2η ∇F(x)),
//! ```
//!
//! so coordinates started near zero stay small unless the gradient keeps
//! pushing them, which is what keeps the iterates approximately sparse.
//! Runs start from a spiked initialization that places mass `θ̂/√3` on one
//! coordinate with a large marginal statistic `R_i`; the multi-restart driver
//! tries the `b̄` largest statistics and keeps the sparsest result.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{relative_error, MeasurementSet, SparseSignal};
use crate::risk::{estimate_theta, marginal_statistics, GradientWorkspace};
use crate::select::{nth_largest, top_k_ranked};

/// Factor vectors `u`, `v` and the derived iterate `x = u² − v²`.
#[derive(Debug, Clone, PartialEq)]
pub struct HwfState {
    u: Vec<f64>,
    v: Vec<f64>,
    x: Vec<f64>,
    t: usize,
}

impl HwfState {
    pub fn from_factors(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_len(u.len(), v.len())?;
        let mut state = HwfState {
            x: vec![0.0; u.len()],
            u,
            v,
            t: 0,
        };
        state.recompute_x();
        Ok(state)
    }

    fn recompute_x(&mut self) {
        for ((x, u), v) in self.x.iter_mut().zip(&self.u).zip(&self.v) {
            *x = u * u - v * v;
        }
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Number of steps taken since initialization.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    fn apply_gradient(&mut self, g: &[f64], eta: f64) -> Result<()> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: self.t });
        }
        let two_eta = 2.0 * eta;
        for ((u, v), gi) in self.u.iter_mut().zip(self.v.iter_mut()).zip(g) {
            *u *= 1.0 - two_eta * gi;
            *v *= 1.0 + two_eta * gi;
        }
        if self.u.iter().chain(&self.v).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: self.t });
        }
        self.recompute_x();
        self.t += 1;
        Ok(())
    }
}

/// Hyperparameters of Hadamard Wirtinger flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwfConfig {
    /// Step size η.
    pub eta: f64,
    /// Initialization size α.
    pub alpha: f64,
    /// Iteration budget t̄ per restart.
    pub max_iters: usize,
    /// Number of restarts b̄.
    pub restarts: usize,
    /// Sparsity tolerance κ used to pick among restarts.
    pub kappa: f64,
    /// Stop once `F(x) ≤ risk_stop`.
    pub risk_stop: f64,
    /// Record a per-iteration trace of the risk (and relative error when the
    /// ground truth is known).
    pub record_trace: bool,
}

impl Default for HwfConfig {
    fn default() -> Self {
        HwfConfig {
            eta: 0.1,
            alpha: 0.001,
            max_iters: 100_000,
            restarts: 50,
            kappa: 0.05,
            risk_stop: 1e-7,
            record_trace: false,
        }
    }
}

impl HwfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::param(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts must be at least 1"));
        }
        if !(self.risk_stop >= 0.0) {
            return Err(Error::param("risk_stop must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RiskThreshold,
    MaxIters,
    /// The iterate stopped moving (SPARTA only).
    StepTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub risk: f64,
    pub rel_error: Option<f64>,
}

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub x_hat: Vec<f64>,
    /// Zero-based index of the winning restart.
    pub restart_index: usize,
    /// Iterations performed by each restart, in restart order.
    pub iterations: Vec<usize>,
    pub trace: Option<Vec<TracePoint>>,
    pub stop_reason: StopReason,
    /// Risk `F` at the returned estimate.
    pub final_risk: f64,
    /// Restarts that failed (diverged or degenerate).
    pub failed_restarts: Vec<usize>,
}

impl RunResult {
    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }
}

pub(crate) fn spiked_state(n: usize, alpha: f64, theta: f64, index: usize) -> HwfState {
    let mut u = vec![alpha; n];
    u[index] = (theta / 3f64.sqrt() + alpha * alpha).sqrt();
    HwfState::from_factors(u, vec![alpha; n]).expect("equal lengths")
}

/// Spiked initialization: `V⁰ = α·1`, `U⁰ = α·1` except at the coordinate
/// with the `rank_b`-th largest marginal statistic, where `U⁰ = (θ̂/√3 + α²)^{1/2}`.
/// Ties in the statistics go to the lowest index.
pub fn init_spiked(meas: &MeasurementSet, alpha: f64, rank_b: usize) -> Result<HwfState> {
    if rank_b == 0 || rank_b > meas.n() {
        return Err(Error::param(format!(
            "spike rank {rank_b} out of range 1..={}",
            meas.n()
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    let index = nth_largest(&marginal_statistics(meas), rank_b);
    Ok(spiked_state(meas.n(), alpha, estimate_theta(meas), index))
}

/// Random initialization with i.i.d. `N(0, σ²)` factors.
pub fn init_random<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Result<HwfState> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let u = (0..n).map(|_| normal.sample(rng)).collect();
    let v = (0..n).map(|_| normal.sample(rng)).collect();
    HwfState::from_factors(u, v)
}

/// One multiplicative gradient step. Performs exactly one gradient evaluation.
pub fn hwf_step(
    state: &mut HwfState,
    meas: &MeasurementSet,
    eta: f64,
    ws: &mut GradientWorkspace,
) -> Result<()> {
    check_len(meas.n(), state.x.len())?;
    let f = ws.evaluate(&state.x, meas)?;
    if !f.is_finite() {
        return Err(Error::Divergence { iteration: state.t });
    }
    let g = ws.gradient_from_weights(meas);
    state.apply_gradient(g, eta)
}

/// Iterates [`hwf_step`] from `init` until `F ≤ risk_stop` or the iteration
/// budget is exhausted. The risk is read off the first gradient pass, so the
/// stopping test costs nothing extra.
pub fn run_single(
    meas: &MeasurementSet,
    cfg: &HwfConfig,
    init: HwfState,
    signal: Option<&SparseSignal>,
) -> Result<RunResult> {
    cfg.validate()?;
    check_len(meas.n(), init.x.len())?;
    if let Some(s) = signal {
        check_len(meas.n(), s.n())?;
    }
    let mut ws = GradientWorkspace::new(meas);
    let mut state = init;
    let start = state.t;
    let mut trace = cfg.record_trace.then(Vec::new);

    let (stop_reason, final_risk) = loop {
        let f = ws.evaluate(&state.x, meas)?;
        if !f.is_finite() {
            return Err(Error::Divergence { iteration: state.t });
        }
        if let Some(trace) = trace.as_mut() {
            trace.push(TracePoint {
                iteration: state.t - start,
                risk: f,
                rel_error: signal.map(|s| relative_error(&state.x, s)).transpose()?,
            });
        }
        if f <= cfg.risk_stop {
            break (StopReason::RiskThreshold, f);
        }
        if state.t - start >= cfg.max_iters {
            break (StopReason::MaxIters, f);
        }
        let g = ws.gradient_from_weights(meas);
        state.apply_gradient(g, cfg.eta)?;
    };

    Ok(RunResult {
        iterations: vec![state.t - start],
        x_hat: state.into_x(),
        restart_index: 0,
        trace,
        stop_reason,
        final_risk,
        failed_restarts: Vec::new(),
    })
}

/// Smallest number of coordinates whose squares cover a `(1 − κ)` fraction of `‖x‖²`.
pub fn sparsity_score(x: &[f64], kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let total: f64 = sq.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::param("sparsity score undefined for a zero or non-finite vector"));
    }
    sq.sort_unstable_by(|a, b| b.total_cmp(a));
    let target = (1.0 - kappa) * total;
    let mut acc = 0.0;
    for (i, s) in sq.iter().enumerate() {
        acc += s;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    // Only reachable through rounding in the running sum.
    Ok(sq.len())
}

/// A finished restart that can compete in the final selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub restart: usize,
    pub score: usize,
    pub risk: f64,
}

/// Smallest sparsity score, then smallest final risk, then lowest restart index.
pub(crate) fn pick_sparsest(cands: &[Candidate]) -> Option<Candidate> {
    cands.iter().copied().min_by(|a, b| {
        a.score
            .cmp(&b.score)
            .then(a.risk.total_cmp(&b.risk))
            .then(a.restart.cmp(&b.restart))
    })
}

/// Runs HWF from the spiked initializations at the `b̄` largest marginal
/// statistics and returns the (approximately) sparsest result.
///
/// Restarts run in parallel on the current rayon pool and are merged by
/// restart index, so the outcome does not depend on scheduling. A diverged
/// restart is recorded in [`RunResult::failed_restarts`]; the call only fails
/// if every restart does.
pub fn run_multi_restart(
    meas: &MeasurementSet,
    cfg: &HwfConfig,
    signal: Option<&SparseSignal>,
) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.restarts > meas.n() {
        return Err(Error::param(format!(
            "restarts={} exceeds the dimension n={}",
            cfg.restarts,
            meas.n()
        )));
    }
    let theta = estimate_theta(meas);
    let spikes = top_k_ranked(&marginal_statistics(meas), cfg.restarts);

    let runs: Vec<Result<RunResult>> = spikes
        .par_iter()
        .map(|&index| run_single(meas, cfg, spiked_state(meas.n(), cfg.alpha, theta, index), signal))
        .collect();

    let mut iterations = Vec::with_capacity(runs.len());
    let mut failed = Vec::new();
    let mut cands = Vec::new();
    for (b, run) in runs.iter().enumerate() {
        match run {
            Ok(r) => {
                iterations.push(r.total_iterations());
                match sparsity_score(&r.x_hat, cfg.kappa) {
                    Ok(score) => cands.push(Candidate {
                        restart: b,
                        score,
                        risk: r.final_risk,
                    }),
                    Err(_) => failed.push(b),
                }
            }
            Err(err) => {
                log::debug!("restart {b} failed: {err}");
                iterations.push(match err {
                    Error::Divergence { iteration } => *iteration,
                    _ => 0,
                });
                failed.push(b);
            }
        }
    }

    let best = pick_sparsest(&cands).ok_or(Error::AllRestartsFailed {
        restarts: cfg.restarts,
    })?;
    let winner = runs
        .into_iter()
        .nth(best.restart)
        .expect("winner index in range")
        .expect("winner succeeded");
    Ok(RunResult {
        x_hat: winner.x_hat,
        restart_index: best.restart,
        iterations,
        trace: winner.trace,
        stop_reason: winner.stop_reason,
        final_risk: winner.final_risk,
        failed_restarts: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_measurements, generate_signal, SignalModel};
    use crate::risk::empirical_gradient;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> MeasurementSet {
        MeasurementSet::new(vec![2.0, 1.0], vec![4.0], 2).unwrap()
    }

    #[test]
    fn spiked_init_on_tiny_instance() {
        let meas = tiny();
        let s = init_spiked(&meas, 0.001, 1).unwrap();
        let spike = (2.0 / 3f64.sqrt() + 1e-6).sqrt();
        assert!((s.u()[0] - spike).abs() < 1e-15);
        assert_eq!(s.u()[1], 0.001);
        assert_eq!(s.v(), &[0.001, 0.001]);
        assert!((s.x()[0] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.x()[1], 0.0);

        let second = init_spiked(&meas, 0.001, 2).unwrap();
        assert!(second.x()[1] > 1.0);
        assert_eq!(second.x()[0], 0.0);
        assert!(init_spiked(&meas, 0.001, 3).is_err());
        assert!(init_spiked(&meas, 0.001, 0).is_err());
    }

    #[test]
    fn step_chain_on_tiny_instance() {
        let meas = tiny();
        let mut ws = GradientWorkspace::new(&meas);
        let mut s = init_spiked(&meas, 0.001, 1).unwrap();
        let u0 = s.u()[0];
        let g = empirical_gradient(s.x(), &meas, &mut ws).unwrap().to_vec();
        assert!((g[0] - 6.1584).abs() < 1e-4 && (g[1] - 3.0792).abs() < 1e-4);
        hwf_step(&mut s, &meas, 0.1, &mut ws).unwrap();
        assert!((s.u()[0] - u0 * (1.0 - 0.2 * g[0])).abs() < 1e-15);
        assert!((s.v()[1] - 0.001 * (1.0 + 0.2 * g[1])).abs() < 1e-15);
        assert!((s.u()[0] / u0 - (1.0 - 1.23168)).abs() < 1e-4);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn zero_step_size_is_identity_and_zero_factors_absorb() {
        let meas = tiny();
        let mut ws = GradientWorkspace::new(&meas);
        let mut s = HwfState::from_factors(vec![0.7, 0.0], vec![0.2, 0.0]).unwrap();
        let before = s.clone();
        hwf_step(&mut s, &meas, 0.0, &mut ws).unwrap();
        assert_eq!((s.u(), s.v(), s.x()), (before.u(), before.v(), before.x()));
        for _ in 0..5 {
            hwf_step(&mut s, &meas, 0.05, &mut ws).unwrap();
            assert_eq!((s.u()[1], s.v()[1]), (0.0, 0.0));
        }
    }

    #[test]
    fn large_step_diverges_with_iteration_index() {
        let meas = tiny();
        let mut s = HwfState::from_factors(vec![3.0, 3.0], vec![0.1, 0.1]).unwrap();
        let cfg = HwfConfig {
            eta: 10.0,
            max_iters: 1000,
            ..HwfConfig::default()
        };
        let err = run_single(&meas, &cfg, s.clone(), None).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        let mut ws = GradientWorkspace::new(&meas);
        let mut failed_at = None;
        for _ in 0..1000 {
            if let Err(Error::Divergence { iteration }) = hwf_step(&mut s, &meas, 10.0, &mut ws) {
                failed_at = Some(iteration);
                break;
            }
        }
        assert!(failed_at.is_some());
    }

    #[test]
    fn random_init_has_requested_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = init_random(1000, 0.01, &mut rng).unwrap();
        let mean = s.u().iter().sum::<f64>() / 1000.0;
        let var = s.u().iter().map(|u| (u - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((0.008..=0.012).contains(&var.sqrt()));
        assert!(init_random(10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn stops_immediately_at_signal() {
        let x = SparseSignal::new(vec![0.0, 0.6, -0.8, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let meas = generate_measurements(&x, 30, &mut rng).unwrap();
        let u: Vec<f64> = x.values().iter().map(|v| v.max(0.0).sqrt()).collect();
        let v: Vec<f64> = x.values().iter().map(|v| (-v).max(0.0).sqrt()).collect();
        let init = HwfState::from_factors(u, v).unwrap();
        let r = run_single(&meas, &HwfConfig::default(), init, Some(&x)).unwrap();
        assert_eq!(r.stop_reason, StopReason::RiskThreshold);
        assert_eq!(r.iterations, vec![0]);
    }

    #[test]
    fn budget_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = generate_signal(SignalModel::FixedMax(0.7), 64, 3, &mut rng).unwrap();
        let meas = generate_measurements(&x, 200, &mut rng).unwrap();
        let cfg = HwfConfig {
            max_iters: 5,
            record_trace: true,
            ..HwfConfig::default()
        };
        let r = run_single(&meas, &cfg, init_spiked(&meas, cfg.alpha, 1).unwrap(), Some(&x)).unwrap();
        assert_eq!(r.iterations, vec![5]);
        assert_eq!(r.stop_reason, StopReason::MaxIters);
        assert_eq!(r.trace.unwrap().len(), 6);
    }

    #[test]
    fn sparsity_score_examples() {
        assert_eq!(sparsity_score(&[1.0, 0.0, 0.0], 0.05).unwrap(), 1);
        assert_eq!(sparsity_score(&[0.8, 0.5, 0.33], 0.05).unwrap(), 3);
        assert_eq!(sparsity_score(&[1.0; 100], 0.05).unwrap(), 95);
        assert_eq!(sparsity_score(&[-1.0; 100], 0.05).unwrap(), 95);
        assert!(sparsity_score(&[0.0; 3], 0.05).is_err());
        assert!(sparsity_score(&[1.0], 1.0).is_err());
    }

    #[test]
    fn selection_prefers_sparser_then_lower_risk() {
        let c = |restart, score, risk| Candidate { restart, score, risk };
        assert_eq!(pick_sparsest(&[c(0, 3, 1e-9), c(1, 1, 1e-3)]).unwrap().restart, 1);
        assert_eq!(pick_sparsest(&[c(0, 2, 1e-3), c(1, 2, 1e-9)]).unwrap().restart, 1);
        assert_eq!(pick_sparsest(&[c(0, 2, 1e-3), c(1, 2, 1e-3)]).unwrap().restart, 0);
        assert!(pick_sparsest(&[]).is_none());
    }

    #[test]
    fn single_restart_matches_run_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = generate_signal(SignalModel::FixedMax(0.7), 64, 3, &mut rng).unwrap();
        let meas = generate_measurements(&x, 200, &mut rng).unwrap();
        let cfg = HwfConfig {
            restarts: 1,
            max_iters: 300,
            ..HwfConfig::default()
        };
        let multi = run_multi_restart(&meas, &cfg, None).unwrap();
        let single = run_single(&meas, &cfg, init_spiked(&meas, cfg.alpha, 1).unwrap(), None).unwrap();
        assert_eq!(multi.x_hat, single.x_hat);
        assert_eq!(multi.restart_index, 0);
        assert!(run_multi_restart(&meas, &HwfConfig { restarts: 65, ..cfg }, None).is_err());
    }
}
