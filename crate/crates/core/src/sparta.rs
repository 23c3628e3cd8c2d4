//! Sparse truncated amplitude flow (SPARTA) and the SPARTA-support pipeline,
//! which swaps SPARTA's marginal-statistics support estimate for the one
//! obtained from a single HWF step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{axpy, dot, norm2};
use crate::error::{check_len, Error, Result};
use crate::hwf::{HwfConfig, RunResult, StopReason};
use crate::model::MeasurementSet;
use crate::risk::{
    empirical_gradient, empirical_risk, estimate_theta, marginal_statistics, GradientWorkspace,
};
use crate::select::{top_k_ranked, top_k_sorted};
use crate::support::{one_step_magnitudes, recover_support_topk_marginal, SupportEstimate, SupportMethod};

/// SPARTA hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpartaConfig {
    /// Step size μ.
    pub mu: f64,
    /// Truncation threshold γ: sample `j` is kept when `|a_jᵀx| ≥ √y_j / (1 + γ)`.
    pub gamma: f64,
    /// Fraction of samples (largest `y`) used to build the initialization matrix.
    pub init_fraction: f64,
    /// Power iterations for the initialization eigenvector.
    pub power_iters: usize,
    pub max_iters: usize,
    /// Stop early once `‖x_{t+1} − x_t‖ ≤ step_tol · ‖x_t‖`.
    pub step_tol: f64,
    /// Sparsity level used by hard thresholding.
    pub k: usize,
}

impl SpartaConfig {
    pub fn new(k: usize) -> Self {
        SpartaConfig {
            mu: 1.0,
            gamma: 0.7,
            init_fraction: 1.0 / 6.0,
            power_iters: 100,
            max_iters: 1000,
            step_tol: 1e-12,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::param("SPARTA needs mu > 0 and gamma > 0"));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(Error::param("init_fraction must lie in (0, 1]"));
        }
        if self.k == 0 {
            return Err(Error::param("SPARTA needs k >= 1"));
        }
        if self.power_iters == 0 {
            return Err(Error::param("power_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Keeps the `k` largest-magnitude entries (lowest index wins ties) and zeroes the rest.
pub fn hard_threshold(x: &[f64], k: usize) -> Vec<f64> {
    if k >= x.len() {
        return x.to_vec();
    }
    let mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let mut out = vec![0.0; x.len()];
    for i in top_k_ranked(&mags, k) {
        out[i] = x[i];
    }
    out
}

/// Orthogonality-promoting initialization restricted to the estimated support.
///
/// Takes the `⌈init_fraction · m⌉` samples with the largest `y`, forms
/// `Y = (1/|I|) Σ_{j∈I} a_{j,Ŝ} a_{j,Ŝ}ᵀ / ‖a_{j,Ŝ}‖²`, finds its leading
/// eigenvector by power iteration from the normalized all-ones vector, and
/// returns it embedded in `ℝⁿ` with norm `theta`.
pub fn sparta_init(
    meas: &MeasurementSet,
    support_est: &SupportEstimate,
    theta: f64,
    cfg: &SpartaConfig,
) -> Result<Vec<f64>> {
    let support = &support_est.indices;
    let k = support.len();
    if k == 0 || support.iter().any(|&i| i >= meas.n()) {
        return Err(Error::param("support estimate is empty or out of range"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Degenerate(format!("signal size estimate {theta} is not positive")));
    }
    let m = meas.m();
    let take = ((cfg.init_fraction * m as f64).ceil() as usize).clamp(1, m);
    let samples = top_k_ranked(meas.y(), take);

    let mut mat = vec![0.0; k * k];
    let mut restricted = vec![0.0; k];
    let mut used = 0usize;
    for &j in &samples {
        let row = meas.row(j);
        for (r, &i) in restricted.iter_mut().zip(support) {
            *r = row[i];
        }
        let sq = dot(&restricted, &restricted);
        if sq == 0.0 {
            continue;
        }
        used += 1;
        for (p, &rp) in restricted.iter().enumerate() {
            let w = rp / sq;
            axpy(w, &restricted, &mut mat[p * k..(p + 1) * k]);
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("restricted measurement vectors are all zero".into()));
    }
    // The 1/|I| factor does not change the eigenvector; skip it.

    let mut w = vec![1.0 / (k as f64).sqrt(); k];
    let mut next = vec![0.0; k];
    for _ in 0..cfg.power_iters {
        for (p, nx) in next.iter_mut().enumerate() {
            *nx = dot(&mat[p * k..(p + 1) * k], &w);
        }
        let norm = norm2(&next);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("initialization matrix annihilates the iterate".into()));
        }
        for (wi, ni) in w.iter_mut().zip(&next) {
            *wi = ni / norm;
        }
    }

    let mut x = vec![0.0; meas.n()];
    for (&i, wi) in support.iter().zip(&w) {
        x[i] = theta * wi;
    }
    Ok(x)
}

/// Reusable buffers for SPARTA iterations.
#[derive(Debug, Clone)]
struct SpartaWorkspace {
    grad: Vec<f64>,
    nonzero: Vec<usize>,
}

impl SpartaWorkspace {
    fn new(n: usize) -> Self {
        SpartaWorkspace {
            grad: vec![0.0; n],
            nonzero: Vec::with_capacity(n),
        }
    }

    /// Truncated amplitude-flow gradient at `x`, left in `self.grad`.
    fn gradient(&mut self, x: &[f64], meas: &MeasurementSet, gamma: f64) {
        self.nonzero.clear();
        self.nonzero.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let inv_m = 1.0 / meas.m() as f64;
        let scale = 1.0 / (1.0 + gamma);
        for (row, &y) in meas.rows().zip(meas.y()) {
            // x is k-sparse, so the inner product only touches its support.
            let z: f64 = self.nonzero.iter().map(|&i| row[i] * x[i]).sum();
            let amp = y.sqrt();
            if z.abs() < amp * scale {
                continue;
            }
            let res = z - amp * z.signum();
            if res != 0.0 {
                axpy(res * inv_m, row, &mut self.grad);
            }
        }
    }

    fn step(&mut self, x: &[f64], meas: &MeasurementSet, cfg: &SpartaConfig) -> Vec<f64> {
        self.gradient(x, meas, cfg.gamma);
        let moved: Vec<f64> = x.iter().zip(&self.grad).map(|(xi, gi)| xi - cfg.mu * gi).collect();
        hard_threshold(&moved, cfg.k)
    }
}

/// One SPARTA step: truncated amplitude-flow gradient step followed by hard thresholding,
///
/// ```text
/// g = (1/m) Σ_{j∈T} (a_jᵀx − √y_j · sign(a_jᵀx)) a_j,   T = { j : |a_jᵀx| ≥ √y_j / (1 + γ) },
/// x ← H_k(x − μ g).
/// ```
pub fn sparta_iterate(x: &[f64], meas: &MeasurementSet, cfg: &SpartaConfig) -> Result<Vec<f64>> {
    check_len(meas.n(), x.len())?;
    Ok(SpartaWorkspace::new(meas.n()).step(x, meas, cfg))
}

/// Runs SPARTA iterations from `x0`; returns the estimate, the number of
/// iterations and why it stopped.
pub fn sparta_run_from(
    x0: Vec<f64>,
    meas: &MeasurementSet,
    cfg: &SpartaConfig,
) -> Result<(Vec<f64>, usize, StopReason)> {
    cfg.validate()?;
    check_len(meas.n(), x0.len())?;
    let mut ws = SpartaWorkspace::new(meas.n());
    let mut x = hard_threshold(&x0, cfg.k);
    for t in 0..cfg.max_iters {
        let next = ws.step(&x, meas, cfg);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t });
        }
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let size = norm2(&x);
        x = next;
        if delta <= cfg.step_tol * size {
            return Ok((x, t + 1, StopReason::StepTolerance));
        }
    }
    Ok((x, cfg.max_iters, StopReason::MaxIters))
}

/// Plain SPARTA: top-k marginal support, orthogonality-promoting
/// initialization, then truncated amplitude flow with hard thresholding.
pub fn run_sparta(meas: &MeasurementSet, cfg: &SpartaConfig) -> Result<RunResult> {
    cfg.validate()?;
    let est = recover_support_topk_marginal(meas, cfg.k)?;
    let x0 = sparta_init(meas, &est, estimate_theta(meas), cfg)?;
    let (x, iters, stop_reason) = sparta_run_from(x0, meas, cfg)?;
    Ok(RunResult {
        final_risk: empirical_risk(&x, meas)?,
        x_hat: x,
        restart_index: 0,
        iterations: vec![iters],
        trace: None,
        stop_reason,
        failed_restarts: Vec::new(),
    })
}

struct SupportRestart {
    x: Vec<f64>,
    iterations: usize,
    stop_reason: StopReason,
    grad_norm: f64,
    risk: f64,
}

fn sparta_support_restart(
    meas: &MeasurementSet,
    spike: usize,
    theta: f64,
    hcfg: &HwfConfig,
    scfg: &SpartaConfig,
) -> Result<SupportRestart> {
    let mags = one_step_magnitudes(meas, hcfg.eta, hcfg.alpha, theta, spike)?;
    let est = SupportEstimate {
        indices: top_k_sorted(&mags, scfg.k),
        method: SupportMethod::OneStepHwf,
        scores: mags,
    };
    let x0 = sparta_init(meas, &est, theta, scfg)?;
    let (x, iters, stop_reason) = sparta_run_from(x0, meas, scfg)?;
    let mut ws = GradientWorkspace::new(meas);
    let grad_norm = norm2(empirical_gradient(&x, meas, &mut ws)?);
    Ok(SupportRestart {
        risk: ws.risk(),
        x,
        iterations: 1 + iters,
        stop_reason,
        grad_norm,
    })
}

/// SPARTA-support with `b̄ = hcfg.restarts` restarts: for each of the `b̄`
/// largest marginal statistics, one HWF step from that spike gives `Ŝ_b`
/// (the `k` largest `|X¹|`), SPARTA runs from the initialization on `Ŝ_b`, and
/// the restart with the smallest `‖∇F‖` wins.
pub fn run_sparta_support(
    meas: &MeasurementSet,
    k: usize,
    hcfg: &HwfConfig,
    scfg: &SpartaConfig,
) -> Result<RunResult> {
    hcfg.validate()?;
    let scfg = SpartaConfig { k, ..*scfg };
    scfg.validate()?;
    if k > meas.n() {
        return Err(Error::param(format!("k={k} exceeds n={}", meas.n())));
    }
    if hcfg.restarts > meas.n() {
        return Err(Error::param(format!(
            "restarts={} exceeds the dimension n={}",
            hcfg.restarts,
            meas.n()
        )));
    }
    let theta = estimate_theta(meas);
    let spikes = top_k_ranked(&marginal_statistics(meas), hcfg.restarts);
    let runs: Vec<Result<SupportRestart>> = spikes
        .par_iter()
        .map(|&spike| sparta_support_restart(meas, spike, theta, hcfg, &scfg))
        .collect();

    let mut iterations = Vec::with_capacity(runs.len());
    let mut failed = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (b, run) in runs.iter().enumerate() {
        match run {
            Ok(r) if r.grad_norm.is_finite() => {
                iterations.push(r.iterations);
                if best.is_none_or(|(_, g)| r.grad_norm < g) {
                    best = Some((b, r.grad_norm));
                }
            }
            Ok(r) => {
                iterations.push(r.iterations);
                failed.push(b);
            }
            Err(err) => {
                log::debug!("SPARTA-support restart {b} failed: {err}");
                iterations.push(0);
                failed.push(b);
            }
        }
    }
    let (b, _) = best.ok_or(Error::AllRestartsFailed {
        restarts: hcfg.restarts,
    })?;
    let winner = runs.into_iter().nth(b).expect("index in range").expect("winner succeeded");
    Ok(RunResult {
        x_hat: winner.x,
        restart_index: b,
        iterations,
        trace: None,
        stop_reason: winner.stop_reason,
        final_risk: winner.risk,
        failed_restarts: failed,
    })
}
