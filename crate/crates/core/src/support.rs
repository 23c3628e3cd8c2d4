//! Support recovery: one HWF step from the rank-1 spike, and the top-k
//! marginal-statistics baseline.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hwf::{hwf_step, spiked_state};
use crate::model::{MeasurementSet, SparseSignal};
use crate::risk::{estimate_theta, marginal_statistics, GradientWorkspace};
use crate::select::{nth_largest, top_k_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SupportMethod {
    OneStepHwf,
    TopKMarginal,
}

impl fmt::Display for SupportMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupportMethod::OneStepHwf => "one-step-hwf",
            SupportMethod::TopKMarginal => "topk-marginal",
        })
    }
}

impl FromStr for SupportMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step-hwf" | "one-step" | "hwf" => Ok(SupportMethod::OneStepHwf),
            "topk-marginal" | "topk" => Ok(SupportMethod::TopKMarginal),
            _ => Err(Error::param(format!("unknown support method {s:?}"))),
        }
    }
}

/// An estimated support `Ŝ` together with the per-coordinate scores it was ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// Sorted, `|indices| = k`.
    pub indices: Vec<usize>,
    pub method: SupportMethod,
    pub scores: Vec<f64>,
}

impl SupportEstimate {
    fn from_scores(scores: Vec<f64>, k: usize, method: SupportMethod) -> Self {
        SupportEstimate {
            indices: top_k_sorted(&scores, k),
            method,
            scores,
        }
    }

    /// Builds an estimate from a known index set (e.g. the oracle support).
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::param("support index out of range"));
        }
        let mut scores = vec![0.0; n];
        indices.iter().for_each(|&i| scores[i] = 1.0);
        Ok(SupportEstimate {
            indices,
            method: SupportMethod::TopKMarginal,
            scores,
        })
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::param(format!("sparsity k={k} must satisfy 1 <= k <= n={n}")))
    } else {
        Ok(())
    }
}

/// The `k` largest coordinates of `|X¹|` after one HWF step from the rank-1
/// spiked initialization.
pub fn recover_support_one_step(
    meas: &MeasurementSet,
    k: usize,
    eta: f64,
    alpha: f64,
) -> Result<SupportEstimate> {
    check_k(k, meas.n())?;
    if !(eta > 0.0) {
        return Err(Error::param("eta must be positive"));
    }
    let spike = nth_largest(&marginal_statistics(meas), 1);
    Ok(SupportEstimate::from_scores(
        one_step_magnitudes(meas, eta, alpha, estimate_theta(meas), spike)?,
        k,
        SupportMethod::OneStepHwf,
    ))
}

/// `|X¹|` after one step from the spike at coordinate `spike`.
pub(crate) fn one_step_magnitudes(
    meas: &MeasurementSet,
    eta: f64,
    alpha: f64,
    theta: f64,
    spike: usize,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    let mut state = spiked_state(meas.n(), alpha, theta, spike);
    let mut ws = GradientWorkspace::new(meas);
    hwf_step(&mut state, meas, eta, &mut ws)?;
    Ok(state.x().iter().map(|v| v.abs()).collect())
}

/// The `k` largest marginal statistics `R_i`.
pub fn recover_support_topk_marginal(meas: &MeasurementSet, k: usize) -> Result<SupportEstimate> {
    check_k(k, meas.n())?;
    Ok(SupportEstimate::from_scores(
        marginal_statistics(meas),
        k,
        SupportMethod::TopKMarginal,
    ))
}

/// `|Ŝ ∩ S| / |S|`.
pub fn recovered_fraction(est: &SupportEstimate, truth: &SparseSignal) -> f64 {
    let truth_set = truth.support();
    let hits = est
        .indices
        .iter()
        .filter(|i| truth_set.binary_search(i).is_ok())
        .count();
    hits as f64 / truth.k() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MeasurementSet {
        MeasurementSet::new(vec![2.0, 1.0], vec![4.0], 2).unwrap()
    }

    #[test]
    fn topk_on_tiny_instance() {
        let est = recover_support_topk_marginal(&tiny(), 1).unwrap();
        assert_eq!(est.indices, vec![0]);
        assert_eq!(est.scores, vec![16.0, 4.0]);
        assert_eq!(recover_support_topk_marginal(&tiny(), 2).unwrap().indices, vec![0, 1]);
        assert!(recover_support_topk_marginal(&tiny(), 3).is_err());
    }

    #[test]
    fn one_step_full_set_and_errors() {
        let est = recover_support_one_step(&tiny(), 2, 0.05, 0.001).unwrap();
        assert_eq!(est.indices, vec![0, 1]);
        assert_eq!(est.method, SupportMethod::OneStepHwf);
        assert!(recover_support_one_step(&tiny(), 3, 0.05, 0.001).is_err());
    }

    #[test]
    fn fraction_counts_overlap() {
        let truth = SparseSignal::new((0..20).map(|i| if i < 10 { 1.0 } else { 0.0 }).collect()).unwrap();
        let same = SupportEstimate::from_indices(truth.support(), 20).unwrap();
        assert_eq!(recovered_fraction(&same, &truth), 1.0);
        let disjoint = SupportEstimate::from_indices(&(10..20).collect::<Vec<_>>(), 20).unwrap();
        assert_eq!(recovered_fraction(&disjoint, &truth), 0.0);
        let partial = SupportEstimate::from_indices(&[0, 1, 2, 13, 14, 15, 16, 17, 18, 19], 20).unwrap();
        assert!((recovered_fraction(&partial, &truth) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [SupportMethod::OneStepHwf, SupportMethod::TopKMarginal] {
            assert_eq!(m.to_string().parse::<SupportMethod>().unwrap(), m);
        }
    }
}
