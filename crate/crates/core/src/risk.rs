//! The quartic empirical risk `F(x) = (1/4m) Σ ((a_jᵀx)² − y_j)²`, its
//! gradient, and the population-level (`m = ∞`) quantities used as oracles.

use crate::dense::{axpy, dot};
use crate::error::{check_len, Error, Result};
use crate::model::{MeasurementSet, SparseSignal};

/// Scratch buffers for one gradient evaluation, sized to a measurement set.
///
/// The gradient is formed in two streaming passes over the rows of `A`:
/// `z = A·x`, then `Aᵀ r` with `r_j = ((z_j)² − y_j) z_j / m`. The risk at
/// `x` falls out of the first pass and is kept in [`GradientWorkspace::risk`].
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    z: Vec<f64>,
    r: Vec<f64>,
    grad: Vec<f64>,
    risk: f64,
}

impl GradientWorkspace {
    pub fn new(meas: &MeasurementSet) -> Self {
        GradientWorkspace {
            z: vec![0.0; meas.m()],
            r: vec![0.0; meas.m()],
            grad: vec![0.0; meas.n()],
            risk: f64::NAN,
        }
    }

    fn check(&self, meas: &MeasurementSet) -> Result<()> {
        check_len(self.z.len(), meas.m())?;
        check_len(self.grad.len(), meas.n())
    }

    /// First pass: inner products, residual weights and the risk at `x`.
    pub(crate) fn evaluate(&mut self, x: &[f64], meas: &MeasurementSet) -> Result<f64> {
        self.check(meas)?;
        check_len(meas.n(), x.len())?;
        let inv_m = 1.0 / meas.m() as f64;
        let mut sum_sq = 0.0;
        for (((row, &y), z), r) in meas
            .rows()
            .zip(meas.y())
            .zip(self.z.iter_mut())
            .zip(self.r.iter_mut())
        {
            let zj = dot(row, x);
            let res = zj * zj - y;
            sum_sq += res * res;
            *z = zj;
            *r = res * zj * inv_m;
        }
        self.risk = 0.25 * sum_sq * inv_m;
        Ok(self.risk)
    }

    /// Second pass: `∇F = Aᵀ r` from the weights of the last [`evaluate`](Self::evaluate).
    pub(crate) fn gradient_from_weights(&mut self, meas: &MeasurementSet) -> &[f64] {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &r) in meas.rows().zip(&self.r) {
            if r != 0.0 {
                axpy(r, row, &mut self.grad);
            }
        }
        &self.grad
    }

    /// Risk at the point of the last gradient evaluation.
    pub fn risk(&self) -> f64 {
        self.risk
    }

    /// Inner products `a_jᵀx` from the last evaluation.
    pub fn inner_products(&self) -> &[f64] {
        &self.z
    }

    /// Gradient from the last evaluation.
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }
}

/// `F(x) = (1/4m) Σ_j ((a_jᵀx)² − y_j)²`.
pub fn empirical_risk(x: &[f64], meas: &MeasurementSet) -> Result<f64> {
    check_len(meas.n(), x.len())?;
    let sum_sq: f64 = meas
        .rows()
        .zip(meas.y())
        .map(|(row, &y)| {
            let z = dot(row, x);
            let res = z * z - y;
            res * res
        })
        .sum();
    Ok(0.25 * sum_sq / meas.m() as f64)
}

/// `∇F(x) = (1/m) Σ_j ((a_jᵀx)² − y_j)(a_jᵀx) a_j`, written into `ws`.
/// Also leaves `F(x)` in [`GradientWorkspace::risk`].
pub fn empirical_gradient<'w>(
    x: &[f64],
    meas: &MeasurementSet,
    ws: &'w mut GradientWorkspace,
) -> Result<&'w [f64]> {
    ws.evaluate(x, meas)?;
    Ok(ws.gradient_from_weights(meas))
}

/// Gradient of the population risk, `(3‖x‖² − ‖x*‖²)x − 2(xᵀx*)x*`.
pub fn population_gradient(x: &[f64], xstar: &SparseSignal) -> Result<Vec<f64>> {
    check_len(xstar.n(), x.len())?;
    let xs = xstar.values();
    let c = 3.0 * dot(x, x) - xstar.norm() * xstar.norm();
    let overlap = 2.0 * dot(x, xs);
    Ok(x.iter().zip(xs).map(|(xi, si)| c * xi - overlap * si).collect())
}

/// `θ̂ = ((1/m) Σ y_j)^{1/2}`, the estimate of `‖x*‖`.
pub fn estimate_theta(meas: &MeasurementSet) -> f64 {
    (meas.y().iter().sum::<f64>() / meas.m() as f64).sqrt()
}

/// `R_i = (1/m) Σ_j y_j A_ji²` for every coordinate, in one pass over `A`.
pub fn marginal_statistics(meas: &MeasurementSet) -> Vec<f64> {
    let mut stats = vec![0.0; meas.n()];
    for (row, &y) in meas.rows().zip(meas.y()) {
        if y == 0.0 {
            continue;
        }
        for (s, a) in stats.iter_mut().zip(row) {
            *s += y * a * a;
        }
    }
    let inv_m = 1.0 / meas.m() as f64;
    stats.iter_mut().for_each(|s| *s *= inv_m);
    stats
}

/// One step of the non-negative population recursion
/// `x_i ← x_i (1 − 2η[(3‖x‖² − 1)x_i − 2(xᵀx*)x*_i])²`.
///
/// Requires `x ≥ 0`, `x* ≥ 0` and `‖x*‖ = 1`.
pub fn population_hwf_step(x: &[f64], xstar: &SparseSignal, eta: f64) -> Result<Vec<f64>> {
    check_len(xstar.n(), x.len())?;
    if x.iter().any(|v| *v < 0.0) || xstar.values().iter().any(|v| *v < 0.0) {
        return Err(Error::param("population recursion needs non-negative x and x*"));
    }
    if (xstar.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::param("population recursion needs a unit-norm signal"));
    }
    let g = population_gradient(x, xstar)?;
    Ok(x
        .iter()
        .zip(&g)
        .map(|(xi, gi)| {
            let f = 1.0 - 2.0 * eta * gi;
            xi * f * f
        })
        .collect())
}
