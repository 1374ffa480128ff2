//! Sandwich variance with a central-difference bread.

use nalgebra::{DMatrix, DVector};

use super::VarianceResult;
use crate::error::{Error, Result};

/// Per-subject stacked estimating function `ψ_i(θ)`.
pub trait EstimatingFunction: Sync {
    fn dim(&self) -> usize;
    fn n(&self) -> usize;
    /// Writes `ψ_i(θ)` into `out` (length `dim`).
    fn psi(&self, i: usize, theta: &[f64], out: &mut [f64]);

    fn sum_psi(&self, theta: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.dim()];
        let mut buf = vec![0.0; self.dim()];
        for i in 0..self.n() {
            self.psi(i, theta, &mut buf);
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        total
    }
}

/// Relative step of the central differences: `h_j = STEP · max(1, |θ_j|)`.
pub const STEP: f64 = 1e-5;

/// Sandwich variance of component `target` of `theta_hat`.
///
/// Components with `fixed[j] = true` are treated as known: their rows and
/// columns are dropped from bread and meat before inversion.
pub fn variance_numeric(f: &dyn EstimatingFunction, theta_hat: &[f64], fixed: &[bool], target: usize) -> Result<VarianceResult> {
    let dim = f.dim();
    if theta_hat.len() != dim || fixed.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: theta_hat.len().min(fixed.len()) });
    }
    if fixed[target] {
        return Err(Error::DimensionMismatch { expected: 0, got: 1 });
    }
    let free: Vec<usize> = (0..dim).filter(|&j| !fixed[j]).collect();
    let m = free.len();
    let n = f.n();
    let nf = n as f64;

    // bread: A = -(1/n) dΣψ/dθ over the free block
    let mut bread = DMatrix::<f64>::zeros(m, m);
    let mut theta = theta_hat.to_vec();
    for (c, &j) in free.iter().enumerate() {
        let h = STEP * theta_hat[j].abs().max(1.0);
        theta[j] = theta_hat[j] + h;
        let plus = f.sum_psi(&theta);
        theta[j] = theta_hat[j] - h;
        let minus = f.sum_psi(&theta);
        theta[j] = theta_hat[j];
        for (r, &i) in free.iter().enumerate() {
            let v = -(plus[i] - minus[i]) / (2.0 * h * nf);
            if !v.is_finite() {
                return Err(Error::JacobianNonFinite { row: i, col: j });
            }
            bread[(r, c)] = v;
        }
    }

    // meat: (1/n) Σ ψ_i ψ_iᵀ over the free block
    let mut meat = DMatrix::<f64>::zeros(m, m);
    let mut buf = vec![0.0; dim];
    let mut sub = DVector::<f64>::zeros(m);
    for i in 0..n {
        f.psi(i, theta_hat, &mut buf);
        for (r, &j) in free.iter().enumerate() {
            sub[r] = buf[j];
        }
        meat.ger(1.0 / nf, &sub, &sub, 1.0);
    }

    // only the target row of A⁻¹ is needed: solve Aᵀ r = e_target
    let t = free.iter().position(|&j| j == target).expect("target is free");
    let mut unit = DVector::<f64>::zeros(m);
    unit[t] = 1.0;
    let row = bread.transpose().lu().solve(&unit).ok_or(Error::SingularBread)?;
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBread);
    }
    let sigma = (row.transpose() * &meat * &row)[(0, 0)];
    Ok(VarianceResult::from_sigma(sigma.max(0.0), n))
}
