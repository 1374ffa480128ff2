//! Explicit block-matrix sandwich for the IPTW ATE stack `θ = (β, μ1, μ0, Δ)`.
//!
//! Bread `Ā_n = (1/n) Σ −ψ̇_i(θ̂)` and meat `B̄_n = (1/n) Σ ψ_i ψ_iᵀ` are
//! assembled in full from their closed-form blocks and the `Δ` diagonal
//! entry of `Ā_n⁻¹ B̄_n Ā_n⁻ᵀ` is returned. This path shares no code with the
//! analytic estimators in the parent module.

use nalgebra::{DMatrix, DVector};

use super::VarianceResult;
use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleBread {
    /// Every block is an empirical average.
    Empirical,
    /// The `(μ1, μ0)` diagonal block is replaced by the 2×2 identity.
    ModelBased,
}

pub fn appendix_oracle(
    d: &Dataset,
    e_hat: &[f64],
    dm: &DesignMatrix,
    mu1: f64,
    mu0: f64,
    bread_kind: OracleBread,
) -> Result<VarianceResult> {
    let n = d.n();
    if e_hat.len() != n || dm.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: e_hat.len() });
    }
    let k = dm.cols();
    let dim = k + 3;
    let (m1, m0, dl) = (k, k + 1, k + 2);
    let nf = n as f64;
    let delta = mu1 - mu0;

    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        let (y, z, e) = (d.y()[i], d.z()[i], e_hat[i]);
        let x = DVector::from_row_slice(dm.row(i));

        // -ψ̇_i
        let mut neg_jac = DMatrix::<f64>::zeros(dim, dim);
        neg_jac.view_mut((0, 0), (k, k)).copy_from(&(&x * x.transpose() * (e * (1.0 - e))));
        let h1 = z * (y - mu1) * (1.0 - e) / e;
        let h0 = -(1.0 - z) * (y - mu0) * e / (1.0 - e);
        neg_jac.view_mut((m1, 0), (1, k)).copy_from(&(x.transpose() * h1));
        neg_jac.view_mut((m0, 0), (1, k)).copy_from(&(x.transpose() * h0));
        neg_jac[(m1, m1)] = z / e;
        neg_jac[(m0, m0)] = (1.0 - z) / (1.0 - e);
        neg_jac[(dl, m1)] = -1.0;
        neg_jac[(dl, m0)] = 1.0;
        neg_jac[(dl, dl)] = 1.0;
        a += neg_jac;

        // ψ_i
        let mut psi = DVector::<f64>::zeros(dim);
        psi.rows_mut(0, k).copy_from(&(&x * (z - e)));
        psi[m1] = z * (y - mu1) / e;
        psi[m0] = (1.0 - z) * (y - mu0) / (1.0 - e);
        psi[dl] = mu1 - mu0 - delta;
        b += &psi * psi.transpose();
    }
    a /= nf;
    b /= nf;
    if bread_kind == OracleBread::ModelBased {
        a[(m1, m1)] = 1.0;
        a[(m0, m0)] = 1.0;
    }

    let a_inv = a.try_inverse().ok_or(Error::SingularBread)?;
    if a_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBread);
    }
    let full = &a_inv * b * a_inv.transpose();
    Ok(VarianceResult::from_sigma(full[(dl, dl)].max(0.0), n))
}

pub fn appendix_oracle_pes(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix, mu1: f64, mu0: f64) -> Result<VarianceResult> {
    appendix_oracle(d, e_hat, dm, mu1, mu0, OracleBread::Empirical)
}

pub fn appendix_oracle_ms(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix, mu1: f64, mu0: f64) -> Result<VarianceResult> {
    appendix_oracle(d, e_hat, dm, mu1, mu0, OracleBread::ModelBased)
}
