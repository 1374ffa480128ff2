//! Asymptotic (sandwich) variance estimators.
//!
//! Three analytic forms for the inverse-probability-weighted ATE:
//!
//! * model-based sandwich (MS): the outcome-mean block of the bread is
//!   replaced by its expectation under a correct propensity model;
//! * purely empirical sandwich (PES): every bread block is an empirical
//!   average, so the inverse-sum-of-weights normalizations appear in both
//!   the main terms and the propensity correction;
//! * fixed sandwich (FS): propensity scores treated as known constants, no
//!   correction term. Works for any weight scheme.
//!
//! [`stack`] builds stacked estimating functions for ATE/ATO, plain or
//! augmented, and [`numeric`] turns any such stack into a sandwich variance
//! with a finite-difference bread (NS). [`oracle`] assembles the full bread
//! and meat matrices of the ATE stack explicitly and is kept as an
//! independent check on the analytic forms.
//!
//! Every estimator reports the per-observation asymptotic variance `sigma`
//! together with `variance = sigma / n` and `se = sqrt(variance)`.

pub mod numeric;
pub mod oracle;
pub mod stack;

pub use numeric::{variance_numeric, EstimatingFunction};
pub use oracle::{appendix_oracle, appendix_oracle_ms, appendix_oracle_pes, OracleBread};
pub use stack::{build_stack, StackInputs, StackSpec, WeightingStack};

use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::estimators::{hajek_means, WeightVector};
use crate::linalg::{dot, spd_solve};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceResult {
    /// Per-observation asymptotic variance.
    pub sigma: f64,
    pub variance: f64,
    pub se: f64,
}

impl VarianceResult {
    pub fn from_sigma(sigma: f64, n: usize) -> Self {
        debug_assert!(sigma >= 0.0 || sigma.is_nan(), "negative sandwich variance {sigma}");
        let variance = sigma / n as f64;
        VarianceResult { sigma, variance, se: variance.sqrt() }
    }
}

fn check_inputs(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix) -> Result<()> {
    if e_hat.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: e_hat.len() });
    }
    if dm.rows() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: dm.rows() });
    }
    crate::estimators::check_propensities(e_hat)?;
    d.require_both_arms()
}

/// Shared body of MS and PES. With `normalized`, treated and control terms
/// are divided by the mean inverse weights `(1/n) Σ Z/ê` and
/// `(1/n) Σ (1−Z)/(1−ê)`.
fn ate_sandwich(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix, mu1: f64, mu0: f64, normalized: bool) -> Result<VarianceResult> {
    check_inputs(d, e_hat, dm)?;
    let n = d.n();
    let nf = n as f64;
    let k = dm.cols();
    let (y, z) = (d.y(), d.z());

    let (c1, c0) = if normalized {
        let s1: f64 = z.iter().zip(e_hat).map(|(&zi, &e)| zi / e).sum::<f64>() / nf;
        let s0: f64 = z.iter().zip(e_hat).map(|(&zi, &e)| (1.0 - zi) / (1.0 - e)).sum::<f64>() / nf;
        (1.0 / s1, 1.0 / s0)
    } else {
        (1.0, 1.0)
    };

    let mut info = vec![0.0; k * k];
    let mut h = vec![0.0; k];
    for (i, row) in dm.iter_rows().enumerate() {
        let e = e_hat[i];
        let v = e * (1.0 - e) / nf;
        for a in 0..k {
            for b in 0..=a {
                info[a * k + b] += v * row[a] * row[b];
            }
        }
        let coef = c1 * z[i] * (y[i] - mu1) * (1.0 - e) / e + c0 * (1.0 - z[i]) * (y[i] - mu0) * e / (1.0 - e);
        for a in 0..k {
            h[a] += coef * row[a] / nf;
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[b * k + a] = info[a * k + b];
        }
    }
    let g = spd_solve(&info, &h).ok_or(Error::SingularInformation)?;

    let sigma = dm
        .iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let e = e_hat[i];
            let phi = c1 * z[i] * (y[i] - mu1) / e - c0 * (1.0 - z[i]) * (y[i] - mu0) / (1.0 - e) - (z[i] - e) * dot(&g, row);
            phi * phi
        })
        .sum::<f64>()
        / nf;
    Ok(VarianceResult::from_sigma(sigma, n))
}

/// Model-based sandwich for the IPTW ATE.
pub fn variance_ms_ate(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix, mu1: f64, mu0: f64) -> Result<VarianceResult> {
    ate_sandwich(d, e_hat, dm, mu1, mu0, false)
}

/// Purely empirical sandwich for the IPTW ATE.
pub fn variance_pes_ate(d: &Dataset, e_hat: &[f64], dm: &DesignMatrix, mu1: f64, mu0: f64) -> Result<VarianceResult> {
    ate_sandwich(d, e_hat, dm, mu1, mu0, true)
}

/// Fixed-propensity sandwich: mean squared normalized Hájek influence terms.
pub fn variance_fixed(d: &Dataset, w: &WeightVector) -> Result<VarianceResult> {
    let (y, z) = (d.y(), d.z());
    let w = w.as_slice();
    if w.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: w.len() });
    }
    let (mu1, mu0) = hajek_means(y, z, w)?;
    let nf = d.n() as f64;
    let s1 = z.iter().zip(w).map(|(&zi, &wi)| zi * wi).sum::<f64>() / nf;
    let s0 = z.iter().zip(w).map(|(&zi, &wi)| (1.0 - zi) * wi).sum::<f64>() / nf;
    let sigma = (0..d.n())
        .map(|i| {
            let phi = z[i] * w[i] * (y[i] - mu1) / s1 - (1.0 - z[i]) * w[i] * (y[i] - mu0) / s0;
            phi * phi
        })
        .sum::<f64>()
        / nf;
    Ok(VarianceResult::from_sigma(sigma, d.n()))
}
