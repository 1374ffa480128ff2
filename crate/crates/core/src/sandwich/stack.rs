//! Stacked estimating functions for weighting estimators.
//!
//! Parameter layout, in order:
//!
//! 1. propensity coefficients `β` (score `(Z − e) X`);
//! 2. outcome coefficients `α` when augmented: pooled `(α0, α_z, α_x)` for
//!    `Y ~ (1, Z, X_s)`, or per arm `α1` then `α0` for `Y ~ (1, X_s)`;
//! 3. plain: `μ1, μ0` with `Z W (Y − μ1)` and `(1 − Z) W (Y − μ0)`;
//!    augmented: `τ, r1, r0` with `ω(e)(m1 − m0 − τ)`,
//!    `Z W (Y − m1 − r1)` and `(1 − Z) W (Y − m0 − r0)`;
//! 4. `Δ` last, with `μ1 − μ0 − Δ` or `τ + r1 − r0 − Δ`.
//!
//! Weights `W` and tilt `ω` are recomputed from `β` on every evaluation so
//! the finite-difference bread captures the propensity dependence.

use super::numeric::{variance_numeric, EstimatingFunction};
use super::VarianceResult;
use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::estimators::{hajek_means, OutcomeFit, OutcomeModelKind, OutcomeModelSpec, OutcomePair, WeightScheme};
use crate::glm::LogisticFit;
use crate::linalg::{dot, expit};

/// Residual tolerance on `Σ_i ψ_i(θ̂)` for free components.
pub const SOLUTION_TOLERANCE: f64 = 1e-6;

struct OutcomeBlock {
    kind: OutcomeModelKind,
    /// `(1, X_s)` rows.
    design: DesignMatrix,
}

pub struct WeightingStack<'a> {
    y: &'a [f64],
    z: &'a [f64],
    ps_design: &'a DesignMatrix,
    scheme: WeightScheme,
    outcome: Option<OutcomeBlock>,
    n_beta: usize,
    n_alpha: usize,
}

impl<'a> WeightingStack<'a> {
    pub fn augmented(&self) -> bool {
        self.outcome.is_some()
    }

    /// Outcome predictions `(m1, m0)` at coefficients `alpha`.
    fn predictions(&self, block: &OutcomeBlock, i: usize, alpha: &[f64]) -> (f64, f64) {
        let u = block.design.row(i);
        match block.kind {
            OutcomeModelKind::Pooled => {
                // alpha = (α0, α_z, α_x...), u = (1, x...)
                let base = alpha[0] + dot(&u[1..], &alpha[2..]);
                (expit(base + alpha[1]), expit(base))
            }
            OutcomeModelKind::PerArm => {
                let k = u.len();
                (expit(dot(u, &alpha[..k])), expit(dot(u, &alpha[k..])))
            }
        }
    }
}

impl EstimatingFunction for WeightingStack<'_> {
    fn dim(&self) -> usize {
        self.n_beta + self.n_alpha + if self.augmented() { 4 } else { 3 }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn psi(&self, i: usize, theta: &[f64], out: &mut [f64]) {
        let (y, z) = (self.y[i], self.z[i]);
        let x = self.ps_design.row(i);
        let beta = &theta[..self.n_beta];
        let e = expit(dot(x, beta));
        for (o, xv) in out[..self.n_beta].iter_mut().zip(x) {
            *o = (z - e) * xv;
        }
        let w = self.scheme.weight(e, z);
        let rest = self.n_beta + self.n_alpha;

        match &self.outcome {
            None => {
                let (mu1, mu0, delta) = (theta[rest], theta[rest + 1], theta[rest + 2]);
                out[rest] = z * w * (y - mu1);
                out[rest + 1] = (1.0 - z) * w * (y - mu0);
                out[rest + 2] = mu1 - mu0 - delta;
            }
            Some(block) => {
                let alpha = &theta[self.n_beta..rest];
                let (m1, m0) = self.predictions(block, i, alpha);
                let u = block.design.row(i);
                let a = &mut out[self.n_beta..rest];
                match block.kind {
                    OutcomeModelKind::Pooled => {
                        let r = y - if z == 1.0 { m1 } else { m0 };
                        a[0] = r;
                        a[1] = r * z;
                        for (slot, uv) in a[2..].iter_mut().zip(&u[1..]) {
                            *slot = r * uv;
                        }
                    }
                    OutcomeModelKind::PerArm => {
                        let k = u.len();
                        for j in 0..k {
                            a[j] = z * (y - m1) * u[j];
                            a[k + j] = (1.0 - z) * (y - m0) * u[j];
                        }
                    }
                }
                let (tau, r1, r0, delta) = (theta[rest], theta[rest + 1], theta[rest + 2], theta[rest + 3]);
                out[rest] = self.scheme.tilt(e) * (m1 - m0 - tau);
                out[rest + 1] = z * w * (y - m1 - r1);
                out[rest + 2] = (1.0 - z) * w * (y - m0 - r0);
                out[rest + 3] = tau + r1 - r0 - delta;
            }
        }
    }
}

/// Stack plus its solution and the components held fixed.
pub struct StackSpec<'a> {
    pub function: WeightingStack<'a>,
    pub theta_hat: Vec<f64>,
    pub fixed_mask: Vec<bool>,
}

impl StackSpec<'_> {
    pub fn delta_index(&self) -> usize {
        self.theta_hat.len() - 1
    }

    pub fn point(&self) -> f64 {
        self.theta_hat[self.delta_index()]
    }

    /// Numeric sandwich variance of the effect estimate.
    pub fn variance(&self) -> Result<VarianceResult> {
        variance_numeric(&self.function, &self.theta_hat, &self.fixed_mask, self.delta_index())
    }

    /// `Σ_i ψ_i(θ̂)`.
    pub fn residuals(&self) -> Vec<f64> {
        self.function.sum_psi(&self.theta_hat)
    }
}

/// Fitted inputs of a stack. `ps_fit` must come from `ps_design` and the
/// outcome pair (when present) from `fit_outcome_models` on `data`.
pub struct StackInputs<'a> {
    pub data: &'a Dataset,
    pub ps_design: &'a DesignMatrix,
    pub ps_fit: &'a LogisticFit,
    pub outcome: Option<(&'a OutcomeModelSpec, &'a OutcomePair)>,
}

/// Builds the stack for the given weighting scheme and evaluates its
/// solution `θ̂`. With `ps_fixed`, the `β` block is masked.
pub fn build_stack<'a>(scheme: WeightScheme, ps_fixed: bool, inputs: StackInputs<'a>) -> Result<StackSpec<'a>> {
    let d = inputs.data;
    let (y, z) = (d.y(), d.z());
    let e_hat = &inputs.ps_fit.fitted;
    if inputs.ps_design.rows() != d.n() || e_hat.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: e_hat.len() });
    }
    if inputs.ps_fit.beta.len() != inputs.ps_design.cols() {
        return Err(Error::DimensionMismatch { expected: inputs.ps_design.cols(), got: inputs.ps_fit.beta.len() });
    }
    crate::estimators::check_propensities(e_hat)?;
    let w: Vec<f64> = e_hat.iter().zip(z).map(|(&e, &zi)| scheme.weight(e, zi)).collect();

    let mut theta = inputs.ps_fit.beta.clone();
    let n_beta = theta.len();

    let (outcome, n_alpha) = match inputs.outcome {
        None => {
            let (mu1, mu0) = hajek_means(y, z, &w)?;
            theta.extend([mu1, mu0, mu1 - mu0]);
            (None, 0)
        }
        Some((spec, om)) => {
            let alpha: Vec<f64> = match (&om.fit, spec.kind) {
                (OutcomeFit::Pooled(f), OutcomeModelKind::Pooled) => f.beta.clone(),
                (OutcomeFit::PerArm { treated, control }, OutcomeModelKind::PerArm) => {
                    treated.beta.iter().chain(&control.beta).copied().collect()
                }
                _ => return Err(Error::DimensionMismatch { expected: 0, got: 1 }),
            };
            let n_alpha = alpha.len();
            theta.extend(alpha);

            let (mut num, mut den) = (0.0, 0.0);
            for ((&e, &m1), &m0) in e_hat.iter().zip(&om.m1).zip(&om.m0) {
                num += scheme.tilt(e) * (m1 - m0);
                den += scheme.tilt(e);
            }
            let tau = num / den;
            let residual: Vec<f64> = (0..d.n()).map(|i| y[i] - if z[i] == 1.0 { om.m1[i] } else { om.m0[i] }).collect();
            let (r1, r0) = hajek_means(&residual, z, &w)?;
            theta.extend([tau, r1, r0, tau + r1 - r0]);
            let block = OutcomeBlock { kind: spec.kind, design: DesignMatrix::with_covariates(d, &spec.covariates) };
            (Some(block), n_alpha)
        }
    };

    let mut fixed_mask = vec![false; theta.len()];
    if ps_fixed {
        fixed_mask[..n_beta].iter_mut().for_each(|m| *m = true);
    }
    let spec = StackSpec {
        function: WeightingStack { y, z, ps_design: inputs.ps_design, scheme, outcome, n_beta, n_alpha },
        theta_hat: theta,
        fixed_mask,
    };
    for (component, r) in spec.residuals().into_iter().enumerate() {
        if !spec.fixed_mask[component] && !(r.abs() < SOLUTION_TOLERANCE) {
            return Err(Error::StackNotSolved { component, residual: r });
        }
    }
    Ok(spec)
}
