//! Balancing weights and weighted treatment-effect point estimates.
//!
//! The weight of subject `i` is `ω(ê_i) / (Z_i ê_i + (1 − Z_i)(1 − ê_i))`,
//! where the tilting function `ω` selects the target population: `ω ≡ 1`
//! gives inverse probability weights (ATE), `ω(e) = e(1 − e)` gives overlap
//! weights (ATO). Point estimates are Hájek ratios of weighted sums within
//! each arm.

use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::glm::{fit_logistic_with, predict_with, LogisticFit, SeparationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeightScheme {
    /// `ω(e) = 1`
    Iptw,
    /// `ω(e) = e(1 − e)`
    Overlap,
}

impl WeightScheme {
    #[inline]
    pub fn tilt(self, e: f64) -> f64 {
        match self {
            WeightScheme::Iptw => 1.0,
            WeightScheme::Overlap => e * (1.0 - e),
        }
    }

    /// Balancing weight of one subject.
    #[inline]
    pub fn weight(self, e: f64, z: f64) -> f64 {
        match self {
            WeightScheme::Iptw => {
                if z == 1.0 {
                    1.0 / e
                } else {
                    1.0 / (1.0 - e)
                }
            }
            WeightScheme::Overlap => {
                if z == 1.0 {
                    1.0 - e
                } else {
                    e
                }
            }
        }
    }

    /// Name of the estimand the scheme targets.
    pub fn estimand(self) -> &'static str {
        match self {
            WeightScheme::Iptw => "ATE",
            WeightScheme::Overlap => "ATO",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.estimand())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ate" | "iptw" | "ipw" => Ok(WeightScheme::Iptw),
            "ato" | "overlap" | "ow" => Ok(WeightScheme::Overlap),
            _ => Err(Error::Config { key: "estimand".into(), message: format!("unknown estimand `{s}`") }),
        }
    }
}

/// Positive per-subject balancing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> WeightVector {
        WeightVector(self.0.iter().map(|w| w * c).collect())
    }
}

pub fn check_propensities(e_hat: &[f64]) -> Result<()> {
    match e_hat.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
        Some(row) => Err(Error::DegeneratePropensity { row, value: e_hat[row] }),
        None => Ok(()),
    }
}

pub fn compute_weights(e_hat: &[f64], z: &[f64], scheme: WeightScheme) -> Result<WeightVector> {
    if e_hat.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: e_hat.len() });
    }
    check_propensities(e_hat)?;
    Ok(WeightVector(e_hat.iter().zip(z).map(|(&e, &zi)| scheme.weight(e, zi)).collect()))
}

/// Hájek means `(μ̂1, μ̂0)` of `values` within each arm.
pub fn hajek_means(values: &[f64], z: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    let (mut s1, mut w1, mut s0, mut w0) = (0.0, 0.0, 0.0, 0.0);
    for ((&v, &zi), &wi) in values.iter().zip(z).zip(w) {
        if zi == 1.0 {
            s1 += wi * v;
            w1 += wi;
        } else {
            s0 += wi * v;
            w0 += wi;
        }
    }
    if !(w1 > 0.0) {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if !(w0 > 0.0) {
        return Err(Error::EmptyArm { arm: 0 });
    }
    Ok((s1 / w1, s0 / w0))
}

/// Weighted treated mean minus weighted control mean.
pub fn wate_point(y: &[f64], z: &[f64], w: &WeightVector) -> Result<f64> {
    let (m1, m0) = hajek_means(y, z, w.as_slice())?;
    Ok(m1 - m0)
}

/// How the outcome regression is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OutcomeModelKind {
    /// One logistic model of Y on (1, Z, X).
    #[default]
    Pooled,
    /// Separate logistic models of Y on (1, X) within each arm.
    PerArm,
}

/// Covariate selection and fitting mode of an outcome model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutcomeModelSpec {
    /// Indices into the dataset's covariate columns.
    pub covariates: Vec<usize>,
    pub kind: OutcomeModelKind,
    pub separation: SeparationPolicy,
}

impl OutcomeModelSpec {
    pub fn pooled(covariates: Vec<usize>) -> Self {
        OutcomeModelSpec { covariates, kind: OutcomeModelKind::Pooled, separation: SeparationPolicy::Fail }
    }

    /// Resolves covariate names against a dataset.
    pub fn from_names(d: &Dataset, names: &[&str], kind: OutcomeModelKind) -> Result<Self> {
        let covariates = names.iter().map(|n| d.column_index(n)).collect::<Result<_>>()?;
        Ok(OutcomeModelSpec { covariates, kind, separation: SeparationPolicy::Fail })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeFit {
    Pooled(LogisticFit),
    PerArm { treated: LogisticFit, control: LogisticFit },
}

/// Predicted outcome probabilities with treatment set to 1 and to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePair {
    pub m1: Vec<f64>,
    pub m0: Vec<f64>,
    pub fit: OutcomeFit,
}

/// Design `(1, Z, X_s)` for the pooled outcome model with `Z` set to `z`.
pub fn pooled_outcome_design(d: &Dataset, covariates: &[usize], z: &[f64]) -> DesignMatrix {
    let mut cols: Vec<&[f64]> = vec![z];
    cols.extend(covariates.iter().map(|&j| d.column(j)));
    DesignMatrix::from_columns(d.n(), &cols)
}

pub fn fit_outcome_models(d: &Dataset, spec: &OutcomeModelSpec) -> Result<OutcomePair> {
    let n = d.n();
    let opts = spec.separation.options();
    match spec.kind {
        OutcomeModelKind::Pooled => {
            let fit = fit_logistic_with(&pooled_outcome_design(d, &spec.covariates, d.z()), d.y(), &opts)?;
            let m1 = predict_with(&fit.beta, &pooled_outcome_design(d, &spec.covariates, &vec![1.0; n]))?;
            let m0 = predict_with(&fit.beta, &pooled_outcome_design(d, &spec.covariates, &vec![0.0; n]))?;
            Ok(OutcomePair { m1, m0, fit: OutcomeFit::Pooled(fit) })
        }
        OutcomeModelKind::PerArm => {
            let all = DesignMatrix::with_covariates(d, &spec.covariates);
            let arm_fit = |arm: f64| -> Result<LogisticFit> {
                let rows: Vec<usize> = (0..n).filter(|&i| d.z()[i] == arm).collect();
                if rows.is_empty() {
                    return Err(Error::EmptyArm { arm: arm as u8 });
                }
                let sub = d.select_rows(&rows);
                fit_logistic_with(&DesignMatrix::with_covariates(&sub, &spec.covariates), sub.y(), &opts)
            };
            let treated = arm_fit(1.0)?;
            let control = arm_fit(0.0)?;
            let m1 = predict_with(&treated.beta, &all)?;
            let m0 = predict_with(&control.beta, &all)?;
            Ok(OutcomePair { m1, m0, fit: OutcomeFit::PerArm { treated, control } })
        }
    }
}

/// Outcome-model-augmented weighting estimator: the ω-weighted mean of
/// `m1 − m0` plus Hájek-weighted residual means in each arm.
pub fn augmented_point(y: &[f64], z: &[f64], e_hat: &[f64], scheme: WeightScheme, om: &OutcomePair) -> Result<f64> {
    let w = compute_weights(e_hat, z, scheme)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&e, &m1), &m0) in e_hat.iter().zip(&om.m1).zip(&om.m0) {
        let t = scheme.tilt(e);
        num += t * (m1 - m0);
        den += t;
    }
    let residual: Vec<f64> = y
        .iter()
        .zip(z)
        .enumerate()
        .map(|(i, (&yi, &zi))| yi - if zi == 1.0 { om.m1[i] } else { om.m0[i] })
        .collect();
    let (r1, r0) = hajek_means(&residual, z, w.as_slice())?;
    Ok(num / den + r1 - r0)
}

/// Point estimator configuration: weighting scheme plus optional outcome
/// augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EstimatorConfig {
    pub scheme: WeightScheme,
    pub outcome: Option<OutcomeModelSpec>,
}

impl EstimatorConfig {
    pub fn weighting(scheme: WeightScheme) -> Self {
        EstimatorConfig { scheme, outcome: None }
    }

    pub fn augmented(scheme: WeightScheme, outcome: OutcomeModelSpec) -> Self {
        EstimatorConfig { scheme, outcome: Some(outcome) }
    }
}

/// Point estimate on `d` given propensity scores. When augmented, the
/// outcome model is fitted on `d` unless predictions are supplied.
pub fn point_estimate(d: &Dataset, e_hat: &[f64], cfg: &EstimatorConfig, outcome: Option<&OutcomePair>) -> Result<f64> {
    d.require_both_arms()?;
    match &cfg.outcome {
        None => wate_point(d.y(), d.z(), &compute_weights(e_hat, d.z(), cfg.scheme)?),
        Some(spec) => {
            let fitted;
            let om = match outcome {
                Some(om) => om,
                None => {
                    fitted = fit_outcome_models(d, spec)?;
                    &fitted
                }
            };
            augmented_point(d.y(), d.z(), e_hat, cfg.scheme, om)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let w = compute_weights(&[0.25], &[1.0], WeightScheme::Iptw).unwrap();
        assert_eq!(w.as_slice(), &[4.0]);
        let w = compute_weights(&[0.25], &[0.0], WeightScheme::Overlap).unwrap();
        assert_eq!(w.as_slice(), &[0.25]);
        let w = compute_weights(&[0.25], &[1.0], WeightScheme::Overlap).unwrap();
        assert_eq!(w.as_slice(), &[0.75]);
    }

    #[test]
    fn degenerate_propensity_rejected() {
        for bad in [0.0, 1.0, f64::NAN, -0.1] {
            let err = compute_weights(&[0.5, bad], &[1.0, 0.0], WeightScheme::Iptw).unwrap_err();
            assert!(matches!(err, Error::DegeneratePropensity { row: 1, .. }));
        }
    }

    #[test]
    fn wate_reduces_to_mean_difference() {
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let z = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let w = WeightVector(vec![1.0; 6]);
        assert!((wate_point(&y, &z, &w).unwrap() - 0.25).abs() < 1e-15);
        let y = [1.0; 6];
        assert_eq!(wate_point(&y, &z, &w).unwrap(), 0.0);
    }

    #[test]
    fn wate_empty_arm() {
        let w = WeightVector(vec![1.0; 3]);
        assert!(matches!(wate_point(&[1.0, 0.0, 1.0], &[1.0; 3], &w), Err(Error::EmptyArm { arm: 0 })));
        assert!(matches!(wate_point(&[1.0, 0.0, 1.0], &[0.0; 3], &w), Err(Error::EmptyArm { arm: 1 })));
    }

    #[test]
    fn outcome_model_on_treatment_is_separated() {
        let n = 40;
        let z: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = Dataset::new(z.clone(), z, vec![x], vec!["x".into()]).unwrap();
        let err = fit_outcome_models(&d, &OutcomeModelSpec::pooled(vec![0])).unwrap_err();
        assert!(matches!(err, Error::QuasiSeparation { .. }));
    }
}
