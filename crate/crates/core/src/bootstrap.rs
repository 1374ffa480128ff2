//! Bootstrap standard errors: {standard, stratified} resampling crossed with
//! {fixed, re-estimated} propensity scores.
//!
//! Replicate `b` draws from `StreamKey::new(seed).child(b)`, so the vector of
//! replicate estimates depends only on `(seed, plan, data)`, never on how
//! replicates are scheduled across threads. Replicates whose fits fail are
//! dropped and tallied; more than [`MAX_FAILURE_FRACTION`] failures is a hard
//! error.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::estimators::{point_estimate, EstimatorConfig, OutcomePair};
use crate::glm::{fit_logistic_with, SeparationPolicy};
use crate::rng::{StreamKey, StreamRng};

pub const MAX_FAILURE_FRACTION: f64 = 0.10;
pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResampleStrategy {
    /// `n` draws with replacement from all subjects.
    Standard,
    /// `n1` draws from the treated and `n0` from the controls.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PsMode {
    /// Subjects carry their propensity score from the original fit.
    Fixed,
    /// The propensity model is refitted on every replicate.
    Reestimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum OutcomeModelMode {
    /// Subjects carry their original outcome predictions.
    None,
    /// The outcome model is refitted on every replicate.
    #[default]
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub strategy: ResampleStrategy,
    pub ps_mode: PsMode,
    pub outcome_model_mode: OutcomeModelMode,
    pub seed: u64,
}

impl BootstrapPlan {
    pub fn new(replicates: usize, strategy: ResampleStrategy, ps_mode: PsMode, seed: u64) -> Self {
        BootstrapPlan { replicates, strategy, ps_mode, outcome_model_mode: OutcomeModelMode::Refit, seed }
    }

    /// Short label in the usual `stdB-Est` style.
    pub fn label(&self) -> String {
        format!("{}B-{}", self.strategy.short(), self.ps_mode.short())
    }
}

impl ResampleStrategy {
    fn short(self) -> &'static str {
        match self {
            ResampleStrategy::Standard => "std",
            ResampleStrategy::Stratified => "strat",
        }
    }
}

impl PsMode {
    fn short(self) -> &'static str {
        match self {
            PsMode::Fixed => "Fixed",
            PsMode::Reestimated => "Est",
        }
    }
}

impl fmt::Display for ResampleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for OutcomeModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "fixed" => Ok(OutcomeModelMode::None),
            "refit" => Ok(OutcomeModelMode::Refit),
            _ => Err(Error::Config { key: "outcome_model_mode".into(), message: format!("unknown mode `{s}`") }),
        }
    }
}

/// Estimated propensity scores of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub e_hat: Vec<f64>,
    /// The fit tripped the separation check but was kept.
    pub separation_flag: bool,
}

/// Fits propensity scores on a dataset. Bootstrap code only reaches the
/// fitter through this trait.
pub trait PropensityFitter: Sync {
    fn fit(&self, d: &Dataset) -> Result<PropensityFit>;
}

/// Main-effects logistic propensity model on every covariate.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticPropensity {
    pub separation: SeparationPolicy,
}

impl PropensityFitter for LogisticPropensity {
    fn fit(&self, d: &Dataset) -> Result<PropensityFit> {
        let fit = fit_logistic_with(&DesignMatrix::with_intercept(d), d.z(), &self.separation.options())?;
        Ok(PropensityFit { e_hat: fit.fitted, separation_flag: fit.separation_flag })
    }
}

/// Estimates from one bootstrap run plus the failure tally.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    pub estimates: Vec<f64>,
    /// Error kind → number of replicates dropped for it.
    pub failures: BTreeMap<&'static str, usize>,
    pub requested: usize,
    /// Kept replicates whose propensity refit tripped the separation check.
    pub separation_flags: usize,
}

impl BootstrapDistribution {
    pub fn failure_count(&self) -> usize {
        self.failures.values().sum()
    }

    pub fn failure_rate(&self) -> f64 {
        self.failure_count() as f64 / self.requested as f64
    }
}

/// Indices of one bootstrap replicate. Stratified replicates list the
/// treated draws first.
pub fn resample_indices(z: &[f64], strategy: ResampleStrategy, rng: &mut StreamRng) -> Result<Vec<usize>> {
    let n = z.len();
    match strategy {
        ResampleStrategy::Standard => Ok((0..n).map(|_| rng.random_range(0..n)).collect()),
        ResampleStrategy::Stratified => {
            let treated: Vec<usize> = (0..n).filter(|&i| z[i] == 1.0).collect();
            let control: Vec<usize> = (0..n).filter(|&i| z[i] != 1.0).collect();
            if treated.is_empty() {
                return Err(Error::EmptyArm { arm: 1 });
            }
            if control.is_empty() {
                return Err(Error::EmptyArm { arm: 0 });
            }
            let mut idx = Vec::with_capacity(n);
            idx.extend((0..treated.len()).map(|_| treated[rng.random_range(0..treated.len())]));
            idx.extend((0..control.len()).map(|_| control[rng.random_range(0..control.len())]));
            Ok(idx)
        }
    }
}

/// Everything the original-sample analysis hands to the bootstrap.
#[derive(Debug, Clone, Copy)]
pub struct OriginalFit<'a> {
    pub e_hat: &'a [f64],
    /// Needed only for augmented estimators with `OutcomeModelMode::None`.
    pub outcome: Option<&'a OutcomePair>,
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn gather_pair(om: &OutcomePair, idx: &[usize]) -> OutcomePair {
    OutcomePair { m1: gather(&om.m1, idx), m0: gather(&om.m0, idx), fit: om.fit.clone() }
}

/// Point estimate on the subsample `idx` of `d`.
fn replicate_estimate(
    d: &Dataset,
    idx: &[usize],
    ps_mode: PsMode,
    om_mode: OutcomeModelMode,
    cfg: &EstimatorConfig,
    original: &OriginalFit<'_>,
    fitter: &dyn PropensityFitter,
) -> Result<(f64, bool)> {
    let rep = d.select_rows(idx);
    rep.require_both_arms()?;
    let (e_hat, flagged) = match ps_mode {
        PsMode::Fixed => (gather(original.e_hat, idx), false),
        PsMode::Reestimated => {
            let fit = fitter.fit(&rep)?;
            (fit.e_hat, fit.separation_flag)
        }
    };
    let carried;
    let outcome = match (cfg.outcome.is_some(), om_mode, original.outcome) {
        (true, OutcomeModelMode::None, Some(om)) => {
            carried = gather_pair(om, idx);
            Some(&carried)
        }
        _ => None,
    };
    Ok((point_estimate(&rep, &e_hat, cfg, outcome)?, flagged))
}

pub fn bootstrap_distribution(
    d: &Dataset,
    plan: &BootstrapPlan,
    cfg: &EstimatorConfig,
    original: &OriginalFit<'_>,
    fitter: &dyn PropensityFitter,
) -> Result<BootstrapDistribution> {
    if plan.replicates < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: plan.replicates });
    }
    if original.e_hat.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: original.e_hat.len() });
    }
    let root = StreamKey::new(plan.seed);
    let outcomes: Vec<Result<(f64, bool)>> = (0..plan.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = root.child(b as u64).rng();
            let idx = resample_indices(d.z(), plan.strategy, &mut rng)?;
            replicate_estimate(d, &idx, plan.ps_mode, plan.outcome_model_mode, cfg, original, fitter)
        })
        .collect();

    let mut estimates = Vec::with_capacity(plan.replicates);
    let mut failures = BTreeMap::new();
    let mut separation_flags = 0;
    for outcome in outcomes {
        match outcome {
            Ok((v, flagged)) if v.is_finite() => {
                estimates.push(v);
                separation_flags += flagged as usize;
            }
            Ok(_) => *failures.entry("NonFinite").or_insert(0) += 1,
            Err(e) if e.is_replicate_failure() => *failures.entry(e.kind()).or_insert(0) += 1,
            Err(e) => return Err(e),
        }
    }
    let dist = BootstrapDistribution { estimates, failures, requested: plan.replicates, separation_flags };
    let failed = dist.failure_count();
    if failed as f64 > MAX_FAILURE_FRACTION * plan.replicates as f64 {
        return Err(Error::ExcessiveFailures { failures: failed, requested: plan.replicates });
    }
    Ok(dist)
}

/// Sample standard deviation (denominator `len − 1`) of the replicates.
pub fn bootstrap_se(dist: &BootstrapDistribution) -> Result<f64> {
    sample_sd(&dist.estimates)
}

pub fn sample_sd(values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: m });
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (m - 1) as f64).sqrt())
}

/// Leave-one-out estimates on the original sample, for the BCa
/// acceleration. Propensity handling follows `ps_mode`; replicates whose
/// fits fail are skipped.
pub fn jackknife_estimates(
    d: &Dataset,
    ps_mode: PsMode,
    om_mode: OutcomeModelMode,
    cfg: &EstimatorConfig,
    original: &OriginalFit<'_>,
    fitter: &dyn PropensityFitter,
) -> Result<Vec<f64>> {
    let n = d.n();
    let values: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|leave| {
            let idx: Vec<usize> = (0..n).filter(|&i| i != leave).collect();
            replicate_estimate(d, &idx, ps_mode, om_mode, cfg, original, fitter).map(|(v, _)| v)
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for v in values {
        match v {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => {}
            Err(e) if e.is_replicate_failure() => {}
            Err(e) => return Err(e),
        }
    }
    if out.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: out.len() });
    }
    Ok(out)
}
