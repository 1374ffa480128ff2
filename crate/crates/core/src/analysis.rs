//! Method specifications and per-sample analysis.
//!
//! A [`MethodSpec`] combines a weighting scheme, an optional outcome
//! augmentation, a variance estimator and an interval type. [`analyze_sample`]
//! evaluates a list of specs on one dataset, sharing the propensity fit,
//! outcome fits, bootstrap distributions and jackknife values between specs
//! that need the same intermediate.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::bootstrap::{
    bootstrap_distribution, bootstrap_se, jackknife_estimates, BootstrapDistribution, BootstrapPlan, LogisticPropensity,
    OriginalFit, OutcomeModelMode, PropensityFitter, PsMode, ResampleStrategy,
};
use crate::ci::{ci_basic, ci_bca, ci_percentile, ci_wald, CiMethod, ConfidenceInterval};
use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::estimators::{
    augmented_point, compute_weights, fit_outcome_models, hajek_means, wate_point, EstimatorConfig, OutcomeModelKind,
    OutcomeModelSpec, OutcomePair, WeightScheme,
};
use crate::glm::{fit_logistic_with, LogisticFit, SeparationPolicy};
use crate::rng::StreamKey;
use crate::sandwich::{build_stack, variance_fixed, variance_ms_ate, variance_pes_ate, StackInputs};

/// Covariates of the deliberately misspecified outcome model.
pub const MISSPECIFIED_COVARIATES: [&str; 5] = ["x1", "x2", "x3", "x6", "x10"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Augmentation {
    #[default]
    None,
    /// Outcome model on every covariate.
    Correct,
    /// Outcome model on [`MISSPECIFIED_COVARIATES`].
    Misspecified,
    /// Outcome model on the named covariates.
    Custom(Vec<String>),
}

impl Augmentation {
    pub fn is_augmented(&self) -> bool {
        *self != Augmentation::None
    }

    fn tag(&self) -> String {
        match self {
            Augmentation::None => String::new(),
            Augmentation::Correct => "aipw-".into(),
            Augmentation::Misspecified => "aipw_mis-".into(),
            Augmentation::Custom(c) => format!("aipw[{}]-", c.join("+")),
        }
    }

    /// Outcome model spec resolved against `d`.
    pub fn resolve(
        &self,
        d: &Dataset,
        kind: OutcomeModelKind,
        separation: SeparationPolicy,
    ) -> Result<Option<OutcomeModelSpec>> {
        match self {
            Augmentation::None => Ok(None),
            Augmentation::Correct => Ok(Some(OutcomeModelSpec::pooled((0..d.p()).collect()))),
            Augmentation::Misspecified => OutcomeModelSpec::from_names(d, &MISSPECIFIED_COVARIATES, kind).map(Some),
            Augmentation::Custom(names) => {
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                OutcomeModelSpec::from_names(d, &names, kind).map(Some)
            }
        }
        .map(|spec| {
            spec.map(|mut s| {
                s.kind = kind;
                s.separation = separation;
                s
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarianceMethod {
    /// Sandwich with propensity scores treated as known.
    Fs,
    /// Model-based analytic sandwich (IPTW ATE only).
    Ms,
    /// Purely empirical analytic sandwich (IPTW ATE only).
    Pes,
    /// Sandwich with finite-difference bread.
    Ns,
    Boot { strategy: ResampleStrategy, ps_mode: PsMode },
}

impl VarianceMethod {
    pub const ALL: [VarianceMethod; 8] = [
        VarianceMethod::Fs,
        VarianceMethod::Ms,
        VarianceMethod::Pes,
        VarianceMethod::Ns,
        VarianceMethod::Boot { strategy: ResampleStrategy::Standard, ps_mode: PsMode::Fixed },
        VarianceMethod::Boot { strategy: ResampleStrategy::Stratified, ps_mode: PsMode::Fixed },
        VarianceMethod::Boot { strategy: ResampleStrategy::Standard, ps_mode: PsMode::Reestimated },
        VarianceMethod::Boot { strategy: ResampleStrategy::Stratified, ps_mode: PsMode::Reestimated },
    ];

    pub fn name(self) -> &'static str {
        use PsMode::*;
        use ResampleStrategy::*;
        match self {
            VarianceMethod::Fs => "fs",
            VarianceMethod::Ms => "ms",
            VarianceMethod::Pes => "pes",
            VarianceMethod::Ns => "ns",
            VarianceMethod::Boot { strategy: Standard, ps_mode: Fixed } => "boot-std-fixed",
            VarianceMethod::Boot { strategy: Stratified, ps_mode: Fixed } => "boot-strat-fixed",
            VarianceMethod::Boot { strategy: Standard, ps_mode: Reestimated } => "boot-std-est",
            VarianceMethod::Boot { strategy: Stratified, ps_mode: Reestimated } => "boot-strat-est",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            VarianceMethod::Fs => "sandwich treating propensity scores as fixed",
            VarianceMethod::Ms => "model-based analytic sandwich (ATE, unaugmented)",
            VarianceMethod::Pes => "purely empirical analytic sandwich (ATE, unaugmented)",
            VarianceMethod::Ns => "sandwich with numeric-derivative bread",
            VarianceMethod::Boot { .. } => "bootstrap standard deviation of replicate estimates",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(self, VarianceMethod::Boot { .. })
    }
}

impl fmt::Display for VarianceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VarianceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        VarianceMethod::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::Config { key: "variance".into(), message: format!("unknown variance method `{s}`") })
    }
}

/// One estimation method as evaluated in reports and simulations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub scheme: WeightScheme,
    pub augmentation: Augmentation,
    pub variance: VarianceMethod,
    pub ci: CiMethod,
}

impl MethodSpec {
    pub fn new(scheme: WeightScheme, augmentation: Augmentation, variance: VarianceMethod, ci: CiMethod) -> Result<Self> {
        let spec = MethodSpec { scheme, augmentation, variance, ci };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plain(scheme: WeightScheme, variance: VarianceMethod, ci: CiMethod) -> Self {
        MethodSpec { scheme, augmentation: Augmentation::None, variance, ci }
    }

    /// Rejects interval types that need a bootstrap distribution when the
    /// variance method has none, and analytic sandwiches outside their scope.
    pub fn validate(&self) -> Result<()> {
        if self.ci.needs_bootstrap() && !self.variance.is_bootstrap() {
            return Err(Error::Config {
                key: "ci".into(),
                message: format!("`{}` intervals need a bootstrap variance method, got `{}`", self.ci, self.variance),
            });
        }
        if matches!(self.variance, VarianceMethod::Ms | VarianceMethod::Pes)
            && (self.scheme != WeightScheme::Iptw || self.augmentation.is_augmented())
        {
            return Err(self.unsupported());
        }
        Ok(())
    }

    fn unsupported(&self) -> Error {
        let target = if self.augmentation.is_augmented() {
            format!("augmented {}", self.scheme.estimand())
        } else {
            self.scheme.estimand().to_string()
        };
        Error::Unsupported { method: self.variance.name().to_string(), target }
    }

    /// Label such as `boot-std-est:pct` or `aipw-ns:wald`.
    pub fn label(&self) -> String {
        format!("{}{}:{}", self.augmentation.tag(), self.variance, self.ci)
    }

    /// Parses `variance[:ci]` with an optional `aipw-` or `aipw_mis-` prefix.
    /// The interval defaults to Wald.
    pub fn parse(scheme: WeightScheme, s: &str) -> Result<Self> {
        let (aug, rest) = if let Some(r) = s.strip_prefix("aipw_mis-") {
            (Augmentation::Misspecified, r)
        } else if let Some(r) = s.strip_prefix("aipw-") {
            (Augmentation::Correct, r)
        } else {
            (Augmentation::None, s)
        };
        let (var, ci) = match rest.split_once(':') {
            Some((v, c)) => (v.parse()?, c.parse()?),
            None => (rest.parse()?, CiMethod::Wald),
        };
        MethodSpec::new(scheme, aug, var, ci)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub level: f64,
    pub outcome_model_mode: OutcomeModelMode,
    pub outcome_model_kind: OutcomeModelKind,
    /// Applies to propensity and outcome fits, including bootstrap refits.
    pub separation: SeparationPolicy,
}

impl AnalysisSettings {
    pub fn new(bootstrap_reps: usize, seed: u64) -> Self {
        AnalysisSettings {
            bootstrap_reps,
            seed,
            level: crate::ci::DEFAULT_LEVEL,
            outcome_model_mode: OutcomeModelMode::Refit,
            outcome_model_kind: OutcomeModelKind::Pooled,
            separation: SeparationPolicy::Flag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEstimate {
    pub method: MethodSpec,
    pub point: f64,
    pub se: f64,
    pub ci: ConfidenceInterval,
    /// Failed and requested bootstrap replicates, for bootstrap methods.
    pub bootstrap_failures: Option<(usize, usize)>,
    /// Kept bootstrap replicates whose propensity refit was flagged as
    /// separated.
    pub bootstrap_separation_flags: Option<usize>,
    /// The propensity fit on the analyzed sample was flagged as separated.
    pub ps_separation_flag: bool,
}

/// Stream index of a bootstrap plan, so every spec using the same plan sees
/// the same replicates.
fn plan_stream(strategy: ResampleStrategy, ps_mode: PsMode) -> u64 {
    let s = match strategy {
        ResampleStrategy::Standard => 0,
        ResampleStrategy::Stratified => 1,
    };
    let p = match ps_mode {
        PsMode::Fixed => 0,
        PsMode::Reestimated => 1,
    };
    2 * s + p
}

type ConfigKey = (WeightScheme, Augmentation);

struct SampleContext<'a> {
    d: &'a Dataset,
    settings: &'a AnalysisSettings,
    fitter: &'a dyn PropensityFitter,
    ps_design: DesignMatrix,
    ps_fit: LogisticFit,
    configs: HashMap<ConfigKey, (EstimatorConfig, Option<OutcomePair>)>,
    points: HashMap<ConfigKey, f64>,
    boots: HashMap<(ConfigKey, ResampleStrategy, PsMode), std::result::Result<BootstrapDistribution, (usize, usize)>>,
    jack: HashMap<(ConfigKey, PsMode), Vec<f64>>,
}

impl<'a> SampleContext<'a> {
    fn config(&mut self, key: &ConfigKey) -> Result<()> {
        if self.configs.contains_key(key) {
            return Ok(());
        }
        let outcome = key.1.resolve(self.d, self.settings.outcome_model_kind, self.settings.separation)?;
        let pair = match &outcome {
            Some(spec) => Some(fit_outcome_models(self.d, spec)?),
            None => None,
        };
        let cfg = EstimatorConfig { scheme: key.0, outcome };
        self.configs.insert(key.clone(), (cfg, pair));
        Ok(())
    }

    fn point(&mut self, key: &ConfigKey) -> Result<f64> {
        if let Some(&p) = self.points.get(key) {
            return Ok(p);
        }
        self.config(key)?;
        let (cfg, pair) = &self.configs[key];
        let (y, z, e) = (self.d.y(), self.d.z(), self.ps_fit.fitted.as_slice());
        let p = match pair {
            None => wate_point(y, z, &compute_weights(e, z, cfg.scheme)?)?,
            Some(om) => augmented_point(y, z, e, cfg.scheme, om)?,
        };
        self.points.insert(key.clone(), p);
        Ok(p)
    }

    fn bootstrap(&mut self, key: &ConfigKey, strategy: ResampleStrategy, ps_mode: PsMode) -> Result<&BootstrapDistribution> {
        let bkey = (key.clone(), strategy, ps_mode);
        if !self.boots.contains_key(&bkey) {
            self.config(key)?;
            let (cfg, pair) = &self.configs[key];
            let plan = BootstrapPlan {
                replicates: self.settings.bootstrap_reps,
                strategy,
                ps_mode,
                outcome_model_mode: self.settings.outcome_model_mode,
                seed: StreamKey::new(self.settings.seed).child(plan_stream(strategy, ps_mode)).value(),
            };
            let original = OriginalFit { e_hat: &self.ps_fit.fitted, outcome: pair.as_ref() };
            let entry = match bootstrap_distribution(self.d, &plan, cfg, &original, self.fitter) {
                Ok(dist) => Ok(dist),
                Err(Error::ExcessiveFailures { failures, requested }) => Err((failures, requested)),
                Err(e) => return Err(e),
            };
            self.boots.insert(bkey.clone(), entry);
        }
        match &self.boots[&bkey] {
            Ok(dist) => Ok(dist),
            &Err((failures, requested)) => Err(Error::ExcessiveFailures { failures, requested }),
        }
    }

    fn jackknife(&mut self, key: &ConfigKey, ps_mode: PsMode) -> Result<&[f64]> {
        let jkey = (key.clone(), ps_mode);
        if !self.jack.contains_key(&jkey) {
            self.config(key)?;
            let (cfg, pair) = &self.configs[key];
            let original = OriginalFit { e_hat: &self.ps_fit.fitted, outcome: pair.as_ref() };
            let values =
                jackknife_estimates(self.d, ps_mode, self.settings.outcome_model_mode, cfg, &original, self.fitter)?;
            self.jack.insert(jkey.clone(), values);
        }
        Ok(&self.jack[&jkey])
    }

    fn estimate(&mut self, spec: &MethodSpec) -> Result<MethodEstimate> {
        spec.validate()?;
        let key: ConfigKey = (spec.scheme, spec.augmentation.clone());
        let point = self.point(&key)?;
        let level = self.settings.level;
        let d = self.d;
        let e_hat = self.ps_fit.fitted.clone();

        let (se, boot, boot_flags) = match spec.variance {
            VarianceMethod::Fs | VarianceMethod::Ns => {
                let ps_fixed = spec.variance == VarianceMethod::Fs;
                let (cfg, pair) = &self.configs[&key];
                match (&cfg.outcome, pair) {
                    (None, _) if ps_fixed => {
                        (variance_fixed(d, &compute_weights(&e_hat, d.z(), spec.scheme)?)?.se, None, None)
                    }
                    (outcome, pair) => {
                        let inputs = StackInputs {
                            data: d,
                            ps_design: &self.ps_design,
                            ps_fit: &self.ps_fit,
                            outcome: outcome.as_ref().zip(pair.as_ref()),
                        };
                        (build_stack(spec.scheme, ps_fixed, inputs)?.variance()?.se, None, None)
                    }
                }
            }
            VarianceMethod::Ms | VarianceMethod::Pes => {
                let w = compute_weights(&e_hat, d.z(), spec.scheme)?;
                let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice())?;
                let v = if spec.variance == VarianceMethod::Ms {
                    variance_ms_ate(d, &e_hat, &self.ps_design, mu1, mu0)?
                } else {
                    variance_pes_ate(d, &e_hat, &self.ps_design, mu1, mu0)?
                };
                (v.se, None, None)
            }
            VarianceMethod::Boot { strategy, ps_mode } => {
                let dist = self.bootstrap(&key, strategy, ps_mode)?;
                (bootstrap_se(dist)?, Some((dist.failure_count(), dist.requested)), Some(dist.separation_flags))
            }
        };

        let ci = match (spec.ci, spec.variance) {
            (CiMethod::Wald, _) => ci_wald(point, se, level)?,
            (CiMethod::Percentile, VarianceMethod::Boot { strategy, ps_mode }) => {
                ci_percentile(self.bootstrap(&key, strategy, ps_mode)?, level)?
            }
            (CiMethod::Basic, VarianceMethod::Boot { strategy, ps_mode }) => {
                ci_basic(point, self.bootstrap(&key, strategy, ps_mode)?, level)?
            }
            (CiMethod::Bca, VarianceMethod::Boot { strategy, ps_mode }) => {
                let jack = self.jackknife(&key, ps_mode)?.to_vec();
                ci_bca(point, self.bootstrap(&key, strategy, ps_mode)?, &jack, level)?
            }
            _ => unreachable!("validated above"),
        };
        Ok(MethodEstimate {
            method: spec.clone(),
            point,
            se,
            ci,
            bootstrap_failures: boot,
            bootstrap_separation_flags: boot_flags,
            ps_separation_flag: self.ps_fit.separation_flag,
        })
    }
}

/// Evaluates every method on `d`. The propensity model (intercept plus all
/// covariates) is fitted once; its failure fails every method. Other errors
/// are reported per method.
pub fn analyze_sample(d: &Dataset, methods: &[MethodSpec], settings: &AnalysisSettings) -> Result<Vec<Result<MethodEstimate>>> {
    analyze_sample_with(d, methods, settings, &LogisticPropensity { separation: settings.separation })
}

pub fn analyze_sample_with(
    d: &Dataset,
    methods: &[MethodSpec],
    settings: &AnalysisSettings,
    fitter: &dyn PropensityFitter,
) -> Result<Vec<Result<MethodEstimate>>> {
    d.require_both_arms()?;
    let ps_design = DesignMatrix::with_intercept(d);
    let ps_fit = fit_logistic_with(&ps_design, d.z(), &settings.separation.options())?;
    let mut ctx = SampleContext {
        d,
        settings,
        fitter,
        ps_design,
        ps_fit,
        configs: HashMap::new(),
        points: HashMap::new(),
        boots: HashMap::new(),
        jack: HashMap::new(),
    };
    Ok(methods.iter().map(|m| ctx.estimate(m)).collect())
}
