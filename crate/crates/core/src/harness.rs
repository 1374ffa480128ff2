//! Monte Carlo experiment runner.
//!
//! Replication `r` of scenario `s` draws everything from
//! `StreamKey::new(master).child(s).child(r)`: child 0 drives the stratified
//! subsample and child 1 seeds the bootstrap plans. Replications run in
//! parallel and are reduced in index order, so output files depend only on
//! the master seed and the configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{analyze_sample, AnalysisSettings, MethodEstimate, MethodSpec, VarianceMethod};
use crate::bootstrap::OutcomeModelMode;
use crate::ci::{normal_quantile, CiMethod};
use crate::data::Dataset;
use crate::dgp::{
    build_population, load_population, save_population, sidecar_path, true_estimands, CalibrationTargets,
    PopulationMeta, SuperPopulation, TrueEstimands, TruthMode, DEFAULT_POPULATION_SIZE,
};
use crate::error::{Error, Result};
use crate::estimators::WeightScheme;
use crate::rng::{StreamKey, StreamRng};

pub const MAX_REP_FAILURE_FRACTION: f64 = 0.05;

/// Sample sizes, treatment prevalences and control event rates to cross,
/// minus excluded `(n, pz)` pairs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub pz: Vec<f64>,
    pub py0: Vec<f64>,
    #[serde(default)]
    pub exclude: Vec<(usize, f64)>,
}

impl GridConfig {
    /// 7 sample sizes × 5 prevalences × 5 event rates with the three
    /// small-sample, rare-treatment cells removed.
    pub fn full() -> Self {
        GridConfig {
            n: vec![100, 150, 200, 300, 500, 750, 1000],
            pz: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            py0: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            exclude: vec![(100, 0.1), (150, 0.1), (100, 0.2)],
        }
    }

    /// Grid for the augmented estimators: from `n = 150`, without `pz = 0.1`.
    pub fn augmented_full() -> Self {
        GridConfig {
            n: vec![150, 200, 300, 500, 750, 1000],
            pz: vec![0.2, 0.3, 0.4, 0.5],
            py0: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            exclude: vec![],
        }
    }

    pub fn single(n: usize, pz: f64, py0: f64) -> Self {
        GridConfig { n: vec![n], pz: vec![pz], py0: vec![py0], exclude: vec![] }
    }

    fn excluded(&self, n: usize, pz: f64) -> bool {
        self.exclude.iter().any(|&(en, epz)| en == n && (epz - pz).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub n: usize,
    pub pz: f64,
    pub py0: f64,
    pub reps: usize,
    pub bootstrap_reps: usize,
    pub methods: Vec<MethodSpec>,
}

/// Full cross of the grid in `n`, `pz`, `py0` order with exclusions removed.
/// Scenario ids count up from 0 in that order.
pub fn scenario_grid(grid: &GridConfig, reps: usize, bootstrap_reps: usize, methods: &[MethodSpec]) -> Result<Vec<Scenario>> {
    if grid.n.is_empty() || grid.pz.is_empty() || grid.py0.is_empty() {
        return Err(Error::InvalidGrid("every grid axis needs at least one value".into()));
    }
    if let Some(&n) = grid.n.iter().find(|&&n| n < 4) {
        return Err(Error::InvalidGrid(format!("sample size {n} too small")));
    }
    for &p in grid.pz.iter().chain(&grid.py0) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidGrid(format!("probability {p} outside (0, 1)")));
        }
    }
    if reps == 0 {
        return Err(Error::InvalidGrid("reps must be positive".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidGrid("no methods configured".into()));
    }
    for m in methods {
        m.validate()?;
    }
    let mut out = Vec::new();
    for &n in &grid.n {
        for &pz in &grid.pz {
            if grid.excluded(n, pz) {
                continue;
            }
            for &py0 in &grid.py0 {
                out.push(Scenario { id: out.len(), n, pz, py0, reps, bootstrap_reps, methods: methods.to_vec() });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidGrid("every cell is excluded".into()));
    }
    Ok(out)
}

/// Number of treated subjects in a stratified sample: `n·pz` rounded half
/// to even.
pub fn treated_count(n: usize, pz: f64) -> usize {
    (n as f64 * pz).round_ties_even() as usize
}

/// Draws fixed-size stratified samples from a population.
pub struct PopulationSampler<'a> {
    pub population: &'a SuperPopulation,
    treated: Vec<usize>,
    control: Vec<usize>,
}

impl<'a> PopulationSampler<'a> {
    pub fn new(population: &'a SuperPopulation) -> Self {
        let (treated, control) = population.strata();
        PopulationSampler { population, treated, control }
    }

    /// Exactly `round(n·pz)` treated and the rest controls, each drawn
    /// without replacement from its stratum. Rows are ordered treated first.
    pub fn subsample(&self, n: usize, pz: f64, rng: &mut StreamRng) -> Result<Dataset> {
        let n_t = treated_count(n, pz);
        let n_c = n - n_t;
        for (arm, stratum, needed) in [(1u8, &self.treated, n_t), (0u8, &self.control, n_c)] {
            if stratum.len() < needed {
                return Err(Error::StratumExhausted { arm, available: stratum.len(), needed });
            }
        }
        let mut rows: Vec<usize> = sample(rng, self.treated.len(), n_t).into_iter().map(|i| self.treated[i]).collect();
        rows.extend(sample(rng, self.control.len(), n_c).into_iter().map(|i| self.control[i]));
        Ok(self.population.dataset(&rows))
    }
}

pub fn stratified_subsample(sp: &SuperPopulation, n: usize, pz: f64, rng: &mut StreamRng) -> Result<Dataset> {
    PopulationSampler::new(sp).subsample(n, pz, rng)
}

/// Which point estimates define the empirical SD of augmented methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugBenchmark {
    /// The unaugmented weighting estimator on the same samples.
    #[default]
    Unaugmented,
    /// The augmented estimator itself.
    Own,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub truth: TruthMode,
    pub aug_benchmark: AugBenchmark,
    pub outcome_model_mode: OutcomeModelMode,
    pub level: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            truth: TruthMode::Realized,
            aug_benchmark: AugBenchmark::Unaugmented,
            outcome_model_mode: OutcomeModelMode::Refit,
            level: crate::ci::DEFAULT_LEVEL,
        }
    }
}

/// One method's result on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub rep: usize,
    pub method: MethodSpec,
    pub point: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
    pub boot_failure_rate: Option<f64>,
    /// Point estimate of the benchmark estimator on the same sample.
    pub benchmark_point: f64,
}

/// Aggregates of one method over the successful replications. Fields that
/// are undefined for the data at hand are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub method: MethodSpec,
    pub reps: usize,
    pub mean_se: f64,
    pub empirical_sd: Option<f64>,
    pub se_ratio: Option<f64>,
    pub coverage: f64,
    pub mean_width: f64,
    pub sd_se: Option<f64>,
    pub mcse_mean_se: Option<f64>,
    pub boot_failure_rate: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    if v.iter().all(|&x| x == v[0]) {
        return Some(0.0);
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

fn summarize(rows: &[&RepRow]) -> MethodMetrics {
    let reps = rows.len();
    let ses: Vec<f64> = rows.iter().map(|r| r.se).collect();
    let bench: Vec<f64> = rows.iter().map(|r| r.benchmark_point).collect();
    let empirical_sd = sd(&bench);
    let mean_se = mean(&ses);
    let sd_se = sd(&ses);
    let boot: Vec<f64> = rows.iter().filter_map(|r| r.boot_failure_rate).collect();
    MethodMetrics {
        method: rows[0].method.clone(),
        reps,
        mean_se,
        empirical_sd,
        se_ratio: empirical_sd.filter(|&s| s > 0.0).map(|s| mean_se / s),
        coverage: rows.iter().filter(|r| r.covered).count() as f64 / reps as f64,
        mean_width: mean(&rows.iter().map(|r| r.ci_hi - r.ci_lo).collect::<Vec<_>>()),
        sd_se,
        mcse_mean_se: sd_se.map(|s| s / (reps as f64).sqrt()),
        boot_failure_rate: (!boot.is_empty()).then(|| mean(&boot)),
    }
}

/// Aggregates the rows of a single method. Needs at least two rows.
pub fn aggregate_metrics(rows: &[RepRow]) -> Result<MethodMetrics> {
    if rows.len() < 2 {
        return Err(Error::TooFewReps(rows.len()));
    }
    let first = &rows[0].method;
    if rows.iter().any(|r| &r.method != first) {
        return Err(Error::InvalidGrid("rows of different methods passed to one aggregate".into()));
    }
    Ok(summarize(&rows.iter().collect::<Vec<_>>()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub metrics: Vec<MethodMetrics>,
    pub rows: Vec<RepRow>,
    pub rep_failures: usize,
    /// Failed replications by error kind.
    pub failure_kinds: BTreeMap<&'static str, usize>,
    pub truth: TrueEstimands,
}

fn truth_for(truth: &TrueEstimands, scheme: WeightScheme) -> f64 {
    match scheme {
        WeightScheme::Iptw => truth.ate,
        WeightScheme::Overlap => truth.ato,
    }
}

fn benchmark_spec(scheme: WeightScheme) -> MethodSpec {
    MethodSpec::plain(scheme, VarianceMethod::Fs, CiMethod::Wald)
}

fn run_rep(
    sampler: &PopulationSampler<'_>,
    scenario: &Scenario,
    methods: &[MethodSpec],
    key: StreamKey,
    options: &RunOptions,
) -> Result<Vec<MethodEstimate>> {
    let mut rng = key.child(0).rng();
    let d = sampler.subsample(scenario.n, scenario.pz, &mut rng)?;
    let mut settings = AnalysisSettings::new(scenario.bootstrap_reps, key.child(1).value());
    settings.outcome_model_mode = options.outcome_model_mode;
    settings.level = options.level;
    analyze_sample(&d, methods, &settings)?.into_iter().collect()
}

/// Runs every replication of a scenario. A replication in which any step
/// fails is skipped for all methods and counted; more than 5% skipped
/// replications is an error.
pub fn run_scenario(
    sampler: &PopulationSampler<'_>,
    truth: TrueEstimands,
    scenario: &Scenario,
    master_seed: u64,
    options: &RunOptions,
) -> Result<ScenarioResult> {
    for m in &scenario.methods {
        m.validate()?;
    }
    // benchmark estimators evaluated alongside the configured methods
    let mut methods = scenario.methods.clone();
    let mut bench_index: BTreeMap<WeightScheme, usize> = BTreeMap::new();
    for m in &scenario.methods {
        let bench = match (m.augmentation.is_augmented(), options.aug_benchmark) {
            (true, AugBenchmark::Unaugmented) => benchmark_spec(m.scheme),
            _ => continue,
        };
        bench_index.entry(m.scheme).or_insert_with(|| {
            methods.push(bench);
            methods.len() - 1
        });
    }

    let root = StreamKey::new(master_seed).child(scenario.id as u64);
    let outcomes: Vec<Result<Vec<MethodEstimate>>> = (0..scenario.reps)
        .into_par_iter()
        .map(|r| run_rep(sampler, scenario, &methods, root.child(r as u64), options))
        .collect();

    let mut rows = Vec::new();
    let mut failure_kinds = BTreeMap::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        let estimates = match outcome {
            Ok(e) => e,
            Err(e) => {
                *failure_kinds.entry(e.kind()).or_insert(0) += 1;
                continue;
            }
        };
        for est in &estimates[..scenario.methods.len()] {
            let benchmark_point = match (est.method.augmentation.is_augmented(), bench_index.get(&est.method.scheme)) {
                (true, Some(&j)) => estimates[j].point,
                _ => est.point,
            };
            rows.push(RepRow {
                rep,
                method: est.method.clone(),
                point: est.point,
                se: est.se,
                ci_lo: est.ci.lower,
                ci_hi: est.ci.upper,
                covered: est.ci.contains(truth_for(&truth, est.method.scheme)),
                boot_failure_rate: est.bootstrap_failures.map(|(f, b)| f as f64 / b as f64),
                benchmark_point,
            });
        }
    }
    let rep_failures: usize = failure_kinds.values().sum();
    if rep_failures as f64 > MAX_REP_FAILURE_FRACTION * scenario.reps as f64 {
        return Err(Error::ExcessiveRepFailures { failures: rep_failures, reps: scenario.reps });
    }
    let metrics = if rows.is_empty() {
        Vec::new()
    } else {
        scenario
            .methods
            .iter()
            .map(|m| summarize(&rows.iter().filter(|r| &r.method == m).collect::<Vec<_>>()))
            .collect()
    };
    Ok(ScenarioResult { scenario: scenario.clone(), metrics, rows, rep_failures, failure_kinds, truth })
}

/// Width a Wald interval of the given mean SE would have.
pub fn wald_width(mean_se: f64, level: f64) -> f64 {
    2.0 * normal_quantile((1.0 + level) / 2.0) * mean_se
}

// ---------------------------------------------------------------------------
// output files

pub const METRICS_HEADER: [&str; 15] = [
    "scenario_id",
    "n",
    "pz",
    "py0",
    "estimand",
    "method",
    "mean_se",
    "empirical_sd",
    "se_ratio",
    "coverage",
    "mean_width",
    "sd_se",
    "mcse_mean_se",
    "rep_failures",
    "boot_failure_rate",
];

pub const REPS_HEADER: [&str; 11] = [
    "scenario_id",
    "rep",
    "estimand",
    "method",
    "point",
    "se",
    "ci_lo",
    "ci_hi",
    "covered",
    "boot_failure_rate",
    "benchmark_point",
];

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_records(result: &ScenarioResult) -> Vec<Vec<String>> {
    let s = &result.scenario;
    result
        .metrics
        .iter()
        .map(|m| {
            vec![
                s.id.to_string(),
                s.n.to_string(),
                s.pz.to_string(),
                s.py0.to_string(),
                m.method.scheme.estimand().to_string(),
                m.method.label(),
                m.mean_se.to_string(),
                opt(m.empirical_sd),
                opt(m.se_ratio),
                m.coverage.to_string(),
                m.mean_width.to_string(),
                opt(m.sd_se),
                opt(m.mcse_mean_se),
                result.rep_failures.to_string(),
                opt(m.boot_failure_rate),
            ]
        })
        .collect()
}

pub fn rep_records(result: &ScenarioResult) -> Vec<Vec<String>> {
    result
        .rows
        .iter()
        .map(|r| {
            vec![
                result.scenario.id.to_string(),
                r.rep.to_string(),
                r.method.scheme.estimand().to_string(),
                r.method.label(),
                r.point.to_string(),
                r.se.to_string(),
                r.ci_lo.to_string(),
                r.ci_hi.to_string(),
                (r.covered as u8).to_string(),
                opt(r.boot_failure_rate),
                r.benchmark_point.to_string(),
            ]
        })
        .collect()
}

pub fn write_metrics_csv<W: Write>(writer: W, results: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in results {
        for rec in metrics_records(r) {
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn write_reps_csv<W: Write>(writer: W, results: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPS_HEADER)?;
    for r in results {
        for rec in rep_records(r) {
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<reps>", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    #[serde(default)]
    pub ate: Vec<String>,
    #[serde(default)]
    pub ato: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub metrics: PathBuf,
    #[serde(default)]
    pub reps: Option<PathBuf>,
    /// Directory holding cached super-populations.
    #[serde(default)]
    pub population_cache: Option<PathBuf>,
}

/// Simulation configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub reps: usize,
    pub bootstrap_reps: usize,
    #[serde(default = "default_population_size")]
    pub population_size: usize,
    #[serde(default)]
    pub truth: TruthMode,
    #[serde(default)]
    pub aug_benchmark: AugBenchmark,
    #[serde(default = "default_outcome_mode")]
    pub outcome_model_mode: String,
    #[serde(default = "default_level")]
    pub level: f64,
    pub grid: GridConfig,
    pub methods: MethodsConfig,
    pub output: OutputConfig,
}

fn default_population_size() -> usize {
    DEFAULT_POPULATION_SIZE
}

fn default_outcome_mode() -> String {
    "refit".into()
}

fn default_level() -> f64 {
    crate::ci::DEFAULT_LEVEL
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig =
            toml::from_str(text).map_err(|e| Error::Config { key: "config".into(), message: e.to_string() })?;
        cfg.method_specs()?;
        cfg.run_options()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { key, message } => Error::Config { key: format!("{}: {key}", path.display()), message },
            other => other,
        })
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        let mut out = Vec::new();
        for (scheme, names, key) in
            [(WeightScheme::Iptw, &self.methods.ate, "methods.ate"), (WeightScheme::Overlap, &self.methods.ato, "methods.ato")]
        {
            for name in names {
                let spec = MethodSpec::parse(scheme, name)
                    .map_err(|e| Error::Config { key: key.into(), message: format!("`{name}`: {e}") })?;
                out.push(spec);
            }
        }
        if out.is_empty() {
            return Err(Error::Config { key: "methods".into(), message: "no methods configured".into() });
        }
        let distinct: BTreeSet<String> = out.iter().map(|m| format!("{}/{}", m.scheme, m.label())).collect();
        if distinct.len() != out.len() {
            return Err(Error::Config { key: "methods".into(), message: "duplicate method".into() });
        }
        Ok(out)
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            truth: self.truth,
            aug_benchmark: self.aug_benchmark,
            outcome_model_mode: self
                .outcome_model_mode
                .parse()
                .map_err(|e: Error| Error::Config { key: "outcome_model_mode".into(), message: e.to_string() })?,
            level: self.level,
        })
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        scenario_grid(&self.grid, self.reps, self.bootstrap_reps, &self.method_specs()?)
    }
}

/// Seed of the super-population of one `(pz, py0)` calibration cell.
pub fn population_seed(master_seed: u64, pz: f64, py0: f64) -> u64 {
    StreamKey::new(master_seed).child(u64::MAX).child(pz.to_bits()).child(py0.to_bits()).value()
}

fn cache_file(dir: &Path, size: usize, seed: u64, pz: f64, py0: f64) -> PathBuf {
    dir.join(format!("pop_n{size}_pz{pz}_py{py0}_{seed:016x}.bin"))
}

/// Loads a cached population when one matching `(size, seed, targets)`
/// exists, otherwise builds it (and caches it when `cache` is set).
pub fn obtain_population(
    size: usize,
    seed: u64,
    targets: CalibrationTargets,
    cache: Option<&Path>,
) -> Result<(SuperPopulation, PopulationMeta)> {
    if let Some(dir) = cache {
        let path = cache_file(dir, size, seed, targets.pz, targets.py0);
        if path.exists() && sidecar_path(&path).exists() {
            let (sp, meta) = load_population(&path)?;
            if meta.seed == seed && meta.size == size && meta.targets == targets {
                return Ok((sp, meta));
            }
        }
    }
    let (sp, calib) = build_population(size, seed, targets)?;
    let meta = PopulationMeta::new(&sp, seed, targets, calib);
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_population(&cache_file(dir, size, seed, targets.pz, targets.py0), &sp, &meta)?;
    }
    Ok((sp, meta))
}

/// Runs every scenario of the configuration, one calibration cell at a time.
/// `progress` is called after each scenario. Results come back ordered by
/// scenario id.
pub fn run_simulation(
    cfg: &SimulationConfig,
    master_seed: u64,
    mut progress: impl FnMut(&ScenarioResult),
) -> Result<Vec<ScenarioResult>> {
    let scenarios = cfg.scenarios()?;
    let options = cfg.run_options()?;
    let mut cells: BTreeMap<(u64, u64), Vec<&Scenario>> = BTreeMap::new();
    for s in &scenarios {
        cells.entry((s.pz.to_bits(), s.py0.to_bits())).or_default().push(s);
    }
    let mut results = Vec::with_capacity(scenarios.len());
    for ((pz_bits, py0_bits), group) in cells {
        let (pz, py0) = (f64::from_bits(pz_bits), f64::from_bits(py0_bits));
        let seed = population_seed(master_seed, pz, py0);
        let (sp, _) =
            obtain_population(cfg.population_size, seed, CalibrationTargets::new(pz, py0), cfg.output.population_cache.as_deref())?;
        let truth = true_estimands(&sp, options.truth);
        let sampler = PopulationSampler::new(&sp);
        for s in group {
            let r = run_scenario(&sampler, truth, s, master_seed, &options)?;
            progress(&r);
            results.push(r);
        }
    }
    results.sort_by_key(|r| r.scenario.id);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grids() {
        let m = [MethodSpec::plain(WeightScheme::Iptw, VarianceMethod::Fs, CiMethod::Wald)];
        assert_eq!(scenario_grid(&GridConfig::full(), 1, 0, &m).unwrap().len(), 160);
        assert_eq!(scenario_grid(&GridConfig::augmented_full(), 1, 0, &m).unwrap().len(), 120);
        assert_eq!(scenario_grid(&GridConfig::single(200, 0.3, 0.2), 1, 0, &m).unwrap().len(), 1);
    }

    #[test]
    fn bad_grids() {
        let m = [MethodSpec::plain(WeightScheme::Iptw, VarianceMethod::Fs, CiMethod::Wald)];
        let mut g = GridConfig::single(200, 0.3, 0.2);
        g.pz.clear();
        assert!(matches!(scenario_grid(&g, 1, 0, &m), Err(Error::InvalidGrid(_))));
        let g = GridConfig::single(200, 1.3, 0.2);
        assert!(matches!(scenario_grid(&g, 1, 0, &m), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(treated_count(100, 0.3), 30);
        assert_eq!(treated_count(150, 0.1), 15);
        assert_eq!(treated_count(5, 0.5), 2);
        assert_eq!(treated_count(7, 0.5), 4);
    }
}
