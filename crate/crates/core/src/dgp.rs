//! Super-population generator for the simulation study.
//!
//! Ten latent normals with unit variance and pairwise correlation 0.2 give
//! covariates `x1..x5` directly; `x6..x10` are indicators of the latent value
//! exceeding its empirical 10th/20th/30th/40th/50th percentile. Treatment and
//! potential outcomes follow logistic models whose intercepts (and the
//! treatment effect on the outcome logit) are calibrated by bisection so that
//! `Pr(Z=1)`, `Pr(Y(0)=1)` and the risk difference hit their targets.
//!
//! Generation is split into fixed-size chunks, each with its own random
//! stream, and all population-wide sums are reduced chunk by chunk in index
//! order, so results do not depend on the number of worker threads.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{expit, logit};
use crate::rng::StreamKey;

pub const N_COVARIATES: usize = 10;
pub const N_CONTINUOUS: usize = 5;
pub const CORRELATION: f64 = 0.2;
pub const DICHOTOMIZE_PERCENTILES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_POPULATION_SIZE: usize = 1_000_000;
pub const MIN_POPULATION_SIZE: usize = 1000;

/// Logit-scale coefficients of x1..x10 in the treatment model.
pub fn treatment_coefficients() -> [f64; N_COVARIATES] {
    [1.1, 1.2, 1.5, 1.75, 2.0, 1.25, 1.5, 2.0, 0.8, 0.5].map(f64::ln)
}

/// Logit-scale coefficients of x1..x10 in the outcome model.
pub fn outcome_coefficients() -> [f64; N_COVARIATES] {
    [2.0, 1.75, 1.1, 1.5, 1.2, 2.0, 1.5, 1.1, 1.25, 2.0].map(f64::ln)
}

pub const TREATMENT_TOLERANCE: f64 = 1e-4;
pub const OUTCOME_TOLERANCE: f64 = 1e-4;
pub const EFFECT_TOLERANCE: f64 = 1e-5;
pub const BISECTION_BRACKET: (f64, f64) = (-10.0, 10.0);
pub const BISECTION_MAX_ITER: usize = 200;

const CHUNK: usize = 1 << 16;

pub fn covariate_names() -> Vec<String> {
    (1..=N_COVARIATES).map(|j| format!("x{j}")).collect()
}

/// Which side of the percentile threshold codes as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dichotomize {
    /// `x = 1` when the latent value exceeds the threshold (prevalence
    /// 0.9, 0.8, 0.7, 0.6, 0.5 for x6..x10).
    #[default]
    Above,
    /// `x = 1` when the latent value is at or below the threshold.
    Below,
}

/// Empirical type-7 quantile of `values`.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let (_, &mut at_lo, right) = v.select_nth_unstable_by(lo, |a, b| a.total_cmp(b));
    let frac = h - lo as f64;
    if frac == 0.0 || right.is_empty() {
        return at_lo;
    }
    let at_hi = right.iter().copied().fold(f64::INFINITY, f64::min);
    at_lo + frac * (at_hi - at_lo)
}

/// Indicator coding of one latent column at its empirical percentile.
pub fn dichotomize(latent: &[f64], percentile: f64, direction: Dichotomize) -> Vec<f64> {
    let threshold = empirical_quantile(latent, percentile);
    latent
        .iter()
        .map(|&v| match direction {
            Dichotomize::Above => (v > threshold) as u8 as f64,
            Dichotomize::Below => (v <= threshold) as u8 as f64,
        })
        .collect()
}

/// Column-major covariates `x1..x10`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBlock {
    pub columns: Vec<Vec<f64>>,
}

impl CovariateBlock {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ_j coef_j x_ij` for every row.
    pub fn linear_predictor(&self, coefs: &[f64]) -> Vec<f64> {
        let mut lp = vec![0.0; self.len()];
        for (col, &c) in self.columns.iter().zip(coefs) {
            for (l, &x) in lp.iter_mut().zip(col) {
                *l += c * x;
            }
        }
        lp
    }
}

fn equicorrelation_factor() -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(N_COVARIATES, N_COVARIATES, |i, j| if i == j { 1.0 } else { CORRELATION });
    sigma.cholesky().expect("equicorrelation matrix is positive definite").l()
}

/// Latent correlated normals, column-major.
pub fn generate_latent(size: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if size < MIN_POPULATION_SIZE {
        return Err(Error::InvalidGrid(format!("population size {size} below {MIN_POPULATION_SIZE}")));
    }
    let l = equicorrelation_factor();
    let root = StreamKey::new(seed).child(0);
    let chunks: Vec<Vec<f64>> = (0..size.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK.min(size - c * CHUNK);
            let mut rng = root.child(c as u64).rng();
            let mut out = vec![0.0; rows * N_COVARIATES];
            let mut u = [0.0; N_COVARIATES];
            for r in 0..rows {
                for v in u.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for i in 0..N_COVARIATES {
                    let mut s = 0.0;
                    for (j, uj) in u.iter().enumerate().take(i + 1) {
                        s += l[(i, j)] * uj;
                    }
                    out[r * N_COVARIATES + i] = s;
                }
            }
            out
        })
        .collect();
    let mut columns = (0..N_COVARIATES).map(|_| Vec::with_capacity(size)).collect::<Vec<_>>();
    for chunk in &chunks {
        for row in chunk.chunks_exact(N_COVARIATES) {
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
    }
    Ok(columns)
}

pub fn generate_covariates(size: usize, seed: u64) -> Result<CovariateBlock> {
    generate_covariates_with(size, seed, Dichotomize::Above)
}

pub fn generate_covariates_with(size: usize, seed: u64, direction: Dichotomize) -> Result<CovariateBlock> {
    let mut columns = generate_latent(size, seed)?;
    for (k, &p) in DICHOTOMIZE_PERCENTILES.iter().enumerate() {
        let j = N_CONTINUOUS + k;
        columns[j] = dichotomize(&columns[j], p, direction);
    }
    Ok(CovariateBlock { columns })
}

/// Order-stable mean of `f` over `0..len`.
fn chunked_mean(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f).sum::<f64>())
        .collect();
    partial.iter().sum::<f64>() / len as f64
}

/// Mean of `expit(offset + lp_i)`.
pub fn mean_probability(lp: &[f64], offset: f64) -> f64 {
    chunked_mean(lp.len(), |i| expit(offset + lp[i]))
}

/// Bisection for a monotone function: returns `x` in `[lo, hi]` with
/// `|g(x) − target|` as small as the iteration budget allows, stopping early
/// once it is below `tol`.
pub fn bisect(g: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (ga, gb) = (g(lo) - target, g(hi) - target);
    if ga.abs() <= tol {
        return Ok(lo);
    }
    if gb.abs() <= tol {
        return Ok(hi);
    }
    // Orient so that g(a) < target < g(b).
    let (mut a, mut b) = match (ga < 0.0 && gb > 0.0, ga > 0.0 && gb < 0.0) {
        (true, _) => (lo, hi),
        (_, true) => (hi, lo),
        _ => return Err(Error::BracketFailure { lo, hi }),
    };
    let mut best = (f64::INFINITY, a);
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let gm = g(mid) - target;
        if gm.abs() < best.0 {
            best = (gm.abs(), mid);
        }
        if gm.abs() <= tol || mid == a || mid == b {
            break;
        }
        if gm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(best.1)
}

fn ensure_within(target: f64, achieved: f64, tolerance: f64) -> Result<()> {
    if (achieved - target).abs() <= tolerance {
        Ok(())
    } else {
        Err(Error::CalibrationMissed { target, achieved, tolerance })
    }
}

/// Intercept `α0` such that `mean expit(α0 + lp)` equals `target`.
pub fn calibrate_intercept(lp: &[f64], target: f64, tolerance: f64) -> Result<f64> {
    let (lo, hi) = BISECTION_BRACKET;
    let alpha = bisect(|a| mean_probability(lp, a), target, lo, hi, tolerance * 1e-4, BISECTION_MAX_ITER)?;
    ensure_within(target, mean_probability(lp, alpha), tolerance)?;
    Ok(alpha)
}

pub fn calibrate_treatment_intercept(x: &CovariateBlock, target_prevalence: f64) -> Result<f64> {
    calibrate_intercept(&x.linear_predictor(&treatment_coefficients()), target_prevalence, TREATMENT_TOLERANCE)
}

/// Mean risk difference `mean(expit(α0 + α_t + lp) − expit(α0 + lp))`.
pub fn mean_risk_difference(lp: &[f64], alpha0: f64, alpha_treat: f64) -> f64 {
    chunked_mean(lp.len(), |i| expit(alpha0 + alpha_treat + lp[i]) - expit(alpha0 + lp[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCalibration {
    pub alpha0_outcome: f64,
    pub alpha_treat: f64,
    pub achieved_py0: f64,
    pub achieved_ate: f64,
}

/// Two-stage outcome calibration: intercept for `Pr(Y(0)=1)`, then the
/// treatment coefficient for the mean risk difference.
pub fn calibrate_outcome(x: &CovariateBlock, target_py0: f64, target_ate: f64) -> Result<OutcomeCalibration> {
    let lp = x.linear_predictor(&outcome_coefficients());
    let alpha0 = calibrate_intercept(&lp, target_py0, OUTCOME_TOLERANCE)?;
    let (lo, hi) = BISECTION_BRACKET;
    let alpha_treat = bisect(|a| mean_risk_difference(&lp, alpha0, a), target_ate, lo, hi, EFFECT_TOLERANCE * 1e-4, BISECTION_MAX_ITER)?;
    let achieved_ate = mean_risk_difference(&lp, alpha0, alpha_treat);
    ensure_within(target_ate, achieved_ate, EFFECT_TOLERANCE)?;
    Ok(OutcomeCalibration { alpha0_outcome: alpha0, alpha_treat, achieved_py0: mean_probability(&lp, alpha0), achieved_ate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub pz: f64,
    pub py0: f64,
    pub ate: f64,
}

impl CalibrationTargets {
    pub fn new(pz: f64, py0: f64) -> Self {
        CalibrationTargets { pz, py0, ate: -0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Achieved {
    pub pz: f64,
    pub py0: f64,
    pub ate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha0_treat: f64,
    pub alpha0_outcome: f64,
    pub alpha_treat: f64,
    /// Population means of the true probabilities.
    pub achieved: Achieved,
    /// Overlap-weighted mean of `p1 − p0` with true propensity scores.
    pub true_ato: f64,
}

pub fn calibrate(x: &CovariateBlock, targets: CalibrationTargets) -> Result<CalibrationResult> {
    for (name, v) in [("pz", targets.pz), ("py0", targets.py0)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config { key: name.into(), message: format!("target {v} outside (0, 1)") });
        }
    }
    let lp_t = x.linear_predictor(&treatment_coefficients());
    let alpha0_treat = calibrate_intercept(&lp_t, targets.pz, TREATMENT_TOLERANCE)?;
    let out = calibrate_outcome(x, targets.py0, targets.ate)?;
    let lp_o = x.linear_predictor(&outcome_coefficients());
    let n = x.len();
    let tilt = |i: usize| {
        let e = expit(alpha0_treat + lp_t[i]);
        e * (1.0 - e)
    };
    let num = chunked_mean(n, |i| {
        tilt(i) * (expit(out.alpha0_outcome + out.alpha_treat + lp_o[i]) - expit(out.alpha0_outcome + lp_o[i]))
    });
    let den = chunked_mean(n, tilt);
    Ok(CalibrationResult {
        alpha0_treat,
        alpha0_outcome: out.alpha0_outcome,
        alpha_treat: out.alpha_treat,
        achieved: Achieved { pz: mean_probability(&lp_t, alpha0_treat), py0: out.achieved_py0, ate: out.achieved_ate },
        true_ato: num / den,
    })
}

/// Realized super-population.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperPopulation {
    pub x: CovariateBlock,
    pub p_treat: Vec<f64>,
    pub z: Vec<u8>,
    pub y1: Vec<u8>,
    pub y0: Vec<u8>,
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
}

impl SuperPopulation {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Row indices of the treated and control strata.
    pub fn strata(&self) -> (Vec<usize>, Vec<usize>) {
        let treated = (0..self.len()).filter(|&i| self.z[i] == 1).collect();
        let control = (0..self.len()).filter(|&i| self.z[i] == 0).collect();
        (treated, control)
    }

    /// Observed-data view of the given rows: `y = y(z)`.
    pub fn dataset(&self, rows: &[usize]) -> Dataset {
        let z: Vec<f64> = rows.iter().map(|&i| self.z[i] as f64).collect();
        let y: Vec<f64> = rows.iter().map(|&i| if self.z[i] == 1 { self.y1[i] } else { self.y0[i] } as f64).collect();
        let columns = self.x.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect();
        Dataset::new(y, z, columns, covariate_names()).expect("population rows form a valid dataset")
    }

    pub fn realized_prevalence(&self) -> f64 {
        self.z.iter().map(|&v| v as f64).sum::<f64>() / self.len() as f64
    }
}

/// Draws treatment and both potential outcomes for every subject.
pub fn realize_population(x: CovariateBlock, calib: &CalibrationResult, seed: u64) -> SuperPopulation {
    let n = x.len();
    let lp_t = x.linear_predictor(&treatment_coefficients());
    let lp_o = x.linear_predictor(&outcome_coefficients());
    let p_treat: Vec<f64> = lp_t.iter().map(|l| expit(calib.alpha0_treat + l)).collect();
    let p0: Vec<f64> = lp_o.iter().map(|l| expit(calib.alpha0_outcome + l)).collect();
    let p1: Vec<f64> = lp_o.iter().map(|l| expit(calib.alpha0_outcome + calib.alpha_treat + l)).collect();

    let root = StreamKey::new(seed).child(1);
    let draws: Vec<Vec<[u8; 3]>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = root.child(c as u64).rng();
            (c * CHUNK..((c + 1) * CHUNK).min(n))
                .map(|i| {
                    let z = (rng.random::<f64>() < p_treat[i]) as u8;
                    let y1 = (rng.random::<f64>() < p1[i]) as u8;
                    let y0 = (rng.random::<f64>() < p0[i]) as u8;
                    [z, y1, y0]
                })
                .collect()
        })
        .collect();
    let mut z = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    for d in draws.iter().flatten() {
        z.push(d[0]);
        y1.push(d[1]);
        y0.push(d[2]);
    }
    SuperPopulation { x, p_treat, z, y1, y0, p1, p0 }
}

/// How true estimands are computed from the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TruthMode {
    /// From realized potential outcomes `y1 − y0`.
    #[default]
    Realized,
    /// From true probabilities `p1 − p0`.
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueEstimands {
    pub ate: f64,
    pub ato: f64,
}

/// True ATE (population mean effect) and ATO (mean effect weighted by
/// `e(1 − e)` at the true propensity score).
pub fn true_estimands(sp: &SuperPopulation, mode: TruthMode) -> TrueEstimands {
    let n = sp.len();
    let effect = |i: usize| match mode {
        TruthMode::Realized => sp.y1[i] as f64 - sp.y0[i] as f64,
        TruthMode::Expected => sp.p1[i] - sp.p0[i],
    };
    let tilt = |i: usize| sp.p_treat[i] * (1.0 - sp.p_treat[i]);
    let ate = chunked_mean(n, effect);
    let ato = chunked_mean(n, |i| tilt(i) * effect(i)) / chunked_mean(n, tilt);
    TrueEstimands { ate, ato }
}

/// Generates, calibrates and realizes a population in one go.
pub fn build_population(size: usize, seed: u64, targets: CalibrationTargets) -> Result<(SuperPopulation, CalibrationResult)> {
    let x = generate_covariates(size, seed)?;
    let calib = calibrate(&x, targets)?;
    Ok((realize_population(x, &calib, seed), calib))
}

// ---------------------------------------------------------------------------
// persistence

pub const POPULATION_MAGIC: &[u8; 8] = b"PSVPOP01";
pub const POPULATION_FORMAT: &str = "psvar-population/1";

/// JSON sidecar written next to a population file as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMeta {
    pub format: String,
    pub size: usize,
    pub seed: u64,
    pub dichotomize: Dichotomize,
    pub columns: Vec<String>,
    pub targets: CalibrationTargets,
    pub calibration: CalibrationResult,
    pub realized_prevalence: f64,
    pub true_realized: TrueEstimands,
    pub true_expected: TrueEstimands,
}

impl PopulationMeta {
    pub fn new(sp: &SuperPopulation, seed: u64, targets: CalibrationTargets, calibration: CalibrationResult) -> Self {
        PopulationMeta {
            format: POPULATION_FORMAT.to_string(),
            size: sp.len(),
            seed,
            dichotomize: Dichotomize::Above,
            columns: population_columns(),
            targets,
            calibration,
            realized_prevalence: sp.realized_prevalence(),
            true_realized: true_estimands(sp, TruthMode::Realized),
            true_expected: true_estimands(sp, TruthMode::Expected),
        }
    }
}

fn population_columns() -> Vec<String> {
    let mut cols = covariate_names();
    cols.extend(["p_treat", "z", "y1", "y0", "p1", "p0"].map(String::from));
    cols
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the binary column file and its JSON sidecar.
///
/// Layout (little endian): 8-byte magic `PSVPOP01`, `u64` row count, `u32`
/// column count, then per column a `u16` name length, the UTF-8 name and a
/// `u8` type tag (0 = f64, 1 = u8), then every column's values in order.
pub fn save_population(path: &Path, sp: &SuperPopulation, meta: &PopulationMeta) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    let names = population_columns();
    let f64_cols: Vec<&[f64]> = sp.x.columns.iter().map(Vec::as_slice).chain([sp.p_treat.as_slice()]).collect();
    w.write_all(POPULATION_MAGIC).map_err(io)?;
    w.write_all(&(sp.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(names.len() as u32).to_le_bytes()).map_err(io)?;
    for name in &names {
        let tag: u8 = if matches!(name.as_str(), "z" | "y1" | "y0") { 1 } else { 0 };
        w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&[tag]).map_err(io)?;
    }
    let put_f64 = |w: &mut BufWriter<std::fs::File>, col: &[f64]| -> Result<()> {
        for v in col {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    };
    for col in &f64_cols {
        put_f64(&mut w, col)?;
    }
    for col in [&sp.z, &sp.y1, &sp.y0] {
        w.write_all(col).map_err(io)?;
    }
    put_f64(&mut w, &sp.p1)?;
    put_f64(&mut w, &sp.p0)?;
    w.flush().map_err(io)?;

    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn load_population(path: &Path) -> Result<(SuperPopulation, PopulationMeta)> {
    let side = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: PopulationMeta = serde_json::from_str(&meta_text)?;
    if meta.format != POPULATION_FORMAT {
        return Err(Error::PopulationFormat(format!("unsupported format `{}`", meta.format)));
    }

    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != POPULATION_MAGIC {
        return Err(Error::PopulationFormat("bad magic".into()));
    }
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b4).map_err(io)?;
    let ncols = u32::from_le_bytes(b4) as usize;
    let expected = population_columns();
    if ncols != expected.len() || n != meta.size {
        return Err(Error::PopulationFormat(format!("header mismatch: {ncols} columns, {n} rows")));
    }
    for name in &expected {
        r.read_exact(&mut b2).map_err(io)?;
        let mut buf = vec![0u8; u16::from_le_bytes(b2) as usize + 1];
        r.read_exact(&mut buf).map_err(io)?;
        if &buf[..buf.len() - 1] != name.as_bytes() {
            return Err(Error::PopulationFormat(format!("expected column `{name}`")));
        }
    }
    let read_f64 = |r: &mut BufReader<std::fs::File>| -> Result<Vec<f64>> {
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw).map_err(io)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let mut columns = Vec::with_capacity(N_COVARIATES);
    for _ in 0..N_COVARIATES {
        columns.push(read_f64(&mut r)?);
    }
    let p_treat = read_f64(&mut r)?;
    let read_u8 = |r: &mut BufReader<std::fs::File>| -> Result<Vec<u8>> {
        let mut raw = vec![0u8; n];
        r.read_exact(&mut raw).map_err(io)?;
        Ok(raw)
    };
    let z = read_u8(&mut r)?;
    let y1 = read_u8(&mut r)?;
    let y0 = read_u8(&mut r)?;
    let p1 = read_f64(&mut r)?;
    let p0 = read_f64(&mut r)?;
    Ok((SuperPopulation { x: CovariateBlock { columns }, p_treat, z, y1, y0, p1, p0 }, meta))
}

/// CSV export with one row per subject.
pub fn export_population_csv<W: Write>(sp: &SuperPopulation, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(population_columns())?;
    for i in 0..sp.len() {
        let mut rec: Vec<String> = sp.x.columns.iter().map(|c| c[i].to_string()).collect();
        rec.push(sp.p_treat[i].to_string());
        rec.extend([sp.z[i], sp.y1[i], sp.y0[i]].map(|v| v.to_string()));
        rec.push(sp.p1[i].to_string());
        rec.push(sp.p0[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// case-study-shaped cohorts

/// Shape of a small observational cohort with a rare treatment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortShape {
    pub n: usize,
    pub n_treated: usize,
    /// Target event rate among treated subjects.
    pub treated_event_rate: f64,
    /// Target event rate among controls.
    pub control_event_rate: f64,
}

impl Default for CohortShape {
    /// 743 subjects, 81 treated, event rates 15% and 34.3%.
    fn default() -> Self {
        CohortShape { n: 743, n_treated: 81, treated_event_rate: 0.15, control_event_rate: 0.343 }
    }
}

pub fn cohort_covariate_names() -> Vec<String> {
    ["age", "female", "joints", "duration", "ana", "esr", "older"].map(String::from).to_vec()
}

/// Synthetic cohort with seven baseline covariates, exactly `n_treated`
/// treated subjects chosen with covariate-dependent odds, and outcome models
/// that differ between arms only in their intercepts.
pub fn cohort_like(shape: CohortShape, seed: u64) -> Result<Dataset> {
    let n = shape.n;
    if shape.n_treated == 0 || shape.n_treated >= n {
        return Err(Error::EmptyArm { arm: if shape.n_treated == 0 { 1 } else { 0 } });
    }
    let mut rng = StreamKey::new(seed).child(7).rng();
    let mut cols = (0..7).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
    for _ in 0..n {
        let age: f64 = 8.0 + 3.5 * rng.sample::<f64, _>(StandardNormal);
        let female = (rng.random::<f64>() < 0.7) as u8 as f64;
        let joints = (1.0 + 1.2 * rng.random::<f64>() * 3.0).floor();
        let duration: f64 = (0.3 * rng.sample::<f64, _>(StandardNormal)).exp();
        let ana = (rng.random::<f64>() < 0.45) as u8 as f64;
        let esr: f64 = 15.0 + 8.0 * rng.sample::<f64, _>(StandardNormal);
        let older = (age > 9.0) as u8 as f64;
        for (c, v) in cols.iter_mut().zip([age, female, joints, duration, ana, esr, older]) {
            c.push(v);
        }
    }
    let standardized: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n as f64;
            let s = (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);
            c.iter().map(|v| (v - m) / s).collect()
        })
        .collect();
    let treat_coef = [0.35, -0.2, 0.3, -0.25, 0.2, 0.15, 0.1];
    let out_coef = [0.3, 0.15, 0.35, 0.2, -0.25, 0.2, 0.1];
    let lp = |coef: &[f64; 7], i: usize| -> f64 { (0..7).map(|j| coef[j] * standardized[j][i]).sum() };

    // weighted sampling without replacement: keep the n_treated largest u^(1/w)
    let mut keys: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let w = lp(&treat_coef, i).exp();
            (rng.random::<f64>().ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut z = vec![0.0; n];
    for &(_, i) in keys.iter().take(shape.n_treated) {
        z[i] = 1.0;
    }

    let lp_out: Vec<f64> = (0..n).map(|i| lp(&out_coef, i)).collect();
    let arm_intercept = |arm: f64, target: f64| -> Result<f64> {
        let rows: Vec<f64> = (0..n).filter(|&i| z[i] == arm).map(|i| lp_out[i]).collect();
        bisect(|a| rows.iter().map(|l| expit(a + l)).sum::<f64>() / rows.len() as f64, target, -10.0, 10.0, 1e-10, 200)
    };
    let a1 = arm_intercept(1.0, shape.treated_event_rate)?;
    let a0 = arm_intercept(0.0, shape.control_event_rate)?;
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let a = if z[i] == 1.0 { a1 } else { a0 };
            (rng.random::<f64>() < expit(a + lp_out[i])) as u8 as f64
        })
        .collect();
    Dataset::with_names("outcome", "treated", y, z, cols, cohort_covariate_names())
}

/// Closed-form intercept of an intercept-only model.
pub fn intercept_for(prevalence: f64) -> f64 {
    logit(prevalence)
}
