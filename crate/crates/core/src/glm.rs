//! Logistic regression by Newton-Raphson with step halving.
//!
//! Used for the propensity model (Z on X) and for outcome models (Y on Z, X).
//! Fits always start from `beta = 0`, so a fit is a pure function of its
//! inputs.

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, expit, PivotedCholesky};

/// What a fit does when the separation check fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SeparationPolicy {
    /// Return `Err(QuasiSeparation)`.
    #[default]
    Fail,
    /// Return the last iterate with `separation_flag` set.
    Flag,
}

impl SeparationPolicy {
    pub fn options(self) -> FitOptions {
        FitOptions { fail_on_separation: self == SeparationPolicy::Fail, ..FitOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once every `|Δβ_j|` is below this.
    pub step_tolerance: f64,
    /// Converged once every score component is below this in magnitude.
    pub score_tolerance: f64,
    /// Fitted probabilities within this distance of 0 or 1 flag separation.
    pub separation_probability: f64,
    /// Any `|β_j|` above this flags separation.
    pub separation_coefficient: f64,
    /// Return `Err(QuasiSeparation)` when flagged, rather than a flagged fit.
    pub fail_on_separation: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 100,
            step_tolerance: 1e-10,
            score_tolerance: 1e-8,
            separation_probability: 1e-8,
            separation_coefficient: 30.0,
            fail_on_separation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub separation_flag: bool,
}

struct State {
    loglik: f64,
    fitted: Vec<f64>,
}

fn evaluate(dm: &DesignMatrix, target: &[f64], beta: &[f64]) -> State {
    let mut loglik = 0.0;
    let fitted = dm
        .iter_rows()
        .zip(target)
        .map(|(row, &t)| {
            let eta = dot(row, beta);
            // log(1 + e^eta) without overflow
            let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            loglik += t * eta - softplus;
            expit(eta)
        })
        .collect();
    State { loglik, fitted }
}

fn score_and_information(dm: &DesignMatrix, target: &[f64], fitted: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = dm.cols();
    let mut score = vec![0.0; k];
    let mut info = vec![0.0; k * k];
    for ((row, &t), &p) in dm.iter_rows().zip(target).zip(fitted) {
        let r = t - p;
        let w = p * (1.0 - p);
        for a in 0..k {
            score[a] += r * row[a];
            let wa = w * row[a];
            let info_row = &mut info[a * k..a * k + a + 1];
            for (b, slot) in info_row.iter_mut().enumerate() {
                *slot += wa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[b * k + a] = info[a * k + b];
        }
    }
    (score, info)
}

fn separated(fit_beta: &[f64], fitted: &[f64], opts: &FitOptions) -> bool {
    fitted
        .iter()
        .any(|&p| p <= opts.separation_probability || p >= 1.0 - opts.separation_probability)
        || fit_beta.iter().any(|b| b.abs() > opts.separation_coefficient)
}

pub fn fit_logistic(dm: &DesignMatrix, target: &[f64]) -> Result<LogisticFit> {
    fit_logistic_with(dm, target, &FitOptions::default())
}

pub fn fit_logistic_with(dm: &DesignMatrix, target: &[f64], opts: &FitOptions) -> Result<LogisticFit> {
    if dm.rows() != target.len() {
        return Err(Error::DimensionMismatch { expected: dm.rows(), got: target.len() });
    }
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    if ones == 0 || ones == target.len() {
        return Err(Error::NoVariation);
    }

    let k = dm.cols();
    let mut beta = vec![0.0; k];
    let mut state = evaluate(dm, target, &beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let (score, info) = score_and_information(dm, target, &state.fitted);
        if score.iter().all(|s| s.abs() < opts.score_tolerance) {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(chol) = PivotedCholesky::factor(&info, k) else {
            if separated(&beta, &state.fitted, opts) {
                return separation_outcome(beta, state.fitted, iterations, false, opts);
            }
            return Err(Error::SingularInformation);
        };
        let step = chol.solve(&score);

        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut next;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            next = evaluate(dm, target, &candidate);
            if next.loglik >= state.loglik - 1e-12 * state.loglik.abs() || scale < 1e-10 {
                break;
            }
            scale *= 0.5;
        }
        let max_change = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
        beta = candidate;
        state = next;
        if max_change < opts.step_tolerance {
            converged = true;
            break;
        }
    }

    if !converged || separated(&beta, &state.fitted, opts) {
        return separation_outcome(beta, state.fitted, iterations, converged, opts);
    }
    Ok(LogisticFit { beta, fitted: state.fitted, iterations, converged, separation_flag: false })
}

fn separation_outcome(
    beta: Vec<f64>,
    fitted: Vec<f64>,
    iterations: usize,
    converged: bool,
    opts: &FitOptions,
) -> Result<LogisticFit> {
    if opts.fail_on_separation {
        Err(Error::QuasiSeparation { iterations })
    } else {
        Ok(LogisticFit { beta, fitted, iterations, converged, separation_flag: true })
    }
}

pub fn predict_probs(fit: &LogisticFit, dm: &DesignMatrix) -> Result<Vec<f64>> {
    predict_with(&fit.beta, dm)
}

pub fn predict_with(beta: &[f64], dm: &DesignMatrix) -> Result<Vec<f64>> {
    if dm.cols() != beta.len() {
        return Err(Error::DimensionMismatch { expected: beta.len(), got: dm.cols() });
    }
    Ok(dm.iter_rows().map(|row| expit(dot(row, beta))).collect())
}
