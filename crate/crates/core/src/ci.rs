//! Confidence intervals: Wald, percentile, basic and BCa.
//!
//! Bootstrap quantiles use linear interpolation between order statistics at
//! 1-based position `1 + (B − 1) p`.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::bootstrap::BootstrapDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CiMethod {
    Wald,
    Percentile,
    Basic,
    Bca,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Wald => "wald",
            CiMethod::Percentile => "pct",
            CiMethod::Basic => "basic",
            CiMethod::Bca => "bca",
        }
    }

    pub fn needs_bootstrap(self) -> bool {
        self != CiMethod::Wald
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wald" | "par" => Ok(CiMethod::Wald),
            "pct" | "percentile" => Ok(CiMethod::Percentile),
            "basic" | "double" => Ok(CiMethod::Basic),
            "bca" => Ok(CiMethod::Bca),
            _ => Err(Error::Config { key: "ci".into(), message: format!("unknown interval `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
    /// Two-sided p-value for a zero effect; Wald only.
    pub p_value: Option<f64>,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

pub fn ci_wald(point: f64, se: f64, level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    if !(se >= 0.0) {
        return Err(Error::NegativeSe(se));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let p_value = if se > 0.0 {
        2.0 * normal_cdf(-(point / se).abs())
    } else if point == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(ConfidenceInterval { lower: point - z * se, upper: point + z * se, level, method: CiMethod::Wald, p_value: Some(p_value) })
}

/// Type-7 quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    debug_assert!(m > 0);
    let h = (m - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Minimum replicate count so each tail holds at least one replicate.
pub fn min_replicates(level: f64) -> usize {
    (2.0 / (1.0 - level) - 1e-9).ceil() as usize
}

fn check_replicates(dist: &BootstrapDistribution, level: f64) -> Result<()> {
    check_level(level)?;
    let needed = min_replicates(level);
    if dist.estimates.len() < needed {
        return Err(Error::TooFewReplicates { needed, got: dist.estimates.len() });
    }
    Ok(())
}

fn tail_quantiles(dist: &BootstrapDistribution, level: f64) -> (f64, f64) {
    let s = sorted(&dist.estimates);
    let alpha = (1.0 - level) / 2.0;
    (quantile_sorted(&s, alpha), quantile_sorted(&s, 1.0 - alpha))
}

pub fn ci_percentile(dist: &BootstrapDistribution, level: f64) -> Result<ConfidenceInterval> {
    check_replicates(dist, level)?;
    let (lower, upper) = tail_quantiles(dist, level);
    Ok(ConfidenceInterval { lower, upper, level, method: CiMethod::Percentile, p_value: None })
}

/// Percentile interval reflected through the point estimate.
pub fn ci_basic(point: f64, dist: &BootstrapDistribution, level: f64) -> Result<ConfidenceInterval> {
    check_replicates(dist, level)?;
    let (lo, hi) = tail_quantiles(dist, level);
    Ok(ConfidenceInterval { lower: 2.0 * point - hi, upper: 2.0 * point - lo, level, method: CiMethod::Basic, p_value: None })
}

/// Bias-correction constant: probit of the share of replicates below the
/// point estimate (ties count half), clamped to `[1/(B+1), B/(B+1)]`.
pub fn bca_bias_correction(point: f64, estimates: &[f64]) -> f64 {
    let b = estimates.len() as f64;
    let below = estimates.iter().map(|&v| if v < point { 1.0 } else if v == point { 0.5 } else { 0.0 }).sum::<f64>();
    let share = (below / b).clamp(1.0 / (b + 1.0), b / (b + 1.0));
    if share == 0.5 {
        0.0
    } else {
        normal_quantile(share)
    }
}

/// Acceleration from jackknife values; zero when they are all equal.
pub fn bca_acceleration(jackknife: &[f64]) -> f64 {
    let m = jackknife.len() as f64;
    let mean = jackknife.iter().sum::<f64>() / m;
    let (mut s2, mut s3) = (0.0, 0.0);
    for &t in jackknife {
        let d = mean - t;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 == 0.0 {
        0.0
    } else {
        s3 / (6.0 * s2.powf(1.5))
    }
}

/// Adjusted percentile levels `Φ(z0 + (z0 + z_q)/(1 − a(z0 + z_q)))` for the
/// two tails of a `level` interval.
pub fn bca_levels(z0: f64, accel: f64, level: f64) -> (f64, f64) {
    let alpha = (1.0 - level) / 2.0;
    if z0 == 0.0 && accel == 0.0 {
        return (alpha, 1.0 - alpha);
    }
    let adjust = |q: f64| {
        let zq = normal_quantile(q);
        let s = z0 + zq;
        normal_cdf(z0 + s / (1.0 - accel * s))
    };
    (adjust(alpha), adjust(1.0 - alpha))
}

pub fn ci_bca(point: f64, dist: &BootstrapDistribution, jackknife: &[f64], level: f64) -> Result<ConfidenceInterval> {
    check_replicates(dist, level)?;
    if jackknife.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: jackknife.len() });
    }
    let z0 = bca_bias_correction(point, &dist.estimates);
    let accel = bca_acceleration(jackknife);
    let (a1, a2) = bca_levels(z0, accel, level);
    let s = sorted(&dist.estimates);
    Ok(ConfidenceInterval {
        lower: quantile_sorted(&s, a1),
        upper: quantile_sorted(&s, a2),
        level,
        method: CiMethod::Bca,
        p_value: None,
    })
}
