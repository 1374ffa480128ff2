//! Wald, percentile, basic and BCa intervals from one bootstrap
//! distribution.
//!
//! `cargo run --release --example confidence_intervals`

use psvar::bootstrap::{
    bootstrap_distribution, bootstrap_se, jackknife_estimates, BootstrapPlan, LogisticPropensity, OriginalFit,
    OutcomeModelMode, PropensityFitter, PsMode, ResampleStrategy,
};
use psvar::ci::{bca_acceleration, bca_bias_correction, ci_basic, ci_bca, ci_percentile, ci_wald};
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::{compute_weights, wate_point, EstimatorConfig, WeightScheme};

fn main() -> psvar::Result<()> {
    let level = 0.95;
    let d = cohort_like(CohortShape { n: 200, n_treated: 30, ..CohortShape::default() }, 8)?;
    let fitter = LogisticPropensity::default();
    let fit = fitter.fit(&d)?;
    let point = wate_point(d.y(), d.z(), &compute_weights(&fit.e_hat, d.z(), WeightScheme::Iptw)?)?;
    let original = OriginalFit { e_hat: &fit.e_hat, outcome: None };
    let cfg = EstimatorConfig::weighting(WeightScheme::Iptw);

    let plan = BootstrapPlan::new(2000, ResampleStrategy::Standard, PsMode::Reestimated, 3);
    let dist = bootstrap_distribution(&d, &plan, &cfg, &original, &fitter)?;
    let jack = jackknife_estimates(&d, PsMode::Reestimated, OutcomeModelMode::Refit, &cfg, &original, &fitter)?;
    println!(
        "point {point:.4}, bootstrap se {:.4}, bias correction {:.4}, acceleration {:.4}",
        bootstrap_se(&dist)?,
        bca_bias_correction(point, &dist.estimates),
        bca_acceleration(&jack)
    );

    let intervals = [
        ("wald", ci_wald(point, bootstrap_se(&dist)?, level)?),
        ("percentile", ci_percentile(&dist, level)?),
        ("basic", ci_basic(point, &dist, level)?),
        ("bca", ci_bca(point, &dist, &jack, level)?),
    ];
    for (name, ci) in intervals {
        println!("{name:<11} ({:.4}, {:.4})  width {:.4}", ci.lower, ci.upper, ci.width());
    }
    Ok(())
}
