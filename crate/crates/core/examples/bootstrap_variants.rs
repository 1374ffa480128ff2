//! The four bootstrap variants on one dataset: standard or arm-stratified
//! resampling, with the propensity model held fixed or refitted.
//!
//! `cargo run --release --example bootstrap_variants [replicates]`

use psvar::bootstrap::{
    bootstrap_distribution, bootstrap_se, BootstrapPlan, LogisticPropensity, OriginalFit, PropensityFitter, PsMode,
    ResampleStrategy,
};
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::{EstimatorConfig, WeightScheme};

fn main() -> psvar::Result<()> {
    let b = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let d = cohort_like(CohortShape { n: 300, n_treated: 40, ..CohortShape::default() }, 5)?;
    let fitter = LogisticPropensity::default();
    let fit = fitter.fit(&d)?;
    let original = OriginalFit { e_hat: &fit.e_hat, outcome: None };
    let cfg = EstimatorConfig::weighting(WeightScheme::Iptw);

    for strategy in [ResampleStrategy::Standard, ResampleStrategy::Stratified] {
        for ps_mode in [PsMode::Fixed, PsMode::Reestimated] {
            let plan = BootstrapPlan::new(b, strategy, ps_mode, 42);
            let dist = bootstrap_distribution(&d, &plan, &cfg, &original, &fitter)?;
            println!(
                "{:<18} se {:.5}  kept {}/{}  failures {:?}  separation flags {}",
                plan.label(),
                bootstrap_se(&dist)?,
                dist.estimates.len(),
                dist.requested,
                dist.failures,
                dist.separation_flags
            );
        }
    }
    Ok(())
}
