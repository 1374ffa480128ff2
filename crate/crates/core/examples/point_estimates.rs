//! Weights and point estimates by hand: IPTW and overlap weights, the
//! normalized weighted difference, and its outcome-model augmented form.
//!
//! `cargo run --release --example point_estimates`

use psvar::data::DesignMatrix;
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::{
    augmented_point, compute_weights, fit_outcome_models, wate_point, OutcomeModelSpec, WeightScheme,
};
use psvar::glm::fit_logistic;

fn main() -> psvar::Result<()> {
    let d = cohort_like(CohortShape::default(), 3)?;
    let ps = fit_logistic(&DesignMatrix::with_intercept(&d), d.z())?;
    println!("propensity fit: {} IRLS iterations, beta {:.3?}", ps.iterations, ps.beta);

    let all: Vec<usize> = (0..d.p()).collect();
    let outcome = fit_outcome_models(&d, &OutcomeModelSpec::pooled(all))?;

    for scheme in [WeightScheme::Iptw, WeightScheme::Overlap] {
        let w = compute_weights(&ps.fitted, d.z(), scheme)?;
        let (lo, hi) = w.as_slice().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let plain = wate_point(d.y(), d.z(), &w)?;
        let aug = augmented_point(d.y(), d.z(), &ps.fitted, scheme, &outcome)?;
        println!("{}: weights in [{lo:.3}, {hi:.3}], weighted {plain:.4}, augmented {aug:.4}", scheme.estimand());
    }
    Ok(())
}
