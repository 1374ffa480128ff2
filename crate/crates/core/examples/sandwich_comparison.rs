//! Sandwich standard errors side by side, including the closed-form matrix
//! oracle and the numeric stack with and without the propensity block.
//!
//! `cargo run --release --example sandwich_comparison`

use psvar::data::DesignMatrix;
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::{compute_weights, hajek_means, WeightScheme};
use psvar::glm::fit_logistic;
use psvar::sandwich::{
    appendix_oracle_ms, appendix_oracle_pes, build_stack, variance_fixed, variance_ms_ate, variance_pes_ate, StackInputs,
};

fn main() -> psvar::Result<()> {
    let d = cohort_like(CohortShape::default(), 11)?;
    let dm = DesignMatrix::with_intercept(&d);
    let ps = fit_logistic(&dm, d.z())?;
    let w = compute_weights(&ps.fitted, d.z(), WeightScheme::Iptw)?;
    let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice())?;
    println!("ATE estimate {:.4}", mu1 - mu0);

    let inputs = |fixed| build_stack(WeightScheme::Iptw, fixed, StackInputs { data: &d, ps_design: &dm, ps_fit: &ps, outcome: None });
    let rows = [
        ("fixed-weight sandwich", variance_fixed(&d, &w)?.se),
        ("fixed, numeric stack", inputs(true)?.variance()?.se),
        ("model-based sandwich", variance_ms_ate(&d, &ps.fitted, &dm, mu1, mu0)?.se),
        ("  matrix oracle", appendix_oracle_ms(&d, &ps.fitted, &dm, mu1, mu0)?.se),
        ("estimated-PS sandwich", variance_pes_ate(&d, &ps.fitted, &dm, mu1, mu0)?.se),
        ("  matrix oracle", appendix_oracle_pes(&d, &ps.fitted, &dm, mu1, mu0)?.se),
        ("numeric stack", inputs(false)?.variance()?.se),
    ];
    for (name, se) in rows {
        println!("{name:<24} {se:.6}");
    }
    Ok(())
}
