//! Every variance method on a synthetic rare-treatment cohort.
//!
//! `cargo run --release --example analyze_cohort [seed]`

use psvar::analysis::{AnalysisSettings, MethodSpec};
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::WeightScheme;
use psvar::report::analyze_dataset;

fn main() -> psvar::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let d = cohort_like(CohortShape::default(), seed)?;
    println!("{} subjects, {} treated, covariates {:?}", d.n(), d.n_treated(), d.covariate_names());

    let mut methods = Vec::new();
    for m in ["fs", "ms", "pes", "ns", "boot-std-fixed", "boot-strat-fixed", "boot-std-est", "boot-strat-est", "aipw-ns"] {
        methods.push(MethodSpec::parse(WeightScheme::Iptw, m)?);
    }
    for m in ["fs", "ns", "boot-std-est"] {
        methods.push(MethodSpec::parse(WeightScheme::Overlap, m)?);
    }

    let rows = analyze_dataset(&d, None, &methods, &AnalysisSettings::new(500, seed))?;
    println!("{:<8} {:<22} {:>9} {:>8} {:>20}", "estimand", "method", "point", "se", "95% interval");
    for r in rows {
        match (r.point, r.se, r.ci_lo, r.ci_hi) {
            (Some(p), Some(se), Some(lo), Some(hi)) => {
                println!("{:<8} {:<22} {p:>9.4} {se:>8.4} {:>20}", r.estimand, r.method, format!("({lo:.4}, {hi:.4})"))
            }
            _ => println!("{:<8} {:<22} {}", r.estimand, r.method, r.error.unwrap_or_default()),
        }
    }
    Ok(())
}
