//! Overall and per-subgroup report, written as CSV and JSON.
//!
//! `cargo run --release --example subgroup_report`

use psvar::analysis::{AnalysisSettings, MethodSpec};
use psvar::dgp::{cohort_like, CohortShape};
use psvar::estimators::WeightScheme;
use psvar::report::{analyze_dataset, write_report_csv, write_report_json, Subgroup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = cohort_like(CohortShape::default(), 21)?;
    let methods: Vec<MethodSpec> =
        ["fs", "ns", "boot-strat-est:bca"].iter().map(|m| MethodSpec::parse(WeightScheme::Iptw, m)).collect::<psvar::Result<_>>()?;
    let settings = AnalysisSettings::new(300, 21);

    // `female` stays a propensity covariate overall and is dropped within
    // each level, where it is constant.
    let rows = analyze_dataset(&d, Some(Subgroup { column: "female", adjust: true }), &methods, &settings)?;
    write_report_csv(std::io::stdout().lock(), &rows)?;

    let path = std::env::temp_dir().join("psvar-subgroup-report.json");
    let file = std::fs::File::create(&path)?;
    write_report_json(file, &rows)?;
    eprintln!("JSON report written to {}", path.display());
    Ok(())
}
