//! Estimate reports for observed datasets, overall and per subgroup.

use std::io::Write;

use serde::Serialize;

use crate::analysis::{analyze_sample, AnalysisSettings, MethodSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const OVERALL: &str = "overall";

/// One output row. CSV and JSON carry exactly these fields; absent values
/// are empty cells in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub group: String,
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub estimand: String,
    pub method: String,
    pub point: Option<f64>,
    pub se: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub level: f64,
    pub p_value: Option<f64>,
    pub boot_failures: Option<usize>,
    pub boot_separation_flags: Option<usize>,
    pub ps_separation: Option<bool>,
    pub error: Option<String>,
}

impl ReportRow {
    fn failed(group: &str, d: &Dataset, method: &MethodSpec, level: f64, err: &Error) -> Self {
        ReportRow {
            group: group.to_string(),
            n: d.n(),
            n_treated: d.n_treated(),
            n_control: d.n_control(),
            estimand: method.scheme.estimand().to_string(),
            method: method.label(),
            point: None,
            se: None,
            ci_lo: None,
            ci_hi: None,
            level,
            p_value: None,
            boot_failures: None,
            boot_separation_flags: None,
            ps_separation: None,
            error: Some(format!("{}: {err}", err.kind())),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

/// Rows for one group. Errors that stop the whole group (such as an empty
/// arm) produce one error row per method.
pub fn analyze_group(group: &str, d: &Dataset, methods: &[MethodSpec], settings: &AnalysisSettings) -> Vec<ReportRow> {
    let estimates = match analyze_sample(d, methods, settings) {
        Ok(e) => e,
        Err(err) => return methods.iter().map(|m| ReportRow::failed(group, d, m, settings.level, &err)).collect(),
    };
    methods
        .iter()
        .zip(estimates)
        .map(|(m, est)| match est {
            Ok(e) => ReportRow {
                group: group.to_string(),
                n: d.n(),
                n_treated: d.n_treated(),
                n_control: d.n_control(),
                estimand: m.scheme.estimand().to_string(),
                method: m.label(),
                point: Some(e.point),
                se: Some(e.se),
                ci_lo: Some(e.ci.lower),
                ci_hi: Some(e.ci.upper),
                level: e.ci.level,
                p_value: e.ci.p_value,
                boot_failures: e.bootstrap_failures.map(|(f, _)| f),
                boot_separation_flags: e.bootstrap_separation_flags,
                ps_separation: Some(e.ps_separation_flag),
                error: None,
            },
            Err(err) => ReportRow::failed(group, d, m, settings.level, &err),
        })
        .collect()
}

/// Column defining subgroups. With `adjust`, the overall propensity model
/// includes the column; subgroup models never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subgroup<'a> {
    pub column: &'a str,
    pub adjust: bool,
}

/// Overall rows followed by one block per subgroup level.
pub fn analyze_dataset(
    d: &Dataset,
    subgroup: Option<Subgroup<'_>>,
    methods: &[MethodSpec],
    settings: &AnalysisSettings,
) -> Result<Vec<ReportRow>> {
    let Some(sg) = subgroup else { return Ok(analyze_group(OVERALL, d, methods, settings)) };
    let parts = d.subgroup_split(sg.column)?;
    let mut rows = if sg.adjust {
        analyze_group(OVERALL, d, methods, settings)
    } else {
        analyze_group(OVERALL, &d.drop_column(sg.column)?, methods, settings)
    };
    for (label, sub) in parts {
        rows.extend(analyze_group(&label, &sub, methods, settings));
    }
    Ok(rows)
}

pub const REPORT_HEADER: [&str; 16] = [
    "group",
    "n",
    "n_treated",
    "n_control",
    "estimand",
    "method",
    "point",
    "se",
    "ci_lo",
    "ci_hi",
    "level",
    "p_value",
    "boot_failures",
    "boot_separation_flags",
    "ps_separation",
    "error",
];

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.n.to_string(),
            r.n_treated.to_string(),
            r.n_control.to_string(),
            r.estimand.clone(),
            r.method.clone(),
            cell(&r.point),
            cell(&r.se),
            cell(&r.ci_lo),
            cell(&r.ci_hi),
            r.level.to_string(),
            cell(&r.p_value),
            cell(&r.boot_failures),
            cell(&r.boot_separation_flags),
            cell(&r.ps_separation),
            cell(&r.error),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

pub fn write_report_json<W: Write>(mut writer: W, rows: &[ReportRow]) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, rows)?;
    writer.write_all(b"\n").map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_json_fields() {
        let row = ReportRow {
            group: "g".into(),
            n: 2,
            n_treated: 1,
            n_control: 1,
            estimand: "ATE".into(),
            method: "fs:wald".into(),
            point: None,
            se: None,
            ci_lo: None,
            ci_hi: None,
            level: 0.95,
            p_value: None,
            boot_failures: None,
            boot_separation_flags: None,
            ps_separation: None,
            error: None,
        };
        let v = serde_json::to_value(&row).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = REPORT_HEADER.to_vec();
        expected.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, expected);
    }
}
