//! Cohort data: binary outcome, binary treatment and a covariate block.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Subgroup splits refuse columns with more distinct values than this.
pub const MAX_SPLIT_LEVELS: usize = 10;

/// Rows of `(y, z, x)` with covariates stored column-major.
///
/// `y` and `z` hold exact 0.0/1.0 values so they can enter arithmetic
/// directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome_name: String,
    treatment_name: String,
    y: Vec<f64>,
    z: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

fn check_binary(values: &[f64], treatment: bool) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            let row = i + 1;
            let value = v.to_string();
            return Err(if treatment {
                Error::NonBinaryTreatment { row, value }
            } else {
                Error::NonBinaryOutcome { row, value }
            });
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: Vec<f64>, columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        Self::with_names("y", "z", y, z, columns, names)
    }

    pub fn with_names(
        outcome_name: &str,
        treatment_name: &str,
        y: Vec<f64>,
        z: Vec<f64>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if z.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: z.len() });
        }
        if columns.len() != names.len() {
            return Err(Error::DimensionMismatch { expected: names.len(), got: columns.len() });
        }
        check_binary(&y, false)?;
        check_binary(&z, true)?;
        let mut seen = HashSet::new();
        for (name, col) in names.iter().zip(&columns) {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: col.len() });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::UnparseableCell { row: i + 1, col: name.clone(), value: col[i].to_string() });
            }
        }
        Ok(Dataset {
            outcome_name: outcome_name.to_string(),
            treatment_name: treatment_name.to_string(),
            y,
            z,
            columns,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment_name
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&z| z == 1.0).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// Fails with `EmptyArm` unless both arms have at least one subject.
    pub fn require_both_arms(&self) -> Result<()> {
        let n1 = self.n_treated();
        if n1 == 0 {
            return Err(Error::EmptyArm { arm: 1 });
        }
        if n1 == self.n() {
            return Err(Error::EmptyArm { arm: 0 });
        }
        Ok(())
    }

    /// New dataset made of the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            outcome_name: self.outcome_name.clone(),
            treatment_name: self.treatment_name.clone(),
            y: pick(&self.y),
            z: pick(&self.z),
            columns: self.columns.iter().map(|c| pick(c)).collect(),
            names: self.names.clone(),
        }
    }

    fn without_column(&self, j: usize) -> Dataset {
        let mut out = self.clone();
        out.columns.remove(j);
        out.names.remove(j);
        out
    }

    /// Copy without the named covariate.
    pub fn drop_column(&self, name: &str) -> Result<Dataset> {
        Ok(self.without_column(self.column_index(name)?))
    }

    /// Column names of a comma-separated file.
    pub fn csv_headers(path: impl AsRef<Path>) -> Result<Vec<String>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
        Ok(rdr.headers()?.iter().map(String::from).collect())
    }

    /// Reads a comma-separated file with a header row.
    pub fn load_csv(path: impl AsRef<Path>, outcome: &str, treatment: &str, covariates: &[&str]) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, outcome, treatment, covariates)
    }

    pub fn read_csv<R: Read>(reader: R, outcome: &str, treatment: &str, covariates: &[&str]) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let y_col = find(outcome)?;
        let z_col = find(treatment)?;
        let x_cols = covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

        let mut y = Vec::new();
        let mut z = Vec::new();
        let mut columns = vec![Vec::new(); x_cols.len()];
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            let cell = |col: usize, name: &str| -> Result<f64> {
                let raw = record.get(col).unwrap_or("");
                raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::UnparseableCell {
                    row,
                    col: name.to_string(),
                    value: raw.to_string(),
                })
            };
            let yv = cell(y_col, outcome)?;
            if yv != 0.0 && yv != 1.0 {
                return Err(Error::NonBinaryOutcome { row, value: record[y_col].to_string() });
            }
            let zv = cell(z_col, treatment)?;
            if zv != 0.0 && zv != 1.0 {
                return Err(Error::NonBinaryTreatment { row, value: record[z_col].to_string() });
            }
            y.push(yv);
            z.push(zv);
            for (k, (&col, name)) in x_cols.iter().zip(covariates).enumerate() {
                columns[k].push(cell(col, name)?);
            }
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let names = covariates.iter().map(|s| s.to_string()).collect();
        Dataset::with_names(outcome, treatment, y, z, columns, names)
    }

    /// Writes the dataset in the same dialect `read_csv` accepts. Values use
    /// the shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![self.outcome_name.clone(), self.treatment_name.clone()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            record.push(self.y[i].to_string());
            record.push(self.z[i].to_string());
            record.extend(self.columns.iter().map(|c| c[i].to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Partitions rows by the distinct values of a covariate column, in
    /// ascending order of value. The split column is dropped from each part.
    pub fn subgroup_split(&self, column: &str) -> Result<Vec<(String, Dataset)>> {
        let j = self.column_index(column)?;
        let mut levels: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
        for (i, &v) in self.columns[j].iter().enumerate() {
            // total order on finite values; -0.0 folds into 0.0
            let v = if v == 0.0 { 0.0 } else { v };
            levels.entry(ordered_bits(v)).or_insert_with(|| (v, Vec::new())).1.push(i);
            if levels.len() > MAX_SPLIT_LEVELS {
                let distinct: HashSet<u64> = self.columns[j].iter().map(|&v| ordered_bits(v)).collect();
                return Err(Error::TooManyLevels {
                    column: column.to_string(),
                    levels: distinct.len(),
                    limit: MAX_SPLIT_LEVELS,
                });
            }
        }
        let base = self.without_column(j);
        Ok(levels
            .into_values()
            .map(|(value, rows)| (format!("{column}={value}"), base.select_rows(&rows)))
            .collect())
    }
}

fn ordered_bits(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DesignMatrix {
    /// Intercept followed by every covariate of `d`.
    pub fn with_intercept(d: &Dataset) -> Self {
        let all: Vec<usize> = (0..d.p()).collect();
        Self::with_covariates(d, &all)
    }

    /// Intercept followed by the covariates at the given indices.
    pub fn with_covariates(d: &Dataset, covariates: &[usize]) -> Self {
        let cols: Vec<&[f64]> = covariates.iter().map(|&j| d.column(j)).collect();
        Self::from_columns(d.n(), &cols)
    }

    /// Intercept followed by the given columns, each of length `rows`.
    pub fn from_columns(rows: usize, columns: &[&[f64]]) -> Self {
        let cols = columns.len() + 1;
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.push(1.0);
            values.extend(columns.iter().map(|c| c[i]));
        }
        DesignMatrix { rows, cols, values }
    }

    /// Wraps raw row-major values; the first column must be all ones.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if cols == 0 || values.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: values.len() });
        }
        if values.chunks(cols).any(|r| r[0] != 1.0) {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(DesignMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.cols)
    }
}
