//! Numeric CSV tables with named columns.

use std::path::Path;

use puate::regression::Matrix;

use crate::CliError;

/// Column names with special meaning; every other column is a covariate.
pub const RESERVED: [&str; 10] = ["o", "y", "d", "mu_t", "nu", "pi1", "g1", "e1", "r", "mu_u"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self {
            names: vec![],
            columns: vec![],
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn push_matrix(&mut self, x: &Matrix, prefix: &str) {
        for j in 0..x.ncols() {
            self.push(format!("{prefix}{}", j + 1), x.column(j).iter().copied().collect());
        }
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn require(&self, name: &str, path: &Path) -> Result<&[f64], CliError> {
        self.get(name).ok_or_else(|| {
            CliError::Config(format!("{}: missing column {name:?}", path.display()))
        })
    }

    pub fn bools(&self, name: &str, path: &Path) -> Result<Vec<bool>, CliError> {
        self.require(name, path)?
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(CliError::Config(format!(
                    "{}: row {}: column {name:?} must be 0 or 1, got {v}",
                    path.display(),
                    i + 1
                ))),
            })
            .collect()
    }

    /// Covariate matrix built from every non-reserved column, in file order.
    pub fn covariates(&self, path: &Path) -> Result<Matrix, CliError> {
        let keep: Vec<usize> = (0..self.names.len())
            .filter(|&k| !RESERVED.contains(&self.names[k].as_str()))
            .collect();
        if keep.is_empty() {
            return Err(CliError::Config(format!(
                "{}: no covariate columns",
                path.display()
            )));
        }
        Ok(Matrix::from_fn(self.nrows(), keep.len(), |i, j| {
            self.columns[keep[j]][i]
        }))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    CliError::Config(format!(
                        "{}: row {}, column {:?}: not a number: {field:?}",
                        path.display(),
                        i + 1,
                        names[k]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Config(format!(
                        "{}: row {}, column {:?}: non-finite value",
                        path.display(),
                        i + 1,
                        names[k]
                    )));
                }
                columns[k].push(v);
            }
        }
        Ok(Self { names, columns })
    }

    /// Writes shortest round-trip decimal representations.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.names).map_err(io)?;
        for i in 0..self.nrows() {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))
                .map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }
}

pub fn flags(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new();
        t.push("x1", vec![0.1, -1e-300, 2.0 / 3.0]);
        t.push("o", vec![1.0, 0.0, 1.0]);
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.covariates(&path).unwrap().ncols(), 1);
        assert_eq!(back.bools("o", &path).unwrap(), vec![true, false, true]);
        assert!(back.require("y", &path).is_err());
    }
}
