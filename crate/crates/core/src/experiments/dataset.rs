//! CSV ingestion for real datasets.
//!
//! A dataset is a numeric CSV with a header row plus a JSON group config
//! naming the response column and, for every group, its ordered columns:
//!
//! ```json
//! { "response": "y",
//!   "groups": [ { "name": "a", "columns": ["x1", "x2"], "k": 1 },
//!               { "name": "b", "columns": ["x3"] } ] }
//! ```

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupStructure, GroupedDesign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub columns: Vec<String>,
    /// Optional per-group k for the k-max penalty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub response: String,
    pub groups: Vec<GroupSpec>,
}

impl GroupConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `k` overrides, if every group declares one.
    pub fn k_overrides(&self) -> Option<Vec<usize>> {
        self.groups.iter().map(|g| g.k).collect()
    }
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(e, rows.len() + 2))?;
            let line = rec.position().map_or(rows.len() + 2, |p| p.line() as usize);
            let mut row = Vec::with_capacity(rec.len());
            for (field, name) in rec.iter().zip(&headers) {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{name}`: `{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column `{name}`: non-finite value"),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no data rows".into(),
            });
        }
        Ok(Self { headers, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Grouped design built from a table, with the preprocessing applied.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub design: GroupedDesign,
    pub group_names: Vec<String>,
    pub feature_names: Vec<Vec<String>>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub response_mean: f64,
    pub k_overrides: Option<Vec<usize>>,
}

impl Dataset {
    /// With `standardize`, features get zero mean and unit variance and the
    /// response is centered; constant columns are only centered.
    pub fn from_table(table: &Table, config: &GroupConfig, standardize: bool) -> Result<Self> {
        let index: HashMap<&str, usize> = table
            .headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_str(), i))
            .collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::arg(format!("column `{name}` not found in the CSV header")))
        };
        let response_col = lookup(&config.response)?;
        let mut columns = Vec::new();
        for g in &config.groups {
            if g.columns.is_empty() {
                return Err(Error::arg(format!("group `{}` has no columns", g.name)));
            }
            for c in &g.columns {
                columns.push(lookup(c)?);
            }
        }
        let n = table.rows.len();
        let structure = GroupStructure::new(config.groups.iter().map(|g| g.columns.len()).collect())?;
        let mut matrix = DMatrix::from_fn(n, columns.len(), |r, c| table.rows[r][columns[c]]);
        let mut response = DVector::from_fn(n, |r, _| table.rows[r][response_col]);

        let mut means = vec![0.0; columns.len()];
        let mut scales = vec![1.0; columns.len()];
        let mut response_mean = 0.0;
        if standardize {
            for (c, mut col) in matrix.column_iter_mut().enumerate() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
                let sd = (col.norm_squared() / n as f64).sqrt();
                if sd > 0.0 {
                    col /= sd;
                    scales[c] = sd;
                }
                means[c] = mean;
            }
            response_mean = response.mean();
            response.add_scalar_mut(-response_mean);
        }

        let k_overrides = config.k_overrides();
        if let Some(k) = &k_overrides {
            for ((g, &k), &d) in config.groups.iter().zip(k).zip(structure.sizes()) {
                if k > d {
                    return Err(Error::arg(format!("group `{}`: k = {k} exceeds {d} columns", g.name)));
                }
            }
        }

        Ok(Self {
            design: GroupedDesign::from_parts(matrix, response, structure)?,
            group_names: config.groups.iter().map(|g| g.name.clone()).collect(),
            feature_names: config.groups.iter().map(|g| g.columns.clone()).collect(),
            feature_means: means,
            feature_scales: scales,
            response_mean,
            k_overrides,
        })
    }
}

pub fn load_dataset(
    csv_path: impl AsRef<Path>,
    config_path: impl AsRef<Path>,
    standardize: bool,
) -> Result<Dataset> {
    let table = Table::read(csv_path)?;
    let config = GroupConfig::load(config_path)?;
    Dataset::from_table(&table, &config, standardize)
}
