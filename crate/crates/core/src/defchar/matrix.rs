use std::io::{Read, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_defchars, DEFCHAR_NAMES};
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::ingest::{DatasetEntry, DefectDataset};

/// Unscaled characteristic values, one row per ground-truth defect.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrix {
    pub column_names: Vec<String>,
    pub defect_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn entry_rows(entry: &DatasetEntry) -> Result<Vec<Vec<f64>>> {
    let polygons: Vec<&Polygon> = entry.truths.iter().map(|t| &t.region).collect();
    (0..polygons.len())
        .map(|i| {
            let others: Vec<&Polygon> = polygons
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| *p)
                .collect();
            Ok(extract_defchars(&entry.image, polygons[i], &others)?.0.to_vec())
        })
        .collect()
}

/// Extracts every ground-truth defect of the dataset, in dataset order.
pub fn build_matrix(dataset: &DefectDataset) -> Result<RawMatrix> {
    if dataset.defect_count() == 0 {
        return Err(Error::EmptyDataset);
    }
    #[cfg(feature = "parallel")]
    let per_entry: Vec<Result<Vec<Vec<f64>>>> = dataset.entries.par_iter().map(entry_rows).collect();
    #[cfg(not(feature = "parallel"))]
    let per_entry: Vec<Result<Vec<Vec<f64>>>> = dataset.entries.iter().map(entry_rows).collect();

    let mut rows = Vec::with_capacity(dataset.defect_count());
    for r in per_entry {
        rows.extend(r?);
    }
    Ok(RawMatrix {
        column_names: DEFCHAR_NAMES.iter().map(|s| s.to_string()).collect(),
        defect_ids: dataset.defect_ids(),
        rows,
    })
}

impl RawMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(out, &self.column_names, &self.defect_ids, &self.rows)
    }

    /// Reads a table written by [`RawMatrix::write_csv`]: a `defect_id`
    /// column followed by one column per characteristic.
    pub fn read_csv<R: Read>(input: R) -> Result<RawMatrix> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("defect_id") {
            return Err(Error::Csv("first column must be `defect_id`".into()));
        }
        let column_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut defect_ids = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            defect_ids.push(record[0].to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Csv(format!("invalid number `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != column_names.len() {
                return Err(Error::ColumnMismatch {
                    expected: column_names.len(),
                    found: row.len(),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(RawMatrix {
            column_names,
            defect_ids,
            rows,
        })
    }
}

fn write_table<W: Write>(out: W, names: &[String], ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["defect_id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(rows) {
        let mut record = Vec::with_capacity(row.len() + 1);
        record.push(id.clone());
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Observed range of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        ColumnScale { min, max }
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, s: f64) -> f64 {
        self.min + s * (self.max - self.min)
    }
}

/// Raw and min-max scaled values with the per-column scaling parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DefCharMatrix {
    pub column_names: Vec<String>,
    pub defect_ids: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub scaled: Vec<Vec<f64>>,
    pub scaling: Vec<ColumnScale>,
}

pub fn minmax_scale(matrix: &RawMatrix) -> DefCharMatrix {
    let scaling: Vec<ColumnScale> = (0..matrix.n_cols())
        .map(|c| ColumnScale::fit(matrix.rows.iter().map(|r| r[c])))
        .collect();
    let scaled = matrix
        .rows
        .iter()
        .map(|r| r.iter().zip(&scaling).map(|(&x, s)| s.scale(x)).collect())
        .collect();
    DefCharMatrix {
        column_names: matrix.column_names.clone(),
        defect_ids: matrix.defect_ids.clone(),
        raw: matrix.rows.clone(),
        scaled,
        scaling,
    }
}

impl DefCharMatrix {
    pub fn n_rows(&self) -> usize {
        self.scaled.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn select_columns(&self, columns: &[usize]) -> DefCharMatrix {
        let pick = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect()
        };
        DefCharMatrix {
            column_names: columns.iter().map(|&c| self.column_names[c].clone()).collect(),
            defect_ids: self.defect_ids.clone(),
            raw: pick(&self.raw),
            scaled: pick(&self.scaled),
            scaling: columns.iter().map(|&c| self.scaling[c]).collect(),
        }
    }

    pub fn write_raw_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(out, &self.column_names, &self.defect_ids, &self.raw)
    }

    pub fn write_scaled_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(out, &self.column_names, &self.defect_ids, &self.scaled)
    }
}
