//! Benchmark problems and dataset I/O.

mod registry;

pub use registry::{
    builtin, find, generate, parse_registry, GenerateError, GeneratorSpec, Partition, ProblemSpec,
    Sampling, VariableSpec,
};

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{cell}` is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("matrix has {matrix} columns but {names} names were given")]
    Shape { matrix: usize, names: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("split fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Named real columns, one of which is the regression target.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    target: String,
    target_index: usize,
    data: Array2<f64>,
    features: Array2<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, data: Array2<f64>, target: &str) -> Result<Self, DataError> {
        if data.ncols() != columns.len() {
            return Err(DataError::Shape {
                matrix: data.ncols(),
                names: columns.len(),
            });
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        let target_index = columns
            .iter()
            .position(|c| c == target)
            .ok_or_else(|| DataError::MissingTarget(target.to_string()))?;
        let keep: Vec<usize> = (0..columns.len()).filter(|&c| c != target_index).collect();
        let features = data.select(Axis(1), &keep);
        Ok(Dataset {
            columns,
            target: target.to_string(),
            target_index,
            data,
            features,
        })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// All column names in storage order, target included.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn target_name(&self) -> &str {
        &self.target
    }

    /// Names of the input columns, in the order seen by `x0, x1, ...`.
    pub fn feature_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.target_index)
            .map(|(_, c)| c.as_str())
            .collect()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn target(&self) -> ArrayView1<'_, f64> {
        self.data.column(self.target_index)
    }

    pub fn target_vec(&self) -> Vec<f64> {
        self.target().to_vec()
    }

    /// Rows in the given order, as a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let data = self.data.select(Axis(0), rows);
        Dataset::new(self.columns.clone(), data, &self.target).expect("same columns")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in self.data.rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Parses a headered CSV of reals.
    pub fn read_csv<R: Read>(input: R, target: &str) -> Result<Self, DataError> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if !columns.iter().any(|c| c == target) {
            return Err(DataError::MissingTarget(target.to_string()));
        }
        let mut cells = Vec::new();
        let mut rows = 0;
        for (i, record) in r.records().enumerate() {
            let record = record?;
            // 1-based file line of the record, counting the header.
            let row = i + 2;
            if record.len() != columns.len() {
                return Err(DataError::Ragged {
                    row,
                    expected: columns.len(),
                    found: record.len(),
                });
            }
            for (cell, column) in record.iter().zip(&columns) {
                let v: f64 = cell.trim().parse().map_err(|_| DataError::NotNumeric {
                    row,
                    column: column.clone(),
                    cell: cell.to_string(),
                })?;
                cells.push(v);
            }
            rows += 1;
        }
        let data = Array2::from_shape_vec((rows, columns.len()), cells).expect("rectangular");
        Dataset::new(columns, data, target)
    }

    pub fn load_csv(path: impl AsRef<Path>, target: &str) -> Result<Self, DataError> {
        Dataset::read_csv(std::fs::File::open(path)?, target)
    }

    /// First non-finite cell, if any.
    pub fn check_finite(&self) -> Result<(), DataError> {
        for (r, row) in self.data.rows().into_iter().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    row: r,
                    column: self.columns[c].clone(),
                });
            }
        }
        Ok(())
    }
}

/// How an external file is divided into training and test rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_fraction: f64,
    /// `None` keeps file order; `Some(seed)` shuffles rows first.
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

impl Split {
    pub fn contiguous(train_fraction: f64) -> Self {
        Split {
            train_fraction,
            shuffle_seed: None,
        }
    }

    pub fn shuffled(train_fraction: f64, seed: u64) -> Self {
        Split {
            train_fraction,
            shuffle_seed: Some(seed),
        }
    }

    /// Row indices for (train, test).
    pub fn indices(&self, rows: usize) -> Result<(Vec<usize>, Vec<usize>), DataError> {
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(DataError::BadFraction(self.train_fraction));
        }
        let mut order: Vec<usize> = (0..rows).collect();
        if let Some(seed) = self.shuffle_seed {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let n_train = ((self.train_fraction * rows as f64).round() as usize).min(rows);
        let test = order.split_off(n_train);
        Ok((order, test))
    }

    pub fn apply(&self, data: &Dataset) -> Result<(Dataset, Dataset), DataError> {
        let (train, test) = self.indices(data.rows())?;
        Ok((data.select_rows(&train), data.select_rows(&test)))
    }
}

/// Reads a CSV file and splits it into (train, test).
pub fn load_csv(
    path: impl AsRef<Path>,
    target: &str,
    split: Split,
) -> Result<(Dataset, Dataset), DataError> {
    split.apply(&Dataset::load_csv(path, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_rows() -> String {
        let mut s = String::from("a,b,y\n");
        for i in 0..10 {
            s.push_str(&format!("{i},{},{}\n", i * 2, i as f64 * 0.5));
        }
        s
    }

    #[test]
    fn contiguous_split() {
        let d = Dataset::read_csv(ten_rows().as_bytes(), "y").unwrap();
        let (train, test) = Split::contiguous(0.7).apply(&d).unwrap();
        assert_eq!((train.rows(), test.rows()), (7, 3));
        assert_eq!(train.target_vec()[6], 3.0);
        assert_eq!(test.target_vec()[0], 3.5);
        assert_eq!(train.feature_names(), vec!["a", "b"]);
        assert_eq!(train.features().row(1).to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn shuffled_split_is_seeded_and_disjoint() {
        let (a, b) = Split::shuffled(0.6, 9).indices(50).unwrap();
        let (a2, b2) = Split::shuffled(0.6, 9).indices(50).unwrap();
        assert_eq!((&a, &b), (&a2, &b2));
        assert_eq!(a.len(), 30);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_ne!(a, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn missing_target_names_the_column() {
        let err = Dataset::read_csv(ten_rows().as_bytes(), "z").unwrap_err();
        assert!(err.to_string().contains("`z`"), "{err}");
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let err = Dataset::read_csv("a,y\n1,2\n3\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, DataError::Ragged { row: 3, expected: 2, found: 1 }), "{err}");
        let err = Dataset::read_csv("a,y\n1,2\nfoo,3\n".as_bytes(), "y").unwrap_err();
        assert_eq!(err.to_string(), "row 3, column `a`: `foo` is not a number");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let data = Array2::from_shape_vec((2, 2), vec![0.1 + 0.2, -1e-300, 1.0 / 3.0, 7.0]).unwrap();
        let d = Dataset::new(vec!["x".into(), "y".into()], data, "y").unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice(), "y").unwrap(), d);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::read_csv(ten_rows().as_bytes(), "y").unwrap();
        d.save_csv(&path).unwrap();
        let (train, test) = load_csv(&path, "y", Split::contiguous(1.0)).unwrap();
        assert_eq!(train, d);
        assert_eq!(test.rows(), 0);
    }
}
