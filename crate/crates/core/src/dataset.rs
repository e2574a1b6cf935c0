//! Ingestion of the Cleveland heart-disease table, median imputation,
//! standardization, seeded splits, and the cholesterol histogram.
//!
//! The split and standardization records serialize to small versioned
//! plain-text formats so a run can be reproduced exactly. Floats are written
//! with Rust's shortest-round-trip `Display`, which makes the round trip
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use crate::error::MedleyError;
use crate::rng;
use crate::Result;

/// Attribute names of the 13 feature columns, in file order.
pub const CLEVELAND_FEATURES: [&str; 13] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak",
    "slope", "ca", "thal",
];

/// Column index of serum cholesterol in [`CLEVELAND_FEATURES`].
pub const CHOL_COLUMN: usize = 4;

/// A fully ingested dataset: numeric features (no missing entries) and a
/// binary target.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub target: Array1<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, target: Array1<u8>, feature_names: Vec<String>) -> Result<Self> {
        if target.len() != features.nrows() {
            return Err(MedleyError::Dimension {
                expected: features.nrows(),
                got: target.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(MedleyError::Dimension {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        if target.iter().any(|&t| t > 1) {
            return Err(MedleyError::invalid("target labels must be 0 or 1"));
        }
        Ok(Dataset {
            features,
            target,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.ncols()
    }

    /// Target as floats in {0.0, 1.0}, the form the learners consume.
    pub fn target_f64(&self) -> Array1<f64> {
        self.target.mapv(|t| t as f64)
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut features = Array2::<f64>::zeros((idx.len(), self.n_cols()));
        let mut target = Array1::<u8>::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
            target[r] = self.target[i];
        }
        Dataset {
            features,
            target,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Parse the 14-column comma-separated Cleveland format from a string.
///
/// Missing feature values ("?") are imputed with the column median over the
/// non-missing entries. The 14th column `num` becomes the binary target
/// (num > 0 maps to 1).
pub fn parse_cleveland(content: &str) -> Result<Dataset> {
    let mut raw: Vec<Vec<Option<f64>>> = Vec::new();
    let mut targets: Vec<u8> = Vec::new();
    for (line_idx, line) in content.lines().enumerate() {
        let line_no = line_idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 14 {
            return Err(MedleyError::parse(
                line_no,
                format!("expected 14 comma-separated fields, found {}", fields.len()),
            ));
        }
        let mut row: Vec<Option<f64>> = Vec::with_capacity(13);
        for (col, field) in fields[..13].iter().enumerate() {
            if *field == "?" {
                row.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    MedleyError::parse(
                        line_no,
                        format!("non-numeric value {:?} in column {}", field, CLEVELAND_FEATURES[col]),
                    )
                })?;
                row.push(Some(v));
            }
        }
        let num: f64 = fields[13].parse().map_err(|_| {
            MedleyError::parse(line_no, format!("non-numeric target value {:?}", fields[13]))
        })?;
        targets.push(if num > 0.0 { 1 } else { 0 });
        raw.push(row);
    }
    if raw.is_empty() {
        return Err(MedleyError::invalid("empty dataset file"));
    }

    let n = raw.len();
    let mut medians = [0.0f64; 13];
    for col in 0..13 {
        let present: Vec<f64> = raw.iter().filter_map(|r| r[col]).collect();
        if present.is_empty() {
            return Err(MedleyError::invalid(format!(
                "column {} has no non-missing values to impute from",
                CLEVELAND_FEATURES[col]
            )));
        }
        medians[col] = crate::stats::median(&present);
    }

    let mut features = Array2::<f64>::zeros((n, 13));
    for (r, row) in raw.iter().enumerate() {
        for col in 0..13 {
            features[[r, col]] = row[col].unwrap_or(medians[col]);
        }
    }
    Dataset::new(
        features,
        Array1::from(targets),
        CLEVELAND_FEATURES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Load the Cleveland table from disk. See [`parse_cleveland`].
pub fn load_cleveland(path: &Path) -> Result<Dataset> {
    let content = std::fs::read_to_string(path)?;
    parse_cleveland(&content)
}

/// Per-column centering/scaling parameters fitted on one dataset, applicable
/// to held-out rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizeRecord {
    pub means: Vec<f64>,
    /// Population standard deviations (divide by n). 1.0 for constant columns.
    pub stds: Vec<f64>,
    /// True where the raw column had zero variance; such columns are only
    /// centered, never scaled.
    pub constant: Vec<bool>,
}

impl StandardizeRecord {
    /// Fit means and population standard deviations on `features`.
    pub fn fit(features: &Array2<f64>) -> StandardizeRecord {
        let n_cols = features.ncols();
        let mut means = Vec::with_capacity(n_cols);
        let mut stds = Vec::with_capacity(n_cols);
        let mut constant = Vec::with_capacity(n_cols);
        for col in 0..n_cols {
            let xs: Vec<f64> = features.column(col).to_vec();
            let m = crate::stats::mean(&xs);
            let s = crate::stats::population_std(&xs);
            means.push(m);
            if s > 0.0 {
                stds.push(s);
                constant.push(false);
            } else {
                stds.push(1.0);
                constant.push(true);
            }
        }
        StandardizeRecord { means, stds, constant }
    }

    /// Apply `(x - mean) / std` column-wise (constant columns: centered only).
    pub fn apply(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.means.len() {
            return Err(MedleyError::Dimension {
                expected: self.means.len(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for col in 0..self.means.len() {
            let m = self.means[col];
            let s = self.stds[col];
            out.column_mut(col).mapv_inplace(|x| (x - m) / s);
        }
        Ok(out)
    }

    /// Invert [`StandardizeRecord::apply`].
    pub fn inverse(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.means.len() {
            return Err(MedleyError::Dimension {
                expected: self.means.len(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for col in 0..self.means.len() {
            let m = self.means[col];
            let s = self.stds[col];
            out.column_mut(col).mapv_inplace(|x| x * s + m);
        }
        Ok(out)
    }

    /// Serialize to the `medley-standardize v1` plain-text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("medley-standardize v1\n");
        let _ = writeln!(out, "columns {}", self.means.len());
        for i in 0..self.means.len() {
            let _ = writeln!(
                out,
                "col {} mean {} std {} constant {}",
                i,
                self.means[i],
                self.stds[i],
                u8::from(self.constant[i])
            );
        }
        out
    }

    /// Parse the `medley-standardize v1` format.
    pub fn from_text(text: &str) -> Result<StandardizeRecord> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| MedleyError::invalid("empty standardize record"))?;
        if header.trim() != "medley-standardize v1" {
            return Err(MedleyError::parse(1, "expected header 'medley-standardize v1'"));
        }
        let (_, cols_line) = lines
            .next()
            .ok_or_else(|| MedleyError::parse(2, "missing 'columns' line"))?;
        let n: usize = cols_line
            .trim()
            .strip_prefix("columns ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MedleyError::parse(2, "expected 'columns <n>'"))?;
        let mut rec = StandardizeRecord {
            means: vec![0.0; n],
            stds: vec![1.0; n],
            constant: vec![false; n],
        };
        let mut seen = 0usize;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 8 || parts[0] != "col" || parts[2] != "mean" || parts[4] != "std" || parts[6] != "constant" {
                return Err(MedleyError::parse(line_no, "expected 'col <i> mean <m> std <s> constant <0|1>'"));
            }
            let i: usize = parts[1]
                .parse()
                .map_err(|_| MedleyError::parse(line_no, "bad column index"))?;
            if i >= n {
                return Err(MedleyError::parse(line_no, "column index out of range"));
            }
            rec.means[i] = parts[3]
                .parse()
                .map_err(|_| MedleyError::parse(line_no, "bad mean"))?;
            rec.stds[i] = parts[5]
                .parse()
                .map_err(|_| MedleyError::parse(line_no, "bad std"))?;
            rec.constant[i] = match parts[7] {
                "0" => false,
                "1" => true,
                _ => return Err(MedleyError::parse(line_no, "constant flag must be 0 or 1")),
            };
            seen += 1;
        }
        if seen != n {
            return Err(MedleyError::invalid(format!(
                "standardize record declares {} columns but provides {}",
                n, seen
            )));
        }
        Ok(rec)
    }
}

/// Standardize all feature columns of `d`, returning the transformed dataset
/// and the fitted record.
pub fn standardize(d: &Dataset) -> Result<(Dataset, StandardizeRecord)> {
    let rec = StandardizeRecord::fit(&d.features);
    let features = rec.apply(&d.features)?;
    Ok((
        Dataset {
            features,
            target: d.target.clone(),
            feature_names: d.feature_names.clone(),
        },
        rec,
    ))
}

/// Requested split fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec {
            train_fraction,
            val_fraction,
            test_fraction,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_fraction <= 0.0 || self.val_fraction <= 0.0 || self.test_fraction <= 0.0 {
            return Err(MedleyError::invalid("split fractions must be positive"));
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MedleyError::invalid(format!(
                "split fractions must sum to 1, got {}",
                sum
            )));
        }
        Ok(())
    }
}

/// A disjoint partition of row indices into train/validation/test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Serialize to the `medley-split v1` plain-text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("medley-split v1\n");
        for (name, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let _ = write!(out, "{}", name);
            for i in idx {
                let _ = write!(out, " {}", i);
            }
            out.push('\n');
        }
        out
    }

    /// Parse the `medley-split v1` format.
    pub fn from_text(text: &str) -> Result<SplitIndices> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| MedleyError::invalid("empty split record"))?;
        if header.trim() != "medley-split v1" {
            return Err(MedleyError::parse(1, "expected header 'medley-split v1'"));
        }
        let mut train = None;
        let mut val = None;
        let mut test = None;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut parts = t.split_whitespace();
            let key = parts.next().unwrap();
            let vals: Vec<usize> = parts
                .map(|p| {
                    p.parse()
                        .map_err(|_| MedleyError::parse(line_no, format!("bad index {:?}", p)))
                })
                .collect::<Result<_>>()?;
            match key {
                "train" => train = Some(vals),
                "val" => val = Some(vals),
                "test" => test = Some(vals),
                other => {
                    return Err(MedleyError::parse(line_no, format!("unknown section {:?}", other)))
                }
            }
        }
        match (train, val, test) {
            (Some(train), Some(val), Some(test)) => Ok(SplitIndices { train, val, test }),
            _ => Err(MedleyError::invalid("split record missing a section")),
        }
    }
}

/// Shuffle row indices with the spec seed and cut into three sets.
///
/// Validation and test receive `floor(fraction * n)` rows each; training
/// receives everything that remains, so the three sets always partition the
/// rows.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let n = d.n_rows();
    if n < 10 {
        return Err(MedleyError::invalid(format!(
            "need at least 10 rows to split, got {}",
            n
        )));
    }
    let n_val = (spec.val_fraction * n as f64).floor() as usize;
    let n_test = (spec.test_fraction * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(MedleyError::invalid(
            "split produced an empty subset; adjust fractions or dataset size",
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::rng_from_seed(rng::derive_seed(spec.seed, "dataset.split"));
    idx.shuffle(&mut r);
    let train = idx[..n_train].to_vec();
    let val = idx[n_train..n_train + n_val].to_vec();
    let test = idx[n_train + n_val..].to_vec();
    Ok(SplitIndices { train, val, test })
}

/// Equal-width histogram of one column.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `bins + 1` edges, ascending.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Histogram of the raw serum-cholesterol column.
pub fn chol_histogram(d: &Dataset, bins: usize) -> Result<Histogram> {
    histogram_of_column(d, CHOL_COLUMN, bins)
}

/// Equal-width histogram of column `col`; a zero-width range is widened by
/// ±0.5 so every value still lands in a bin.
pub fn histogram_of_column(d: &Dataset, col: usize, bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(MedleyError::invalid("histogram needs at least 1 bin"));
    }
    if col >= d.n_cols() {
        return Err(MedleyError::Dimension {
            expected: d.n_cols(),
            got: col,
        });
    }
    let xs: Vec<f64> = d.features.column(col).to_vec();
    let mut lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &xs {
        let mut b = ((x - lo) / width).floor() as usize;
        if b >= bins {
            b = bins - 1;
        }
        counts[b] += 1;
    }
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    Ok(Histogram { edges, counts })
}
