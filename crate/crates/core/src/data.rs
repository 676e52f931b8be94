//! Synthetic regression data and CSV ingestion for the real-data
//! classification benchmarks.

use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{sigmoid, LinRegProblem, LogRegProblem};
use crate::numerics::{Matrix, RngStream};

/// Coefficients generating the synthetic linear-regression responses.
pub const LINREG_TRUE_COEFFICIENTS: [f64; 3] = [1.0, -0.7, 0.5];
pub const LINREG_FEATURE_VARIANCE: f64 = 0.5;
pub const LINREG_NOISE_VARIANCE: f64 = 0.25;
pub const LOGREG_FEATURE_VARIANCE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("data file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot parse row {row}, column {column}: {value:?}")]
    ParseError { row: usize, column: usize, value: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("class {0:?} does not occur in the label column")]
    UnknownClass(String),
    #[error("labels are not categorical")]
    NotCategorical,
    #[error("labels are not binary numbers")]
    NotBinary,
    #[error("i/o error reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Draws n pairs (a_j, y_j) with a_j ~ 𝒩(0, 0.5 I₃) and
/// y_j = x*ᵀa_j + δ_j, δ_j ~ 𝒩(0, 0.25).
pub fn gen_linreg(n: usize, prior_variance: f64, rng: &mut RngStream) -> LinRegProblem {
    assert!(n >= 1, "need at least one row");
    let d = LINREG_TRUE_COEFFICIENTS.len();
    let feature_sd = LINREG_FEATURE_VARIANCE.sqrt();
    let noise_sd = LINREG_NOISE_VARIANCE.sqrt();
    let mut features = Matrix::zeros(n, d);
    let mut responses = Vec::with_capacity(n);
    for j in 0..n {
        let mut y = 0.0;
        for (i, coef) in LINREG_TRUE_COEFFICIENTS.iter().enumerate() {
            let a = feature_sd * rng.normal();
            features[(j, i)] = a;
            y += coef * a;
        }
        responses.push(y + noise_sd * rng.normal());
    }
    LinRegProblem { features, responses, prior_variance, true_coefficients: Some(LINREG_TRUE_COEFFICIENTS.to_vec()) }
}

/// Synthetic logistic problem together with the coefficients that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLogReg {
    pub problem: LogRegProblem,
    pub coefficients: Vec<f64>,
}

/// Draws c ~ 𝒩(0, λI_d) once, then X_j ~ 𝒩(0, 2I_d) and y_j = 1{p_j ≤ σ(cᵀX_j)}
/// with p_j uniform.
pub fn gen_logreg(n: usize, d: usize, prior_variance: f64, rng: &mut RngStream) -> SyntheticLogReg {
    assert!(d >= 1, "need at least one feature");
    let sd = prior_variance.sqrt();
    let c: Vec<f64> = (0..d).map(|_| sd * rng.normal()).collect();
    gen_logreg_with_coefficients(n, c, prior_variance, rng)
}

pub fn gen_logreg_with_coefficients(
    n: usize,
    coefficients: Vec<f64>,
    prior_variance: f64,
    rng: &mut RngStream,
) -> SyntheticLogReg {
    assert!(n >= 1, "need at least one row");
    let d = coefficients.len();
    let sd = LOGREG_FEATURE_VARIANCE.sqrt();
    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let mut score = 0.0;
        for (i, c) in coefficients.iter().enumerate() {
            let x = sd * rng.normal();
            features[(j, i)] = x;
            score += c * x;
        }
        let p = rng.uniform();
        labels.push(if p <= sigmoid(score) { 1.0 } else { 0.0 });
    }
    SyntheticLogReg { problem: LogRegProblem { features, labels, prior_variance }, coefficients }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// The label column, kept as text.
    Class,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Expected layout of a CSV file: one class column, the rest numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub has_header: bool,
    pub expected_rows: Option<usize>,
}

impl Schema {
    fn numeric_then_class(names: &[&str], class: &str, rows: usize) -> Self {
        let mut columns: Vec<Column> =
            names.iter().map(|n| Column { name: n.to_string(), kind: ColumnKind::Numeric }).collect();
        columns.push(Column { name: class.to_string(), kind: ColumnKind::Class });
        Schema { columns, has_header: false, expected_rows: Some(rows) }
    }

    /// UCI Iris: four measurements and the species name.
    pub fn iris() -> Self {
        Self::numeric_then_class(
            &["sepal_length", "sepal_width", "petal_length", "petal_width"],
            "species",
            150,
        )
    }

    /// UCI MAGIC gamma telescope: ten image parameters and the g/h class.
    pub fn magic() -> Self {
        Self::numeric_then_class(
            &["fLength", "fWidth", "fSize", "fConc", "fConc1", "fAsym", "fM3Long", "fM3Trans", "fAlpha", "fDist"],
            "class",
            19020,
        )
    }

    pub fn numeric_count(&self) -> usize {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Numeric).count()
    }

    fn class_index(&self) -> Result<usize, DataError> {
        let mut it = self.columns.iter().enumerate().filter(|(_, c)| c.kind == ColumnKind::Class);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Ok(i),
            _ => Err(DataError::SchemaMismatch("schema needs exactly one class column".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { description: String },
    File { path: PathBuf, fnv1a64: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Categorical(Vec<String>),
    Numeric(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Categorical(v) => v.len(),
            Labels::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Labels,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    /// Logistic-regression problem from binary numeric labels.
    pub fn to_logreg(&self, prior_variance: f64) -> Result<LogRegProblem, DataError> {
        match &self.labels {
            Labels::Numeric(y) if y.iter().all(|v| *v == 0.0 || *v == 1.0) => {
                Ok(LogRegProblem { features: self.features.clone(), labels: y.clone(), prior_variance })
            }
            _ => Err(DataError::NotBinary),
        }
    }
}

/// 64-bit FNV-1a digest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Reads a comma-separated file laid out as `schema` describes. Row numbers
/// in errors count data rows from 1.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::FileNotFound(path.to_path_buf()),
        _ => DataError::Io { path: path.to_path_buf(), source: e },
    })?;
    let class_col = schema.class_index()?;
    let d = schema.numeric_count();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut flat = Vec::new();
    let mut classes = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let row = index + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != schema.columns.len() {
            return Err(DataError::SchemaMismatch(format!(
                "row {row} has {} columns, expected {}",
                record.len(),
                schema.columns.len()
            )));
        }
        for (column, field) in record.iter().enumerate() {
            if column == class_col {
                classes.push(field.to_string());
                continue;
            }
            let value: f64 = field.parse().map_err(|_| DataError::ParseError {
                row,
                column: column + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::ParseError { row, column: column + 1, value: field.to_string() });
            }
            flat.push(value);
        }
    }
    let n = classes.len();
    if n == 0 {
        return Err(DataError::SchemaMismatch("file has no data rows".into()));
    }
    if let Some(expected) = schema.expected_rows {
        if n != expected {
            return Err(DataError::SchemaMismatch(format!("expected {expected} rows, found {n}")));
        }
    }
    let features = Matrix::from_fn(n, d, |i, j| flat[i * d + j]);
    let feature_names = schema
        .columns
        .iter()
        .filter(|c| c.kind == ColumnKind::Numeric)
        .map(|c| c.name.clone())
        .collect();
    Ok(Dataset {
        features,
        labels: Labels::Categorical(classes),
        feature_names,
        provenance: Provenance::File { path: path.to_path_buf(), fnv1a64: fnv1a64(&bytes) },
    })
}

/// Maps `positive_class` to 1 and every other class to 0, keeping row order.
pub fn binarize_labels(ds: &Dataset, positive_class: &str) -> Result<Dataset, DataError> {
    let Labels::Categorical(classes) = &ds.labels else {
        return Err(DataError::NotCategorical);
    };
    if !classes.iter().any(|c| c == positive_class) {
        return Err(DataError::UnknownClass(positive_class.to_string()));
    }
    let labels = classes.iter().map(|c| if c == positive_class { 1.0 } else { 0.0 }).collect();
    Ok(Dataset { labels: Labels::Numeric(labels), ..ds.clone() })
}

/// Per-column centring and scaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, features: &Matrix) -> Matrix {
        Matrix::from_fn(features.rows(), features.cols(), |i, j| (features[(i, j)] - self.means[j]) / self.scales[j])
    }

    pub fn invert(&self, features: &Matrix) -> Matrix {
        Matrix::from_fn(features.rows(), features.cols(), |i, j| features[(i, j)] * self.scales[j] + self.means[j])
    }
}

/// Centres each column and scales it to unit sample variance; constant
/// columns keep scale 1.
pub fn standardize(ds: &Dataset) -> (Dataset, Standardization) {
    let (n, d) = (ds.n(), ds.d());
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for j in 0..d {
        let mean = (0..n).map(|i| ds.features[(i, j)]).sum::<f64>() / n as f64;
        means[j] = mean;
        if n > 1 {
            let var = (0..n).map(|i| (ds.features[(i, j)] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
    }
    let t = Standardization { means, scales };
    (Dataset { features: t.apply(&ds.features), ..ds.clone() }, t)
}

/// Appends a constant-one feature column.
pub fn add_intercept(ds: &Dataset) -> Dataset {
    let (n, d) = (ds.n(), ds.d());
    let features = Matrix::from_fn(n, d + 1, |i, j| if j < d { ds.features[(i, j)] } else { 1.0 });
    let mut feature_names = ds.feature_names.clone();
    feature_names.push("intercept".into());
    Dataset { features, feature_names, ..ds.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            features: Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]),
            labels: Labels::Categorical(vec!["a".into(), "b".into(), "a".into()]),
            feature_names: vec!["x".into(), "y".into()],
            provenance: Provenance::Synthetic { description: "tiny".into() },
        }
    }

    #[test]
    fn linreg_single_row_shapes() {
        let p = gen_linreg(1, 1.0, &mut RngStream::new(0));
        assert_eq!((p.features.rows(), p.features.cols(), p.responses.len()), (1, 3, 1));
    }

    #[test]
    fn logreg_zero_coefficients_balanced() {
        let s = gen_logreg_with_coefficients(100_000, vec![0.0; 3], 2.0, &mut RngStream::new(4));
        assert!((s.problem.positive_fraction() - 0.5).abs() < 0.01);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_logreg(50, 3, 2.0, &mut RngStream::new(8));
        let b = gen_logreg(50, 3, 2.0, &mut RngStream::new(8));
        assert_eq!(a, b);
    }

    #[test]
    fn binarize_and_unknown_class() {
        let b = binarize_labels(&tiny(), "a").unwrap();
        assert_eq!(b.labels, Labels::Numeric(vec![1.0, 0.0, 1.0]));
        assert!(matches!(binarize_labels(&tiny(), "z"), Err(DataError::UnknownClass(_))));
        assert!(matches!(binarize_labels(&b, "a"), Err(DataError::NotCategorical)));
    }

    #[test]
    fn standardize_constant_column_and_round_trip() {
        let ds = tiny();
        let (s, t) = standardize(&ds);
        assert_eq!(t.scales[1], 1.0);
        assert_eq!(s.features[(0, 1)], 0.0);
        assert!((s.features[(0, 0)] + 1.0).abs() < 1e-15);
        assert!(t.invert(&s.features).sub(&ds.features).max_abs() < 1e-12);
        let (again, t2) = standardize(&s);
        assert!(again.features.sub(&s.features).max_abs() < 1e-12);
        assert!(t2.means.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn intercept_column() {
        let ds = add_intercept(&tiny());
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.features[(2, 2)], 1.0);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
