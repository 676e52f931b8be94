//! Target potentials f with π ∝ e^{−f}: Gaussian (quadratic), Bayesian
//! linear regression and Bayesian logistic regression.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{symmetric_eigen, Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("batch size {batch} is invalid for a dataset of {n} components")]
    BatchLargerThanDataset { batch: usize, n: usize },
    #[error("label in row {row} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: f64 },
    #[error("problem has no data rows")]
    Empty,
    #[error("prior variance must be positive, got {0}")]
    InvalidPriorVariance(f64),
}

/// Strong-convexity and smoothness constants (m, M).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

/// An m-strongly convex, M-smooth potential, optionally a finite sum of
/// components for minibatch gradients.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes ∇f(x) into `out`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn curvature(&self) -> Curvature;

    /// Number of summands; 0 when the potential is not a sum.
    fn component_count(&self) -> usize {
        0
    }

    /// Adds `scale · ∇f_j(x)` to `out`.
    fn add_component_gradient(&self, _j: usize, _x: &[f64], _scale: f64, _out: &mut [f64]) {
        unimplemented!("potential has no components")
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(x, &mut out);
        out
    }

    fn component_gradient(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_component_gradient(j, x, 1.0, &mut out);
        out
    }
}

/// Minibatch estimate (n/b)·Σ_{j∈B} ∇f_j(x) over a uniform size-b subset
/// drawn without replacement. A full batch returns the exact gradient.
pub fn stochastic_gradient(
    pot: &dyn Potential,
    x: &[f64],
    batch: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>, ModelError> {
    let mut out = vec![0.0; pot.dim()];
    stochastic_gradient_into(pot, x, batch, rng, &mut out)?;
    Ok(out)
}

pub fn stochastic_gradient_into(
    pot: &dyn Potential,
    x: &[f64],
    batch: usize,
    rng: &mut RngStream,
    out: &mut [f64],
) -> Result<(), ModelError> {
    let n = pot.component_count();
    if batch == 0 || batch > n {
        return Err(ModelError::BatchLargerThanDataset { batch, n });
    }
    if batch == n {
        pot.gradient_into(x, out);
        return Ok(());
    }
    out.fill(0.0);
    let scale = n as f64 / batch as f64;
    for j in rng.sample_indices(n, batch) {
        pot.add_component_gradient(j, x, scale, out);
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, actual: usize) -> Result<(), ModelError> {
    if expected != actual {
        return Err(ModelError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// f(x) = ½xᵀAx − bᵀx, the potential of 𝒩(A⁻¹b, A⁻¹).
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    a: Matrix,
    b: Vec<f64>,
    curvature: Curvature,
}

impl QuadraticPotential {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self, ModelError> {
        check_dim(a.rows(), a.cols())?;
        check_dim(a.rows(), b.len())?;
        if !a.is_symmetric(1e-12 * a.max_abs().max(1.0)) {
            return Err(ModelError::NotSymmetric);
        }
        let eig = symmetric_eigen(&a);
        if !(eig.min() > 0.0) {
            return Err(ModelError::NotPositiveDefinite(eig.min()));
        }
        let curvature = Curvature { m: eig.min(), big_m: eig.max() };
        Ok(QuadraticPotential { a, b, curvature })
    }

    /// Standard normal in `d` dimensions.
    pub fn standard(d: usize) -> Self {
        Self::new(Matrix::identity(d), vec![0.0; d]).expect("identity is positive definite")
    }

    pub fn precision(&self) -> &Matrix {
        &self.a
    }

    pub fn mean(&self) -> Vec<f64> {
        self.a.solve(&self.b).expect("positive definite matrix is invertible")
    }

    pub fn covariance(&self) -> Matrix {
        symmetric_eigen(&self.a).map(|v| 1.0 / v)
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.a.matvec(x)) - dot(&self.b, x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a.row(i)[..d];
            *o = dot(row, x) - self.b[i];
        }
    }

    fn curvature(&self) -> Curvature {
        self.curvature
    }
}

/// Data (a_j, y_j) for a Gaussian-prior linear model y = θᵀa + noise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegProblem {
    pub features: Matrix,
    pub responses: Vec<f64>,
    pub prior_variance: f64,
    pub true_coefficients: Option<Vec<f64>>,
}

impl LinRegProblem {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.features.rows() == 0 {
            return Err(ModelError::Empty);
        }
        check_dim(self.features.rows(), self.responses.len())?;
        if !(self.prior_variance > 0.0) {
            return Err(ModelError::InvalidPriorVariance(self.prior_variance));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }
}

/// f(θ) = ½Σ(y_j − θᵀa_j)² + ‖θ‖²/(2λ).
#[derive(Debug, Clone)]
pub struct LinRegPotential {
    problem: LinRegProblem,
    gram: Matrix,
    cross: Vec<f64>,
    curvature: Curvature,
}

impl LinRegPotential {
    pub fn new(problem: LinRegProblem) -> Result<Self, ModelError> {
        problem.validate()?;
        let a = &problem.features;
        let gram = a.transpose().matmul(a);
        let cross = a.vecmat(&problem.responses);
        let eig = symmetric_eigen(&gram);
        let ridge = 1.0 / problem.prior_variance;
        let curvature = Curvature { m: eig.min() + ridge, big_m: eig.max() + ridge };
        Ok(LinRegPotential { problem, gram, cross, curvature })
    }

    pub fn problem(&self) -> &LinRegProblem {
        &self.problem
    }

    /// Σ a_j a_jᵀ.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }
}

impl Potential for LinRegPotential {
    fn dim(&self) -> usize {
        self.problem.d()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = &self.problem;
        let fit: f64 = (0..p.n())
            .map(|j| (p.responses[j] - dot(x, p.features.row(j))).powi(2))
            .sum();
        0.5 * fit + dot(x, x) / (2.0 * p.prior_variance)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let gx = self.gram.matvec(x);
        for i in 0..out.len() {
            out[i] = gx[i] - self.cross[i] + x[i] / self.problem.prior_variance;
        }
    }

    fn curvature(&self) -> Curvature {
        self.curvature
    }

    fn component_count(&self) -> usize {
        self.problem.n()
    }

    fn add_component_gradient(&self, j: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let p = &self.problem;
        let row = p.features.row(j);
        let residual = dot(x, row) - p.responses[j];
        let prior = 1.0 / (p.n() as f64 * p.prior_variance);
        for i in 0..out.len() {
            out[i] += scale * (residual * row[i] + prior * x[i]);
        }
    }
}

/// Data (X_j, y_j) with binary labels for a Gaussian-prior logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegProblem {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub prior_variance: f64,
}

impl LogRegProblem {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.features.rows() == 0 {
            return Err(ModelError::Empty);
        }
        check_dim(self.features.rows(), self.labels.len())?;
        if let Some((row, &value)) = self.labels.iter().enumerate().find(|(_, &y)| y != 0.0 && y != 1.0) {
            return Err(ModelError::NonBinaryLabel { row, value });
        }
        if !(self.prior_variance > 0.0) {
            return Err(ModelError::InvalidPriorVariance(self.prior_variance));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().sum::<f64>() / self.n() as f64
    }
}

/// Form of the per-sample logistic loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticLoss {
    /// log(1 + e^{−s_j cᵀX_j}) with s_j = 2y_j − 1.
    #[default]
    LabelDependent,
    /// log(1 + e^{−cᵀX_j}) for every sample regardless of its label.
    LabelFree,
}

/// log(1 + e^u) without overflow.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// 1/(1 + e^{−u}) without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// f(c) = Σ log(1 + e^{−s_j cᵀX_j}) + ‖c‖²/(2λ).
#[derive(Debug, Clone)]
pub struct LogRegPotential {
    problem: LogRegProblem,
    signs: Vec<f64>,
    curvature: Curvature,
}

impl LogRegPotential {
    pub fn new(problem: LogRegProblem) -> Result<Self, ModelError> {
        Self::with_loss(problem, LogisticLoss::LabelDependent)
    }

    pub fn with_loss(problem: LogRegProblem, loss: LogisticLoss) -> Result<Self, ModelError> {
        problem.validate()?;
        let signs = match loss {
            LogisticLoss::LabelDependent => problem.labels.iter().map(|y| 2.0 * y - 1.0).collect(),
            LogisticLoss::LabelFree => vec![1.0; problem.n()],
        };
        let x = &problem.features;
        let top = symmetric_eigen(&x.transpose().matmul(x)).max();
        let ridge = 1.0 / problem.prior_variance;
        let curvature = Curvature { m: ridge, big_m: ridge + 0.25 * top };
        Ok(LogRegPotential { problem, signs, curvature })
    }

    pub fn problem(&self) -> &LogRegProblem {
        &self.problem
    }
}

impl Potential for LogRegPotential {
    fn dim(&self) -> usize {
        self.problem.d()
    }

    fn value(&self, c: &[f64]) -> f64 {
        let p = &self.problem;
        let loss: f64 = (0..p.n())
            .map(|j| softplus(-self.signs[j] * dot(c, p.features.row(j))))
            .sum();
        loss + dot(c, c) / (2.0 * p.prior_variance)
    }

    fn gradient_into(&self, c: &[f64], out: &mut [f64]) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o = ci / self.problem.prior_variance;
        }
        for j in 0..self.problem.n() {
            self.add_data_gradient(j, c, 1.0, out);
        }
    }

    fn curvature(&self) -> Curvature {
        self.curvature
    }

    fn component_count(&self) -> usize {
        self.problem.n()
    }

    fn add_component_gradient(&self, j: usize, c: &[f64], scale: f64, out: &mut [f64]) {
        let prior = scale / (self.problem.n() as f64 * self.problem.prior_variance);
        for (o, ci) in out.iter_mut().zip(c) {
            *o += prior * ci;
        }
        self.add_data_gradient(j, c, scale, out);
    }
}

impl LogRegPotential {
    fn add_data_gradient(&self, j: usize, c: &[f64], scale: f64, out: &mut [f64]) {
        let row = self.problem.features.row(j);
        let s = self.signs[j];
        let weight = -s * sigmoid(-s * dot(c, row)) * scale;
        for (o, xi) in out.iter_mut().zip(row) {
            *o += weight * xi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_basics() {
        let q = QuadraticPotential::standard(2);
        assert_eq!(q.value(&[1.0, 2.0]), 2.5);
        assert_eq!(q.gradient(&[1.0, 2.0]), vec![1.0, 2.0]);
        let d = QuadraticPotential::new(Matrix::diag(&[1.0, 4.0]), vec![0.0, 0.0]).unwrap();
        let c = d.curvature();
        assert!((c.m - 1.0).abs() < 1e-15 && (c.big_m - 4.0).abs() < 1e-15);
        assert_eq!(q.component_count(), 0);
    }

    #[test]
    fn quadratic_rejects_bad_matrices() {
        assert!(matches!(
            QuadraticPotential::new(Matrix::diag(&[1.0, -1.0]), vec![0.0; 2]),
            Err(ModelError::NotPositiveDefinite(_))
        ));
        assert_eq!(
            QuadraticPotential::new(Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]), vec![0.0; 2]).unwrap_err(),
            ModelError::NotSymmetric
        );
    }

    #[test]
    fn quadratic_moments() {
        let q = QuadraticPotential::new(Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]), vec![2.0, 2.0]).unwrap();
        assert_eq!(q.mean(), vec![1.0, 0.5]);
        let cov = q.covariance();
        assert!((cov[(0, 0)] - 0.5).abs() < 1e-15 && (cov[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn linreg_prior_only_and_single_point() {
        let zero = LinRegProblem {
            features: Matrix::zeros(4, 3),
            responses: vec![0.0; 4],
            prior_variance: 2.0,
            true_coefficients: None,
        };
        let pot = LinRegPotential::new(zero).unwrap();
        assert_eq!(pot.gradient(&[2.0, -4.0, 1.0]), vec![1.0, -2.0, 0.5]);

        let one = LinRegProblem {
            features: Matrix::from_rows(&[[1.0, 0.0, 0.0]]),
            responses: vec![1.0],
            prior_variance: 1.0,
            true_coefficients: None,
        };
        let pot = LinRegPotential::new(one).unwrap();
        assert_eq!(pot.gradient(&[0.0; 3]), vec![-1.0, 0.0, 0.0]);
        assert_eq!(pot.component_gradient(0, &[0.0; 3]), vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    fn logreg_at_origin() {
        let problem = LogRegProblem {
            features: Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]),
            labels: vec![1.0, 0.0, 1.0],
            prior_variance: 2.0,
        };
        let pot = LogRegPotential::new(problem).unwrap();
        assert!((pot.value(&[0.0, 0.0]) - 3.0 * 2f64.ln()).abs() < 1e-15);
        // −½ Σ s_j X_j
        let g = pot.gradient(&[0.0, 0.0]);
        assert!((g[0] - (-0.5 * (1.0 - 3.0 + 0.5))).abs() < 1e-15);
        assert!((g[1] - (-0.5 * (2.0 + 1.0 + 0.5))).abs() < 1e-15);
    }

    #[test]
    fn logreg_saturation_is_finite() {
        let problem = LogRegProblem {
            features: Matrix::from_rows(&[[1.0]]),
            labels: vec![1.0],
            prior_variance: 1e300,
        };
        let pot = LogRegPotential::new(problem).unwrap();
        let v = pot.value(&[1e4]);
        let g = pot.gradient(&[1e4]);
        assert!(v.abs() < 1e-290 && g[0].abs() < 1e-290, "{v} {g:?}");
        let v = pot.value(&[-1e4]);
        assert!((v - 1e4).abs() < 1e-9);
        assert!((pot.gradient(&[-1e4])[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn logreg_label_free_ignores_labels() {
        let features = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        let a = LogRegPotential::with_loss(
            LogRegProblem { features: features.clone(), labels: vec![1.0, 0.0], prior_variance: 1.0 },
            LogisticLoss::LabelFree,
        )
        .unwrap();
        let b = LogRegPotential::with_loss(
            LogRegProblem { features, labels: vec![0.0, 1.0], prior_variance: 1.0 },
            LogisticLoss::LabelFree,
        )
        .unwrap();
        assert_eq!(a.gradient(&[0.3, 0.1]), b.gradient(&[0.3, 0.1]));
    }

    #[test]
    fn logreg_rejects_non_binary_labels() {
        let problem = LogRegProblem {
            features: Matrix::from_rows(&[[1.0], [2.0]]),
            labels: vec![1.0, 0.5],
            prior_variance: 1.0,
        };
        assert_eq!(
            LogRegPotential::new(problem).unwrap_err(),
            ModelError::NonBinaryLabel { row: 1, value: 0.5 }
        );
    }

    #[test]
    fn batch_errors_and_full_batch() {
        let problem = LinRegProblem {
            features: Matrix::from_rows(&[[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]]),
            responses: vec![1.0, 2.0, -1.0],
            prior_variance: 1.0,
            true_coefficients: None,
        };
        let pot = LinRegPotential::new(problem).unwrap();
        let mut rng = RngStream::new(0);
        let x = [0.3, -0.2];
        assert_eq!(stochastic_gradient(&pot, &x, 3, &mut rng).unwrap(), pot.gradient(&x));
        assert_eq!(
            stochastic_gradient(&pot, &x, 4, &mut rng).unwrap_err(),
            ModelError::BatchLargerThanDataset { batch: 4, n: 3 }
        );
        assert!(stochastic_gradient(&QuadraticPotential::standard(2), &x, 1, &mut rng).is_err());
    }

    #[test]
    fn batch_of_one_on_two_points() {
        let problem = LinRegProblem {
            features: Matrix::from_rows(&[[1.0], [-2.0]]),
            responses: vec![0.0, 0.0],
            prior_variance: 1.0,
            true_coefficients: None,
        };
        let pot = LinRegPotential::new(problem).unwrap();
        let x = [1.0];
        let first = 2.0 * pot.component_gradient(0, &x)[0];
        let second = 2.0 * pot.component_gradient(1, &x)[0];
        assert_ne!(first, second);
        let mut rng = RngStream::new(9);
        let draws = 10_000;
        let mut hits = 0;
        for _ in 0..draws {
            let g = stochastic_gradient(&pot, &x, 1, &mut rng).unwrap()[0];
            if g == first {
                hits += 1;
            } else {
                assert_eq!(g, second);
            }
        }
        assert!((hits as f64 / draws as f64 - 0.5).abs() < 0.02);
    }
}
