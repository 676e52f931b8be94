//! Distances and task metrics: Gaussian and one-dimensional 2-Wasserstein
//! distances, regression MSE, classification accuracy, sample moments.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::models::{LinRegProblem, LogRegProblem};
use crate::numerics::{symmetric_eigen, Matrix};
use crate::samplers::Trace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A named per-iteration series; value `i` belongs to iteration
/// `(i + 1) · iteration_stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub iteration_stride: usize,
}

fn check_dim(expected: usize, actual: usize) -> Result<(), MetricsError> {
    if expected != actual {
        return Err(MetricsError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn psd_sqrt(a: &Matrix) -> Result<Matrix, MetricsError> {
    let eig = symmetric_eigen(a);
    let tol = 1e-10 * eig.max().abs().max(1.0);
    if eig.min() < -tol {
        return Err(MetricsError::NotPsd(eig.min()));
    }
    Ok(eig.map(|v| v.max(0.0).sqrt()))
}

/// 𝒲₂ between 𝒩(μ1, Σ1) and 𝒩(μ2, Σ2).
pub fn gaussian_w2(mu1: &[f64], sigma1: &Matrix, mu2: &[f64], sigma2: &Matrix) -> Result<f64, MetricsError> {
    let d = mu1.len();
    check_dim(d, mu2.len())?;
    check_dim(d, sigma1.rows())?;
    check_dim(d, sigma2.rows())?;
    psd_sqrt(sigma1)?;
    let root2 = psd_sqrt(sigma2)?;
    let inner = root2.matmul(sigma1).matmul(&root2);
    let cross = psd_sqrt(&inner)?;
    let shift: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b).powi(2)).sum();
    let spread = sigma1.trace() + sigma2.trace() - 2.0 * cross.trace();
    Ok((shift + spread).max(0.0).sqrt())
}

/// Quantile-coupling estimate of 𝒲₂ between the empirical law of
/// `samples` and a target given by its quantile function.
pub fn empirical_w2_1d(samples: &[f64], target_quantile: impl Fn(f64) -> f64) -> Result<f64, MetricsError> {
    let n = samples.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (x - target_quantile((i as f64 + 0.5) / n as f64)).powi(2))
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Quantile function of 𝒩(mean, sd²).
pub fn normal_quantile(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("valid normal parameters");
    move |p| normal.inverse_cdf(p)
}

/// (1/n) Σ (y_j − xᵀa_j)².
pub fn mse(x: &[f64], problem: &LinRegProblem) -> Result<f64, MetricsError> {
    check_dim(problem.d(), x.len())?;
    let n = problem.n();
    let total: f64 = (0..n)
        .map(|j| {
            let fit: f64 = problem.features.row(j).iter().zip(x).map(|(a, b)| a * b).sum();
            (problem.responses[j] - fit).powi(2)
        })
        .sum();
    Ok(total / n as f64)
}

pub fn mse_series(trace: &Trace, problem: &LinRegProblem) -> Result<MetricSeries, MetricsError> {
    check_dim(problem.d(), trace.dim)?;
    let values = (0..trace.len()).map(|i| mse(trace.state(i), problem)).collect::<Result<_, _>>()?;
    let stride = trace.iterations.first().copied().unwrap_or(1);
    Ok(MetricSeries { name: "mse".to_string(), values, iteration_stride: stride })
}

/// Fraction of rows where the prediction 1{cᵀX_j ≥ 0} equals the label.
pub fn accuracy(c: &[f64], problem: &LogRegProblem) -> Result<f64, MetricsError> {
    check_dim(problem.d(), c.len())?;
    let correct = (0..problem.n())
        .filter(|&j| {
            let score: f64 = problem.features.row(j).iter().zip(c).map(|(a, b)| a * b).sum();
            let predicted = if score >= 0.0 { 1.0 } else { 0.0 };
            predicted == problem.labels[j]
        })
        .count();
    Ok(correct as f64 / problem.n() as f64)
}

/// Sample mean and unbiased sample covariance of the rows of `samples`.
pub fn moment_diagnostics(samples: &Matrix) -> Result<(Vec<f64>, Matrix), MetricsError> {
    let (n, d) = (samples.rows(), samples.cols());
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(samples.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = samples.row(i);
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    Ok((mean, cov.scale(1.0 / (n - 1) as f64)))
}
