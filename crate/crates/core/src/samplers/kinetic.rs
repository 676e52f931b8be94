use serde::Serialize;

use super::{check_state, KineticState, SamplerError};
use crate::numerics::RngStream;

// Below this value of γh the series forms replace the closed forms.
const SERIES_THRESHOLD: f64 = 1.0;
const SERIES_MAX_TERMS: usize = 80;

/// ψ₀(h) = e^{−γh}, ψ₁(h) = ∫₀ʰψ₀, ψ₂(h) = ∫₀ʰψ₁ for friction γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorCoefficients {
    pub psi0: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub horizon: f64,
    pub friction: f64,
}

/// Per-coordinate covariance of the (velocity, position) noise pair,
/// 2γ∫₀ʰ [ψ₀, ψ₁]ᵀ[ψ₀, ψ₁] dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseCovariance2x2 {
    pub var_v: f64,
    pub cov_vx: f64,
    pub var_x: f64,
}

impl NoiseCovariance2x2 {
    /// Lower Cholesky factor (l11, l21, l22).
    pub fn cholesky(&self) -> (f64, f64, f64) {
        if self.var_v <= 0.0 {
            return (0.0, 0.0, self.var_x.max(0.0).sqrt());
        }
        let l11 = self.var_v.sqrt();
        let l21 = self.cov_vx / l11;
        let l22 = (self.var_x - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }

    pub fn determinant(&self) -> f64 {
        self.var_v * self.var_x - self.cov_vx * self.cov_vx
    }
}

/// Σ_{k≥start} coeff(k)·(−u)^k/k!, summed until the terms stop mattering.
fn exp_tail(u: f64, start: usize, coeff: impl Fn(usize) -> f64) -> f64 {
    let mut power = 1.0;
    for k in 1..=start {
        power *= -u / k as f64;
    }
    let mut sum = 0.0;
    for k in start..start + SERIES_MAX_TERMS {
        let term = coeff(k) * power;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        power *= -u / (k + 1) as f64;
    }
    sum
}

pub fn klmc_coefficients(h: f64, friction: f64) -> IntegratorCoefficients {
    assert!(h >= 0.0 && friction > 0.0, "klmc coefficients need h >= 0 and friction > 0");
    let u = friction * h;
    let psi0 = (-u).exp();
    let psi1 = -(-u).exp_m1() / friction;
    let psi2 = if u < SERIES_THRESHOLD {
        // u − 1 + e^{−u}
        exp_tail(u, 2, |_| 1.0) / (friction * friction)
    } else {
        (h - psi1) / friction
    };
    IntegratorCoefficients { psi0, psi1, psi2, horizon: h, friction }
}

pub fn klmc_noise_covariance(h: f64, friction: f64) -> NoiseCovariance2x2 {
    assert!(h >= 0.0 && friction > 0.0, "klmc covariance needs h >= 0 and friction > 0");
    let u = friction * h;
    let var_v = -(-2.0 * u).exp_m1();
    let cov_vx = (-u).exp_m1().powi(2) / friction;
    let bracket = if u < SERIES_THRESHOLD {
        // u − 2(1 − e^{−u}) + (1 − e^{−2u})/2 = Σ_{k≥3} (2 − 2^{k−1}) (−u)^k / k!
        exp_tail(u, 3, |k| 2.0 - 2f64.powi(k as i32 - 1))
    } else {
        u + 2.0 * (-u).exp_m1() - 0.5 * (-2.0 * u).exp_m1()
    };
    let var_x = 2.0 * bracket / (friction * friction);
    NoiseCovariance2x2 { var_v, cov_vx, var_x }
}

/// Precomputed block-integrator data for a fixed (h, γ).
#[derive(Debug, Clone, Copy)]
pub struct KineticKernel {
    pub coefficients: IntegratorCoefficients,
    pub covariance: NoiseCovariance2x2,
    factor: (f64, f64, f64),
}

impl KineticKernel {
    pub fn new(h: f64, friction: f64) -> Self {
        let covariance = klmc_noise_covariance(h, friction);
        KineticKernel { coefficients: klmc_coefficients(h, friction), covariance, factor: covariance.cholesky() }
    }

    /// Applies the update with standard normals `z` of length 2d: the first
    /// d drive the velocity noise, the last d the independent part of the
    /// position noise.
    pub fn apply(&self, x: &mut [f64], v: &mut [f64], grad: &[f64], z: &[f64]) {
        let d = x.len();
        let IntegratorCoefficients { psi0, psi1, psi2, .. } = self.coefficients;
        let (l11, l21, l22) = self.factor;
        for i in 0..d {
            let (z1, z2) = (z[i], z[d + i]);
            let vi = v[i];
            v[i] = psi0 * vi - psi1 * grad[i] + l11 * z1;
            x[i] += psi1 * vi - psi2 * grad[i] + l21 * z1 + l22 * z2;
        }
    }
}

/// One exact block step of kinetic Langevin with the gradient frozen over
/// horizon `h`.
pub fn klmc_step(
    s: &KineticState,
    grad: &[f64],
    h: f64,
    friction: f64,
    rng: &mut RngStream,
) -> Result<KineticState, SamplerError> {
    assert!(h > 0.0, "horizon must be positive");
    let kernel = KineticKernel::new(h, friction);
    let z = rng.standard_normal(2 * s.x.len());
    let mut next = s.clone();
    kernel.apply(&mut next.x, &mut next.v, grad, &z);
    check_state(&next.x, Some(&next.v), 0)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon() {
        let c = klmc_coefficients(0.0, 1.5);
        assert_eq!((c.psi0, c.psi1, c.psi2), (1.0, 0.0, 0.0));
        let n = klmc_noise_covariance(0.0, 1.5);
        assert_eq!((n.var_v, n.cov_vx, n.var_x), (0.0, 0.0, 0.0));
    }

    #[test]
    fn closed_forms_at_reference_point() {
        let c = klmc_coefficients(0.1, 1.5);
        let psi1 = (1.0 - (-0.15f64).exp()) / 1.5;
        assert!((c.psi0 - (-0.15f64).exp()).abs() < 1e-16);
        assert!((c.psi1 - psi1).abs() < 1e-16);
        assert!((c.psi2 - (0.1 - psi1) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn series_and_closed_form_agree_near_threshold() {
        for u in [0.5, SERIES_THRESHOLD, 1.5] {
            let closed = u + 2.0 * (-u).exp_m1() - 0.5 * (-2.0 * u).exp_m1();
            let series = exp_tail(u, 3, |k| 2.0 - 2f64.powi(k as i32 - 1));
            assert!((closed - series).abs() < 1e-14 * series, "{u}: {closed} vs {series}");
            let closed = u - 1.0 + (-u).exp();
            let series = exp_tail(u, 2, |_| 1.0);
            assert!((closed - series).abs() < 1e-14 * series, "{u}: {closed} vs {series}");
        }
    }

    #[test]
    fn leading_order_small_horizon() {
        let g = 1.5;
        let h = 1e-3 / g;
        let n = klmc_noise_covariance(h, g);
        assert!((n.var_v / (2.0 * g * h) - 1.0).abs() < 0.01);
        assert!((n.cov_vx / (g * h * h) - 1.0).abs() < 0.01);
        assert!((n.var_x / (2.0 * g / 3.0 * h.powi(3)) - 1.0).abs() < 0.01);
        assert!(n.determinant() >= -1e-14);
    }

    #[test]
    fn deterministic_part() {
        let k = KineticKernel::new(0.1, 1.5);
        let (mut x, mut v) = (vec![0.0], vec![1.0]);
        k.apply(&mut x, &mut v, &[0.0], &[0.0, 0.0]);
        assert_eq!(x[0], k.coefficients.psi1);
        assert_eq!(v[0], k.coefficients.psi0);
    }
}
