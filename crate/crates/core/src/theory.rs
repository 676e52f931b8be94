//! Closed-form convergence bounds, constants, stepsize caps and iteration
//! complexities for the overdamped, kinetic and frictional regime-switching
//! samplers and their continuous-time counterparts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctmc::{self, CtmcError, RegimeSpec};
use crate::numerics::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("invalid split: lambda_minus = {lambda_minus} must lie in (0, {half_friction})")]
    InvalidLambdaSplit { lambda_minus: f64, half_friction: f64 },
    #[error("default split needs friction^2 >= 2(M + m): friction {friction}, m {m}, M {big_m}")]
    FrictionBelowDefaultSplit { friction: f64, m: f64, big_m: f64 },
    #[error("smallest friction {min} is below the required floor {required}")]
    FrictionTooSmall { min: f64, required: f64 },
    #[error("curvature constants must satisfy M >= m > 0, got m = {m}, M = {big_m}")]
    InvalidCurvature { m: f64, big_m: f64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
}

/// Matrix norm used for the ‖Q²‖, ‖QΛ‖, ‖Λ²‖ terms of the overdamped cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Spectral,
    Frobenius,
}

impl NormKind {
    fn apply(self, a: &Matrix) -> f64 {
        match self {
            NormKind::Spectral => a.norm_spectral(),
            NormKind::Frobenius => a.norm_frobenius(),
        }
    }
}

/// A bound value together with the constants behind it and the stepsize caps
/// it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_value: f64,
    pub constants: BTreeMap<String, f64>,
    pub admissible: bool,
    pub admissibility_limits: BTreeMap<String, f64>,
}

fn report(bound_value: f64, constants: BTreeMap<String, f64>, caps: &BTreeMap<String, f64>, eta: f64) -> BoundReport {
    BoundReport {
        bound_value,
        constants,
        admissible: caps.values().all(|cap| eta <= *cap),
        admissibility_limits: caps.clone(),
    }
}

fn min_cap(caps: &BTreeMap<String, f64>) -> f64 {
    caps.values().copied().fold(f64::INFINITY, f64::min)
}

/// Stepsize and iteration count meeting a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complexity {
    pub eta: f64,
    pub iterations: u64,
}

fn iteration_count(alpha: f64, eta: f64, log_argument: f64) -> u64 {
    let k = (4.0 / (alpha * eta) * log_argument.ln()).ceil();
    if k >= 1.0 {
        k as u64
    } else {
        1
    }
}

/// (1 − αη/2)^{K/2}, accurate when αη is tiny and K huge.
fn contraction_factor(alpha: f64, eta: f64, iterations: u64) -> f64 {
    let x = 0.5 * alpha * eta;
    if x >= 1.0 {
        return if iterations == 0 { 1.0 } else { 0.0 };
    }
    (0.5 * iterations as f64 * (-x).ln_1p()).exp()
}

fn check_curvature(m: f64, big_m: f64) -> Result<(), TheoryError> {
    if !(m > 0.0 && big_m >= m) {
        return Err(TheoryError::InvalidCurvature { m, big_m });
    }
    Ok(())
}

/// Continuous-time overdamped bound √⟨e^{(Q−2mΛ)t}𝟙, ψ⟩ · w0.
pub fn rsld_bound(spec: &RegimeSpec, m: f64, t: f64, w0: f64) -> Result<f64, TheoryError> {
    let psi = spec.stationary_law()?;
    let s = ctmc::survival_functional(spec.generator(), spec.values(), &psi, 2.0 * m, t)?;
    Ok(s.max(0.0).sqrt() * w0)
}

/// Constants of the overdamped discretisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsLmcConstants {
    pub alpha: f64,
    pub c: f64,
    pub c_m: f64,
    pub caps: BTreeMap<String, f64>,
}

impl RsLmcConstants {
    pub fn max_stepsize(&self) -> f64 {
        min_cap(&self.caps)
    }
}

pub fn rslmc_constants(spec: &RegimeSpec, m: f64, big_m: f64, d: usize) -> Result<RsLmcConstants, TheoryError> {
    rslmc_constants_with_norm(spec, m, big_m, d, NormKind::default())
}

pub fn rslmc_constants_with_norm(
    spec: &RegimeSpec,
    m: f64,
    big_m: f64,
    d: usize,
    norm: NormKind,
) -> Result<RsLmcConstants, TheoryError> {
    check_curvature(m, big_m)?;
    let (b_min, b_max) = (spec.min_value(), spec.max_value());
    let q = spec.generator().matrix();
    let tilted = spec.generator().tilted(m, spec.values());
    let spectrum = numerics::eigenvalues(&tilted).map_err(CtmcError::from)?;
    let alpha = -spectrum.max_real();
    let lam = spec.value_matrix();
    let c_m = 0.5 * spectrum.max_modulus().powi(2)
        + norm.apply(&q.matmul(q))
        + 2.0 * m * norm.apply(&q.matmul(&lam))
        + 0.5 * m * m * norm.apply(&lam.matmul(&lam));
    let c = 2.0 * (1.65 * big_m * (d as f64).sqrt() * b_max.powf(1.5) / (m * b_min)).powi(2);
    let caps = BTreeMap::from([
        ("smoothness".to_string(), 2.0 / (b_max * (m + big_m))),
        ("strong_convexity".to_string(), 1.0 / (m * b_max)),
        ("spectrum".to_string(), -1.0 / (2.0 * spectrum.min_real())),
        ("absorption".to_string(), alpha / (2.0 * c_m)),
    ]);
    Ok(RsLmcConstants { alpha, c, c_m, caps })
}

/// (1 − αη/2)^{K/2} w0 + √(2Cη/α).
pub fn rslmc_bound(k: &RsLmcConstants, eta: f64, iterations: u64, w0: f64) -> BoundReport {
    let contraction = contraction_factor(k.alpha, eta, iterations) * w0;
    let bias = (2.0 * k.c * eta / k.alpha).sqrt();
    let constants = BTreeMap::from([
        ("alpha".to_string(), k.alpha),
        ("C".to_string(), k.c),
        ("C_M".to_string(), k.c_m),
    ]);
    report(contraction + bias, constants, &k.caps, eta)
}

/// η = ε²α/(8C) clamped to the caps; K = ⌈4/(αη) log(2 w0/ε)⌉.
pub fn rslmc_complexity(k: &RsLmcConstants, epsilon: f64, w0: f64) -> Complexity {
    let eta = (epsilon * epsilon * k.alpha / (8.0 * k.c)).min(k.max_stepsize());
    Complexity { eta, iterations: iteration_count(k.alpha, eta, 2.0 * w0 / epsilon) }
}

/// Continuous-time kinetic bound for the split λ₊ + λ₋ = γ. Without an
/// explicit λ₋ the default split applies, which needs γ² ≥ 2(M + m) and
/// yields the rate 2m/γ.
pub fn rskld_bound(
    spec: &RegimeSpec,
    m: f64,
    big_m: f64,
    friction: f64,
    lambda_minus: Option<f64>,
    t: f64,
    w0: f64,
) -> Result<f64, TheoryError> {
    check_curvature(m, big_m)?;
    let (prefactor, c) = match lambda_minus {
        Some(lm) => {
            if !(lm > 0.0 && lm < 0.5 * friction) {
                return Err(TheoryError::InvalidLambdaSplit { lambda_minus: lm, half_friction: 0.5 * friction });
            }
            let lp = friction - lm;
            let gap = lp - lm;
            let prefactor = (2.0 * (lp * lp + lm * lm)).sqrt() / gap;
            let worst = (lm * lm - m).max(big_m - lp * lp);
            (prefactor, -2.0 * worst / gap)
        }
        None => {
            let g2 = friction * friction;
            if g2 < 2.0 * (big_m + m) {
                return Err(TheoryError::FrictionBelowDefaultSplit { friction, m, big_m });
            }
            (((2.0 * g2 - 4.0 * m) / (g2 - 4.0 * m)).sqrt(), 2.0 * m / friction)
        }
    };
    let psi = spec.stationary_law()?;
    let s = ctmc::survival_functional(spec.generator(), spec.values(), &psi, c, t)?;
    Ok(prefactor * s.max(0.0).sqrt() * w0)
}

/// λ₋ of the default split, (γ − √(γ² − 4m))/2.
pub fn default_lambda_minus(friction: f64, m: f64) -> f64 {
    0.5 * (friction - (friction * friction - 4.0 * m).sqrt())
}

/// Constants of the kinetic discretisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsKlmcConstants {
    pub alpha: f64,
    pub c: f64,
    pub friction: f64,
    pub caps: BTreeMap<String, f64>,
}

impl RsKlmcConstants {
    pub fn max_stepsize(&self) -> f64 {
        min_cap(&self.caps)
    }
}

pub fn rsklmc_constants(
    spec: &RegimeSpec,
    m: f64,
    big_m: f64,
    friction: f64,
    d: usize,
) -> Result<RsKlmcConstants, TheoryError> {
    check_curvature(m, big_m)?;
    if !(friction > 0.0) {
        return Err(TheoryError::NonPositive("friction"));
    }
    let (b_min, b_max) = (spec.min_value(), spec.max_value());
    let alpha = ctmc::spectral_rate(spec.generator(), m / friction, spec.values())?;
    let c = 18.0 * big_m * big_m * b_max.powi(4) * d as f64 / (m * m * b_min * b_min);
    let caps = BTreeMap::from([
        ("drift".to_string(), m / (4.0 * b_max * friction * big_m)),
        ("coupling".to_string(), m * friction / ((m * m + 1.5 * big_m * friction * friction) * b_max)),
        ("friction".to_string(), 2.0 * friction / (m * b_min)),
    ]);
    Ok(RsKlmcConstants { alpha, c, friction, caps })
}

/// 2(1 − αη/2)^{K/2} w0 + √(2C/γ²) η.
pub fn rsklmc_bound(k: &RsKlmcConstants, eta: f64, iterations: u64, w0: f64) -> BoundReport {
    let contraction = 2.0 * contraction_factor(k.alpha, eta, iterations) * w0;
    let bias = (2.0 * k.c).sqrt() / k.friction * eta;
    let constants = BTreeMap::from([("alpha".to_string(), k.alpha), ("C".to_string(), k.c)]);
    report(contraction + bias, constants, &k.caps, eta)
}

/// η = εγ/(2√(2C)) clamped to the caps; K = ⌈4/(αη) log(4 w0/ε)⌉.
pub fn rsklmc_complexity(k: &RsKlmcConstants, epsilon: f64, w0: f64) -> Complexity {
    let eta = (epsilon * k.friction / (2.0 * (2.0 * k.c).sqrt())).min(k.max_stepsize());
    Complexity { eta, iterations: iteration_count(k.alpha, eta, 4.0 * w0 / epsilon) }
}

fn friction_floor(spec: &RegimeSpec, m: f64, big_m: f64) -> Result<(), TheoryError> {
    let required = 2f64.sqrt().max((m + big_m).sqrt());
    let min = spec.min_value();
    if min < required {
        return Err(TheoryError::FrictionTooSmall { min, required });
    }
    Ok(())
}

/// Continuous-time frictional bound √⟨e^{(Q−2mΛ_γ⁻¹)t}𝟙, ψ⟩ · w0 where
/// Λ_γ⁻¹ holds the reciprocal frictions.
pub fn frskld_bound(spec: &RegimeSpec, m: f64, big_m: f64, t: f64, w0: f64) -> Result<f64, TheoryError> {
    check_curvature(m, big_m)?;
    friction_floor(spec, m, big_m)?;
    let psi = spec.stationary_law()?;
    let s = ctmc::survival_functional(spec.generator(), &spec.reciprocal_values(), &psi, 2.0 * m, t)?;
    Ok(s.max(0.0).sqrt() * w0)
}

/// Constants of the frictional discretisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrsKlmcConstants {
    pub alpha: f64,
    pub c_b: f64,
    pub caps: BTreeMap<String, f64>,
}

impl FrsKlmcConstants {
    pub fn max_stepsize(&self) -> f64 {
        min_cap(&self.caps)
    }
}

pub fn frsklmc_constants(
    spec: &RegimeSpec,
    m: f64,
    big_m: f64,
    d: usize,
    w0: f64,
) -> Result<FrsKlmcConstants, TheoryError> {
    check_curvature(m, big_m)?;
    friction_floor(spec, m, big_m)?;
    let (g_min, g_max) = (spec.min_value(), spec.max_value());
    let alpha = ctmc::spectral_rate(spec.generator(), 2.0 * m, &spec.reciprocal_values())?;
    let psi = spec.stationary_law()?;
    let second_moment: f64 = psi.iter().zip(spec.values()).map(|(p, g)| p * g * g).sum();
    let c_b = 2f64.sqrt() * g_max * big_m / (3.0 * m) * (2.0 * (d as f64).sqrt() + second_moment.sqrt() * w0);
    let caps = BTreeMap::from([
        ("root".to_string(), (m / (1.5 * big_m * g_max)).sqrt()),
        ("coupling".to_string(), m * g_min / (m * m + 1.5 * big_m * g_max * g_max)),
        ("drift".to_string(), m / (4.0 * g_max * big_m)),
    ]);
    Ok(FrsKlmcConstants { alpha, c_b, caps })
}

/// √2 (1 − αη/2)^{K/2} w0 + C_B η².
pub fn frsklmc_bound(
    spec: &RegimeSpec,
    m: f64,
    big_m: f64,
    d: usize,
    eta: f64,
    iterations: u64,
    w0: f64,
) -> Result<BoundReport, TheoryError> {
    let k = frsklmc_constants(spec, m, big_m, d, w0)?;
    Ok(frsklmc_bound_from(&k, eta, iterations, w0))
}

pub fn frsklmc_bound_from(k: &FrsKlmcConstants, eta: f64, iterations: u64, w0: f64) -> BoundReport {
    let contraction = 2f64.sqrt() * contraction_factor(k.alpha, eta, iterations) * w0;
    let bias = k.c_b * eta * eta;
    let constants = BTreeMap::from([("alpha".to_string(), k.alpha), ("C_B".to_string(), k.c_b)]);
    report(contraction + bias, constants, &k.caps, eta)
}

/// η = √(ε/(2C_B)) clamped to the caps; K = ⌈4/(αη) log(2√2 w0/ε)⌉.
pub fn frsklmc_complexity(k: &FrsKlmcConstants, epsilon: f64, w0: f64) -> Complexity {
    let eta = (epsilon / (2.0 * k.c_b)).sqrt().min(k.max_stepsize());
    Complexity { eta, iterations: iteration_count(k.alpha, eta, 2.0 * 2f64.sqrt() * w0 / epsilon) }
}

/// Problem-level inputs shared by every evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub d: usize,
    pub w0: f64,
}

/// Regime inputs for the three discretised algorithms.
#[derive(Debug, Clone)]
pub struct ComplexitySpecs {
    pub overdamped: RegimeSpec,
    pub kinetic: RegimeSpec,
    pub friction: f64,
    pub frictional: RegimeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub algorithm: &'static str,
    pub epsilon: f64,
    pub eta: f64,
    pub iterations: u64,
    pub alpha: f64,
    pub constants: BTreeMap<String, f64>,
}

/// (η, K) for each algorithm at each accuracy in `epsilons`.
pub fn complexity_table(
    problem: &ProblemConstants,
    specs: &ComplexitySpecs,
    epsilons: &[f64],
) -> Result<Vec<ComplexityRow>, TheoryError> {
    let ProblemConstants { m, big_m, d, w0 } = *problem;
    let over = rslmc_constants(&specs.overdamped, m, big_m, d)?;
    let kin = rsklmc_constants(&specs.kinetic, m, big_m, specs.friction, d)?;
    let frs = frsklmc_constants(&specs.frictional, m, big_m, d, w0)?;
    let mut rows = Vec::with_capacity(3 * epsilons.len());
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(TheoryError::NonPositive("epsilon"));
        }
        let c = rslmc_complexity(&over, eps, w0);
        rows.push(ComplexityRow {
            algorithm: "RS-LMC",
            epsilon: eps,
            eta: c.eta,
            iterations: c.iterations,
            alpha: over.alpha,
            constants: BTreeMap::from([("C".to_string(), over.c), ("C_M".to_string(), over.c_m)]),
        });
        let c = rsklmc_complexity(&kin, eps, w0);
        rows.push(ComplexityRow {
            algorithm: "RS-KLMC",
            epsilon: eps,
            eta: c.eta,
            iterations: c.iterations,
            alpha: kin.alpha,
            constants: BTreeMap::from([("C".to_string(), kin.c)]),
        });
        let c = frsklmc_complexity(&frs, eps, w0);
        rows.push(ComplexityRow {
            algorithm: "FRS-KLMC",
            epsilon: eps,
            eta: c.eta,
            iterations: c.iterations,
            alpha: frs.alpha,
            constants: BTreeMap::from([("C_B".to_string(), frs.c_b)]),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::presets::*;

    fn wide() -> RegimeSpec {
        RegimeSpec::stationary(WIDE_MULTIPLIERS.to_vec(), generator(&SLOW_A)).unwrap()
    }

    #[test]
    fn scalar_overdamped_reduction() {
        let spec = RegimeSpec::constant(1.0).unwrap();
        let k = rslmc_constants(&spec, 0.5, 2.0, 3).unwrap();
        assert!((k.alpha - 0.5).abs() < 1e-15);
        let want = 2.0 * (1.65 * 2.0 * 3f64.sqrt() / 0.5).powi(2);
        assert!((k.c - want).abs() < 1e-12 * want);
    }

    #[test]
    fn overdamped_c_linear_in_dimension() {
        let a = rslmc_constants(&wide(), 1.0, 4.0, 3).unwrap();
        let b = rslmc_constants(&wide(), 1.0, 4.0, 6).unwrap();
        assert!((b.c / a.c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn overdamped_alpha_matches_spectral_rate() {
        let k = rslmc_constants(&wide(), 1.0, 4.0, 3).unwrap();
        let a = ctmc::spectral_rate(&generator(&SLOW_A), 1.0, &WIDE_MULTIPLIERS).unwrap();
        assert!((k.alpha - a).abs() < 1e-10);
        assert!(k.caps.values().all(|c| *c > 0.0));
    }

    #[test]
    fn norm_choice_changes_only_the_absorption_cap() {
        let s = rslmc_constants_with_norm(&wide(), 1.0, 4.0, 3, NormKind::Spectral).unwrap();
        let f = rslmc_constants_with_norm(&wide(), 1.0, 4.0, 3, NormKind::Frobenius).unwrap();
        assert!(f.c_m >= s.c_m);
        assert_eq!(s.alpha, f.alpha);
        assert_eq!(s.caps["smoothness"], f.caps["smoothness"]);
    }

    #[test]
    fn overdamped_bound_shape() {
        let k = rslmc_constants(&wide(), 1.0, 4.0, 3).unwrap();
        let eta = 0.5 * k.max_stepsize();
        let bias = (2.0 * k.c * eta / k.alpha).sqrt();
        let r0 = rslmc_bound(&k, eta, 0, 3.0);
        assert!((r0.bound_value - (3.0 + bias)).abs() < 1e-12);
        assert!(r0.admissible);
        let far = rslmc_bound(&k, eta, 100_000_000, 3.0);
        assert!((far.bound_value - bias).abs() < 1e-9);
        assert!(!rslmc_bound(&k, 2.0 * k.max_stepsize(), 1, 3.0).admissible);
        let zero = rslmc_bound(&k, eta, 10, 0.0);
        assert_eq!(zero.bound_value, bias);
    }

    #[test]
    fn huge_epsilon_gives_one_iteration() {
        let k = rslmc_constants(&wide(), 1.0, 4.0, 3).unwrap();
        assert_eq!(rslmc_complexity(&k, 1e6, 1.0).iterations, 1);
    }

    #[test]
    fn kinetic_scalar_reduction_and_caps() {
        let spec = RegimeSpec::constant(1.0).unwrap();
        let k = rsklmc_constants(&spec, 1.0, 4.0, 1.5, 3).unwrap();
        assert!((k.alpha - 1.0 / 1.5).abs() < 1e-15);
        let centered = RegimeSpec::stationary(CENTERED_MULTIPLIERS.to_vec(), generator(&SLOW_A)).unwrap();
        let k = rsklmc_constants(&centered, 1.0, 4.0, 1.5, 3).unwrap();
        let drift = 1.0 / (4.0 * 1.4 * 1.5 * 4.0);
        let coupling = 1.5 / ((1.0 + 1.5 * 4.0 * 2.25) * 1.4);
        let friction = 2.0 * 1.5 / 0.6;
        assert!((k.caps["drift"] - drift).abs() < 1e-15);
        assert!((k.caps["coupling"] - coupling).abs() < 1e-15);
        assert!((k.caps["friction"] - friction).abs() < 1e-14);
        assert!((k.max_stepsize() - drift).abs() < 1e-15);
    }

    #[test]
    fn kinetic_bound_shape() {
        let k = rsklmc_constants(&wide(), 1.0, 4.0, 1.5, 3).unwrap();
        let eta = 0.001;
        let r = rsklmc_bound(&k, eta, 0, 2.0);
        let bias = (2.0 * k.c).sqrt() / 1.5 * eta;
        assert!((r.bound_value - (4.0 + bias)).abs() < 1e-12);
        let far1 = rsklmc_bound(&k, eta, u64::MAX / 2, 2.0).bound_value;
        let far2 = rsklmc_bound(&k, 2.0 * eta, u64::MAX / 2, 2.0).bound_value;
        assert!((far2 / far1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn split_validation() {
        let spec = wide();
        assert!(matches!(
            rskld_bound(&spec, 1.0, 4.0, 1.5, Some(0.8), 1.0, 1.0),
            Err(TheoryError::InvalidLambdaSplit { .. })
        ));
        assert!(matches!(
            rskld_bound(&spec, 1.0, 4.0, 1.5, None, 1.0, 1.0),
            Err(TheoryError::FrictionBelowDefaultSplit { .. })
        ));
        let at_zero = rskld_bound(&spec, 1.0, 4.0, 1.5, Some(0.3), 0.0, 1.0).unwrap();
        assert!(at_zero >= 2f64.sqrt());
        assert_eq!(rskld_bound(&spec, 1.0, 4.0, 1.5, Some(0.3), 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn frictional_floor_and_scalar_case() {
        let low = RegimeSpec::stationary(LOW_FRICTIONS.to_vec(), generator(&FAST_4)).unwrap();
        assert!(matches!(frskld_bound(&low, 1.0, 4.0, 1.0, 1.0), Err(TheoryError::FrictionTooSmall { .. })));
        let high = RegimeSpec::stationary(HIGH_FRICTIONS.to_vec(), generator(&FAST_4)).unwrap();
        assert!((frskld_bound(&high, 1.0, 4.0, 0.0, 2.5).unwrap() - 2.5).abs() < 1e-15);
        let one = RegimeSpec::constant(4.0).unwrap();
        let b = frskld_bound(&one, 1.0, 4.0, 3.0, 2.0).unwrap();
        assert!((b - (-3.0f64 / 4.0).exp() * 2.0).abs() < 1e-14);
    }

    #[test]
    fn frictional_bound_shape() {
        let high = RegimeSpec::stationary(HIGH_FRICTIONS.to_vec(), generator(&FAST_4)).unwrap();
        let r = frsklmc_bound(&high, 1.0, 4.0, 3, 0.001, 0, 1.5).unwrap();
        let k = frsklmc_constants(&high, 1.0, 4.0, 3, 1.5).unwrap();
        assert!((r.bound_value - (2f64.sqrt() * 1.5 + k.c_b * 1e-6)).abs() < 1e-12);
        let a = frsklmc_bound_from(&k, 0.001, u64::MAX / 2, 1.5).bound_value;
        let b = frsklmc_bound_from(&k, 0.002, u64::MAX / 2, 1.5).bound_value;
        assert!((b / a - 4.0).abs() < 1e-12);
    }
}
