//! Langevin samplers: overdamped (LMC), kinetic (KLMC) and their
//! regime-switching variants, with full or minibatch gradients.

mod kinetic;

pub use kinetic::{
    klmc_coefficients, klmc_noise_covariance, klmc_step, IntegratorCoefficients, KineticKernel,
    NoiseCovariance2x2,
};

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctmc::{self, CtmcError, RegimeSpec};
use crate::models::{stochastic_gradient_into, ModelError, Potential};
use crate::numerics::{Matrix, NumericsError, RngStream};
use crate::theory;

const DIVERGENCE_NORM: f64 = 1e12;

// fork tags for the streams a chain carves out of its input stream
const REGIME_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const BATCH_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("state became non-finite or exceeded norm 1e12 at iteration {iteration}")]
    NonFiniteState { iteration: usize },
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverdampedState {
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

pub(crate) fn check_state(x: &[f64], v: Option<&[f64]>, iteration: usize) -> Result<(), SamplerError> {
    let norm2: f64 = x.iter().map(|a| a * a).sum();
    let v_ok = v.is_none_or(|v| v.iter().all(|a| a.is_finite()));
    if !(norm2.is_finite() && norm2.sqrt() <= DIVERGENCE_NORM) || !v_ok {
        return Err(SamplerError::NonFiniteState { iteration });
    }
    Ok(())
}

/// x ← x − η·grad + √(2η)·ξ for a given noise vector ξ.
pub fn lmc_update(x: &mut [f64], grad: &[f64], eta: f64, xi: &[f64]) {
    let scale = (2.0 * eta).sqrt();
    for i in 0..x.len() {
        x[i] += -eta * grad[i] + scale * xi[i];
    }
}

/// One unadjusted Langevin step.
pub fn lmc_step(
    s: &OverdampedState,
    grad: &[f64],
    eta: f64,
    rng: &mut RngStream,
) -> Result<OverdampedState, SamplerError> {
    assert!(eta > 0.0, "stepsize must be positive");
    let xi = rng.standard_normal(s.x.len());
    let mut x = s.x.clone();
    lmc_update(&mut x, grad, eta, &xi);
    check_state(&x, None, 0)?;
    Ok(OverdampedState { x })
}

/// One overdamped step in regime `value`: LMC with stepsize η·value.
pub fn rslmc_step(
    s: &OverdampedState,
    value: f64,
    grad: &[f64],
    eta: f64,
    rng: &mut RngStream,
) -> Result<OverdampedState, SamplerError> {
    lmc_step(s, grad, eta * value, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LMC")]
    Lmc,
    #[serde(rename = "RS-LMC")]
    RsLmc,
    #[serde(rename = "KLMC")]
    Klmc,
    #[serde(rename = "RS-KLMC")]
    RsKlmc,
    #[serde(rename = "FRS-KLMC")]
    FrsKlmc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Lmc, Algorithm::RsLmc, Algorithm::Klmc, Algorithm::RsKlmc, Algorithm::FrsKlmc];

    pub fn is_kinetic(self) -> bool {
        matches!(self, Algorithm::Klmc | Algorithm::RsKlmc | Algorithm::FrsKlmc)
    }

    pub fn uses_regime(self) -> bool {
        matches!(self, Algorithm::RsLmc | Algorithm::RsKlmc)
    }

    /// Name under the given gradient mode (minibatch variants use the
    /// stochastic-gradient names).
    pub fn label(self, gradient: GradientMode) -> &'static str {
        match (self, gradient) {
            (Algorithm::Lmc, GradientMode::Full) => "LMC",
            (Algorithm::RsLmc, GradientMode::Full) => "RS-LMC",
            (Algorithm::Klmc, GradientMode::Full) => "KLMC",
            (Algorithm::RsKlmc, GradientMode::Full) => "RS-KLMC",
            (Algorithm::FrsKlmc, GradientMode::Full) => "FRS-KLMC",
            (Algorithm::Lmc, GradientMode::Minibatch(_)) => "SGLD",
            (Algorithm::RsLmc, GradientMode::Minibatch(_)) => "RS-SGLD",
            (Algorithm::Klmc, GradientMode::Minibatch(_)) => "SGHMC",
            (Algorithm::RsKlmc, GradientMode::Minibatch(_)) => "RS-SGHMC",
            (Algorithm::FrsKlmc, GradientMode::Minibatch(_)) => "FRS-SGHMC",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label(GradientMode::Full))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Full,
    Minibatch(usize),
}

/// Transition kernel for the discrete regime chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKernel {
    /// P(η) = I + ηQ.
    #[default]
    FirstOrder,
    /// e^{Qη}.
    Exact,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub stepsize: f64,
    /// Constant friction of KLMC and RS-KLMC.
    pub friction: Option<f64>,
    pub iterations: usize,
    /// Defaults to iterations / 10.
    pub burn_in: Option<usize>,
    pub gradient: GradientMode,
    /// Multiplier regimes of RS-LMC and RS-KLMC.
    pub regime: Option<RegimeSpec>,
    /// Friction regimes of FRS-KLMC.
    pub frictional_regime: Option<RegimeSpec>,
    pub kernel: RegimeKernel,
    /// Record every `thinning`-th iteration.
    pub thinning: usize,
    pub record_velocity: bool,
    /// Starting position; zeros when absent.
    pub initial_position: Option<Vec<f64>>,
}

impl SamplerConfig {
    pub fn new(stepsize: f64, iterations: usize) -> Self {
        SamplerConfig {
            stepsize,
            friction: None,
            iterations,
            burn_in: None,
            gradient: GradientMode::Full,
            regime: None,
            frictional_regime: None,
            kernel: RegimeKernel::FirstOrder,
            thinning: 1,
            record_velocity: false,
            initial_position: None,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 10)
    }

    fn validate(&self, algorithm: Algorithm, dim: usize) -> Result<(), SamplerError> {
        let err = |m: &str| Err(SamplerError::Config(m.to_string()));
        if !(self.stepsize > 0.0 && self.stepsize.is_finite()) {
            return err("stepsize must be positive");
        }
        if self.thinning == 0 {
            return err("thinning must be at least 1");
        }
        if self.iterations > 0 && self.burn_in() >= self.iterations {
            return err("burn_in must be smaller than iterations");
        }
        if algorithm.uses_regime() != self.regime.is_some() {
            return err(if self.regime.is_some() {
                "regime is only allowed for RS-LMC and RS-KLMC"
            } else {
                "regime-switching algorithm needs a regime"
            });
        }
        if (algorithm == Algorithm::FrsKlmc) != self.frictional_regime.is_some() {
            return err(if self.frictional_regime.is_some() {
                "frictional_regime is only allowed for FRS-KLMC"
            } else {
                "FRS-KLMC needs a frictional_regime"
            });
        }
        if matches!(algorithm, Algorithm::Klmc | Algorithm::RsKlmc) && !self.friction.is_some_and(|g| g > 0.0) {
            return err("kinetic algorithm needs a positive friction");
        }
        if let Some(x0) = &self.initial_position {
            if x0.len() != dim {
                return err("initial_position has the wrong dimension");
            }
        }
        Ok(())
    }
}

/// Stepsize caps from the theory evaluators, reported but not enforced.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub caps: BTreeMap<String, f64>,
    pub note: Option<String>,
}

/// Function of the position recorded alongside the trace.
pub type MetricFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// Named metric hooks evaluated at every recorded iteration.
#[derive(Default)]
pub struct Recorder<'a> {
    hooks: Vec<(String, MetricFn<'a>)>,
}

impl<'a> Recorder<'a> {
    pub fn new() -> Self {
        Recorder { hooks: Vec::new() }
    }

    pub fn with(mut self, name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        self.hooks.push((name.into(), Box::new(f)));
        self
    }
}

/// Per-iteration record of a run. Entry `i` holds the state after iteration
/// `iterations[i]` (1-based) and the regime used to produce it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dim: usize,
    pub iterations: Vec<usize>,
    /// Row-major positions, `dim` entries per record.
    pub states: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
    pub regime_indices: Vec<usize>,
    pub metrics: BTreeMap<String, Vec<f64>>,
    pub burn_in: usize,
    pub initial_state: Vec<f64>,
    pub admissibility: Admissibility,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// Positions recorded after the burn-in, as an n×d matrix.
    pub fn post_burn_in(&self) -> Matrix {
        self.collect_after_burn_in(&self.states)
    }

    pub fn post_burn_in_velocities(&self) -> Option<Matrix> {
        self.velocities.as_ref().map(|v| self.collect_after_burn_in(v))
    }

    fn collect_after_burn_in(&self, flat: &[f64]) -> Matrix {
        let start = self.iterations.partition_point(|&k| k <= self.burn_in);
        let rows = self.len() - start;
        Matrix::from_fn(rows, self.dim, |i, j| flat[(start + i) * self.dim + j])
    }
}

fn regime_kernel(spec: &RegimeSpec, eta: f64, kernel: RegimeKernel) -> Result<Matrix, CtmcError> {
    match kernel {
        RegimeKernel::FirstOrder => ctmc::discrete_kernel(spec.generator(), eta),
        RegimeKernel::Exact => ctmc::exact_kernel(spec.generator(), eta),
    }
}

fn admissibility(config: &SamplerConfig, algorithm: Algorithm, pot: &dyn Potential) -> Admissibility {
    let c = pot.curvature();
    let d = pot.dim();
    let eta = config.stepsize;
    let caps = match algorithm {
        Algorithm::Lmc | Algorithm::RsLmc => {
            let spec = config.regime.clone().unwrap_or_else(|| RegimeSpec::constant(1.0).expect("constant regime"));
            theory::rslmc_constants(&spec, c.m, c.big_m, d).map(|k| k.caps)
        }
        Algorithm::Klmc | Algorithm::RsKlmc => {
            let spec = config.regime.clone().unwrap_or_else(|| RegimeSpec::constant(1.0).expect("constant regime"));
            let friction = config.friction.unwrap_or(1.0);
            theory::rsklmc_constants(&spec, c.m, c.big_m, friction, d).map(|k| k.caps)
        }
        Algorithm::FrsKlmc => match &config.frictional_regime {
            Some(spec) => theory::frsklmc_constants(spec, c.m, c.big_m, d, 0.0).map(|k| k.caps),
            None => Ok(BTreeMap::new()),
        },
    };
    match caps {
        Ok(caps) => Admissibility { admissible: caps.values().all(|cap| eta <= *cap), caps, note: None },
        Err(e) => Admissibility { admissible: false, caps: BTreeMap::new(), note: Some(e.to_string()) },
    }
}

/// Runs `config.iterations` steps of `algorithm` on `pot`.
///
/// Each iteration first draws the next regime from the current one, then
/// moves the state using the current (pre-update) regime value. The chain
/// forks independent streams from `rng` for regime switching, Gaussian
/// noise, minibatches and the initial velocity.
pub fn run_chain(
    config: &SamplerConfig,
    algorithm: Algorithm,
    pot: &dyn Potential,
    rng: &RngStream,
    recorder: &Recorder<'_>,
) -> Result<Trace, SamplerError> {
    let d = pot.dim();
    config.validate(algorithm, d)?;
    let eta = config.stepsize;
    let admissibility = admissibility(config, algorithm, pot);
    if !admissibility.admissible {
        let label = algorithm.label(config.gradient);
        match &admissibility.note {
            Some(note) => warn!("{label}: no sufficient stepsize cap applies ({note})"),
            None => warn!("{label}: stepsize {eta} exceeds the sufficient caps {:?}", admissibility.caps),
        }
    }

    let switching = config.regime.as_ref().or(config.frictional_regime.as_ref());
    let kernel = switching.map(|s| regime_kernel(s, eta, config.kernel)).transpose()?;
    let mut regime_rng = rng.fork(REGIME_STREAM);
    let mut noise_rng = rng.fork(NOISE_STREAM);
    let mut batch_rng = rng.fork(BATCH_STREAM);
    let mut init_rng = rng.fork(INIT_STREAM);

    let mut x = config.initial_position.clone().unwrap_or_else(|| vec![0.0; d]);
    let kinetic = algorithm.is_kinetic();
    let mut v = if kinetic { init_rng.standard_normal(d) } else { Vec::new() };
    let mut state = match switching {
        Some(spec) => rng_categorical(&mut regime_rng, spec.initial_law())?,
        None => 0,
    };

    // block integrators, one per regime value
    let kinetic_kernels: Vec<KineticKernel> = match algorithm {
        Algorithm::Klmc => vec![KineticKernel::new(eta, config.friction.expect("validated"))],
        Algorithm::RsKlmc => {
            let spec = config.regime.as_ref().expect("validated");
            let g = config.friction.expect("validated");
            spec.values().iter().map(|b| KineticKernel::new(b * eta, g)).collect()
        }
        Algorithm::FrsKlmc => {
            let spec = config.frictional_regime.as_ref().expect("validated");
            spec.values().iter().map(|g| KineticKernel::new(eta, *g)).collect()
        }
        _ => Vec::new(),
    };
    let multipliers: Vec<f64> = match algorithm {
        Algorithm::RsLmc => config.regime.as_ref().expect("validated").values().to_vec(),
        _ => vec![1.0],
    };

    let records = config.iterations / config.thinning;
    let mut trace = Trace {
        dim: d,
        iterations: Vec::with_capacity(records),
        states: Vec::with_capacity(records * d),
        velocities: (kinetic && config.record_velocity).then(|| Vec::with_capacity(records * d)),
        regime_indices: Vec::with_capacity(if switching.is_some() { records } else { 0 }),
        metrics: recorder.hooks.iter().map(|(n, _)| (n.clone(), Vec::with_capacity(records))).collect(),
        burn_in: config.burn_in(),
        initial_state: x.clone(),
        admissibility,
    };

    let mut grad = vec![0.0; d];
    let mut noise = vec![0.0; if kinetic { 2 * d } else { d }];
    for k in 1..=config.iterations {
        let current = state;
        if let Some(p) = &kernel {
            state = regime_rng.categorical_unchecked(p.row(current));
        }
        match config.gradient {
            GradientMode::Full => pot.gradient_into(&x, &mut grad),
            GradientMode::Minibatch(b) => stochastic_gradient_into(pot, &x, b, &mut batch_rng, &mut grad)?,
        }
        noise_rng.fill_normal(&mut noise);
        if kinetic {
            let kk = &kinetic_kernels[if kinetic_kernels.len() == 1 { 0 } else { current }];
            kk.apply(&mut x, &mut v, &grad, &noise);
            check_state(&x, Some(&v), k)?;
        } else {
            let m = multipliers[if multipliers.len() == 1 { 0 } else { current }];
            lmc_update(&mut x, &grad, eta * m, &noise);
            check_state(&x, None, k)?;
        }
        if k % config.thinning == 0 {
            trace.iterations.push(k);
            trace.states.extend_from_slice(&x);
            if let Some(vs) = trace.velocities.as_mut() {
                vs.extend_from_slice(&v);
            }
            if switching.is_some() {
                trace.regime_indices.push(current);
            }
            for (name, f) in &recorder.hooks {
                trace.metrics.get_mut(name).expect("metric slot").push(f(&x));
            }
        }
    }
    Ok(trace)
}

fn rng_categorical(rng: &mut RngStream, law: &[f64]) -> Result<usize, SamplerError> {
    Ok(rng.sample_categorical(law)?)
}
