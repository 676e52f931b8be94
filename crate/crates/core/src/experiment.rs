//! Config-driven experiment harness: JSON configs, bundled experiment
//! definitions, a parallel runner over (run × seed) and CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctmc::{self, presets, CtmcError, GeneratorMatrix, RegimeSpec};
use crate::data::{self, fnv1a64, DataError, Schema};
use crate::metrics::{self, MetricSeries};
use crate::models::{LinRegPotential, LogRegPotential, LogRegProblem, LogisticLoss, ModelError, Potential, QuadraticPotential};
use crate::numerics::{Matrix, RngStream};
use crate::samplers::{self, Admissibility, Algorithm, GradientMode, Recorder, RegimeKernel, SamplerConfig, SamplerError};
use crate::theory::{self, ComplexityRow, ComplexitySpecs, ProblemConstants, TheoryError};

/// Environment variable naming the default directory of real datasets.
pub const DATA_DIR_ENV: &str = "RSL_DATA_DIR";

const DATA_STREAM: u64 = 11;
const CHAIN_STREAM: u64 = 12;

pub const BUNDLED_EXPERIMENTS: [&str; 6] = [
    "fig1_rs_lmc",
    "fig2_rs_klmc",
    "fig3_frs_klmc",
    "fig_logistic_synthetic",
    "fig_logistic_iris",
    "fig_logistic_magic",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("dataset not found: {}", .0.display())]
    MissingDataset(PathBuf),
    #[error("unknown experiment {0:?}; bundled experiments: {list}", list = BUNDLED_EXPERIMENTS.join(", "))]
    UnknownExperiment(String),
    #[error(transparent)]
    Data(DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<DataError> for ExperimentError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::FileNotFound(p) => ExperimentError::MissingDataset(p),
            other => ExperimentError::Data(other),
        }
    }
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { field: field.into(), message: message.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// A generator matrix given by preset name or as inline rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorRef {
    Named(String),
    Inline(Vec<Vec<f64>>),
}

/// A regime value set given by preset name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuesRef {
    Named(String),
    Inline(Vec<f64>),
}

pub const GENERATOR_NAMES: [&str; 6] = ["slow_a", "slow_b", "fast_5", "fast_4", "logistic_friction", "logistic_multiplier"];
pub const VALUE_SET_NAMES: [&str; 6] =
    ["narrow_multipliers", "wide_multipliers", "centered_multipliers", "low_frictions", "high_frictions", "sg_frictions"];

impl GeneratorRef {
    pub fn resolve(&self, field: &str) -> Result<GeneratorMatrix, ExperimentError> {
        use presets::*;
        match self {
            GeneratorRef::Named(name) => Ok(match name.as_str() {
                "slow_a" => generator(&SLOW_A),
                "slow_b" => generator(&SLOW_B),
                "fast_5" => generator(&FAST_5),
                "fast_4" => generator(&FAST_4),
                "logistic_friction" => generator(&LOGISTIC_FRICTION),
                "logistic_multiplier" => generator(&LOGISTIC_MULTIPLIER),
                other => {
                    return Err(config_err(
                        field,
                        format!("unknown generator {other:?}; known: {}", GENERATOR_NAMES.join(", ")),
                    ))
                }
            }),
            GeneratorRef::Inline(rows) => {
                GeneratorMatrix::from_rows(rows).map_err(|e| config_err(field, e.to_string()))
            }
        }
    }
}

impl ValuesRef {
    pub fn resolve(&self, field: &str) -> Result<Vec<f64>, ExperimentError> {
        use presets::*;
        match self {
            ValuesRef::Named(name) => Ok(match name.as_str() {
                "narrow_multipliers" => NARROW_MULTIPLIERS.to_vec(),
                "wide_multipliers" => WIDE_MULTIPLIERS.to_vec(),
                "centered_multipliers" => CENTERED_MULTIPLIERS.to_vec(),
                "low_frictions" => LOW_FRICTIONS.to_vec(),
                "high_frictions" => HIGH_FRICTIONS.to_vec(),
                "sg_frictions" => SG_FRICTIONS.to_vec(),
                other => {
                    return Err(config_err(
                        field,
                        format!("unknown value set {other:?}; known: {}", VALUE_SET_NAMES.join(", ")),
                    ))
                }
            }),
            ValuesRef::Inline(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub values: ValuesRef,
    pub generator: GeneratorRef,
    /// Start the chain in this state instead of drawing from its stationary law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

impl RegimeConfig {
    pub fn named(values: &str, generator: &str) -> Self {
        RegimeConfig {
            values: ValuesRef::Named(values.into()),
            generator: GeneratorRef::Named(generator.into()),
            initial_state: None,
        }
    }

    pub fn resolve(&self, field: &str) -> Result<RegimeSpec, ExperimentError> {
        let values = self.values.resolve(&format!("{field}.values"))?;
        let generator = self.generator.resolve(&format!("{field}.generator"))?;
        let spec = RegimeSpec::stationary(values, generator).map_err(|e| config_err(field, e.to_string()))?;
        match self.initial_state {
            Some(s) => spec.with_initial_state(s).map_err(|e| config_err(format!("{field}.initial_state"), e.to_string())),
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Iris,
    Magic,
}

impl DatasetName {
    pub fn file_name(self) -> &'static str {
        match self {
            DatasetName::Iris => "iris.data",
            DatasetName::Magic => "magic04.data",
        }
    }

    pub fn schema(self) -> Schema {
        match self {
            DatasetName::Iris => Schema::iris(),
            DatasetName::Magic => Schema::magic(),
        }
    }

    pub fn default_positive_class(self) -> &'static str {
        match self {
            DatasetName::Iris => "Iris-setosa",
            DatasetName::Magic => "g",
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogRegSource {
    Synthetic {
        n: usize,
        d: usize,
    },
    File {
        dataset: DatasetName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positive_class: Option<String>,
        #[serde(default = "default_true")]
        standardize: bool,
        #[serde(default)]
        intercept: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// f(x) = ½xᵀAx − bᵀx.
    Quadratic {
        precision: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    Linreg {
        n: usize,
        prior_variance: f64,
    },
    Logreg {
        source: LogRegSource,
        prior_variance: f64,
        #[serde(default)]
        loss: LogisticLoss,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frictional_regime: Option<RegimeConfig>,
    /// Overrides the experiment-level friction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
}

fn default_thinning() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub target: TargetConfig,
    pub runs: Vec<RunConfig>,
    pub stepsize: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub kernel: RegimeKernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_position: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// A validated run: its sampler configuration with regimes resolved.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub label: String,
    pub algorithm: Algorithm,
    pub sampler: SamplerConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| config_err("<config>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// FNV-1a digest of the canonical serialization, ignoring where output goes.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        format!("{:016x}", fnv1a64(&bytes))
    }

    fn gradient_mode(&self) -> GradientMode {
        match self.batch_size {
            Some(b) => GradientMode::Minibatch(b),
            None => GradientMode::Full,
        }
    }

    /// Checks every field and resolves the regime specs.
    pub fn prepare(&self) -> Result<Vec<PreparedRun>, ExperimentError> {
        if self.id.trim().is_empty() {
            return Err(config_err("id", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "need at least one seed"));
        }
        if self.iterations == 0 {
            return Err(config_err("iterations", "must be at least 1"));
        }
        if !(self.stepsize > 0.0 && self.stepsize.is_finite()) {
            return Err(config_err("stepsize", "must be positive and finite"));
        }
        if self.thinning == 0 {
            return Err(config_err("thinning", "must be at least 1"));
        }
        if self.burn_in.is_some_and(|b| b >= self.iterations) {
            return Err(config_err("burn_in", "must be smaller than iterations"));
        }
        if self.batch_size == Some(0) {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        if self.batch_size.is_some() && matches!(self.target, TargetConfig::Quadratic { .. }) {
            return Err(config_err("batch_size", "a quadratic target has no data to subsample"));
        }
        if self.runs.is_empty() {
            return Err(config_err("runs", "need at least one run"));
        }
        self.check_target()?;
        let mut labels = std::collections::BTreeSet::new();
        let mut prepared = Vec::with_capacity(self.runs.len());
        for (i, run) in self.runs.iter().enumerate() {
            let field = format!("runs[{i}]");
            if !labels.insert(run.label.as_str()) {
                return Err(config_err(format!("{field}.label"), format!("duplicate label {:?}", run.label)));
            }
            let alg = run.algorithm;
            if alg.uses_regime() != run.regime.is_some() {
                let msg = if alg.uses_regime() { "required for this algorithm" } else { "not used by this algorithm" };
                return Err(config_err(format!("{field}.regime"), msg));
            }
            if (alg == Algorithm::FrsKlmc) != run.frictional_regime.is_some() {
                let msg = if alg == Algorithm::FrsKlmc { "required for FRS-KLMC" } else { "only used by FRS-KLMC" };
                return Err(config_err(format!("{field}.frictional_regime"), msg));
            }
            let friction = run.friction.or(self.friction);
            if matches!(alg, Algorithm::Klmc | Algorithm::RsKlmc) && !friction.is_some_and(|g| g > 0.0 && g.is_finite()) {
                return Err(config_err(format!("{field}.friction"), "kinetic algorithm needs a positive friction"));
            }
            let mut sampler = SamplerConfig::new(self.stepsize, self.iterations);
            sampler.burn_in = self.burn_in;
            sampler.gradient = self.gradient_mode();
            sampler.kernel = self.kernel;
            sampler.thinning = self.thinning;
            sampler.initial_position = self.initial_position.clone();
            sampler.friction = friction.filter(|_| matches!(alg, Algorithm::Klmc | Algorithm::RsKlmc));
            for (slot, cfg, name) in [
                (&mut sampler.regime, &run.regime, "regime"),
                (&mut sampler.frictional_regime, &run.frictional_regime, "frictional_regime"),
            ] {
                if let Some(cfg) = cfg {
                    let field = format!("{field}.{name}");
                    let spec = cfg.resolve(&field)?;
                    self.check_regime_kernel(&spec, &field)?;
                    *slot = Some(spec);
                }
            }
            prepared.push(PreparedRun { label: run.label.clone(), algorithm: alg, sampler });
        }
        Ok(prepared)
    }

    fn check_target(&self) -> Result<(), ExperimentError> {
        match &self.target {
            TargetConfig::Quadratic { precision, shift } => {
                let a = Matrix::try_from_rows(precision).map_err(|e| config_err("target.precision", e.to_string()))?;
                let b = shift.clone().unwrap_or_else(|| vec![0.0; a.rows()]);
                QuadraticPotential::new(a, b).map_err(|e| config_err("target.precision", e.to_string()))?;
            }
            TargetConfig::Linreg { n, prior_variance } => {
                if *n == 0 {
                    return Err(config_err("target.n", "must be at least 1"));
                }
                check_prior(*prior_variance)?;
                self.check_batch(*n)?;
            }
            TargetConfig::Logreg { source, prior_variance, .. } => {
                check_prior(*prior_variance)?;
                if let LogRegSource::Synthetic { n, d } = source {
                    if *n == 0 || *d == 0 {
                        return Err(config_err("target.source", "n and d must be at least 1"));
                    }
                    self.check_batch(*n)?;
                }
            }
        }
        if let (Some(x0), Some(d)) = (&self.initial_position, self.target_dim()) {
            if x0.len() != d {
                return Err(config_err("initial_position", format!("expected {d} coordinates, got {}", x0.len())));
            }
        }
        Ok(())
    }

    fn check_batch(&self, n: usize) -> Result<(), ExperimentError> {
        match self.batch_size {
            Some(b) if b > n => Err(config_err("batch_size", format!("{b} exceeds the {n} data rows"))),
            _ => Ok(()),
        }
    }

    /// Dimension when it is known without loading data.
    fn target_dim(&self) -> Option<usize> {
        match &self.target {
            TargetConfig::Quadratic { precision, .. } => Some(precision.len()),
            TargetConfig::Linreg { .. } => Some(data::LINREG_TRUE_COEFFICIENTS.len()),
            TargetConfig::Logreg { source: LogRegSource::Synthetic { d, .. }, .. } => Some(*d),
            TargetConfig::Logreg { .. } => None,
        }
    }

    fn check_regime_kernel(&self, spec: &RegimeSpec, field: &str) -> Result<(), ExperimentError> {
        if self.kernel != RegimeKernel::FirstOrder {
            return Ok(());
        }
        match ctmc::discrete_kernel(spec.generator(), self.stepsize) {
            Err(CtmcError::StepsizeTooLarge { state, product }) => Err(config_err(
                format!("{field}.generator"),
                format!(
                    "stepsize × exit rate of state {state} is {product} > 1: the first-order regime kernel \
                     I + ηQ is a transition matrix only when q_i·η ≤ 1 for every state \
                     (reduce stepsize or set kernel to \"exact\")"
                ),
            )),
            Err(e) => Err(config_err(field, e.to_string())),
            Ok(_) => Ok(()),
        }
    }
}

fn check_prior(v: f64) -> Result<(), ExperimentError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err("target.prior_variance", "must be positive and finite"))
    }
}

/// The sampled target for one seed.
enum Target {
    Quadratic(QuadraticPotential),
    Linreg(LinRegPotential),
    Logreg(LogRegPotential),
}

impl Target {
    fn potential(&self) -> &dyn Potential {
        match self {
            Target::Quadratic(p) => p,
            Target::Linreg(p) => p,
            Target::Logreg(p) => p,
        }
    }

    fn metric_name(&self) -> &'static str {
        match self {
            Target::Quadratic(_) => "squared_distance_to_mean",
            Target::Linreg(_) => "mse",
            Target::Logreg(_) => "accuracy",
        }
    }

    fn recorder(&self) -> Recorder<'_> {
        let name = self.metric_name();
        match self {
            Target::Quadratic(p) => {
                let mean = p.mean();
                Recorder::new().with(name, move |x| x.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum())
            }
            Target::Linreg(p) => Recorder::new().with(name, move |x| metrics::mse(x, p.problem()).unwrap_or(f64::NAN)),
            Target::Logreg(p) => {
                Recorder::new().with(name, move |x| metrics::accuracy(x, p.problem()).unwrap_or(f64::NAN))
            }
        }
    }
}

/// Options that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory holding real datasets; falls back to the environment, then `data`.
    pub data_dir: Option<PathBuf>,
    /// Where CSV output goes; falls back to the config's `output_dir`. No files
    /// are written when both are absent.
    pub out_dir: Option<PathBuf>,
}

pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub algorithm: Algorithm,
    /// Algorithm name under the gradient mode in use, e.g. RS-SGHMC.
    pub display_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub metric_paths: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub diverged: bool,
    pub divergence_iteration: Option<usize>,
    pub final_metric: Option<f64>,
    pub admissibility: Admissibility,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub n: usize,
    pub d: usize,
    pub positive_fraction: Option<f64>,
    pub source_hash: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub id: String,
    pub config_hash: String,
    pub metric: String,
    pub records: Vec<RunRecord>,
    /// Per (run, seed) series, in the order of `records`.
    pub series: Vec<Option<MetricSeries>>,
    /// Mean over non-diverged seeds, one series per run label.
    pub summary: Vec<MetricSeries>,
    /// Reference values per seed, e.g. the accuracy of the generating coefficients.
    pub references: BTreeMap<u64, BTreeMap<String, f64>>,
    pub dataset: DatasetInfo,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentOutcome {
    pub fn any_diverged(&self) -> bool {
        self.records.iter().any(|r| r.diverged)
    }

    /// Series of run `label` for `seed`.
    pub fn series_for(&self, label: &str, seed: u64) -> Option<&MetricSeries> {
        self.records
            .iter()
            .position(|r| r.label == label && r.seed == seed)
            .and_then(|i| self.series[i].as_ref())
    }

    pub fn summary_for(&self, label: &str) -> Option<&MetricSeries> {
        self.summary.iter().find(|s| s.name == label)
    }
}

fn load_real(
    dataset: DatasetName,
    positive_class: Option<&str>,
    standardize: bool,
    intercept: bool,
    data_dir: &Path,
) -> Result<(data::Dataset, String), ExperimentError> {
    let path = data_dir.join(dataset.file_name());
    let raw = data::load_csv(&path, &dataset.schema())?;
    let hash = match &raw.provenance {
        data::Provenance::File { fnv1a64, .. } => format!("{fnv1a64:016x}"),
        data::Provenance::Synthetic { .. } => String::new(),
    };
    let mut ds = data::binarize_labels(&raw, positive_class.unwrap_or(dataset.default_positive_class()))?;
    if standardize {
        ds = data::standardize(&ds).0;
    }
    if intercept {
        ds = data::add_intercept(&ds);
    }
    Ok((ds, hash))
}

/// Builds the per-seed targets. Real datasets are loaded once and shared.
fn build_targets(
    config: &ExperimentConfig,
    data_dir: &Path,
) -> Result<(Vec<Target>, BTreeMap<u64, BTreeMap<String, f64>>, DatasetInfo), ExperimentError> {
    let mut references = BTreeMap::new();
    let mut targets = Vec::with_capacity(config.seeds.len());
    let info;
    match &config.target {
        TargetConfig::Quadratic { precision, shift } => {
            let a = Matrix::from_rows(precision);
            let b = shift.clone().unwrap_or_else(|| vec![0.0; a.rows()]);
            let p = QuadraticPotential::new(a, b)?;
            info = DatasetInfo { n: 0, d: p.dim(), positive_fraction: None, source_hash: None };
            for _ in &config.seeds {
                targets.push(Target::Quadratic(p.clone()));
            }
        }
        TargetConfig::Linreg { n, prior_variance } => {
            info = DatasetInfo { n: *n, d: data::LINREG_TRUE_COEFFICIENTS.len(), positive_fraction: None, source_hash: None };
            for &seed in &config.seeds {
                let problem = data::gen_linreg(*n, *prior_variance, &mut RngStream::with_stream(seed, DATA_STREAM));
                let truth = metrics::mse(&data::LINREG_TRUE_COEFFICIENTS, &problem).expect("matching dimension");
                references.insert(seed, BTreeMap::from([("mse_at_true_coefficients".to_string(), truth)]));
                targets.push(Target::Linreg(LinRegPotential::new(problem)?));
            }
        }
        TargetConfig::Logreg { source, prior_variance, loss } => match source {
            LogRegSource::Synthetic { n, d } => {
                info = DatasetInfo { n: *n, d: *d, positive_fraction: None, source_hash: None };
                for &seed in &config.seeds {
                    let s = data::gen_logreg(*n, *d, *prior_variance, &mut RngStream::with_stream(seed, DATA_STREAM));
                    references.insert(seed, logistic_references(&s.problem, Some(&s.coefficients)));
                    targets.push(Target::Logreg(LogRegPotential::with_loss(s.problem, *loss)?));
                }
            }
            LogRegSource::File { dataset, positive_class, standardize, intercept } => {
                let (ds, hash) = load_real(*dataset, positive_class.as_deref(), *standardize, *intercept, data_dir)?;
                let problem = ds.to_logreg(*prior_variance)?;
                if let Some(d) = &config.initial_position {
                    if d.len() != problem.d() {
                        return Err(config_err("initial_position", format!("dataset has {} features", problem.d())));
                    }
                }
                if let Some(b) = config.batch_size.filter(|b| *b > problem.n()) {
                    return Err(config_err("batch_size", format!("{b} exceeds the {} data rows", problem.n())));
                }
                info = DatasetInfo {
                    n: problem.n(),
                    d: problem.d(),
                    positive_fraction: Some(problem.positive_fraction()),
                    source_hash: Some(hash),
                };
                let pot = LogRegPotential::with_loss(problem, *loss)?;
                for &seed in &config.seeds {
                    references.insert(seed, logistic_references(pot.problem(), None));
                    targets.push(Target::Logreg(pot.clone()));
                }
            }
        },
    }
    Ok((targets, references, info))
}

fn logistic_references(problem: &LogRegProblem, truth: Option<&[f64]>) -> BTreeMap<String, f64> {
    let p = problem.positive_fraction();
    let mut r = BTreeMap::from([("majority_baseline".to_string(), p.max(1.0 - p))]);
    if let Some(c) = truth {
        r.insert("bayes_accuracy".to_string(), metrics::accuracy(c, problem).expect("matching dimension"));
    }
    r
}

fn slug(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    s.trim_matches('_').to_string()
}

/// Runs every (run × seed) pair in parallel; writes CSVs when an output
/// directory is known.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutcome, ExperimentError> {
    let prepared = config.prepare()?;
    let hash = config.hash();
    let data_dir = options.data_dir.clone().unwrap_or_else(default_data_dir);
    let (targets, references, dataset) = build_targets(config, &data_dir)?;
    let metric = targets[0].metric_name().to_string();
    let out_root = options.out_dir.clone().or_else(|| config.output_dir.clone()).map(|d| d.join(&config.id));
    if let Some(dir) = &out_root {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    info!("experiment {} ({hash}): {} runs × {} seeds", config.id, prepared.len(), config.seeds.len());

    let tasks: Vec<(usize, usize)> =
        (0..prepared.len()).flat_map(|r| (0..config.seeds.len()).map(move |s| (r, s))).collect();
    let results: Vec<Result<(RunRecord, Option<MetricSeries>), ExperimentError>> = tasks
        .par_iter()
        .map(|&(r, s)| {
            let run = &prepared[r];
            let seed = config.seeds[s];
            let target = &targets[s];
            let start = Instant::now();
            let rng = RngStream::with_stream(seed, CHAIN_STREAM);
            let outcome = samplers::run_chain(&run.sampler, run.algorithm, target.potential(), &rng, &target.recorder());
            let display_name = run.algorithm.label(run.sampler.gradient).to_string();
            let mut record = RunRecord {
                label: run.label.clone(),
                algorithm: run.algorithm,
                display_name,
                config_hash: hash.clone(),
                seed,
                metric_paths: Vec::new(),
                wall_clock_seconds: 0.0,
                diverged: false,
                divergence_iteration: None,
                final_metric: None,
                admissibility: Admissibility::default(),
            };
            let series = match outcome {
                Ok(mut trace) => {
                    let values = trace.metrics.remove(target.metric_name()).expect("recorded metric");
                    record.final_metric = values.last().copied();
                    record.admissibility = trace.admissibility;
                    let series = MetricSeries { name: metric.clone(), values, iteration_stride: config.thinning };
                    if let Some(dir) = &out_root {
                        let path = dir.join(format!("{}_seed{seed}.csv", slug(&run.label)));
                        write_series_csv(&path, std::slice::from_ref(&series))?;
                        record.metric_paths.push(path);
                    }
                    Some(series)
                }
                Err(SamplerError::NonFiniteState { iteration }) => {
                    warn!("{} seed {seed} diverged at iteration {iteration}", run.label);
                    record.diverged = true;
                    record.divergence_iteration = Some(iteration);
                    None
                }
                Err(e) => return Err(e.into()),
            };
            record.wall_clock_seconds = start.elapsed().as_secs_f64();
            Ok((record, series))
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut series = Vec::with_capacity(results.len());
    for r in results {
        let (rec, s) = r?;
        records.push(rec);
        series.push(s);
    }

    let mut summary = Vec::new();
    for run in &prepared {
        let curves: Vec<&MetricSeries> = records
            .iter()
            .zip(&series)
            .filter(|(rec, _)| rec.label == run.label)
            .filter_map(|(_, s)| s.as_ref())
            .collect();
        if curves.is_empty() {
            continue;
        }
        let len = curves[0].values.len();
        let values = (0..len).map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / curves.len() as f64).collect();
        summary.push(MetricSeries { name: run.label.clone(), values, iteration_stride: config.thinning });
    }

    let outcome = ExperimentOutcome {
        id: config.id.clone(),
        config_hash: hash,
        metric,
        records,
        series,
        summary,
        references,
        dataset,
        output_dir: out_root.clone(),
    };
    if let Some(dir) = &out_root {
        write_series_csv(&dir.join("summary.csv"), &outcome.summary)?;
        let path = dir.join("config.json");
        fs::write(&path, config.to_json()).map_err(io_err(&path))?;
        let path = dir.join("runs.json");
        let report = serde_json::json!({
            "id": outcome.id,
            "config_hash": outcome.config_hash,
            "metric": outcome.metric,
            "dataset": outcome.dataset,
            "references": outcome.references,
            "runs": outcome.records,
        });
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(io_err(&path))?;
    }
    Ok(outcome)
}

/// Writes aligned series as CSV: `iteration` first, one column per series.
pub fn write_series_csv(path: &Path, series: &[MetricSeries]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(series.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let stride = series.first().map_or(1, |s| s.iteration_stride);
    for i in 0..len {
        let mut row = vec![((i + 1) * stride).to_string()];
        row.extend(series.iter().map(|s| s.values.get(i).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a file written by [`write_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<Vec<MetricSeries>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("iteration") {
        return Err(ExperimentError::Data(DataError::SchemaMismatch("first column must be `iteration`".into())));
    }
    let mut series: Vec<MetricSeries> = headers
        .iter()
        .skip(1)
        .map(|name| MetricSeries { name: name.to_string(), values: Vec::new(), iteration_stride: 1 })
        .collect();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let parse = |column: usize| -> Result<&str, ExperimentError> { Ok(record.get(column).unwrap_or("")) };
        if row == 0 {
            let k: usize = parse(0)?.parse().map_err(|_| {
                ExperimentError::Data(DataError::ParseError { row: 1, column: 1, value: parse(0).unwrap_or("").into() })
            })?;
            series.iter_mut().for_each(|s| s.iteration_stride = k);
        }
        for (j, s) in series.iter_mut().enumerate() {
            let field = parse(j + 1)?;
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                ExperimentError::Data(DataError::ParseError { row: row + 1, column: j + 2, value: field.into() })
            })?;
            s.values.push(v);
        }
    }
    Ok(series)
}

fn run(label: &str, algorithm: Algorithm) -> RunConfig {
    RunConfig { label: label.into(), algorithm, regime: None, frictional_regime: None, friction: None }
}

fn regime_run(label: &str, algorithm: Algorithm, values: &str, generator: &str) -> RunConfig {
    RunConfig { regime: Some(RegimeConfig::named(values, generator)), ..run(label, algorithm) }
}

fn frictional_run(label: &str, values: &str, generator: &str) -> RunConfig {
    RunConfig {
        frictional_regime: Some(RegimeConfig::named(values, generator)),
        ..run(label, Algorithm::FrsKlmc)
    }
}

const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn linreg_experiment(id: &str, stepsize: f64, friction: Option<f64>, runs: Vec<RunConfig>) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        target: TargetConfig::Linreg { n: 1000, prior_variance: 1.0 },
        runs,
        stepsize,
        iterations: 2000,
        burn_in: None,
        batch_size: None,
        friction,
        seeds: DEFAULT_SEEDS.to_vec(),
        thinning: 1,
        kernel: RegimeKernel::FirstOrder,
        initial_position: None,
        output_dir: None,
    }
}

fn logistic_runs() -> Vec<RunConfig> {
    vec![
        run("SGLD", Algorithm::Lmc),
        regime_run("RS-SGLD", Algorithm::RsLmc, "centered_multipliers", "logistic_multiplier"),
        run("SGHMC", Algorithm::Klmc),
        regime_run("RS-SGHMC", Algorithm::RsKlmc, "centered_multipliers", "logistic_multiplier"),
        frictional_run("FRS-SGHMC", "sg_frictions", "logistic_friction"),
    ]
}

fn logistic_experiment(id: &str, source: LogRegSource, batch: usize) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        target: TargetConfig::Logreg { source, prior_variance: 2.0, loss: LogisticLoss::LabelDependent },
        runs: logistic_runs(),
        stepsize: 1e-4,
        iterations: 2000,
        burn_in: None,
        batch_size: Some(batch),
        friction: Some(presets::SG_FRICTION),
        seeds: DEFAULT_SEEDS.to_vec(),
        thinning: 1,
        kernel: RegimeKernel::FirstOrder,
        initial_position: None,
        output_dir: None,
    }
}

/// The bundled experiment called `name`.
pub fn bundled_experiment(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let file = |dataset, standardize| LogRegSource::File { dataset, positive_class: None, standardize, intercept: false };
    Ok(match name {
        "fig1_rs_lmc" => linreg_experiment(
            name,
            1e-6,
            None,
            vec![
                run("LMC", Algorithm::Lmc),
                regime_run("RS-LMC narrow slow_a", Algorithm::RsLmc, "narrow_multipliers", "slow_a"),
                regime_run("RS-LMC narrow slow_b", Algorithm::RsLmc, "narrow_multipliers", "slow_b"),
                regime_run("RS-LMC wide slow_a", Algorithm::RsLmc, "wide_multipliers", "slow_a"),
                regime_run("RS-LMC wide slow_b", Algorithm::RsLmc, "wide_multipliers", "slow_b"),
            ],
        ),
        "fig2_rs_klmc" => linreg_experiment(
            name,
            5e-4,
            Some(presets::KINETIC_FRICTION),
            vec![
                run("KLMC", Algorithm::Klmc),
                regime_run("RS-KLMC slow_a", Algorithm::RsKlmc, "centered_multipliers", "slow_a"),
                regime_run("RS-KLMC fast_5", Algorithm::RsKlmc, "centered_multipliers", "fast_5"),
            ],
        ),
        "fig3_frs_klmc" => linreg_experiment(
            name,
            5e-4,
            Some(presets::KINETIC_FRICTION),
            vec![
                run("KLMC", Algorithm::Klmc),
                frictional_run("FRS-KLMC low_frictions", "low_frictions", "fast_4"),
                frictional_run("FRS-KLMC high_frictions", "high_frictions", "fast_4"),
            ],
        ),
        "fig_logistic_synthetic" => logistic_experiment(name, LogRegSource::Synthetic { n: 20_000, d: 3 }, 20),
        "fig_logistic_iris" => logistic_experiment(name, file(DatasetName::Iris, true), 50),
        "fig_logistic_magic" => logistic_experiment(name, file(DatasetName::Magic, true), 100),
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    })
}

/// The complexity table as CSV; constants are packed as `name=value` pairs
/// separated by semicolons.
pub fn complexity_csv(rows: &[ComplexityRow]) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["algorithm", "epsilon", "eta", "iterations", "alpha", "constants"])?;
    for r in rows {
        let constants: Vec<String> = r.constants.iter().map(|(k, v)| format!("{k}={v}")).collect();
        w.write_record([
            r.algorithm.to_string(),
            r.epsilon.to_string(),
            r.eta.to_string(),
            r.iterations.to_string(),
            r.alpha.to_string(),
            constants.join(";"),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn default_w0() -> f64 {
    1.0
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

/// Inputs of the iteration-complexity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default, rename = "M")]
    pub big_m: Option<f64>,
    pub d: usize,
    #[serde(default = "default_w0")]
    pub w0: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    pub overdamped: RegimeConfig,
    pub kinetic: RegimeConfig,
    pub friction: f64,
    pub frictional: RegimeConfig,
}

impl TheoryConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| config_err("<config>", e.to_string()))
    }

    pub fn table(&self) -> Result<Vec<ComplexityRow>, ExperimentError> {
        let m = self.m.ok_or_else(|| config_err("m", "strong-convexity constant is required"))?;
        let big_m = self.big_m.ok_or_else(|| config_err("M", "smoothness constant is required"))?;
        if self.epsilons.is_empty() {
            return Err(config_err("epsilons", "need at least one accuracy"));
        }
        let problem = ProblemConstants { m, big_m, d: self.d, w0: self.w0 };
        let specs = ComplexitySpecs {
            overdamped: self.overdamped.resolve("overdamped")?,
            kinetic: self.kinetic.resolve("kinetic")?,
            friction: self.friction,
            frictional: self.frictional.resolve("frictional")?,
        };
        Ok(theory::complexity_table(&problem, &specs, &self.epsilons)?)
    }
}

fn default_horizon() -> f64 {
    1e5
}

fn default_threshold() -> f64 {
    1e-2
}

/// Inputs of the generator check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcCheckConfig {
    pub generator: GeneratorRef,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CtmcReport {
    pub stationary: Vec<f64>,
    pub spectrum: Vec<(f64, f64)>,
    pub spectral_gap: f64,
    pub max_exit_rate: f64,
    pub occupation: Vec<f64>,
    pub jump_count: usize,
    pub total_variation: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CtmcCheckConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| config_err("<config>", e.to_string()))
    }

    /// Stationary law, spectrum and the occupation of one exact path started
    /// from the stationary law.
    pub fn run(&self) -> Result<CtmcReport, ExperimentError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err("horizon", "must be positive and finite"));
        }
        let g = match &self.generator {
            GeneratorRef::Inline(rows) => GeneratorMatrix::from_rows(rows)?,
            named => named.resolve("generator")?,
        };
        let stationary = ctmc::stationary_distribution(&g)?;
        let spectrum = g.spectrum()?.sorted_by_real_desc();
        let spectral_gap = g.spectral_gap()?;
        let mut rng = RngStream::new(self.seed);
        let path = ctmc::simulate_exact_path(&g, &stationary, self.horizon, &mut rng)?;
        let occupation = path.occupation_fractions(g.dim());
        let total_variation = ctmc::total_variation(&occupation, &stationary);
        Ok(CtmcReport {
            stationary,
            spectrum,
            spectral_gap,
            max_exit_rate: g.max_exit_rate(),
            occupation,
            jump_count: path.jump_count(),
            total_variation,
            threshold: self.threshold,
            passed: total_variation <= self.threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_config() -> ExperimentConfig {
        ExperimentConfig {
            id: "q".into(),
            target: TargetConfig::Quadratic { precision: vec![vec![1.0]], shift: None },
            runs: vec![run("LMC", Algorithm::Lmc)],
            stepsize: 0.1,
            iterations: 50,
            burn_in: None,
            batch_size: None,
            friction: None,
            seeds: vec![0],
            thinning: 1,
            kernel: RegimeKernel::FirstOrder,
            initial_position: None,
            output_dir: None,
        }
    }

    #[test]
    fn bundled_configs_prepare() {
        for name in BUNDLED_EXPERIMENTS {
            let c = bundled_experiment(name).unwrap();
            assert_eq!(c.id, name);
            c.prepare().unwrap();
            assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(matches!(bundled_experiment("nope"), Err(ExperimentError::UnknownExperiment(_))));
    }

    #[test]
    fn first_order_guard_names_field() {
        let mut c = quadratic_config();
        c.runs = vec![regime_run("RS", Algorithm::RsLmc, "wide_multipliers", "fast_5")];
        match c.prepare() {
            Err(ExperimentError::Config { field, message }) => {
                assert_eq!(field, "runs[0].regime.generator");
                assert!(message.contains("q_i·η ≤ 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        c.kernel = RegimeKernel::Exact;
        assert!(c.prepare().is_ok());
    }

    #[test]
    fn validation_fields() {
        let field_of = |c: ExperimentConfig| match c.prepare() {
            Err(ExperimentError::Config { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        };
        let mut c = quadratic_config();
        c.seeds.clear();
        assert_eq!(field_of(c), "seeds");
        let mut c = quadratic_config();
        c.iterations = 0;
        assert_eq!(field_of(c), "iterations");
        let mut c = quadratic_config();
        c.runs = vec![run("K", Algorithm::Klmc)];
        assert_eq!(field_of(c), "runs[0].friction");
        let mut c = quadratic_config();
        c.runs = vec![run("R", Algorithm::RsLmc)];
        assert_eq!(field_of(c), "runs[0].regime");
        let mut c = quadratic_config();
        c.runs[0].regime = Some(RegimeConfig::named("wide_multipliers", "missing"));
        c.runs[0].algorithm = Algorithm::RsLmc;
        assert_eq!(field_of(c), "runs[0].regime.generator");
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = quadratic_config();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.stepsize = 0.2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn runs_are_deterministic() {
        let c = quadratic_config();
        let a = run_experiment(&c, &RunOptions::default()).unwrap();
        let b = run_experiment(&c, &RunOptions::default()).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.summary[0].values.len(), 50);
    }

    #[test]
    fn theory_config_requires_m() {
        let text = r#"{"M": 4, "d": 3, "overdamped": {"values": [1.0], "generator": [[0.0]]},
            "kinetic": {"values": [1.0], "generator": [[0.0]]}, "friction": 1.5,
            "frictional": {"values": [3.0], "generator": [[0.0]]}}"#;
        match TheoryConfig::from_json(text).unwrap().table() {
            Err(ExperimentError::Config { field, .. }) => assert_eq!(field, "m"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("RS-LMC wide slow_a"), "rs_lmc_wide_slow_a");
    }
}
