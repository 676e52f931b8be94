//! Finite-state continuous-time Markov chains that drive regime switching:
//! generator validation, stationary laws, first-order and exact transition
//! kernels, path simulation, and Feynman–Kac survival functionals.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, Matrix, NumericsError, RngStream};

const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtmcError {
    #[error("generator entry ({row}, {col}) = {value} is a negative off-diagonal rate")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("generator row {row} sums to {sum}, not 0")]
    RowSumNonzero { row: usize, sum: f64 },
    #[error("generator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("generator is empty")]
    Empty,
    #[error("generator is not irreducible: state {0} cannot reach or be reached from state 0")]
    NotIrreducible(usize),
    #[error("stepsize too large: exit rate of state {state} times eta is {product} > 1")]
    StepsizeTooLarge { state: usize, product: f64 },
    #[error("stationary distribution solve is singular")]
    SingularSolve,
    #[error("regime value {index} = {value} must be positive and finite")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("initial law: {0}")]
    InvalidLaw(NumericsError),
    #[error("initial state {state} out of range for {n} regimes")]
    StateOutOfRange { state: usize, n: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Validated transition-rate matrix: nonnegative off-diagonal rates, zero
/// row sums, strongly connected jump graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct GeneratorMatrix {
    q: Matrix,
}

impl TryFrom<Matrix> for GeneratorMatrix {
    type Error = CtmcError;

    fn try_from(q: Matrix) -> Result<Self, Self::Error> {
        validate_generator(q)
    }
}

impl From<GeneratorMatrix> for Matrix {
    fn from(g: GeneratorMatrix) -> Matrix {
        g.q
    }
}

impl GeneratorMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CtmcError> {
        validate_generator(Matrix::try_from_rows(rows)?)
    }

    /// Single absorbing state.
    pub fn trivial() -> Self {
        GeneratorMatrix { q: Matrix::zeros(1, 1) }
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    /// Total exit rate q_i = −q_ii.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[(i, i)]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.dim()).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    /// `Q − c·diag(values)`.
    pub fn tilted(&self, c: f64, values: &[f64]) -> Matrix {
        assert_eq!(values.len(), self.dim(), "one value per regime");
        let mut m = self.q.clone();
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] -= c * v;
        }
        m
    }

    pub fn spectrum(&self) -> Result<numerics::ComplexSpectrum, CtmcError> {
        Ok(numerics::eigenvalues(&self.q)?)
    }

    /// Distance from the zero eigenvalue to the rest of the spectrum,
    /// −max Re λ over the nonzero eigenvalues; 0 for a single state.
    pub fn spectral_gap(&self) -> Result<f64, CtmcError> {
        let sorted = self.spectrum()?.sorted_by_real_desc();
        Ok(sorted.get(1).map_or(0.0, |e| -e.0))
    }
}

/// Checks the generator conditions, reporting the first violation row by row.
pub fn validate_generator(q: Matrix) -> Result<GeneratorMatrix, CtmcError> {
    q.check_finite()?;
    if q.rows() == 0 {
        return Err(CtmcError::Empty);
    }
    for i in 0..q.rows() {
        let row = q.row(i);
        for (j, &value) in row.iter().enumerate() {
            if j != i && value < 0.0 {
                return Err(CtmcError::NegativeOffDiagonal { row: i, col: j, value });
            }
        }
        let sum: f64 = row.iter().sum();
        let scale = row.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if sum.abs() > ROW_SUM_TOL * scale {
            return Err(CtmcError::RowSumNonzero { row: i, sum });
        }
    }
    if !q.is_square() {
        return Err(CtmcError::NotSquare { rows: q.rows(), cols: q.cols() });
    }
    let n = q.rows();
    let forward = reachable_from_zero(n, |i, j| q[(i, j)] > 0.0);
    let backward = reachable_from_zero(n, |i, j| q[(j, i)] > 0.0);
    if let Some(state) = (0..n).find(|&i| !forward[i] || !backward[i]) {
        return Err(CtmcError::NotIrreducible(state));
    }
    Ok(GeneratorMatrix { q })
}

fn reachable_from_zero(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if j != i && !seen[j] && edge(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Unique probability row ψ with ψQ = 0.
pub fn stationary_distribution(g: &GeneratorMatrix) -> Result<Vec<f64>, CtmcError> {
    let n = g.dim();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // Qᵀψ = 0 with the last equation replaced by Σψ = 1
    let mut a = g.q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut psi = a.solve(&rhs).map_err(|_| CtmcError::SingularSolve)?;
    // one step of iterative refinement
    let residual: Vec<f64> = a.matvec(&psi).iter().zip(&rhs).map(|(ax, b)| b - ax).collect();
    let correction = a.solve(&residual).map_err(|_| CtmcError::SingularSolve)?;
    for (p, c) in psi.iter_mut().zip(correction) {
        *p += c;
    }
    Ok(psi)
}

/// First-order kernel P(η) = I + ηQ.
pub fn discrete_kernel(g: &GeneratorMatrix, eta: f64) -> Result<Matrix, CtmcError> {
    assert!(eta > 0.0, "stepsize must be positive");
    let n = g.dim();
    for i in 0..n {
        let product = g.exit_rate(i) * eta;
        if product > 1.0 {
            return Err(CtmcError::StepsizeTooLarge { state: i, product });
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - g.exit_rate(i) * eta
        } else {
            g.rate(i, j) * eta
        }
    }))
}

/// Exact transition matrix e^{Qη}.
pub fn exact_kernel(g: &GeneratorMatrix, eta: f64) -> Result<Matrix, CtmcError> {
    Ok(numerics::matrix_exp(&g.q, eta)?)
}

/// Regime values paired with the chain that switches between them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    values: Vec<f64>,
    generator: GeneratorMatrix,
    initial_law: Vec<f64>,
}

impl RegimeSpec {
    pub fn new(values: Vec<f64>, generator: GeneratorMatrix, initial_law: Vec<f64>) -> Result<Self, CtmcError> {
        let n = generator.dim();
        if values.len() != n {
            return Err(CtmcError::DimensionMismatch { expected: n, actual: values.len() });
        }
        if initial_law.len() != n {
            return Err(CtmcError::DimensionMismatch { expected: n, actual: initial_law.len() });
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(CtmcError::NonPositiveValue { index, value });
        }
        numerics::check_probability_row(&initial_law).map_err(CtmcError::InvalidLaw)?;
        Ok(RegimeSpec { values, generator, initial_law })
    }

    /// Regime started from the stationary law.
    pub fn stationary(values: Vec<f64>, generator: GeneratorMatrix) -> Result<Self, CtmcError> {
        let psi = stationary_distribution(&generator)?;
        Self::new(values, generator, psi)
    }

    /// Single regime with the given value.
    pub fn constant(value: f64) -> Result<Self, CtmcError> {
        Self::new(vec![value], GeneratorMatrix::trivial(), vec![1.0])
    }

    /// Same chain started deterministically in `state`.
    pub fn with_initial_state(mut self, state: usize) -> Result<Self, CtmcError> {
        let n = self.len();
        if state >= n {
            return Err(CtmcError::StateOutOfRange { state, n });
        }
        self.initial_law = vec![0.0; n];
        self.initial_law[state] = 1.0;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn initial_law(&self) -> &[f64] {
        &self.initial_law
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn reciprocal_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| 1.0 / v).collect()
    }

    pub fn value_matrix(&self) -> Matrix {
        Matrix::diag(&self.values)
    }

    pub fn stationary_law(&self) -> Result<Vec<f64>, CtmcError> {
        stationary_distribution(&self.generator)
    }
}

/// Piecewise-constant realisation of the chain on [0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath {
    pub jump_times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl ContinuousPath {
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k.saturating_sub(1)]
    }

    fn intervals(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.states.iter().enumerate().map(move |(k, &s)| {
            let end = self.jump_times.get(k + 1).copied().unwrap_or(self.horizon);
            (s, end - self.jump_times[k])
        })
    }

    /// Fraction of [0, horizon] spent in each of `n` states.
    pub fn occupation_fractions(&self, n: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        for (s, len) in self.intervals() {
            occ[s] += len;
        }
        occ.iter_mut().for_each(|o| *o /= self.horizon);
        occ
    }

    /// ∫₀^horizon values[state(s)] ds.
    pub fn integral(&self, values: &[f64]) -> f64 {
        self.intervals().map(|(s, len)| values[s] * len).sum()
    }

    /// Number of jumps (intervals minus one).
    pub fn jump_count(&self) -> usize {
        self.states.len() - 1
    }
}

/// Regime indices of a discrete-time chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteRegimeChain {
    pub indices: Vec<usize>,
}

impl DiscreteRegimeChain {
    pub fn frequencies(&self, n: usize) -> Vec<f64> {
        let mut counts = vec![0.0; n];
        for &i in &self.indices {
            counts[i] += 1.0;
        }
        let total = self.indices.len() as f64;
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }
}

fn check_kernel(p: &Matrix) -> Result<(), CtmcError> {
    if !p.is_square() {
        return Err(CtmcError::NotSquare { rows: p.rows(), cols: p.cols() });
    }
    for i in 0..p.rows() {
        numerics::check_probability_row(p.row(i))?;
    }
    Ok(())
}

/// K regime indices: the first from `initial_law`, each next from the row of
/// `p` indexed by the current state.
pub fn simulate_discrete_chain(
    p: &Matrix,
    initial_law: &[f64],
    steps: usize,
    rng: &mut RngStream,
) -> Result<DiscreteRegimeChain, CtmcError> {
    check_kernel(p)?;
    if initial_law.len() != p.rows() {
        return Err(CtmcError::DimensionMismatch { expected: p.rows(), actual: initial_law.len() });
    }
    let mut indices = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(DiscreteRegimeChain { indices });
    }
    let mut state = rng.sample_categorical(initial_law)?;
    indices.push(state);
    for _ in 1..steps {
        state = rng.categorical_unchecked(p.row(state));
        indices.push(state);
    }
    Ok(DiscreteRegimeChain { indices })
}

/// Exact path by exponential holding times and embedded jump chain,
/// truncated at `horizon`.
pub fn simulate_exact_path(
    g: &GeneratorMatrix,
    initial_law: &[f64],
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ContinuousPath, CtmcError> {
    assert!(horizon > 0.0, "horizon must be positive");
    let n = g.dim();
    if initial_law.len() != n {
        return Err(CtmcError::DimensionMismatch { expected: n, actual: initial_law.len() });
    }
    let jumps = JumpTable::new(g);
    let mut state = rng.sample_categorical(initial_law)?;
    let mut t = 0.0;
    let mut jump_times = vec![0.0];
    let mut states = vec![state];
    loop {
        let rate = g.exit_rate(state);
        if rate == 0.0 {
            break;
        }
        t += rng.exponential(rate);
        if t >= horizon {
            break;
        }
        state = jumps.next(state, rng);
        jump_times.push(t);
        states.push(state);
    }
    Ok(ContinuousPath { jump_times, states, horizon })
}

/// Embedded jump-chain rows q_ij / q_i.
struct JumpTable {
    rows: Vec<Vec<f64>>,
}

impl JumpTable {
    fn new(g: &GeneratorMatrix) -> Self {
        let n = g.dim();
        let rows = (0..n)
            .map(|i| {
                let rate = g.exit_rate(i);
                (0..n)
                    .map(|j| if j == i || rate == 0.0 { 0.0 } else { g.rate(i, j) / rate })
                    .collect()
            })
            .collect();
        JumpTable { rows }
    }

    fn next(&self, state: usize, rng: &mut RngStream) -> usize {
        rng.categorical_unchecked(&self.rows[state])
    }
}

/// α = −max Re λ(Q − c·diag(values)).
pub fn spectral_rate(g: &GeneratorMatrix, c: f64, values: &[f64]) -> Result<f64, CtmcError> {
    check_values(g, values)?;
    Ok(-numerics::eigenvalues(&g.tilted(c, values))?.max_real())
}

/// ψᵀ e^{(Q − c·diag(values))t} 𝟙, i.e. E[exp(−c∫₀ᵗ value(s) ds)] with the
/// chain started from ψ.
pub fn survival_functional(
    g: &GeneratorMatrix,
    values: &[f64],
    psi: &[f64],
    c: f64,
    t: f64,
) -> Result<f64, CtmcError> {
    check_values(g, values)?;
    if psi.len() != g.dim() {
        return Err(CtmcError::DimensionMismatch { expected: g.dim(), actual: psi.len() });
    }
    let e = numerics::matrix_exp(&g.tilted(c, values), t)?;
    let ones = vec![1.0; g.dim()];
    Ok(psi.iter().zip(e.matvec(&ones)).map(|(p, u)| p * u).sum())
}

fn check_values(g: &GeneratorMatrix, values: &[f64]) -> Result<(), CtmcError> {
    if values.len() != g.dim() {
        return Err(CtmcError::DimensionMismatch { expected: g.dim(), actual: values.len() });
    }
    Ok(())
}

/// ½ Σ|p − q|.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Generators and regime value sets used by the bundled experiments.
pub mod presets {
    use super::GeneratorMatrix;

    /// Slowly switching five-state generator, first variant.
    pub const SLOW_A: [[f64; 5]; 5] = [
        [-0.6, 0.2, 0.2, 0.1, 0.1],
        [0.1, -0.5, 0.2, 0.1, 0.1],
        [0.1, 0.1, -0.5, 0.2, 0.1],
        [0.1, 0.1, 0.2, -0.6, 0.2],
        [0.1, 0.1, 0.2, 0.2, -0.6],
    ];

    /// Slowly switching five-state generator, second variant.
    pub const SLOW_B: [[f64; 5]; 5] = [
        [-0.5, 0.2, 0.1, 0.1, 0.1],
        [0.1, -0.5, 0.2, 0.1, 0.1],
        [0.1, 0.1, -0.6, 0.2, 0.2],
        [0.1, 0.1, 0.2, -0.7, 0.3],
        [0.1, 0.1, 0.2, 0.3, -0.7],
    ];

    /// Fast uniform switching, five states (rates 8, spectral gap 40).
    pub const FAST_5: [[f64; 5]; 5] = [
        [-32.0, 8.0, 8.0, 8.0, 8.0],
        [8.0, -32.0, 8.0, 8.0, 8.0],
        [8.0, 8.0, -32.0, 8.0, 8.0],
        [8.0, 8.0, 8.0, -32.0, 8.0],
        [8.0, 8.0, 8.0, 8.0, -32.0],
    ];

    /// Fast uniform switching, four states (rates 12, spectral gap 48).
    pub const FAST_4: [[f64; 4]; 4] = [
        [-36.0, 12.0, 12.0, 12.0],
        [12.0, -36.0, 12.0, 12.0],
        [12.0, 12.0, -36.0, 12.0],
        [12.0, 12.0, 12.0, -36.0],
    ];

    /// Four-state generator for the friction regimes of the logistic runs.
    pub const LOGISTIC_FRICTION: [[f64; 4]; 4] = [
        [-0.6, 0.2, 0.2, 0.2],
        [0.1, -0.5, 0.2, 0.2],
        [0.1, 0.1, -0.5, 0.3],
        [0.1, 0.1, 0.3, -0.5],
    ];

    /// The multiplier generator of the logistic runs as printed in the
    /// source: 4×5, positive first diagonal, a negative off-diagonal. Kept
    /// only to exercise validation.
    pub const LOGISTIC_MULTIPLIER_PRINTED: [[f64; 5]; 4] = [
        [0.6, 0.2, 0.2, 0.1, 0.1],
        [0.1, -0.5, 0.2, 0.1, 0.1],
        [0.1, -0.5, 0.2, 0.1, 0.1],
        [0.1, 0.1, 0.2, 0.2, -0.6],
    ];

    /// Repair of [`LOGISTIC_MULTIPLIER_PRINTED`]: first diagonal negated,
    /// duplicated row restored, completed to a square generator. It
    /// coincides with [`SLOW_A`].
    pub const LOGISTIC_MULTIPLIER: [[f64; 5]; 5] = SLOW_A;

    pub const NARROW_MULTIPLIERS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
    pub const WIDE_MULTIPLIERS: [f64; 5] = [0.1, 1.0, 1.8, 2.6, 4.0];
    /// Multipliers centred on 1 used by the kinetic experiments.
    pub const CENTERED_MULTIPLIERS: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];
    pub const LOW_FRICTIONS: [f64; 4] = [0.05, 0.08, 0.1, 0.12];
    pub const HIGH_FRICTIONS: [f64; 4] = [8.0, 10.0, 12.0, 16.0];
    /// Fixed friction of the kinetic linear-regression runs.
    pub const KINETIC_FRICTION: f64 = 1.5;
    /// Fixed friction of the stochastic-gradient kinetic runs.
    pub const SG_FRICTION: f64 = 0.65;
    /// Frictions concentrated around [`SG_FRICTION`].
    pub const SG_FRICTIONS: [f64; 4] = [0.55, 0.6, 0.7, 0.75];

    pub fn generator<const N: usize>(rows: &[[f64; N]]) -> GeneratorMatrix {
        GeneratorMatrix::from_rows(rows).expect("preset generator is valid")
    }
}
