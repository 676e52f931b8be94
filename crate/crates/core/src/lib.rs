//! Regime-switching Langevin Monte Carlo: samplers, the Markov-chain
//! machinery behind regime switching, convergence-bound evaluators, metrics,
//! data generation and the bundled experiment harness.

pub mod ctmc;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod samplers;
pub mod theory;
