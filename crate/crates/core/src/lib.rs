//! Mean squared hedging error of Δ-strategies for European claims under
//! exponential Lévy models, computed from a double integral along the
//! payoff's Laplace integration line, plus a Monte Carlo cross-check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Kronrod nodes and weights are kept digit for digit as published.
#![allow(clippy::excessive_precision)]

pub mod black_scholes;
pub mod error;
pub mod error_engine;
pub mod mc_oracle;
pub mod mix;
pub mod models;
pub mod payoff;
pub mod quadrature;
pub mod strategies;

pub use error::{Error, Result};
pub use error_engine::{hedging_error, HedgingErrorReport, HedgingProblem};
pub use models::{LevyModel, ModelKind};
pub use payoff::PayoffTransform;
pub use quadrature::QuadConfig;
pub use strategies::{DeltaStrategy, StrategyLabel};
