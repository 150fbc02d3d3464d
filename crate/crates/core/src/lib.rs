//! Evaluation and ranking of DeFi lending protocols.
//!
//! Token-holder distributions are rebuilt from transfer logs, combined with
//! off-chain metric series into ten indicators under three criteria (market
//! share, valuation, decentralization), and ranked over time with a
//! four-layer analytic hierarchy: goal, criteria, indicators, protocols.
//!
//! - [`ahp`]: pairwise matrices, eigenvector weights, consistency checks.
//! - [`ledger`]: transfer log ingestion, balance replay, holder filtering.
//! - [`indicators`]: Gini / Nakamoto / top-10, valuation ratios, normalization.
//! - [`metrics`]: metric series loading and carried-forward lookup.
//! - [`evaluator`]: per-date pipeline, series evaluation, ranks.
//! - [`store`]: run manifests, line-delimited report files, what-if.

pub mod ahp;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluator;
pub mod indicators;
pub mod ledger;
pub mod metrics;
pub mod store;

pub use ahp::{EigenResult, EigenSettings, Hierarchy, PairwiseMatrix};
pub use config::{EvaluationConfig, Granularity, LevelWeights, WeightConfig};
pub use error::EvalError;
pub use evaluator::{evaluate_at, evaluate_series, EvaluationData, RankSeries, ScoreReport};
pub use indicators::{Criterion, IndicatorId};
