use chrono::NaiveDate;
use thiserror::Error;

use crate::ahp::AhpError;
use crate::ledger::LedgerError;
use crate::metrics::MetricsError;

/// Errors from configuration, evaluation and the report store.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty date range {start}..={end}")]
    EmptyRange { start: NaiveDate, end: NaiveDate },
    #[error("config: {0}")]
    Config(String),
    #[error("weights.{level}: {source}")]
    Weights { level: String, source: AhpError },
    #[error("unknown protocol {0}")]
    UnknownProtocol(String),
    #[error("no protocol has data on {0}")]
    NoProtocolHasData(NaiveDate),
    #[error("every sample date failed")]
    AllDatesFailed,
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("run {run} has no {granularity} report")]
    MissingGranularity { run: String, granularity: String },
    #[error("corrupt report store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Ahp(#[from] AhpError),
    #[error("{protocol}: {source}")]
    Ledger { protocol: String, source: LedgerError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl EvalError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::EmptyRange { .. } => "EmptyRange",
            EvalError::Config(_) => "ConfigError",
            EvalError::Weights { source, .. } | EvalError::Ahp(source) => ahp_code(source),
            EvalError::UnknownProtocol(_) => "UnknownProtocol",
            EvalError::NoProtocolHasData(_) => "NoProtocolHasData",
            EvalError::AllDatesFailed => "AllDatesFailed",
            EvalError::UnknownRun(_) => "UnknownRun",
            EvalError::MissingGranularity { .. } => "MissingGranularity",
            EvalError::Corrupt(_) => "CorruptStore",
            EvalError::Ledger { source, .. } => match source {
                LedgerError::Schema { .. } => "SchemaError",
                LedgerError::Parse { .. } => "ParseError",
                LedgerError::NegativeBalance { .. } => "NegativeBalance",
                _ => "LedgerError",
            },
            EvalError::Metrics(e) => match e {
                MetricsError::Schema { .. } => "SchemaError",
                MetricsError::DuplicateDate { .. } => "DuplicateDate",
                MetricsError::NegativeValue { .. } => "NegativeValue",
                _ => "ParseError",
            },
            EvalError::Io { .. } => "IoError",
        }
    }
}

pub fn ahp_code(e: &AhpError) -> &'static str {
    match e {
        AhpError::DimensionOutOfRange { .. } => "DimensionOutOfRange",
        AhpError::NonPositiveWeight { .. } => "NonPositiveWeight",
        AhpError::InvalidScore { .. } => "InvalidScore",
        AhpError::NotSquare { .. } => "NotSquare",
        AhpError::DiagonalNotOne { .. } => "DiagonalNotOne",
        AhpError::NotSaatyValue { .. } => "NotSaatyValue",
        AhpError::NotReciprocal { .. } => "NotReciprocal",
        AhpError::LengthMismatch { .. } => "LengthMismatch",
        AhpError::NotConverged { .. } => "NotConverged",
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.display().to_string(), source }
}
