//! Evaluation configuration, read from a TOML document.
//!
//! ```toml
//! protocols = ["aave", "compound", "liquity"]
//! start = "2022-01-03"
//! end = "2022-03-28"
//! granularity = "week"
//!
//! [weights]
//! criteria = [1, 1, 1]                          # user weights...
//! decentralization = [[1, 3, 5], [0.3333333333333333, 1, 2], [0.2, 0.5, 1]]  # ...or judgments
//!
//! [directions]
//! ps_ratio = "negative"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ahp::{EigenSettings, PairwiseMatrix, DEFAULT_SCORE_FLOOR, MAX_DIM};
use crate::error::EvalError;
use crate::indicators::{Criterion, Direction, Directions, IndicatorId};
use crate::ledger::DEFAULT_DUST_THRESHOLD_USD;
use crate::metrics::DEFAULT_STALENESS_DAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Day,
    Week,
    HalfMonth,
    Month,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [Granularity::Day, Granularity::Week, Granularity::HalfMonth, Granularity::Month];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Day => "day",
            Granularity::Week => "week",
            Granularity::HalfMonth => "half_month",
            Granularity::Month => "month",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Granularity::ALL
            .into_iter()
            .find(|g| g.as_str() == norm)
            .ok_or_else(|| format!("unknown granularity {s:?} (day, week, half_month, month)"))
    }
}

/// One level of the weight hierarchy: either plain user weights or a full
/// judgment matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelWeights {
    Weights(Vec<f64>),
    Judgments(Vec<Vec<f64>>),
}

impl LevelWeights {
    pub fn uniform(n: usize) -> Self {
        LevelWeights::Weights(vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        match self {
            LevelWeights::Weights(w) => w.len(),
            LevelWeights::Judgments(rows) => rows.len(),
        }
    }

    pub fn to_matrix(&self) -> Result<PairwiseMatrix, crate::ahp::AhpError> {
        match self {
            LevelWeights::Weights(w) => PairwiseMatrix::from_weights(w),
            LevelWeights::Judgments(rows) => PairwiseMatrix::from_judgments(rows),
        }
    }

    /// Multiplies plain weights by `k`; judgment matrices are unchanged.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            LevelWeights::Weights(w) => LevelWeights::Weights(w.iter().map(|x| x * k).collect()),
            other => other.clone(),
        }
    }
}

/// User weights for the criterion level and each criterion's indicators.
/// Every level defaults to all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub criteria: LevelWeights,
    pub market_share: LevelWeights,
    pub valuation: LevelWeights,
    pub decentralization: LevelWeights,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            criteria: LevelWeights::uniform(3),
            market_share: LevelWeights::uniform(4),
            valuation: LevelWeights::uniform(3),
            decentralization: LevelWeights::uniform(3),
        }
    }
}

impl WeightConfig {
    pub fn level(&self, criterion: Criterion) -> &LevelWeights {
        match criterion {
            Criterion::MarketShare => &self.market_share,
            Criterion::Valuation => &self.valuation,
            Criterion::Decentralization => &self.decentralization,
        }
    }

    pub fn level_mut(&mut self, criterion: Criterion) -> &mut LevelWeights {
        match criterion {
            Criterion::MarketShare => &mut self.market_share,
            Criterion::Valuation => &mut self.valuation,
            Criterion::Decentralization => &mut self.decentralization,
        }
    }

    /// Checks dimensions and builds every matrix once, so bad weights fail
    /// before any data is touched.
    pub fn validate(&self) -> Result<(), EvalError> {
        let levels = std::iter::once(("criteria", &self.criteria, Criterion::ALL.len()))
            .chain(Criterion::ALL.iter().map(|c| (c.as_str(), self.level(*c), c.indicators().len())));
        for (name, level, expected) in levels {
            if level.dim() != expected {
                return Err(EvalError::Config(format!(
                    "weights.{name} has {} entries, expected {expected}",
                    level.dim()
                )));
            }
            level.to_matrix().map_err(|source| EvalError::Weights { level: name.to_string(), source })?;
        }
        Ok(())
    }
}

/// Source files for `ingest`, relative to the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsConfig {
    #[serde(default)]
    pub registry: Option<PathBuf>,
    pub metrics: PathBuf,
    #[serde(default)]
    pub classifications: Option<PathBuf>,
    /// Protocol name → transfer CSV of its token.
    #[serde(default)]
    pub transfers: BTreeMap<String, PathBuf>,
}

impl InputsConfig {
    pub fn resolved(&self, base: &Path) -> Self {
        let join = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            registry: self.registry.as_ref().map(join),
            metrics: join(&self.metrics),
            classifications: self.classifications.as_ref().map(join),
            transfers: self.transfers.iter().map(|(k, v)| (k.clone(), join(v))).collect(),
        }
    }
}

fn default_granularity() -> Granularity {
    Granularity::Week
}
fn default_dust() -> f64 {
    DEFAULT_DUST_THRESHOLD_USD
}
fn default_staleness() -> i64 {
    DEFAULT_STALENESS_DAYS
}
fn default_epsilon() -> f64 {
    DEFAULT_SCORE_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Protocols to rank; empty means every registered protocol.
    #[serde(default)]
    pub protocols: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    #[serde(default = "default_granularity")]
    pub granularity: Granularity,
    #[serde(default)]
    pub weights: WeightConfig,
    /// Indicator (code or name) → direction.
    #[serde(default)]
    pub directions: BTreeMap<String, Direction>,
    #[serde(default = "default_dust")]
    pub dust_threshold_usd: f64,
    #[serde(default = "default_staleness")]
    pub staleness_days: i64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub eigen: EigenSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputsConfig>,
}

impl EvaluationConfig {
    pub fn new(start: NaiveDate, end: NaiveDate, granularity: Granularity) -> Self {
        Self {
            protocols: Vec::new(),
            start,
            end,
            granularity,
            weights: WeightConfig::default(),
            directions: BTreeMap::new(),
            dust_threshold_usd: DEFAULT_DUST_THRESHOLD_USD,
            staleness_days: DEFAULT_STALENESS_DAYS,
            epsilon: DEFAULT_SCORE_FLOOR,
            eigen: EigenSettings::default(),
            inputs: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let config: Self = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.end < self.start {
            return Err(EvalError::EmptyRange { start: self.start, end: self.end });
        }
        if self.protocols.len() > MAX_DIM {
            return Err(EvalError::Config(format!(
                "{} protocols configured; at most {MAX_DIM} can be compared",
                self.protocols.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.protocols {
            if !seen.insert(p) {
                return Err(EvalError::Config(format!("protocol {p} listed twice")));
            }
        }
        self.weights.validate()?;
        self.direction_overrides()?;
        if !(self.dust_threshold_usd >= 0.0 && self.dust_threshold_usd.is_finite()) {
            return Err(EvalError::Config("dust_threshold_usd must be a nonnegative number".into()));
        }
        if self.staleness_days < 0 {
            return Err(EvalError::Config("staleness_days must be nonnegative".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(EvalError::Config("epsilon must be positive".into()));
        }
        if self.eigen.tol.is_nan() || self.eigen.tol <= 0.0 || self.eigen.max_iter == 0 {
            return Err(EvalError::Config("eigen.tol and eigen.max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn direction_overrides(&self) -> Result<Directions, EvalError> {
        let mut map = BTreeMap::new();
        for (key, dir) in &self.directions {
            let id: IndicatorId = key.parse().map_err(EvalError::Config)?;
            map.insert(id, *dir);
        }
        Ok(Directions::with_overrides(map))
    }

    /// SHA-256 over the canonical JSON form, ignoring input file locations.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.inputs = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "start = \"2022-01-01\"\nend = \"2022-01-31\"\n";

    #[test]
    fn defaults() {
        let c = EvaluationConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.granularity, Granularity::Week);
        assert_eq!(c.weights, WeightConfig::default());
        assert_eq!(c.dust_threshold_usd, 10.0);
        assert_eq!(c.staleness_days, 7);
        assert_eq!(c.eigen, EigenSettings { tol: 1e-10, max_iter: 10_000 });
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}colour = \"red\"\n");
        assert!(matches!(EvaluationConfig::from_toml(&text), Err(EvalError::Config(_))));
        let text = format!("{MINIMAL}[weights]\nrisk = [1]\n");
        assert!(matches!(EvaluationConfig::from_toml(&text), Err(EvalError::Config(_))));
    }

    #[test]
    fn end_before_start() {
        let text = "start = \"2022-02-01\"\nend = \"2022-01-01\"\n";
        assert!(matches!(EvaluationConfig::from_toml(text), Err(EvalError::EmptyRange { .. })));
    }

    #[test]
    fn zero_weight() {
        let text = format!("{MINIMAL}[weights]\ncriteria = [1, 0, 1]\n");
        match EvaluationConfig::from_toml(&text) {
            Err(EvalError::Weights { level, source: crate::ahp::AhpError::NonPositiveWeight { index: 1, .. } }) => {
                assert_eq!(level, "criteria")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn judgments_and_directions() {
        let text = format!(
            "{MINIMAL}[weights]\ndecentralization = [[1, 3, 5], [0.3333333333333333, 1, 2], [0.2, 0.5, 1]]\n\
             [directions]\nps_ratio = \"negative\"\nI32 = \"positive\"\n"
        );
        let c = EvaluationConfig::from_toml(&text).unwrap();
        assert!(matches!(c.weights.decentralization, LevelWeights::Judgments(_)));
        let d = c.direction_overrides().unwrap();
        assert_eq!(d.get(IndicatorId::PsRatio), Direction::Negative);

        let bad = format!("{MINIMAL}[weights]\nvaluation = [[1, 2.5, 1], [0.4, 1, 1], [1, 1, 1]]\n");
        assert!(matches!(EvaluationConfig::from_toml(&bad), Err(EvalError::Weights { .. })));
        let wrong_dim = format!("{MINIMAL}[weights]\nvaluation = [1, 1]\n");
        assert!(matches!(EvaluationConfig::from_toml(&wrong_dim), Err(EvalError::Config(_))));
    }

    #[test]
    fn hash_ignores_inputs() {
        let a = EvaluationConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.inputs = Some(InputsConfig {
            registry: None,
            metrics: "m.csv".into(),
            classifications: None,
            transfers: BTreeMap::new(),
        });
        assert_eq!(a.hash(), b.hash());
        b.staleness_days = 3;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn granularity_names() {
        assert_eq!("half-month".parse::<Granularity>().unwrap(), Granularity::HalfMonth);
        assert!("year".parse::<Granularity>().is_err());
    }
}
