//! The ten second-level indicators, their directions, and per-date
//! normalization into comparable scores.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Address, FilteredSnapshot};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndicatorError {
    #[error("distribution has no positive balance")]
    EmptyDistribution,
    #[error("indicator column {0} has no data")]
    AllMissing(IndicatorId),
}

/// First-level criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MarketShare,
    Valuation,
    Decentralization,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::MarketShare, Criterion::Valuation, Criterion::Decentralization];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::MarketShare => "market_share",
            Criterion::Valuation => "valuation",
            Criterion::Decentralization => "decentralization",
        }
    }

    pub fn indicators(self) -> &'static [IndicatorId] {
        use IndicatorId::*;
        match self {
            Criterion::MarketShare => &[Mcap, Borrow, Revenue, Volume],
            Criterion::Valuation => &[PsRatio, CapitalEfficiency, McapOverTvl],
            Criterion::Decentralization => &[Gini, Nakamoto, Top10],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Higher raw value is better.
    Positive,
    /// Lower raw value is better.
    Negative,
}

/// Second-level indicators, in hierarchy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorId {
    Mcap,
    Borrow,
    Revenue,
    Volume,
    PsRatio,
    CapitalEfficiency,
    McapOverTvl,
    Gini,
    Nakamoto,
    Top10,
}

impl IndicatorId {
    pub const ALL: [IndicatorId; 10] = [
        IndicatorId::Mcap,
        IndicatorId::Borrow,
        IndicatorId::Revenue,
        IndicatorId::Volume,
        IndicatorId::PsRatio,
        IndicatorId::CapitalEfficiency,
        IndicatorId::McapOverTvl,
        IndicatorId::Gini,
        IndicatorId::Nakamoto,
        IndicatorId::Top10,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        use IndicatorId::*;
        match self {
            Mcap => "I11",
            Borrow => "I12",
            Revenue => "I13",
            Volume => "I14",
            PsRatio => "I21",
            CapitalEfficiency => "I22",
            McapOverTvl => "I23",
            Gini => "I31",
            Nakamoto => "I32",
            Top10 => "I33",
        }
    }

    pub fn name(self) -> &'static str {
        use IndicatorId::*;
        match self {
            Mcap => "mcap",
            Borrow => "borrow",
            Revenue => "revenue",
            Volume => "volume",
            PsRatio => "ps_ratio",
            CapitalEfficiency => "capital_efficiency",
            McapOverTvl => "mcap_over_tvl",
            Gini => "gini",
            Nakamoto => "nakamoto",
            Top10 => "top10",
        }
    }

    pub fn criterion(self) -> Criterion {
        use IndicatorId::*;
        match self {
            Mcap | Borrow | Revenue | Volume => Criterion::MarketShare,
            PsRatio | CapitalEfficiency | McapOverTvl => Criterion::Valuation,
            Gini | Nakamoto | Top10 => Criterion::Decentralization,
        }
    }

    pub fn default_direction(self) -> Direction {
        match self {
            IndicatorId::CapitalEfficiency | IndicatorId::Gini | IndicatorId::Top10 => Direction::Negative,
            _ => Direction::Positive,
        }
    }

    /// Indicators whose raw value lives in `[0, 1]`; these are reversed as
    /// `1 − x`, the rest by reciprocal.
    pub fn is_unit_bounded(self) -> bool {
        matches!(self, IndicatorId::Gini | IndicatorId::Top10)
    }
}

impl fmt::Display for IndicatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for IndicatorId {
    type Err = String;

    /// Accepts either the code (`I31`) or the name (`gini`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IndicatorId::ALL
            .into_iter()
            .find(|i| i.code().eq_ignore_ascii_case(s) || i.name() == s)
            .ok_or_else(|| format!("unknown indicator {s:?}"))
    }
}

/// Directions for all ten indicators, defaults plus overrides.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Directions {
    overrides: BTreeMap<IndicatorId, Direction>,
}

impl Directions {
    pub fn with_overrides(overrides: BTreeMap<IndicatorId, Direction>) -> Self {
        Self { overrides }
    }

    pub fn get(&self, id: IndicatorId) -> Direction {
        self.overrides.get(&id).copied().unwrap_or_else(|| id.default_direction())
    }
}

fn positive_total(balances: &[u128]) -> Result<u128, IndicatorError> {
    let total: u128 = balances.iter().sum();
    if total == 0 {
        return Err(IndicatorError::EmptyDistribution);
    }
    Ok(total)
}

/// Population Gini coefficient `Σ_i Σ_j |b_i − b_j| / (2 n² μ)`, evaluated
/// with the sorted-rank identity in O(n log n).
pub fn gini(balances: &[u128]) -> Result<f64, IndicatorError> {
    let total = positive_total(balances)? as f64;
    let mut sorted: Vec<f64> = balances.iter().map(|&b| b as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(i, b)| (2.0 * (i as f64 + 1.0) - n - 1.0) * b).sum();
    Ok((weighted / (n * total)).max(0.0))
}

/// Fewest holders whose combined balance is strictly more than half.
pub fn nakamoto(balances: &[u128]) -> Result<usize, IndicatorError> {
    let total = positive_total(balances)?;
    let mut sorted = balances.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut prefix = 0u128;
    for (k, b) in sorted.iter().enumerate() {
        prefix += b;
        if prefix > total - prefix {
            return Ok(k + 1);
        }
    }
    unreachable!("the full prefix always exceeds half of a positive total")
}

/// Share of supply held by the ten largest balances.
pub fn top10_share(balances: &[u128]) -> Result<f64, IndicatorError> {
    let total = positive_total(balances)?;
    let mut sorted = balances.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let top: u128 = sorted.iter().take(10).sum();
    Ok(top as f64 / total as f64)
}

/// Concentration statistics of one filtered holder set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionMetrics {
    pub holders: usize,
    pub gini: f64,
    pub nakamoto: usize,
    pub top10_share: f64,
    /// The ten largest holders, descending, ties by address ascending.
    pub top10: Vec<(Address, u128)>,
}

impl DistributionMetrics {
    pub fn from_snapshot(snap: &FilteredSnapshot) -> Result<Self, IndicatorError> {
        let balances = snap.balances();
        let mut ranked: Vec<(Address, u128)> = snap.holders.iter().map(|(a, b)| (*a, *b)).collect();
        ranked.sort_by(|(a1, b1), (a2, b2)| b2.cmp(b1).then(a1.cmp(a2)));
        ranked.truncate(10);
        Ok(Self {
            holders: balances.len(),
            gini: gini(&balances)?,
            nakamoto: nakamoto(&balances)?,
            top10_share: top10_share(&balances)?,
            top10: ranked,
        })
    }
}

/// Metric values a protocol's valuation indicators are built from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValuationInputs {
    pub fdv: Option<f64>,
    pub annualized_revenue: Option<f64>,
    pub revenue: Option<f64>,
    pub tvl: Option<f64>,
    pub mcap: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValuationRaw {
    pub ps_ratio: Option<f64>,
    pub capital_efficiency: Option<f64>,
    pub mcap_over_tvl: Option<f64>,
}

impl ValuationRaw {
    /// At most 1 suggests the token may be underestimated.
    pub fn possibly_undervalued(&self) -> Option<bool> {
        self.mcap_over_tvl.map(|r| r <= 1.0)
    }
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d > 0.0 => Some(n / d),
        _ => None,
    }
}

/// PS ratio, capital efficiency (TVL over daily revenue) and market cap over
/// TVL. Zero or absent denominators give missing values.
pub fn valuation_raw(m: &ValuationInputs) -> ValuationRaw {
    ValuationRaw {
        ps_ratio: ratio(m.fdv, m.annualized_revenue),
        capital_efficiency: ratio(m.tvl, m.revenue),
        mcap_over_tvl: ratio(m.mcap, m.tvl),
    }
}

/// Maps a raw value so that higher is always better.
pub fn direction_adjust(raw: f64, id: IndicatorId, direction: Direction, epsilon: f64) -> f64 {
    match direction {
        Direction::Positive => raw,
        Direction::Negative if id.is_unit_bounded() => 1.0 - raw,
        Direction::Negative => 1.0 / raw.max(epsilon),
    }
}

/// Share normalization over the present entries. Values are floored at
/// `epsilon` first, matching the scheme-layer matrix construction.
pub fn normalize_column(
    id: IndicatorId,
    column: &[Option<f64>],
    epsilon: f64,
) -> Result<Vec<Option<f64>>, IndicatorError> {
    let total: f64 = column.iter().flatten().map(|v| v.max(epsilon)).sum();
    if column.iter().all(Option::is_none) {
        return Err(IndicatorError::AllMissing(id));
    }
    Ok(column.iter().map(|v| v.map(|v| v.max(epsilon) / total)).collect())
}

pub type IndicatorRow = [Option<f64>; 10];

/// Raw, adjusted and normalized indicator values for every protocol at one
/// sample date.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPanel {
    pub as_of: NaiveDate,
    pub protocols: Vec<String>,
    pub raw: Vec<IndicatorRow>,
    pub adjusted: Vec<IndicatorRow>,
    pub scores: Vec<IndicatorRow>,
    /// Indicators for which no protocol has data.
    pub all_missing: Vec<IndicatorId>,
}

impl IndicatorPanel {
    pub fn build(
        as_of: NaiveDate,
        protocols: Vec<String>,
        raw: Vec<IndicatorRow>,
        directions: &Directions,
        epsilon: f64,
    ) -> Self {
        assert_eq!(protocols.len(), raw.len(), "one raw row per protocol");
        let adjusted: Vec<IndicatorRow> = raw
            .iter()
            .map(|row| {
                let mut out = [None; 10];
                for id in IndicatorId::ALL {
                    out[id.index()] = row[id.index()].map(|v| direction_adjust(v, id, directions.get(id), epsilon));
                }
                out
            })
            .collect();
        let mut scores = vec![[None; 10]; raw.len()];
        let mut all_missing = Vec::new();
        for id in IndicatorId::ALL {
            let column: Vec<Option<f64>> = adjusted.iter().map(|row| row[id.index()]).collect();
            match normalize_column(id, &column, epsilon) {
                Ok(normalized) => {
                    for (row, v) in scores.iter_mut().zip(normalized) {
                        row[id.index()] = v;
                    }
                }
                Err(_) => all_missing.push(id),
            }
        }
        Self { as_of, protocols, raw, adjusted, scores, all_missing }
    }

    pub fn column(&self, id: IndicatorId) -> Vec<Option<f64>> {
        self.scores.iter().map(|row| row[id.index()]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_gini(b: &[u128]) -> f64 {
        let n = b.len() as f64;
        let mean = b.iter().sum::<u128>() as f64 / n;
        let mut acc = 0.0;
        for &x in b {
            for &y in b {
                acc += (x as f64 - y as f64).abs();
            }
        }
        acc / (2.0 * n * n * mean)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[1, 1, 1, 1]).unwrap(), 0.0);
        assert!((gini(&[0, 0, 0, 100]).unwrap() - 0.75).abs() < 1e-15);
        // Brute force: 200 / 800.
        assert!((brute_gini(&[10, 20, 30, 40]) - 0.25).abs() < 1e-15);
        assert!((gini(&[10, 20, 30, 40]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(gini(&[7]).unwrap(), 0.0);
        assert_eq!(gini(&[]), Err(IndicatorError::EmptyDistribution));
        assert_eq!(gini(&[0, 0]), Err(IndicatorError::EmptyDistribution));
    }

    #[test]
    fn nakamoto_examples() {
        assert_eq!(nakamoto(&[60, 30, 10]).unwrap(), 1);
        assert_eq!(nakamoto(&[50, 30, 20]).unwrap(), 2);
        assert_eq!(nakamoto(&[25, 25, 25, 25]).unwrap(), 3);
        assert_eq!(nakamoto(&[10, 30, 60]).unwrap(), 1);
        assert_eq!(nakamoto(&[]), Err(IndicatorError::EmptyDistribution));
    }

    #[test]
    fn top10_examples() {
        assert_eq!(top10_share(&[5, 4, 3, 2, 1]).unwrap(), 1.0);
        assert!((top10_share(&[1; 12]).unwrap() - 10.0 / 12.0).abs() < 1e-15);
        let mut v = vec![100u128];
        v.extend([1u128; 11]);
        assert!((top10_share(&v).unwrap() - 109.0 / 111.0).abs() < 1e-15);
    }

    #[test]
    fn valuation_examples() {
        let v = valuation_raw(&ValuationInputs {
            fdv: Some(100.0),
            annualized_revenue: Some(50.0),
            revenue: Some(25.0),
            tvl: Some(100.0),
            mcap: Some(80.0),
        });
        assert_eq!(v.ps_ratio, Some(2.0));
        assert_eq!(v.capital_efficiency, Some(4.0));
        assert_eq!(v.mcap_over_tvl, Some(0.8));
        assert_eq!(v.possibly_undervalued(), Some(true));

        let v = valuation_raw(&ValuationInputs { tvl: Some(0.0), mcap: Some(80.0), ..Default::default() });
        assert_eq!(v.mcap_over_tvl, None);
        assert_eq!(v.possibly_undervalued(), None);
    }

    #[test]
    fn direction_examples() {
        use IndicatorId::*;
        let eps = 1e-9;
        assert!((direction_adjust(0.9, Gini, Direction::Negative, eps) - 0.1).abs() < 1e-15);
        assert_eq!(direction_adjust(4.0, CapitalEfficiency, Direction::Negative, eps), 0.25);
        assert_eq!(direction_adjust(7e9, Borrow, Direction::Positive, eps), 7e9);
        assert!((direction_adjust(0.0, CapitalEfficiency, Direction::Negative, eps) - 1e9).abs() < 1e-6);
        let d = Directions::default();
        assert_eq!(d.get(PsRatio), Direction::Positive);
        assert_eq!(d.get(Top10), Direction::Negative);
        let d = Directions::with_overrides(BTreeMap::from([(PsRatio, Direction::Negative)]));
        assert_eq!(d.get(PsRatio), Direction::Negative);
    }

    #[test]
    fn normalize_examples() {
        let id = IndicatorId::Mcap;
        let got = normalize_column(id, &[Some(4.0), Some(3.0), Some(2.0), Some(1.0)], 1e-9).unwrap();
        for (g, w) in got.iter().zip([0.4, 0.3, 0.2, 0.1]) {
            assert!((g.unwrap() - w).abs() < 1e-15);
        }
        assert_eq!(normalize_column(id, &[Some(5.0)], 1e-9).unwrap(), vec![Some(1.0)]);
        assert_eq!(
            normalize_column(id, &[Some(2.0), None, Some(2.0)], 1e-9).unwrap(),
            vec![Some(0.5), None, Some(0.5)]
        );
        assert_eq!(normalize_column(id, &[None, None], 1e-9), Err(IndicatorError::AllMissing(id)));
    }

    #[test]
    fn codes_round_trip() {
        for id in IndicatorId::ALL {
            assert_eq!(id.code().parse::<IndicatorId>().unwrap(), id);
            assert_eq!(id.name().parse::<IndicatorId>().unwrap(), id);
            assert!(id.criterion().indicators().contains(&id));
        }
        let sizes: Vec<usize> = Criterion::ALL.iter().map(|c| c.indicators().len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn panel_flags_empty_columns() {
        let d: NaiveDate = "2022-01-03".parse().unwrap();
        let mut a = [None; 10];
        a[IndicatorId::Mcap.index()] = Some(3.0);
        let mut b = [None; 10];
        b[IndicatorId::Mcap.index()] = Some(1.0);
        let p = IndicatorPanel::build(d, vec!["a".into(), "b".into()], vec![a, b], &Directions::default(), 1e-9);
        assert_eq!(p.column(IndicatorId::Mcap), vec![Some(0.75), Some(0.25)]);
        assert_eq!(p.all_missing.len(), 9);
    }
}
