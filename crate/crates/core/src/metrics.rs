//! Off-chain metric time series and the protocol registry.
//!
//! Metrics arrive as a long-format CSV (`date,protocol,metric,value`), one
//! row per observation. Lookups are last-observation-carried-forward with a
//! staleness cap, and never reach back before a protocol's genesis date.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const METRICS_HEADER: [&str; 4] = ["date", "protocol", "metric", "value"];
pub const REGISTRY_HEADER: [&str; 3] = ["protocol", "token", "genesis_date"];

pub const DEFAULT_STALENESS_DAYS: i64 = 7;
pub const DEFAULT_DECIMALS: u32 = 18;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("schema error: expected header {expected:?}, found {found:?}")]
    Schema { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("duplicate date {date} for {protocol}/{metric} at rows {first_row} and {second_row}")]
    DuplicateDate { protocol: String, metric: Metric, date: NaiveDate, first_row: usize, second_row: usize },
    #[error("row {row}: negative value {value}")]
    NegativeValue { row: usize, value: f64 },
    #[error("duplicate protocol {0} in registry")]
    DuplicateProtocol(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mcap,
    Fdv,
    Borrow,
    /// Daily flow; every other metric is a point-in-time stock.
    Revenue,
    Volume,
    Tvl,
    Price,
}

impl Metric {
    pub const ALL: [Metric; 7] =
        [Metric::Mcap, Metric::Fdv, Metric::Borrow, Metric::Revenue, Metric::Volume, Metric::Tvl, Metric::Price];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mcap => "mcap",
            Metric::Fdv => "fdv",
            Metric::Borrow => "borrow",
            Metric::Revenue => "revenue",
            Metric::Volume => "volume",
            Metric::Tvl => "tvl",
            Metric::Price => "price",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub protocol: String,
    pub metric: Metric,
    /// Strictly increasing dates, nonnegative values.
    pub points: Vec<(NaiveDate, f64)>,
}

impl MetricSeries {
    /// Last observation on or before `t`, if it is at most `staleness_days` old.
    pub fn value_at(&self, t: NaiveDate, staleness_days: i64) -> Option<f64> {
        let idx = self.points.partition_point(|(d, _)| *d <= t);
        let (date, value) = *self.points.get(idx.checked_sub(1)?)?;
        ((t - date).num_days() <= staleness_days).then_some(value)
    }

    /// Sum of observations in the trailing window `(t - days, t]` together
    /// with the first date observed in that window.
    pub fn trailing_sum(&self, t: NaiveDate, days: i64) -> Option<(f64, NaiveDate)> {
        let start = t - chrono::Duration::days(days);
        let lo = self.points.partition_point(|(d, _)| *d <= start);
        let hi = self.points.partition_point(|(d, _)| *d <= t);
        let window = &self.points[lo..hi];
        let first = window.first()?.0;
        Some((window.iter().map(|(_, v)| v).sum(), first))
    }
}

/// Revenue summed over a trailing year, possibly extrapolated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnualizedRevenue {
    pub value: f64,
    pub days_observed: i64,
    pub extrapolated: bool,
}

/// Trailing 365-day revenue. With a shorter history, the available sum is
/// scaled by `365 / days_observed`, where `days_observed` counts calendar
/// days from the first observation through `t`.
pub fn annualized_revenue(series: &MetricSeries, t: NaiveDate) -> Option<AnnualizedRevenue> {
    let (sum, first) = series.trailing_sum(t, 365)?;
    let days_observed = (t - first).num_days() + 1;
    if days_observed >= 365 {
        return Some(AnnualizedRevenue { value: sum, days_observed, extrapolated: false });
    }
    Some(AnnualizedRevenue { value: sum * 365.0 / days_observed as f64, days_observed, extrapolated: true })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolInfo {
    pub name: String,
    pub token: String,
    pub genesis: NaiveDate,
    pub decimals: u32,
}

/// Protocols known to the evaluation, keyed by name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProtocolRegistry {
    protocols: BTreeMap<String, ProtocolInfo>,
}

impl ProtocolRegistry {
    pub fn new(list: impl IntoIterator<Item = ProtocolInfo>) -> Result<Self, MetricsError> {
        let mut protocols = BTreeMap::new();
        for p in list {
            let name = p.name.clone();
            if protocols.insert(name.clone(), p).is_some() {
                return Err(MetricsError::DuplicateProtocol(name));
            }
        }
        Ok(Self { protocols })
    }

    /// The six mainstream lending protocols and their token launch dates.
    pub fn lending_defaults() -> Self {
        let rows = [
            ("aave", "AAVE", (2020, 10, 2)),
            ("compound", "COMP", (2020, 6, 14)),
            ("makerdao", "MKR", (2017, 12, 15)),
            ("alpha-homora", "ALPHA", (2020, 9, 27)),
            ("liquity", "LQTY", (2021, 4, 5)),
            ("benqi", "QI", (2021, 8, 11)),
        ];
        let list = rows.into_iter().map(|(name, token, (y, m, d))| ProtocolInfo {
            name: name.into(),
            token: token.into(),
            genesis: NaiveDate::from_ymd_opt(y, m, d).expect("valid date"),
            decimals: DEFAULT_DECIMALS,
        });
        Self::new(list).expect("distinct names")
    }

    pub fn get(&self, name: &str) -> Option<&ProtocolInfo> {
        self.protocols.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProtocolInfo> {
        self.protocols.values()
    }

    pub fn len(&self) -> usize {
        self.protocols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.protocols.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["protocol", "token", "genesis_date", "decimals"])?;
        for p in self.protocols.values() {
            out.write_record([p.name.clone(), p.token.clone(), p.genesis.to_string(), p.decimals.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn parse_date(raw: &str, row: usize) -> Result<NaiveDate, MetricsError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|e| MetricsError::Parse { row, reason: format!("date {raw:?}: {e}") })
}

fn headers<R: Read>(reader: &mut csv::Reader<R>) -> Result<Vec<String>, MetricsError> {
    Ok(reader.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Reads `protocol,token,genesis_date[,decimals]`; decimals default to 18.
pub fn load_registry<R: Read>(source: R) -> Result<ProtocolRegistry, MetricsError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let found = headers(&mut reader)?;
    let with_decimals = found.len() == 4 && found[3] == "decimals";
    if found[..found.len().min(3)] != REGISTRY_HEADER || !(found.len() == 3 || with_decimals) {
        return Err(MetricsError::Schema { expected: REGISTRY_HEADER.iter().map(|s| s.to_string()).collect(), found });
    }
    let mut list = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != found.len() {
            return Err(MetricsError::Parse { row, reason: format!("expected {} fields", found.len()) });
        }
        let decimals = if with_decimals {
            record[3].trim().parse().map_err(|e| MetricsError::Parse { row, reason: format!("decimals: {e}") })?
        } else {
            DEFAULT_DECIMALS
        };
        list.push(ProtocolInfo {
            name: record[0].trim().to_string(),
            token: record[1].trim().to_string(),
            genesis: parse_date(&record[2], row)?,
            decimals,
        });
    }
    ProtocolRegistry::new(list)
}

/// All loaded series, keyed by `(protocol, metric)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricStore {
    series: BTreeMap<(String, Metric), MetricSeries>,
}

impl MetricStore {
    pub fn from_series(list: impl IntoIterator<Item = MetricSeries>) -> Self {
        Self { series: list.into_iter().map(|s| ((s.protocol.clone(), s.metric), s)).collect() }
    }

    pub fn series(&self, protocol: &str, metric: Metric) -> Option<&MetricSeries> {
        self.series.get(&(protocol.to_string(), metric))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricSeries> {
        self.series.values()
    }

    pub fn protocols(&self) -> Vec<String> {
        let mut names: Vec<String> = self.series.keys().map(|(p, _)| p.clone()).collect();
        names.dedup();
        names
    }

    /// Carried-forward lookup that refuses dates before `genesis`, and
    /// observations dated before it.
    pub fn value_at(
        &self,
        protocol: &str,
        metric: Metric,
        t: NaiveDate,
        genesis: Option<NaiveDate>,
        staleness_days: i64,
    ) -> Option<f64> {
        let series = self.series(protocol, metric)?;
        if let Some(g) = genesis {
            if t < g {
                return None;
            }
            let idx = series.points.partition_point(|(d, _)| *d <= t);
            let (date, _) = series.points.get(idx.checked_sub(1)?)?;
            if *date < g {
                return None;
            }
        }
        series.value_at(t, staleness_days)
    }

    /// Annualized revenue using only observations on or after `genesis`.
    pub fn annualized_revenue(
        &self,
        protocol: &str,
        t: NaiveDate,
        genesis: Option<NaiveDate>,
    ) -> Option<AnnualizedRevenue> {
        let series = self.series(protocol, Metric::Revenue)?;
        match genesis {
            Some(g) if t < g => None,
            Some(g) => {
                let lo = series.points.partition_point(|(d, _)| *d < g);
                let trimmed = MetricSeries {
                    protocol: series.protocol.clone(),
                    metric: Metric::Revenue,
                    points: series.points[lo..].to_vec(),
                };
                annualized_revenue(&trimmed, t)
            }
            None => annualized_revenue(series, t),
        }
    }

    /// Writes the canonical form: rows sorted by protocol, metric, date;
    /// values in shortest round-trip notation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(METRICS_HEADER)?;
        for s in self.series.values() {
            for (date, value) in &s.points {
                out.write_record([date.to_string(), s.protocol.clone(), s.metric.to_string(), value.to_string()])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Reads the long-format metrics CSV. Dates must be unique per
/// `(protocol, metric)` and values nonnegative.
pub fn load_metric_series<R: Read>(source: R) -> Result<MetricStore, MetricsError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let found = headers(&mut reader)?;
    if found != METRICS_HEADER {
        return Err(MetricsError::Schema { expected: METRICS_HEADER.iter().map(|s| s.to_string()).collect(), found });
    }
    let mut grouped: BTreeMap<(String, Metric), BTreeMap<NaiveDate, (f64, usize)>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != 4 {
            return Err(MetricsError::Parse { row, reason: format!("expected 4 fields, found {}", record.len()) });
        }
        let date = parse_date(&record[0], row)?;
        let protocol = record[1].trim().to_string();
        if protocol.is_empty() {
            return Err(MetricsError::Parse { row, reason: "empty protocol".into() });
        }
        let metric: Metric = record[2].trim().parse().map_err(|reason| MetricsError::Parse { row, reason })?;
        let raw = record[3].trim();
        let value: f64 = raw.parse().map_err(|e| MetricsError::Parse { row, reason: format!("value {raw:?}: {e}") })?;
        if !value.is_finite() {
            return Err(MetricsError::Parse { row, reason: format!("value {raw:?} is not finite") });
        }
        if value < 0.0 || raw.starts_with('-') {
            return Err(MetricsError::NegativeValue { row, value });
        }
        let points = grouped.entry((protocol.clone(), metric)).or_default();
        if let Some((_, first_row)) = points.get(&date) {
            return Err(MetricsError::DuplicateDate { protocol, metric, date, first_row: *first_row, second_row: row });
        }
        points.insert(date, (value, row));
    }
    Ok(MetricStore::from_series(grouped.into_iter().map(|((protocol, metric), points)| MetricSeries {
        protocol,
        metric,
        points: points.into_iter().map(|(d, (v, _))| (d, v)).collect(),
    })))
}
