//! Per-date evaluation: snapshots and metrics in, indicator panel, AHP
//! composition, scores and ranks out.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahp::{self, EigenSettings, Hierarchy, MatrixOrigin, PairwiseMatrix};
use crate::config::{EvaluationConfig, Granularity, WeightConfig};
use crate::error::EvalError;
use crate::indicators::{
    valuation_raw, Criterion, Directions, DistributionMetrics, IndicatorError, IndicatorId, IndicatorPanel,
    IndicatorRow, ValuationInputs,
};
use crate::ledger::{filter_holders, CheckpointedLedger, Classifications, DustRule};
use crate::metrics::{Metric, MetricStore, ProtocolInfo, ProtocolRegistry};

/// Tolerance between scheme-matrix eigenvector weights and share-normalized
/// scores before a warning is raised.
const SCHEME_AGREEMENT_TOL: f64 = 1e-9;

/// Everything an evaluation reads.
#[derive(Debug, Clone, Default)]
pub struct EvaluationData {
    pub registry: ProtocolRegistry,
    pub metrics: MetricStore,
    pub classifications: Classifications,
    /// Protocol name → transfer log of its token.
    pub ledgers: BTreeMap<String, CheckpointedLedger>,
}

/// Sample dates in `[start, end]`: every day, every Monday, the 1st and
/// 15th, or the 1st of each month.
pub fn sample_dates(start: NaiveDate, end: NaiveDate, granularity: Granularity) -> Result<Vec<NaiveDate>, EvalError> {
    if end < start {
        return Err(EvalError::EmptyRange { start, end });
    }
    let keep = |d: &NaiveDate| match granularity {
        Granularity::Day => true,
        Granularity::Week => d.weekday() == Weekday::Mon,
        Granularity::HalfMonth => d.day() == 1 || d.day() == 15,
        Granularity::Month => d.day() == 1,
    };
    let dates: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).filter(keep).collect();
    if dates.is_empty() {
        return Err(EvalError::EmptyRange { start, end });
    }
    Ok(dates)
}

/// Eigen and consistency results for one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub name: String,
    pub origin: MatrixOrigin,
    pub n: usize,
    pub lambda_max: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub pass: bool,
}

impl MatrixReport {
    fn analyze(name: String, m: &PairwiseMatrix, settings: EigenSettings) -> Result<Self, ahp::AhpError> {
        let (eig, c) = ahp::analyze(m, settings)?;
        Ok(Self {
            name,
            origin: m.origin(),
            n: m.dim(),
            lambda_max: eig.lambda_max,
            weights: eig.weights,
            iterations: eig.iterations,
            ci: c.ci,
            ri: c.ri,
            cr: c.cr,
            pass: c.pass,
        })
    }
}

/// Criterion and indicator weights derived from the user's weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedWeights {
    pub hierarchy: Hierarchy,
    pub matrices: Vec<MatrixReport>,
}

pub fn resolve_weights(weights: &WeightConfig, settings: EigenSettings) -> Result<ResolvedWeights, EvalError> {
    let level = |name: &str, lw: &crate::config::LevelWeights| -> Result<MatrixReport, EvalError> {
        let wrap = |source| EvalError::Weights { level: name.to_string(), source };
        let m = lw.to_matrix().map_err(wrap)?;
        MatrixReport::analyze(name.to_string(), &m, settings).map_err(wrap)
    };
    let criteria = level("criteria", &weights.criteria)?;
    let mut matrices = vec![criteria.clone()];
    let mut indicator_weights = Vec::new();
    for c in Criterion::ALL {
        let expected = c.indicators().len();
        let report = level(c.as_str(), weights.level(c))?;
        if report.n != expected {
            return Err(EvalError::Config(format!("weights.{c} has {} entries, expected {expected}", report.n)));
        }
        indicator_weights.push(report.weights.clone());
        matrices.push(report);
    }
    let hierarchy = Hierarchy::new(criteria.weights, indicator_weights)?;
    Ok(ResolvedWeights { hierarchy, matrices })
}

/// Scores for one protocol after composition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedScore {
    pub criteria: Vec<f64>,
    pub score: f64,
    /// Criteria for which this protocol has no indicator at all.
    pub not_launched: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    /// Weights after dropping indicators nobody has data for.
    pub hierarchy: Hierarchy,
    pub rows: Vec<ComposedScore>,
    /// 1 = best, aligned with the input protocol order.
    pub ranks: Vec<usize>,
}

fn grouped(row: &IndicatorRow) -> Vec<Vec<Option<f64>>> {
    Criterion::ALL.iter().map(|c| c.indicators().iter().map(|id| row[id.index()]).collect()).collect()
}

/// Weighted composition of normalized indicator scores into criterion and
/// final scores, plus ranks. Both the batch evaluation and what-if
/// recomputation go through here.
pub fn compose(protocols: &[String], x: &[IndicatorRow], base: &Hierarchy) -> Result<Composition, EvalError> {
    assert_eq!(protocols.len(), x.len(), "one score row per protocol");
    let present: Vec<Vec<bool>> = Criterion::ALL
        .iter()
        .map(|c| c.indicators().iter().map(|id| x.iter().any(|row| row[id.index()].is_some())).collect())
        .collect();
    let hierarchy =
        base.restricted(&present).ok_or_else(|| EvalError::Config("no indicator has data for any protocol".into()))?;
    let mut rows = Vec::with_capacity(x.len());
    for row in x {
        let groups = grouped(row);
        let (criteria, score) = hierarchy.score(&groups)?;
        let not_launched = Criterion::ALL
            .iter()
            .zip(&groups)
            .zip(&hierarchy.criterion_weights)
            .filter(|((_, g), w)| **w > 0.0 && g.iter().all(Option::is_none))
            .map(|((c, _), _)| *c)
            .collect();
        rows.push(ComposedScore { criteria, score, not_launched });
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let ranks = rank_by_score(protocols, &scores);
    Ok(Composition { hierarchy, rows, ranks })
}

/// Descending score, ties broken by protocol name ascending.
pub fn rank_by_score(protocols: &[String], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| protocols[a].cmp(&protocols[b])));
    let mut ranks = vec![0; scores.len()];
    for (pos, idx) in order.into_iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolScore {
    pub protocol: String,
    pub raw: IndicatorRow,
    pub adjusted: IndicatorRow,
    pub x: IndicatorRow,
    pub criteria: Vec<f64>,
    pub score: f64,
    pub rank: usize,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub as_of: NaiveDate,
    /// Effective weights used for this date.
    pub criterion_weights: Vec<f64>,
    pub indicator_weights: Vec<Vec<f64>>,
    /// Weight matrices first, then one scheme matrix per indicator with data.
    pub matrices: Vec<MatrixReport>,
    pub consistency_warning: bool,
    /// Sorted by protocol name.
    pub rows: Vec<ProtocolScore>,
    /// Configured protocols left out on this date, with the reason.
    pub excluded: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl ScoreReport {
    pub fn row(&self, protocol: &str) -> Option<&ProtocolScore> {
        self.rows.iter().find(|r| r.protocol == protocol)
    }
}

/// End of UTC day `t`, in seconds.
pub fn end_of_day(t: NaiveDate) -> i64 {
    (t + Duration::days(1)).and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() - 1
}

fn raw_indicators(
    info: &ProtocolInfo,
    t: NaiveDate,
    config: &EvaluationConfig,
    data: &EvaluationData,
) -> Result<(IndicatorRow, Vec<String>), EvalError> {
    let name = info.name.as_str();
    let genesis = Some(info.genesis);
    let value = |m: Metric| data.metrics.value_at(name, m, t, genesis, config.staleness_days);
    let mut row: IndicatorRow = [None; 10];
    let mut flags = Vec::new();

    let mcap = value(Metric::Mcap);
    let revenue = value(Metric::Revenue);
    let tvl = value(Metric::Tvl);
    row[IndicatorId::Mcap.index()] = mcap;
    row[IndicatorId::Borrow.index()] = value(Metric::Borrow);
    row[IndicatorId::Revenue.index()] = revenue;
    row[IndicatorId::Volume.index()] = value(Metric::Volume);

    let annualized = if revenue.is_some() { data.metrics.annualized_revenue(name, t, genesis) } else { None };
    if annualized.is_some_and(|a| a.extrapolated) {
        flags.push("revenue_extrapolated".to_string());
    }
    let valuation = valuation_raw(&ValuationInputs {
        fdv: value(Metric::Fdv),
        annualized_revenue: annualized.map(|a| a.value),
        revenue,
        tvl,
        mcap,
    });
    row[IndicatorId::PsRatio.index()] = valuation.ps_ratio;
    row[IndicatorId::CapitalEfficiency.index()] = valuation.capital_efficiency;
    row[IndicatorId::McapOverTvl.index()] = valuation.mcap_over_tvl;
    if valuation.possibly_undervalued() == Some(true) {
        flags.push("possibly_undervalued".to_string());
    }

    if let Some(ledger) = data.ledgers.get(name) {
        let snap = ledger
            .balances_at(end_of_day(t))
            .map_err(|source| EvalError::Ledger { protocol: name.to_string(), source })?;
        let rule = DustRule { threshold_usd: config.dust_threshold_usd, decimals: info.decimals };
        let filtered = filter_holders(&snap, &data.classifications, value(Metric::Price), rule);
        if filtered.dust_filter_skipped {
            flags.push("dust_filter_skipped".to_string());
        }
        match DistributionMetrics::from_snapshot(&filtered) {
            Ok(d) => {
                row[IndicatorId::Gini.index()] = Some(d.gini);
                row[IndicatorId::Nakamoto.index()] = Some(d.nakamoto as f64);
                row[IndicatorId::Top10.index()] = Some(d.top10_share);
            }
            Err(IndicatorError::EmptyDistribution) => flags.push("no_holders".to_string()),
            Err(e) => unreachable!("{e}"),
        }
    }
    Ok((row, flags))
}

fn configured_protocols<'a>(
    config: &EvaluationConfig,
    registry: &'a ProtocolRegistry,
) -> Result<Vec<&'a ProtocolInfo>, EvalError> {
    if config.protocols.is_empty() {
        let all: Vec<_> = registry.iter().collect();
        if all.len() > ahp::MAX_DIM {
            return Err(EvalError::Config(format!(
                "registry has {} protocols; list at most {}",
                all.len(),
                ahp::MAX_DIM
            )));
        }
        return Ok(all);
    }
    let mut list: Vec<&ProtocolInfo> = config
        .protocols
        .iter()
        .map(|p| registry.get(p).ok_or_else(|| EvalError::UnknownProtocol(p.clone())))
        .collect::<Result<_, _>>()?;
    list.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(list)
}

/// Evaluates every configured protocol at `t`.
pub fn evaluate_at(t: NaiveDate, config: &EvaluationConfig, data: &EvaluationData) -> Result<ScoreReport, EvalError> {
    config.validate()?;
    let weights = resolve_weights(&config.weights, config.eigen)?;
    let directions = config.direction_overrides()?;
    let protocols = configured_protocols(config, &data.registry)?;
    evaluate_resolved(t, config, data, &protocols, &weights, &directions)
}

fn evaluate_resolved(
    t: NaiveDate,
    config: &EvaluationConfig,
    data: &EvaluationData,
    protocols: &[&ProtocolInfo],
    weights: &ResolvedWeights,
    directions: &Directions,
) -> Result<ScoreReport, EvalError> {
    let mut names = Vec::new();
    let mut raw = Vec::new();
    let mut flags = Vec::new();
    let mut excluded = Vec::new();
    for info in protocols {
        if t < info.genesis {
            excluded.push((info.name.clone(), format!("before genesis {}", info.genesis)));
            continue;
        }
        let (row, f) = raw_indicators(info, t, config, data)?;
        if row.iter().all(Option::is_none) {
            excluded.push((info.name.clone(), "no data".to_string()));
            continue;
        }
        names.push(info.name.clone());
        raw.push(row);
        flags.push(f);
    }
    if names.is_empty() {
        return Err(EvalError::NoProtocolHasData(t));
    }

    let panel = IndicatorPanel::build(t, names, raw, directions, config.epsilon);
    let mut matrices = weights.matrices.clone();
    let mut warnings = Vec::new();
    for id in IndicatorId::ALL {
        if panel.all_missing.contains(&id) {
            warnings.push(format!("{} ({}) has no data", id.code(), id.name()));
            continue;
        }
        let (present, values): (Vec<usize>, Vec<f64>) =
            panel.adjusted.iter().enumerate().filter_map(|(i, row)| row[id.index()].map(|v| (i, v))).unzip();
        let m = PairwiseMatrix::from_scores(&values, config.epsilon)?;
        let report = MatrixReport::analyze(format!("scheme.{}", id.code()), &m, config.eigen)?;
        let drift = present
            .iter()
            .zip(&report.weights)
            .map(|(&i, w)| (panel.scores[i][id.index()].expect("present") - w).abs())
            .fold(0.0, f64::max);
        if drift > SCHEME_AGREEMENT_TOL {
            warnings.push(format!("{}: scheme eigenvector deviates from shares by {drift:e}", id.code()));
        }
        matrices.push(report);
    }

    let composition = compose(&panel.protocols, &panel.scores, &weights.hierarchy)?;
    let consistency_warning = matrices.iter().any(|m| !m.pass);
    if consistency_warning {
        let failing: Vec<&str> = matrices.iter().filter(|m| !m.pass).map(|m| m.name.as_str()).collect();
        warnings.push(format!("consistency ratio >= 0.1 for {}", failing.join(", ")));
    }
    let rows = panel
        .protocols
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let c = &composition.rows[i];
            let mut f = flags[i].clone();
            f.extend(c.not_launched.iter().map(|k| format!("not_yet_launched:{k}")));
            ProtocolScore {
                protocol: name.clone(),
                raw: panel.raw[i],
                adjusted: panel.adjusted[i],
                x: panel.scores[i],
                criteria: c.criteria.clone(),
                score: c.score,
                rank: composition.ranks[i],
                flags: f,
            }
        })
        .collect();
    Ok(ScoreReport {
        as_of: t,
        criterion_weights: composition.hierarchy.criterion_weights.clone(),
        indicator_weights: composition.hierarchy.indicator_weights.clone(),
        matrices,
        consistency_warning,
        rows,
        excluded,
        warnings,
    })
}

/// Ranks per sample date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSeries {
    pub dates: Vec<NaiveDate>,
    pub ranks: Vec<BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDate {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOutcome {
    pub reports: Vec<ScoreReport>,
    pub ranks: RankSeries,
    pub skipped: Vec<SkippedDate>,
}

/// Evaluates every sample date of the configured range in parallel. Dates
/// that fail are skipped with a reason; fails only if all of them do.
pub fn evaluate_series(config: &EvaluationConfig, data: &EvaluationData) -> Result<SeriesOutcome, EvalError> {
    config.validate()?;
    let dates = sample_dates(config.start, config.end, config.granularity)?;
    let weights = resolve_weights(&config.weights, config.eigen)?;
    let directions = config.direction_overrides()?;
    let protocols = configured_protocols(config, &data.registry)?;
    let results: Vec<Result<ScoreReport, EvalError>> =
        dates.par_iter().map(|&t| evaluate_resolved(t, config, data, &protocols, &weights, &directions)).collect();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (date, result) in dates.into_iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => skipped.push(SkippedDate { date, reason: e.to_string() }),
        }
    }
    if reports.is_empty() {
        return Err(EvalError::AllDatesFailed);
    }
    let ranks = RankSeries {
        dates: reports.iter().map(|r| r.as_of).collect(),
        ranks: reports.iter().map(|r| r.rows.iter().map(|row| (row.protocol.clone(), row.rank)).collect()).collect(),
    };
    Ok(SeriesOutcome { reports, ranks, skipped })
}
