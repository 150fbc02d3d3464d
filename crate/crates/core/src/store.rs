//! Report store and what-if recomputation.
//!
//! A run lives in `runs/<run-id>/`: a `manifest.json` plus one
//! `<granularity>.jsonl` file per evaluated granularity. Each line is a
//! self-contained record for one (date, protocol) pair carrying the
//! indicator scores, effective weights, criterion scores, final score, rank
//! and every matrix's consistency figures. Runs are written to a hidden
//! staging directory and renamed into place, so readers only ever see
//! complete runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ahp::{EigenSettings, Hierarchy};
use crate::config::{EvaluationConfig, Granularity, LevelWeights, WeightConfig};
use crate::error::{io_err, EvalError};
use crate::evaluator::{compose, resolve_weights, MatrixReport, ScoreReport, SeriesOutcome, SkippedDate};
use crate::indicators::{Criterion, IndicatorId, IndicatorRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub raw: Option<f64>,
    pub adjusted: Option<f64>,
    pub x: Option<f64>,
}

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub date: NaiveDate,
    pub protocol: String,
    pub rank: usize,
    pub score: f64,
    /// Criterion name → `c_i`.
    pub criteria: BTreeMap<String, f64>,
    /// Indicator code → values.
    pub indicators: BTreeMap<String, IndicatorRecord>,
    /// Effective criterion weights `w_i` by name.
    pub criterion_weights: BTreeMap<String, f64>,
    /// Effective indicator weights `w_ij` by code.
    pub indicator_weights: BTreeMap<String, f64>,
    pub matrices: Vec<MatrixReport>,
    pub consistency_warning: bool,
    pub flags: Vec<String>,
}

impl ReportRecord {
    pub fn x_row(&self) -> IndicatorRow {
        let mut row = [None; 10];
        for id in IndicatorId::ALL {
            row[id.index()] = self.indicators.get(id.code()).and_then(|r| r.x);
        }
        row
    }

    /// The effective hierarchy recorded on this line.
    pub fn hierarchy(&self) -> Result<Hierarchy, EvalError> {
        let missing = |what: &str| EvalError::Corrupt(format!("{} {}: missing {what}", self.date, self.protocol));
        let mut cw = Vec::new();
        let mut iw = Vec::new();
        for c in Criterion::ALL {
            cw.push(*self.criterion_weights.get(c.as_str()).ok_or_else(|| missing(c.as_str()))?);
            let level = c
                .indicators()
                .iter()
                .map(|id| self.indicator_weights.get(id.code()).copied().ok_or_else(|| missing(id.code())))
                .collect::<Result<Vec<_>, _>>()?;
            iw.push(level);
        }
        Ok(Hierarchy::new(cw, iw)?)
    }

    /// Recomputes `(c_i, score)` from the stored `x_ij`, `w_ij` and `w_i`.
    pub fn recompute(&self) -> Result<(Vec<f64>, f64), EvalError> {
        let row = self.x_row();
        let groups: Vec<Vec<Option<f64>>> =
            Criterion::ALL.iter().map(|c| c.indicators().iter().map(|id| row[id.index()]).collect()).collect();
        Ok(self.hierarchy()?.score(&groups)?)
    }
}

/// Flattens a per-date report into one record per protocol.
pub fn records_from_report(report: &ScoreReport) -> Vec<ReportRecord> {
    let criterion_weights: BTreeMap<String, f64> =
        Criterion::ALL.iter().map(|c| (c.as_str().to_string(), report.criterion_weights[c.index()])).collect();
    let mut indicator_weights = BTreeMap::new();
    for c in Criterion::ALL {
        for (j, id) in c.indicators().iter().enumerate() {
            indicator_weights.insert(id.code().to_string(), report.indicator_weights[c.index()][j]);
        }
    }
    report
        .rows
        .iter()
        .map(|row| ReportRecord {
            date: report.as_of,
            protocol: row.protocol.clone(),
            rank: row.rank,
            score: row.score,
            criteria: Criterion::ALL.iter().map(|c| (c.as_str().to_string(), row.criteria[c.index()])).collect(),
            indicators: IndicatorId::ALL
                .iter()
                .map(|id| {
                    let i = id.index();
                    (id.code().to_string(), IndicatorRecord { raw: row.raw[i], adjusted: row.adjusted[i], x: row.x[i] })
                })
                .collect(),
            criterion_weights: criterion_weights.clone(),
            indicator_weights: indicator_weights.clone(),
            matrices: report.matrices.clone(),
            consistency_warning: report.consistency_warning,
            flags: row.flags.clone(),
        })
        .collect()
}

/// Line-delimited JSON for a whole series, ordered by date then protocol.
pub fn encode_records(outcome: &SeriesOutcome) -> Vec<u8> {
    let mut out = Vec::new();
    for report in &outcome.reports {
        for record in records_from_report(report) {
            serde_json::to_writer(&mut out, &record).expect("records serialize");
            out.push(b'\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityRun {
    pub granularity: Granularity,
    pub file: String,
    pub dates: Vec<NaiveDate>,
    pub skipped: Vec<SkippedDate>,
    /// SHA-256 of the report file.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub input_digests: BTreeMap<String, String>,
    pub created_at: String,
    pub granularities: Vec<GranularityRun>,
    pub config: EvaluationConfig,
}

impl RunManifest {
    pub fn granularity(&self, g: Granularity) -> Option<&GranularityRun> {
        self.granularities.iter().find(|r| r.granularity == g)
    }
}

/// Content-derived run id: config hash and input digests.
pub fn derive_run_id(config_hash: &str, input_digests: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    for (k, v) in input_digests {
        h.update(k.as_bytes());
        h.update(v.as_bytes());
    }
    format!("run-{}", &hex::encode(h.finalize())[..12])
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[derive(Debug, Clone)]
pub struct ReportStore {
    root: PathBuf,
}

impl ReportStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf, EvalError> {
        if !valid_run_id(id) {
            return Err(EvalError::UnknownRun(id.to_string()));
        }
        Ok(self.root.join(id))
    }

    /// `base` if unused, else `base-2`, `base-3`, …
    pub fn unused_run_id(&self, base: &str) -> String {
        if !self.root.join(base).exists() {
            return base.to_string();
        }
        (2..).map(|k| format!("{base}-{k}")).find(|id| !self.root.join(id).exists()).expect("unbounded")
    }

    /// Writes a complete run stamped with the current time. Fails if the id
    /// is already taken.
    pub fn write_run(
        &self,
        run_id: &str,
        config: &EvaluationConfig,
        input_digests: BTreeMap<String, String>,
        outcomes: &[(Granularity, SeriesOutcome)],
    ) -> Result<RunManifest, EvalError> {
        self.write_run_at(run_id, config, input_digests, outcomes, chrono::Utc::now())
    }

    /// As [`ReportStore::write_run`] with an explicit creation time.
    pub fn write_run_at(
        &self,
        run_id: &str,
        config: &EvaluationConfig,
        input_digests: BTreeMap<String, String>,
        outcomes: &[(Granularity, SeriesOutcome)],
        created_at: chrono::DateTime<chrono::Utc>,
    ) -> Result<RunManifest, EvalError> {
        let final_dir = self.run_dir(run_id)?;
        if final_dir.exists() {
            return Err(EvalError::Config(format!("run {run_id} already exists")));
        }
        let staging = self.root.join(format!(".staging-{run_id}-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(io_err(&staging))?;

        let mut granularities = Vec::new();
        for (g, outcome) in outcomes {
            let file = format!("{}.jsonl", g.as_str());
            let bytes = encode_records(outcome);
            let path = staging.join(&file);
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            granularities.push(GranularityRun {
                granularity: *g,
                file,
                dates: outcome.reports.iter().map(|r| r.as_of).collect(),
                skipped: outcome.skipped.clone(),
                digest: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = RunManifest {
            run_id: run_id.to_string(),
            config_hash: config.hash(),
            input_digests,
            created_at: created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            granularities,
            config: config.clone(),
        };
        let path = staging.join("manifest.json");
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        serde_json::to_writer_pretty(&mut f, &manifest).expect("manifest serializes");
        f.write_all(b"\n").map_err(io_err(&path))?;
        drop(f);
        fs::rename(&staging, &final_dir).map_err(io_err(&final_dir))?;
        Ok(manifest)
    }

    pub fn list_runs(&self) -> Result<Vec<RunManifest>, EvalError> {
        if !self.root.is_dir() {
            return Ok(Vec::new());
        }
        let mut ids: Vec<String> = fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("manifest.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| valid_run_id(id))
            .collect();
        ids.sort();
        ids.iter().map(|id| self.manifest(id)).collect()
    }

    pub fn manifest(&self, run_id: &str) -> Result<RunManifest, EvalError> {
        let path = self.run_dir(run_id)?.join("manifest.json");
        if !path.is_file() {
            return Err(EvalError::UnknownRun(run_id.to_string()));
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| EvalError::Corrupt(format!("{}: {e}", path.display())))
    }

    pub fn records(&self, run_id: &str, granularity: Granularity) -> Result<Vec<ReportRecord>, EvalError> {
        let manifest = self.manifest(run_id)?;
        let entry = manifest.granularity(granularity).ok_or_else(|| EvalError::MissingGranularity {
            run: run_id.to_string(),
            granularity: granularity.to_string(),
        })?;
        let path = self.run_dir(run_id)?.join(&entry.file);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        text.lines()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map_err(|e| EvalError::Corrupt(format!("{} line {}: {e}", path.display(), i + 1)))
            })
            .collect()
    }
}

/// Weight levels to override for a what-if; omitted levels keep the run's
/// configured weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightOverrides {
    #[serde(default)]
    pub criteria: Option<LevelWeights>,
    #[serde(default)]
    pub market_share: Option<LevelWeights>,
    #[serde(default)]
    pub valuation: Option<LevelWeights>,
    #[serde(default)]
    pub decentralization: Option<LevelWeights>,
}

impl WeightOverrides {
    pub fn apply(&self, base: &WeightConfig) -> WeightConfig {
        let mut w = base.clone();
        if let Some(c) = &self.criteria {
            w.criteria = c.clone();
        }
        for (level, value) in [
            (Criterion::MarketShare, &self.market_share),
            (Criterion::Valuation, &self.valuation),
            (Criterion::Decentralization, &self.decentralization),
        ] {
            if let Some(v) = value {
                *w.level_mut(level) = v.clone();
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfRow {
    pub protocol: String,
    pub criteria: Vec<f64>,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfDate {
    pub date: NaiveDate,
    pub criterion_weights: Vec<f64>,
    pub indicator_weights: Vec<Vec<f64>>,
    pub rows: Vec<WhatIfRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIfResult {
    pub weight_matrices: Vec<MatrixReport>,
    pub consistency_warning: bool,
    pub dates: Vec<WhatIfDate>,
}

/// Recomputes weights and composition over frozen indicator scores.
pub fn what_if(
    records: &[ReportRecord],
    weights: &WeightConfig,
    eigen: EigenSettings,
) -> Result<WhatIfResult, EvalError> {
    weights.validate()?;
    let resolved = resolve_weights(weights, eigen)?;
    let mut by_date: BTreeMap<NaiveDate, Vec<&ReportRecord>> = BTreeMap::new();
    for r in records {
        by_date.entry(r.date).or_default().push(r);
    }
    let mut dates = Vec::with_capacity(by_date.len());
    for (date, rows) in by_date {
        let protocols: Vec<String> = rows.iter().map(|r| r.protocol.clone()).collect();
        let x: Vec<IndicatorRow> = rows.iter().map(|r| r.x_row()).collect();
        let composition = compose(&protocols, &x, &resolved.hierarchy)?;
        dates.push(WhatIfDate {
            date,
            criterion_weights: composition.hierarchy.criterion_weights.clone(),
            indicator_weights: composition.hierarchy.indicator_weights.clone(),
            rows: protocols
                .into_iter()
                .zip(composition.rows)
                .zip(composition.ranks)
                .map(|((protocol, c), rank)| WhatIfRow { protocol, criteria: c.criteria, score: c.score, rank })
                .collect(),
        });
    }
    let consistency_warning = resolved.matrices.iter().any(|m| !m.pass);
    Ok(WhatIfResult { weight_matrices: resolved.matrices, consistency_warning, dates })
}
