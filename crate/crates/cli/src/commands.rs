use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, ValueEnum};

use defi_rank_core::data::DataDir;
use defi_rank_core::store::{derive_run_id, ReportRecord, ReportStore, RunManifest};
use defi_rank_core::{evaluate_series, EvalError, EvaluationConfig, Granularity};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Ordinate {
    #[default]
    Score,
    Rank,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Evaluation config with an [inputs] table.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Fail on the first malformed transfer row instead of writing a rejects report.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Defaults to an id derived from the config and input digests.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Granularities to evaluate (repeatable or comma-separated); defaults to the config's.
    #[arg(long, value_delimiter = ',')]
    pub granularity: Vec<Granularity>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Defaults to the most recent run.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Defaults to the first granularity of the run.
    #[arg(long)]
    pub granularity: Option<Granularity>,
    #[arg(long, value_enum, default_value_t)]
    pub ordinate: Ordinate,
    /// Restrict to these protocols (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub protocol: Vec<String>,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::usage("IoError", format!("{}: {e}", path.display()))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::usage("IoError", e.to_string())
}

pub fn ingest(args: &IngestArgs, out: &mut impl Write) -> Result<()> {
    let config = EvaluationConfig::load(&args.config)?;
    let inputs = config
        .inputs
        .as_ref()
        .ok_or_else(|| CliError::usage("ConfigError", format!("{}: no [inputs] table", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let summary = DataDir::new(&args.data_dir).ingest(&inputs.resolved(base), args.strict)?;
    for f in &summary.files {
        writeln!(out, "{}: {} rows, {} rejects", f.name, f.rows, f.rejects).map_err(out_err)?;
    }
    writeln!(out, "{} rejects", summary.total_rejects()).map_err(out_err)?;
    Ok(())
}

/// `SOURCE_DATE_EPOCH` pins the manifest timestamp for reproducible stores.
fn creation_time() -> DateTime<Utc> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now)
}

pub fn evaluate(args: &EvaluateArgs, out: &mut impl Write, err: &mut impl Write) -> Result<RunManifest> {
    let config = EvaluationConfig::load(&args.config)?;
    let data_dir = DataDir::new(&args.data_dir);
    let data = data_dir.load()?;
    let granularities: BTreeSet<Granularity> = if args.granularity.is_empty() {
        [config.granularity].into()
    } else {
        args.granularity.iter().copied().collect()
    };

    let mut outcomes = Vec::new();
    for g in granularities {
        let mut c = config.clone();
        c.granularity = g;
        let outcome = evaluate_series(&c, &data)?;
        for s in &outcome.skipped {
            writeln!(err, "skipped {} ({g}): {}", s.date, s.reason).map_err(out_err)?;
        }
        outcomes.push((g, outcome));
    }

    let store = ReportStore::new(data_dir.runs_path());
    let digests = data_dir.input_digests()?;
    let run_id = match &args.run_id {
        Some(id) => id.clone(),
        None => store.unused_run_id(&derive_run_id(&config.hash(), &digests)),
    };
    let manifest = store.write_run_at(&run_id, &config, digests, &outcomes, creation_time())?;

    writeln!(out, "run {run_id}").map_err(out_err)?;
    for (g, outcome) in &outcomes {
        writeln!(out, "{g}: {} dates, {} skipped", outcome.reports.len(), outcome.skipped.len()).map_err(out_err)?;
    }
    let (_, outcome) = &outcomes[0];
    let last = outcome.reports.last().expect("at least one evaluated date");
    if last.consistency_warning {
        writeln!(err, "warning: a weight matrix fails the consistency ratio check").map_err(out_err)?;
    }
    let mut rows: Vec<_> = last.rows.iter().collect();
    rows.sort_by_key(|r| r.rank);
    writeln!(out, "\nranking on {}", last.as_of).map_err(out_err)?;
    writeln!(out, "{:>4}  {:<16} {:>10}", "rank", "protocol", "score").map_err(out_err)?;
    for r in rows {
        writeln!(out, "{:>4}  {:<16} {:>10.6}", r.rank, r.protocol, r.score).map_err(out_err)?;
    }
    Ok(manifest)
}

/// The most recently created run, ties broken by id.
pub fn latest_run(store: &ReportStore) -> Result<RunManifest> {
    store
        .list_runs()?
        .into_iter()
        .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.run_id.cmp(&b.run_id)))
        .ok_or_else(|| CliError::usage("UnknownRun", format!("no runs in {}", store.root().display())))
}

/// Picks the run and granularity for a report query.
pub fn resolve_run(
    store: &ReportStore,
    run_id: Option<&str>,
    granularity: Option<Granularity>,
) -> std::result::Result<(RunManifest, Granularity), EvalError> {
    let manifest = match run_id {
        Some(id) => store.manifest(id)?,
        None => latest_run(store).map_err(|e| EvalError::UnknownRun(e.message))?,
    };
    let g =
        match granularity {
            Some(g) => g,
            None => manifest.granularities.first().map(|r| r.granularity).ok_or_else(|| {
                EvalError::MissingGranularity { run: manifest.run_id.clone(), granularity: "any".into() }
            })?,
        };
    Ok((manifest, g))
}

/// Wide table: one row per date, one column per protocol. Protocols absent
/// on a date (not yet launched, no data) get an empty cell.
pub fn series_table(
    records: &[ReportRecord],
    ordinate: Ordinate,
    protocols: &[String],
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> std::result::Result<(Vec<String>, Vec<Vec<String>>), EvalError> {
    let known: BTreeSet<&str> = records.iter().map(|r| r.protocol.as_str()).collect();
    for p in protocols {
        if !known.contains(p.as_str()) {
            return Err(EvalError::UnknownProtocol(p.clone()));
        }
    }
    let columns: Vec<String> = if protocols.is_empty() {
        known.iter().map(|s| s.to_string()).collect()
    } else {
        let wanted: BTreeSet<&String> = protocols.iter().collect();
        wanted.into_iter().cloned().collect()
    };
    let mut by_date: BTreeMap<NaiveDate, BTreeMap<&str, &ReportRecord>> = BTreeMap::new();
    for r in records {
        if from.is_some_and(|f| r.date < f) || to.is_some_and(|t| r.date > t) {
            continue;
        }
        by_date.entry(r.date).or_default().insert(&r.protocol, r);
    }
    let rows = by_date
        .into_iter()
        .map(|(date, row)| {
            let mut cells = vec![date.to_string()];
            cells.extend(columns.iter().map(|p| match (row.get(p.as_str()), ordinate) {
                (Some(r), Ordinate::Score) => r.score.to_string(),
                (Some(r), Ordinate::Rank) => r.rank.to_string(),
                (None, _) => String::new(),
            }));
            cells
        })
        .collect();
    let mut header = vec!["date".to_string()];
    header.extend(columns);
    Ok((header, rows))
}

pub fn report(args: &ReportArgs, out: &mut impl Write) -> Result<()> {
    let store = ReportStore::new(DataDir::new(&args.data_dir).runs_path());
    let (manifest, g) = resolve_run(&store, args.run_id.as_deref(), args.granularity)?;
    let records = store.records(&manifest.run_id, g)?;
    let (header, rows) = series_table(&records, args.ordinate, &args.protocol, args.from, args.to)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&header)?;
        for row in &rows {
            csv.write_record(row)?;
        }
        csv.flush()
    };
    match &args.output {
        Some(path) => write(&mut File::create(path).map_err(io(path))?).map_err(io(path)),
        None => write(out).map_err(out_err),
    }
}
