//! The canonical data directory written by `ingest` and read by `evaluate`.
//!
//! ```text
//! <data-dir>/
//!   registry.csv          protocol,token,genesis_date,decimals
//!   metrics.csv           date,protocol,metric,value (sorted)
//!   classifications.csv   address,kind,label
//!   transfers/<protocol>.csv
//!   rejects/<protocol>.csv
//!   runs/<run-id>/...
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::InputsConfig;
use crate::error::{io_err, EvalError};
use crate::evaluator::EvaluationData;
use crate::ledger::{
    self, ingest_transfers, load_classifications, CheckpointedLedger, Classifications, DEFAULT_CHECKPOINT_INTERVAL,
    TRANSFER_HEADER,
};
use crate::metrics::{load_metric_series, load_registry, ProtocolRegistry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSummary {
    pub name: String,
    pub rows: usize,
    pub rejects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestSummary {
    pub files: Vec<FileSummary>,
}

impl IngestSummary {
    pub fn total_rejects(&self) -> usize {
        self.files.iter().map(|f| f.rejects).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>, EvalError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<File, EvalError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    File::create(path).map_err(io_err(path))
}

fn ledger_err(protocol: &str) -> impl FnOnce(ledger::LedgerError) -> EvalError + '_ {
    move |source| EvalError::Ledger { protocol: protocol.to_string(), source }
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn registry_path(&self) -> PathBuf {
        self.root.join("registry.csv")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn classifications_path(&self) -> PathBuf {
        self.root.join("classifications.csv")
    }

    pub fn transfers_path(&self, protocol: &str) -> PathBuf {
        self.root.join("transfers").join(format!("{protocol}.csv"))
    }

    pub fn rejects_path(&self, protocol: &str) -> PathBuf {
        self.root.join("rejects").join(format!("{protocol}.csv"))
    }

    pub fn runs_path(&self) -> PathBuf {
        self.root.join("runs")
    }

    /// Validates the source files and writes their canonical forms. Under
    /// `strict`, any rejected transfer row is an error.
    pub fn ingest(&self, inputs: &InputsConfig, strict: bool) -> Result<IngestSummary, EvalError> {
        let mut summary = IngestSummary::default();

        let registry = match &inputs.registry {
            Some(path) => load_registry(open(path)?)?,
            None => ProtocolRegistry::lending_defaults(),
        };
        let metrics = load_metric_series(open(&inputs.metrics)?)?;
        for name in metrics.protocols() {
            if registry.get(&name).is_none() {
                return Err(EvalError::UnknownProtocol(name));
            }
        }
        let classifications = match &inputs.classifications {
            Some(path) => load_classifications(open(path)?).map_err(ledger_err("classifications"))?,
            None => Classifications::default(),
        };

        let mut logs = Vec::new();
        for (protocol, path) in &inputs.transfers {
            if registry.get(protocol).is_none() {
                return Err(EvalError::UnknownProtocol(protocol.clone()));
            }
            let ingested = ingest_transfers(open(path)?).map_err(ledger_err(protocol))?;
            if strict {
                if let Some(r) = ingested.rejects.first() {
                    return Err(EvalError::Ledger {
                        protocol: protocol.clone(),
                        source: ledger::LedgerError::Parse { row: r.row, reason: r.reason.clone() },
                    });
                }
            }
            logs.push((protocol.clone(), ingested));
        }

        let path = self.registry_path();
        registry.write_csv(create(&path)?)?;
        summary.files.push(FileSummary { name: "registry.csv".into(), rows: registry.len(), rejects: 0 });

        let path = self.metrics_path();
        metrics.write_csv(create(&path)?)?;
        let rows = metrics.iter().map(|s| s.points.len()).sum();
        summary.files.push(FileSummary { name: "metrics.csv".into(), rows, rejects: 0 });

        let path = self.classifications_path();
        classifications.write_csv(create(&path)?).map_err(ledger_err("classifications"))?;
        summary.files.push(FileSummary { name: "classifications.csv".into(), rows: classifications.len(), rejects: 0 });

        for (protocol, ingested) in logs {
            let path = self.transfers_path(&protocol);
            ingested.log.write_csv(create(&path)?).map_err(ledger_err(&protocol))?;
            let rejects_path = self.rejects_path(&protocol);
            if ingested.rejects.is_empty() {
                if rejects_path.exists() {
                    fs::remove_file(&rejects_path).map_err(io_err(&rejects_path))?;
                }
            } else {
                ledger::write_rejects(&ingested.rejects, &TRANSFER_HEADER, create(&rejects_path)?)
                    .map_err(ledger_err(&protocol))?;
            }
            summary.files.push(FileSummary {
                name: format!("transfers/{protocol}.csv"),
                rows: ingested.log.len(),
                rejects: ingested.rejects.len(),
            });
        }
        Ok(summary)
    }

    /// Loads the canonical files. Every registered protocol with a transfer
    /// file gets a replay ledger.
    pub fn load(&self) -> Result<EvaluationData, EvalError> {
        let registry = load_registry(open(&self.registry_path())?)?;
        let metrics = load_metric_series(open(&self.metrics_path())?)?;
        let classifications_path = self.classifications_path();
        let classifications = if classifications_path.exists() {
            load_classifications(open(&classifications_path)?).map_err(ledger_err("classifications"))?
        } else {
            Classifications::default()
        };
        let mut ledgers = BTreeMap::new();
        for info in registry.iter() {
            let path = self.transfers_path(&info.name);
            if !path.exists() {
                continue;
            }
            let log = ledger::ingest_transfers_strict(open(&path)?).map_err(ledger_err(&info.name))?;
            let ledger = CheckpointedLedger::new(log, DEFAULT_CHECKPOINT_INTERVAL).map_err(ledger_err(&info.name))?;
            ledgers.insert(info.name.clone(), ledger);
        }
        Ok(EvaluationData { registry, metrics, classifications, ledgers })
    }

    /// SHA-256 of every canonical input file, keyed by relative path.
    pub fn input_digests(&self) -> Result<BTreeMap<String, String>, EvalError> {
        let mut paths = vec![self.registry_path(), self.metrics_path(), self.classifications_path()];
        let transfers = self.root.join("transfers");
        if transfers.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&transfers)
                .map_err(io_err(&transfers))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            files.sort();
            paths.extend(files);
        }
        let mut digests = BTreeMap::new();
        for path in paths {
            if !path.exists() {
                continue;
            }
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let rel = path.strip_prefix(&self.root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
            digests.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
        Ok(digests)
    }
}
