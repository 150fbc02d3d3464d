//! Token transfer logs and holder balance reconstruction.
//!
//! Transfer logs are read from CSV (`block,log_index,timestamp,from,to,amount`),
//! replayed in `(block, log_index)` order into balance snapshots, and then
//! filtered down to governance-relevant holders: exchange and contract
//! addresses are dropped, as are holdings worth less than the dust threshold.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRANSFER_HEADER: [&str; 6] = ["block", "log_index", "timestamp", "from", "to", "amount"];
pub const CLASSIFICATION_HEADER: [&str; 3] = ["address", "kind", "label"];

/// Holdings worth less than this many USD are treated as dust.
pub const DEFAULT_DUST_THRESHOLD_USD: f64 = 10.0;

/// Events between cached snapshots in a [`CheckpointedLedger`].
pub const DEFAULT_CHECKPOINT_INTERVAL: usize = 100_000;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("schema error: expected header {expected:?}, found {found:?}")]
    Schema { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("address {address} would go negative at block {block} log {log_index}")]
    NegativeBalance { address: Address, block: u64, log_index: u64 },
    #[error("timestamp decreases at block {block} log {log_index}")]
    NonMonotoneTimestamp { block: u64, log_index: u64 },
    #[error("supply overflow at block {block} log {log_index}")]
    Overflow { block: u64, log_index: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 20-byte account address. Displays as lowercase `0x`-prefixed hex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Self(bytes)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 20]
    }
}

impl FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex_part = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        if hex_part.len() != 40 {
            return Err(format!("address {s:?} is not 40 hex characters"));
        }
        let mut bytes = [0u8; 20];
        hex::decode_to_slice(hex_part, &mut bytes).map_err(|_| format!("address {s:?} is not valid hex"))?;
        Ok(Self(bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferEvent {
    pub block: u64,
    pub log_index: u64,
    /// UTC seconds.
    pub timestamp: i64,
    pub from: Address,
    pub to: Address,
    /// Smallest token units.
    pub amount: u128,
}

impl TransferEvent {
    fn key(&self) -> (u64, u64) {
        (self.block, self.log_index)
    }
}

/// A row that failed to parse, kept verbatim for the rejects report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub fields: Vec<String>,
    pub reason: String,
}

/// Events sorted by `(block, log_index)` with nondecreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferLog {
    events: Vec<TransferEvent>,
}

impl TransferLog {
    /// Sorts `events`, rejecting logs whose timestamps go backwards.
    pub fn new(mut events: Vec<TransferEvent>) -> Result<Self, LedgerError> {
        events.sort_by_key(TransferEvent::key);
        for pair in events.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(LedgerError::NonMonotoneTimestamp { block: pair[1].block, log_index: pair[1].log_index });
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[TransferEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of leading events with `timestamp <= t`.
    pub fn prefix_len_at(&self, t: i64) -> usize {
        self.events.partition_point(|e| e.timestamp <= t)
    }

    /// Replays every event with `timestamp <= t`.
    pub fn balances_at(&self, t: i64) -> Result<BalanceSnapshot, LedgerError> {
        let mut snap = BalanceSnapshot::empty(t);
        snap.apply_all(&self.events[..self.prefix_len_at(t)])?;
        Ok(snap)
    }

    /// Writes the canonical CSV form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LedgerError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRANSFER_HEADER)?;
        for e in &self.events {
            out.write_record([
                e.block.to_string(),
                e.log_index.to_string(),
                e.timestamp.to_string(),
                e.from.to_string(),
                e.to.to_string(),
                e.amount.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedTransfers {
    pub log: TransferLog,
    pub rejects: Vec<Reject>,
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), LedgerError> {
    let found: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != expected {
        return Err(LedgerError::Schema { expected: expected.iter().map(|s| s.to_string()).collect(), found });
    }
    Ok(())
}

fn parse_transfer_row(fields: &csv::StringRecord) -> Result<TransferEvent, String> {
    if fields.len() != TRANSFER_HEADER.len() {
        return Err(format!("expected {} fields, found {}", TRANSFER_HEADER.len(), fields.len()));
    }
    let field = |i: usize| fields[i].trim();
    let block = field(0).parse::<u64>().map_err(|e| format!("block: {e}"))?;
    let log_index = field(1).parse::<u64>().map_err(|e| format!("log_index: {e}"))?;
    let timestamp = field(2).parse::<i64>().map_err(|e| format!("timestamp: {e}"))?;
    let from = field(3).parse::<Address>()?;
    let to = field(4).parse::<Address>()?;
    let raw_amount = field(5);
    if raw_amount.starts_with('-') {
        return Err(format!("amount {raw_amount:?} is negative"));
    }
    let amount = raw_amount.parse::<u128>().map_err(|e| format!("amount {raw_amount:?}: {e}"))?;
    Ok(TransferEvent { block, log_index, timestamp, from, to, amount })
}

/// Reads a transfer CSV. Malformed rows and duplicate `(block, log_index)`
/// keys are returned as rejects; a bad header is fatal.
pub fn ingest_transfers<R: Read>(source: R) -> Result<IngestedTransfers, LedgerError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    check_header(&mut reader, &TRANSFER_HEADER)?;
    let mut events = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let reject = |reason: String| Reject { row, fields: record.iter().map(str::to_string).collect(), reason };
        match parse_transfer_row(&record) {
            Ok(event) => {
                if let Some(first) = seen.insert(event.key(), row) {
                    seen.insert(event.key(), first);
                    rejects.push(reject(format!(
                        "duplicate (block, log_index) = ({}, {}), first seen at row {first}",
                        event.block, event.log_index
                    )));
                } else {
                    events.push(event);
                }
            }
            Err(reason) => rejects.push(reject(reason)),
        }
    }
    Ok(IngestedTransfers { log: TransferLog::new(events)?, rejects })
}

/// Like [`ingest_transfers`] but the first reject is an error.
pub fn ingest_transfers_strict<R: Read>(source: R) -> Result<TransferLog, LedgerError> {
    let ingested = ingest_transfers(source)?;
    match ingested.rejects.into_iter().next() {
        Some(r) => Err(LedgerError::Parse { row: r.row, reason: r.reason }),
        None => Ok(ingested.log),
    }
}

/// Writes rejects with the original columns plus `reason`.
pub fn write_rejects<W: Write>(rejects: &[Reject], header: &[&str], w: W) -> Result<(), LedgerError> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let mut head: Vec<&str> = vec!["row"];
    head.extend_from_slice(header);
    head.push("reason");
    out.write_record(&head)?;
    for r in rejects {
        let mut rec = vec![r.row.to_string()];
        rec.extend(r.fields.iter().cloned());
        rec.push(r.reason.clone());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Holder balances after replaying a log prefix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BalanceSnapshot {
    pub as_of: i64,
    /// Nonzero balances only; the zero address never appears.
    pub balances: BTreeMap<Address, u128>,
    pub minted: u128,
    pub burned: u128,
    /// Events applied so far.
    pub events_applied: usize,
}

impl BalanceSnapshot {
    pub fn empty(as_of: i64) -> Self {
        Self { as_of, ..Default::default() }
    }

    pub fn total(&self) -> u128 {
        self.balances.values().sum()
    }

    pub fn apply(&mut self, e: &TransferEvent) -> Result<(), LedgerError> {
        let overflow = || LedgerError::Overflow { block: e.block, log_index: e.log_index };
        if e.from.is_zero() {
            self.minted = self.minted.checked_add(e.amount).ok_or_else(overflow)?;
        } else {
            let held = self.balances.get(&e.from).copied().unwrap_or(0);
            let left = held.checked_sub(e.amount).ok_or(LedgerError::NegativeBalance {
                address: e.from,
                block: e.block,
                log_index: e.log_index,
            })?;
            if left == 0 {
                self.balances.remove(&e.from);
            } else {
                self.balances.insert(e.from, left);
            }
        }
        if e.to.is_zero() {
            self.burned = self.burned.checked_add(e.amount).ok_or_else(overflow)?;
        } else if e.amount > 0 {
            let slot = self.balances.entry(e.to).or_insert(0);
            *slot = slot.checked_add(e.amount).ok_or_else(overflow)?;
        }
        self.events_applied += 1;
        Ok(())
    }

    pub fn apply_all(&mut self, events: &[TransferEvent]) -> Result<(), LedgerError> {
        events.iter().try_for_each(|e| self.apply(e))
    }

    /// Rolls this snapshot forward to `t` using the events of `log` it has
    /// not yet applied.
    pub fn advance(&mut self, log: &TransferLog, t: i64) -> Result<(), LedgerError> {
        assert!(t >= self.as_of, "cannot advance backwards");
        let end = log.prefix_len_at(t);
        self.apply_all(&log.events()[self.events_applied..end])?;
        self.as_of = t;
        Ok(())
    }
}

/// A transfer log with cached snapshots every `interval` events. The cache
/// only shortens replay; results equal [`TransferLog::balances_at`].
#[derive(Debug, Clone)]
pub struct CheckpointedLedger {
    log: TransferLog,
    interval: usize,
    checkpoints: Vec<BalanceSnapshot>,
}

impl CheckpointedLedger {
    pub fn new(log: TransferLog, interval: usize) -> Result<Self, LedgerError> {
        assert!(interval > 0, "checkpoint interval must be positive");
        let mut checkpoints = vec![BalanceSnapshot::empty(i64::MIN)];
        let mut snap = BalanceSnapshot::empty(i64::MIN);
        for chunk in log.events().chunks(interval) {
            snap.apply_all(chunk)?;
            if chunk.len() == interval {
                snap.as_of = chunk[chunk.len() - 1].timestamp;
                checkpoints.push(snap.clone());
            }
        }
        Ok(Self { log, interval, checkpoints })
    }

    pub fn log(&self) -> &TransferLog {
        &self.log
    }

    pub fn checkpoints(&self) -> &[BalanceSnapshot] {
        &self.checkpoints
    }

    pub fn balances_at(&self, t: i64) -> Result<BalanceSnapshot, LedgerError> {
        let end = self.log.prefix_len_at(t);
        let idx = (end / self.interval).min(self.checkpoints.len() - 1);
        let mut snap = self.checkpoints[idx].clone();
        snap.apply_all(&self.log.events()[snap.events_applied..end])?;
        snap.as_of = t;
        Ok(snap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressKind {
    Exchange,
    Contract,
    Regular,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressClassification {
    pub address: Address,
    pub kind: AddressKind,
    pub label: String,
}

/// Address → classification lookup. Unlisted addresses are regular.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classifications {
    entries: BTreeMap<Address, AddressClassification>,
}

impl Classifications {
    /// Fails if one address is given two different kinds.
    pub fn new(list: impl IntoIterator<Item = AddressClassification>) -> Result<Self, LedgerError> {
        let mut entries: BTreeMap<Address, AddressClassification> = BTreeMap::new();
        for (i, c) in list.into_iter().enumerate() {
            if let Some(prev) = entries.get(&c.address) {
                if prev.kind != c.kind {
                    return Err(LedgerError::Parse {
                        row: i + 1,
                        reason: format!("address {} classified as both {:?} and {:?}", c.address, prev.kind, c.kind),
                    });
                }
                continue;
            }
            entries.insert(c.address, c);
        }
        Ok(Self { entries })
    }

    pub fn kind(&self, address: &Address) -> AddressKind {
        self.entries.get(address).map_or(AddressKind::Regular, |c| c.kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AddressClassification> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LedgerError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CLASSIFICATION_HEADER)?;
        for c in self.entries.values() {
            let kind = match c.kind {
                AddressKind::Exchange => "exchange",
                AddressKind::Contract => "contract",
                AddressKind::Regular => "regular",
            };
            out.write_record([c.address.to_string(), kind.to_string(), c.label.clone()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads `address,kind,label` with kind ∈ {exchange, contract}.
pub fn load_classifications<R: Read>(source: R) -> Result<Classifications, LedgerError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    check_header(&mut reader, &CLASSIFICATION_HEADER)?;
    let mut list = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != 3 {
            return Err(LedgerError::Parse { row, reason: format!("expected 3 fields, found {}", record.len()) });
        }
        let address = record[0].trim().parse::<Address>().map_err(|reason| LedgerError::Parse { row, reason })?;
        let kind = match record[1].trim().to_ascii_lowercase().as_str() {
            "exchange" => AddressKind::Exchange,
            "contract" => AddressKind::Contract,
            other => {
                return Err(LedgerError::Parse { row, reason: format!("unknown kind {other:?}") });
            }
        };
        list.push(AddressClassification { address, kind, label: record[2].trim().to_string() });
    }
    Classifications::new(list)
}

/// Holders left after dropping exchanges, contracts and dust.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSnapshot {
    pub base: BalanceSnapshot,
    pub holders: BTreeMap<Address, u128>,
    pub excluded_exchange: usize,
    pub excluded_contract: usize,
    pub excluded_dust: usize,
    pub dust_threshold_usd: f64,
    pub price_used: Option<f64>,
    /// Set when no price was available and dust filtering was skipped.
    pub dust_filter_skipped: bool,
}

impl FilteredSnapshot {
    pub fn balances(&self) -> Vec<u128> {
        self.holders.values().copied().collect()
    }

    /// The retained holders as a plain snapshot.
    pub fn retained(&self) -> BalanceSnapshot {
        BalanceSnapshot {
            as_of: self.base.as_of,
            balances: self.holders.clone(),
            minted: self.base.minted,
            burned: self.base.burned,
            events_applied: self.base.events_applied,
        }
    }
}

/// Token metadata needed to value raw balances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DustRule {
    pub threshold_usd: f64,
    pub decimals: u32,
}

impl Default for DustRule {
    fn default() -> Self {
        Self { threshold_usd: DEFAULT_DUST_THRESHOLD_USD, decimals: 18 }
    }
}

pub fn filter_holders(
    snap: &BalanceSnapshot,
    classes: &Classifications,
    price_usd: Option<f64>,
    rule: DustRule,
) -> FilteredSnapshot {
    let scale = 10f64.powi(rule.decimals as i32);
    let mut holders = BTreeMap::new();
    let (mut excluded_exchange, mut excluded_contract, mut excluded_dust) = (0, 0, 0);
    for (&address, &balance) in &snap.balances {
        match classes.kind(&address) {
            AddressKind::Exchange => excluded_exchange += 1,
            AddressKind::Contract => excluded_contract += 1,
            AddressKind::Regular => {
                let is_dust = price_usd.is_some_and(|p| (balance as f64 / scale) * p < rule.threshold_usd);
                if is_dust {
                    excluded_dust += 1;
                } else {
                    holders.insert(address, balance);
                }
            }
        }
    }
    FilteredSnapshot {
        base: snap.clone(),
        holders,
        excluded_exchange,
        excluded_contract,
        excluded_dust,
        dust_threshold_usd: rule.threshold_usd,
        price_used: price_usd,
        dust_filter_skipped: price_usd.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(n: u8) -> Address {
        let mut b = [0u8; 20];
        b[19] = n;
        Address::from_bytes(b)
    }

    fn ev(block: u64, ts: i64, from: Address, to: Address, amount: u128) -> TransferEvent {
        TransferEvent { block, log_index: 0, timestamp: ts, from, to, amount }
    }

    const HEADER: &str = "block,log_index,timestamp,from,to,amount\n";

    #[test]
    fn address_parsing() {
        let a: Address = "0xABCDEF0123456789abcdef0123456789ABCDEF01".parse().unwrap();
        assert_eq!(a.to_string(), "0xabcdef0123456789abcdef0123456789abcdef01");
        assert!("0x1234".parse::<Address>().is_err());
        assert!("0xzzcdef0123456789abcdef0123456789abcdef01".parse::<Address>().is_err());
        assert!(Address::ZERO.is_zero());
    }

    #[test]
    fn empty_file_with_header() {
        let got = ingest_transfers(HEADER.as_bytes()).unwrap();
        assert!(got.log.is_empty() && got.rejects.is_empty());
    }

    #[test]
    fn bad_header_is_schema_error() {
        let err = ingest_transfers("block,timestamp\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LedgerError::Schema { .. }));
    }

    #[test]
    fn rows_are_sorted() {
        let z = Address::ZERO;
        let a = addr(1);
        let csv = format!("{HEADER}5,0,500,{a},{z},1\n3,1,300,{z},{a},10\n3,0,300,{z},{a},10\n");
        let got = ingest_transfers(csv.as_bytes()).unwrap();
        let keys: Vec<_> = got.log.events().iter().map(|e| (e.block, e.log_index)).collect();
        assert_eq!(keys, vec![(3, 0), (3, 1), (5, 0)]);
    }

    #[test]
    fn negative_amount_rejected_at_row() {
        let z = Address::ZERO;
        let a = addr(1);
        let csv = format!("{HEADER}1,0,100,{z},{a},10\n2,0,200,{a},{z},-5\n");
        let got = ingest_transfers(csv.as_bytes()).unwrap();
        assert_eq!(got.log.len(), 1);
        assert_eq!(got.rejects.len(), 1);
        assert_eq!(got.rejects[0].row, 2);
        assert!(got.rejects[0].reason.contains("negative"));
        match ingest_transfers_strict(csv.as_bytes()) {
            Err(LedgerError::Parse { row: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_and_short_addresses_rejected() {
        let z = Address::ZERO;
        let a = addr(1);
        let csv = format!("{HEADER}1,0,100,{z},{a},10\n1,0,100,{z},{a},10\n2,0,200,0x12,{a},1\n");
        let got = ingest_transfers(csv.as_bytes()).unwrap();
        assert_eq!(got.log.len(), 1);
        assert_eq!(got.rejects.iter().map(|r| r.row).collect::<Vec<_>>(), vec![2, 3]);
        let mut out = Vec::new();
        write_rejects(&got.rejects, &TRANSFER_HEADER, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("row,block,log_index,timestamp,from,to,amount,reason\n"));
    }

    #[test]
    fn decreasing_timestamps_are_fatal() {
        let a = addr(1);
        let err = TransferLog::new(vec![ev(1, 200, Address::ZERO, a, 1), ev(2, 100, Address::ZERO, a, 1)]).unwrap_err();
        assert!(matches!(err, LedgerError::NonMonotoneTimestamp { block: 2, .. }));
    }

    #[test]
    fn replay_examples() {
        let (a, b) = (addr(1), addr(2));
        let log = TransferLog::new(vec![ev(1, 100, Address::ZERO, a, 100), ev(2, 200, a, b, 40)]).unwrap();
        assert!(log.balances_at(99).unwrap().balances.is_empty());
        assert_eq!(log.balances_at(100).unwrap().balances, BTreeMap::from([(a, 100)]));
        assert_eq!(log.balances_at(500).unwrap().balances, BTreeMap::from([(a, 60), (b, 40)]));
    }

    #[test]
    fn burn_and_zero_balance_removal() {
        let a = addr(1);
        let log = TransferLog::new(vec![ev(1, 1, Address::ZERO, a, 10), ev(2, 2, a, Address::ZERO, 10)]).unwrap();
        let s = log.balances_at(2).unwrap();
        assert!(s.balances.is_empty());
        assert_eq!((s.minted, s.burned), (10, 10));
    }

    #[test]
    fn overspend_is_negative_balance() {
        let (a, b) = (addr(1), addr(2));
        let log = TransferLog::new(vec![ev(1, 1, Address::ZERO, a, 10), ev(2, 2, a, b, 11)]).unwrap();
        match log.balances_at(2) {
            Err(LedgerError::NegativeBalance { address, block: 2, .. }) => assert_eq!(address, a),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn checkpoints_match_full_replay() {
        let mut events = Vec::new();
        for i in 0..50u64 {
            events.push(ev(i, i as i64, Address::ZERO, addr((i % 7) as u8 + 1), 10 + i as u128));
        }
        let log = TransferLog::new(events).unwrap();
        let cp = CheckpointedLedger::new(log.clone(), 8).unwrap();
        assert_eq!(cp.checkpoints().len(), 7);
        for t in [-1, 0, 7, 8, 15, 16, 33, 49, 100] {
            let a = cp.balances_at(t).unwrap();
            let b = log.balances_at(t).unwrap();
            assert_eq!(a.balances, b.balances, "t = {t}");
            assert_eq!(a.events_applied, b.events_applied);
        }
    }

    #[test]
    fn classification_file() {
        let csv = format!("address,kind,label\n{},exchange,Some CEX\n{},Contract,Treasury\n", addr(1), addr(2));
        let c = load_classifications(csv.as_bytes()).unwrap();
        assert_eq!(c.kind(&addr(1)), AddressKind::Exchange);
        assert_eq!(c.kind(&addr(2)), AddressKind::Contract);
        assert_eq!(c.kind(&addr(3)), AddressKind::Regular);
        let bad = format!("address,kind,label\n{},wallet,x\n", addr(1));
        assert!(matches!(load_classifications(bad.as_bytes()), Err(LedgerError::Parse { row: 1, .. })));
        let conflict = format!("address,kind,label\n{0},exchange,x\n{0},contract,y\n", addr(1));
        assert!(load_classifications(conflict.as_bytes()).is_err());
    }

    fn unit_rule() -> DustRule {
        DustRule { threshold_usd: 10.0, decimals: 0 }
    }

    #[test]
    fn filter_examples() {
        let (a, b) = (addr(1), addr(2));
        let classes = Classifications::new([AddressClassification {
            address: b,
            kind: AddressKind::Exchange,
            label: "cex".into(),
        }])
        .unwrap();
        let snap = BalanceSnapshot { balances: BTreeMap::from([(a, 100), (b, 100)]), ..Default::default() };
        let f = filter_holders(&snap, &classes, Some(1.0), unit_rule());
        assert_eq!(f.holders, BTreeMap::from([(a, 100)]));
        assert_eq!(f.excluded_exchange, 1);

        let dust = BalanceSnapshot { balances: BTreeMap::from([(a, 5)]), ..Default::default() };
        let f = filter_holders(&dust, &Classifications::default(), Some(1.0), unit_rule());
        assert!(f.holders.is_empty());
        assert_eq!(f.excluded_dust, 1);

        let f = filter_holders(&dust, &Classifications::default(), None, unit_rule());
        assert_eq!(f.holders, BTreeMap::from([(a, 5)]));
        assert!(f.dust_filter_skipped);
    }

    #[test]
    fn dust_uses_decimals() {
        let a = addr(1);
        // 9.5 tokens at 1 USD with 18 decimals.
        let snap = BalanceSnapshot { balances: BTreeMap::from([(a, 9_500_000_000_000_000_000)]), ..Default::default() };
        let f = filter_holders(&snap, &Classifications::default(), Some(1.0), DustRule::default());
        assert_eq!(f.excluded_dust, 1);
        let f = filter_holders(&snap, &Classifications::default(), Some(2.0), DustRule::default());
        assert_eq!(f.excluded_dust, 0);
    }
}
