use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Bad rows tolerated before ingestion fails outright.
pub const MAX_BAD_ROW_FRACTION: f64 = 0.01;

/// One logged bandit interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub timestamp: f64,
    pub action: usize,
    pub reward: f64,
    /// Logging-policy probability of `action`.
    pub pscore: f64,
    pub user_features: Vec<String>,
    pub item_feature: f64,
}

/// Column names for each field of [`LoggedEvent`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaMapping {
    pub timestamp: String,
    pub action: String,
    pub reward: String,
    pub pscore: String,
    pub item_feature: String,
    pub user_features: Vec<String>,
}

impl Default for SchemaMapping {
    /// The column names written by [`write_log`].
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            action: "action".into(),
            reward: "reward".into(),
            pscore: "pscore".into(),
            item_feature: "item_feature".into(),
            user_features: vec!["user_feature_0".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    /// 1-based file line (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub events: Vec<LoggedEvent>,
    pub rejected: Vec<RejectedRow>,
}

fn column(headers: &HashMap<String, usize>, name: &str) -> Result<usize> {
    headers.get(name).copied().ok_or_else(|| Error::input(format!("schema column '{name}' not found in log header")))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).map(str::trim).unwrap_or("");
    if raw.is_empty() {
        return Err(format!("missing {name}"));
    }
    raw.parse::<T>().map_err(|e| format!("bad {name} {raw:?}: {e}"))
}

/// Read a headered CSV log. Malformed rows and rows with non-positive
/// propensity are collected in the report; more than 1% of them is an error.
pub fn ingest_reader<R: Read>(input: R, schema: &SchemaMapping) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers: HashMap<String, usize> =
        reader.headers()?.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
    let ts = column(&headers, &schema.timestamp)?;
    let act = column(&headers, &schema.action)?;
    let rew = column(&headers, &schema.reward)?;
    let ps = column(&headers, &schema.pscore)?;
    let item = column(&headers, &schema.item_feature)?;
    let users = schema.user_features.iter().map(|c| column(&headers, c)).collect::<Result<Vec<_>>>()?;

    let mut events = Vec::new();
    let mut rejected = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RejectedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let parsed = (|| -> std::result::Result<LoggedEvent, String> {
            let timestamp: f64 = parse_field(&rec, ts, "timestamp")?;
            let action: usize = parse_field(&rec, act, "action")?;
            let reward: f64 = parse_field(&rec, rew, "reward")?;
            let pscore: f64 = parse_field(&rec, ps, "pscore")?;
            let item_feature: f64 = parse_field(&rec, item, "item_feature")?;
            if !(pscore > 0.0 && pscore <= 1.0) {
                return Err(format!("pscore {pscore} outside (0,1]"));
            }
            if !timestamp.is_finite() || !reward.is_finite() || !item_feature.is_finite() {
                return Err("non-finite value".into());
            }
            let user_features = users
                .iter()
                .map(|&u| match rec.get(u).map(str::trim) {
                    Some(v) if !v.is_empty() => Ok(v.to_string()),
                    _ => Err("missing user feature".to_string()),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(LoggedEvent { timestamp, action, reward, pscore, user_features, item_feature })
        })();
        match parsed {
            Ok(ev) => events.push(ev),
            Err(reason) => rejected.push(RejectedRow { line, reason }),
        }
    }
    let total = events.len() + rejected.len();
    if total > 0 && rejected.len() as f64 > MAX_BAD_ROW_FRACTION * total as f64 {
        let first: Vec<String> = rejected.iter().take(5).map(|r| format!("line {}: {}", r.line, r.reason)).collect();
        return Err(Error::Log(format!(
            "{} of {total} rows rejected (limit {:.0}%): {}",
            rejected.len(),
            MAX_BAD_ROW_FRACTION * 100.0,
            first.join("; ")
        )));
    }
    Ok(IngestReport { events, rejected })
}

pub fn ingest_log(path: &Path, schema: &SchemaMapping) -> Result<IngestReport> {
    ingest_reader(std::fs::File::open(path)?, schema)
}

/// Write events with the [`SchemaMapping::default`] layout, one
/// `user_feature_i` column per user feature.
pub fn write_log<W: Write>(out: W, events: &[LoggedEvent]) -> Result<()> {
    let n_user = events.first().map_or(1, |e| e.user_features.len());
    if events.iter().any(|e| e.user_features.len() != n_user) {
        return Err(Error::input("events disagree on the number of user features"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["timestamp", "action", "reward", "pscore", "item_feature"].iter().map(|s| s.to_string()).collect();
    header.extend((0..n_user).map(|i| format!("user_feature_{i}")));
    w.write_record(&header)?;
    for e in events {
        let mut rec = vec![
            format!("{:?}", e.timestamp),
            e.action.to_string(),
            format!("{:?}", e.reward),
            format!("{:?}", e.pscore),
            format!("{:?}", e.item_feature),
        ];
        rec.extend(e.user_features.iter().cloned());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mapping matching [`write_log`] output for `n_user` user-feature columns.
pub fn default_schema(n_user: usize) -> SchemaMapping {
    SchemaMapping { user_features: (0..n_user).map(|i| format!("user_feature_{i}")).collect(), ..Default::default() }
}
