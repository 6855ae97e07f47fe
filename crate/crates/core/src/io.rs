//! JSONL ingestion and emission for preference datasets, candidate pools,
//! and ranking records.
//!
//! Loading is strict: any parse or validation failure aborts with the
//! 1-based line number, and an empty file is an error. Record order is file
//! order.

use crate::error::{Error, Result};
use crate::eval::RankingRecord;
use crate::records::{CandidatePool, PreferencePair};
use crate::schema::FeatureSchema;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn load_jsonl<T, F>(path: &Path, what: &str, mut check: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("parse failure: {e}"),
        })?;
        check(&record).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("empty {what}"),
        });
    }
    Ok(records)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads and validates a preference dataset (one JSON record per line).
pub fn load_preference_dataset(path: &Path, schema: &FeatureSchema) -> Result<Vec<PreferencePair>> {
    load_jsonl(path, "dataset", |pair: &PreferencePair| {
        pair.validate(schema)
    })
}

pub fn save_preference_dataset(path: &Path, pairs: &[PreferencePair]) -> Result<()> {
    write_jsonl(path, pairs)
}

/// Appends preference records to an existing file (creating it if absent).
pub fn append_preference_records(path: &Path, pairs: &[PreferencePair]) -> Result<()> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        let line = serde_json::to_string(p).expect("record serializes");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads and validates candidate pools (one pool per line).
pub fn load_candidate_pools(path: &Path, schema: &FeatureSchema) -> Result<Vec<CandidatePool>> {
    load_jsonl(path, "pool file", |pool: &CandidatePool| {
        pool.validate(schema)
    })
}

pub fn save_candidate_pools(path: &Path, pools: &[CandidatePool]) -> Result<()> {
    write_jsonl(path, pools)
}

/// Loads ranking records (one per line) for win/tie/loss tabulation.
pub fn load_ranking_records(path: &Path) -> Result<Vec<RankingRecord>> {
    load_jsonl(path, "ranking file", |r: &RankingRecord| r.validate())
}

pub fn save_ranking_records(path: &Path, records: &[RankingRecord]) -> Result<()> {
    write_jsonl(path, records)
}
