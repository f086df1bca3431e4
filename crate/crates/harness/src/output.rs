//! CSV output of evaluation records.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::experiment::{EvalRecord, RewardId};

pub const HEADER: [&str; 6] = ["seed", "agent", "step", "policy", "reward", "linf_error"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad record on line {line}: {message}")]
    Record { line: usize, message: String },
}

/// Floats are written with ten significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn write_records<W: Write>(records: &[EvalRecord], writer: W) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(HEADER)?;
    for r in records {
        out.write_record([
            r.seed.to_string(),
            r.agent.clone(),
            r.step.to_string(),
            r.policy.to_string(),
            r.reward.to_string(),
            format_float(r.linf_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(records: &[EvalRecord], path: &Path) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(records, std::fs::File::create(path)?)
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<EvalRecord>, OutputError> {
    let mut input = csv::Reader::from_reader(reader);
    if input.headers()?.iter().ne(HEADER) {
        return Err(OutputError::Record {
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut records = Vec::new();
    for (i, row) in input.records().enumerate() {
        let row = row?;
        let bad = |message: String| OutputError::Record { line: i + 2, message };
        if row.len() != HEADER.len() {
            return Err(bad(format!("{} fields", row.len())));
        }
        records.push(EvalRecord {
            seed: row[0].parse().map_err(|e| bad(format!("seed: {e}")))?,
            agent: row[1].to_string(),
            step: row[2].parse().map_err(|e| bad(format!("step: {e}")))?,
            policy: row[3].parse().map_err(|e| bad(format!("policy: {e}")))?,
            reward: row[4].parse::<RewardId>().map_err(bad)?,
            linf_error: row[5].parse().map_err(|e| bad(format!("linf_error: {e}")))?,
        });
    }
    Ok(records)
}

pub fn read_csv(path: &Path) -> Result<Vec<EvalRecord>, OutputError> {
    read_records(std::fs::File::open(path)?)
}
