//! Append-only confirmation log stored as newline-delimited JSON.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use signalmatch::SignalPair;

use crate::ServiceError;

/// Project id given to pairs replayed from the log.
pub const CONFIRMATION_PROJECT: &str = "confirmations";

/// One engineer decision: this customer name maps to that library name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub customer_signal: String,
    pub chosen_label: String,
    #[serde(with = "rfc3339")]
    pub timestamp: DateTime<Utc>,
    pub source: String,
}

impl Confirmation {
    pub fn new(
        customer_signal: impl Into<String>,
        chosen_label: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        Confirmation {
            customer_signal: customer_signal.into(),
            chosen_label: chosen_label.into(),
            timestamp: Utc::now(),
            source: source.into(),
        }
    }

    pub fn to_pair(&self) -> SignalPair {
        SignalPair::new(
            CONFIRMATION_PROJECT,
            &self.customer_signal,
            &self.chosen_label,
        )
    }
}

// second precision with a trailing Z keeps log lines short and stable
mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Serializes appends through one mutex so concurrent confirmations land as
/// whole lines in some serial order.
#[derive(Debug)]
pub struct ConfirmationLog {
    path: PathBuf,
    writer: Mutex<()>,
}

impl ConfirmationLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ConfirmationLog {
            path: path.into(),
            writer: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record and flushes it to disk before returning.
    pub fn append(&self, record: &Confirmation) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(record).expect("confirmation serializes");
        line.push('\n');
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let io = |source| ServiceError::Log {
            path: self.path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io)?;
        file.write_all(line.as_bytes()).map_err(io)?;
        file.sync_data().map_err(io)
    }

    /// Every record in append order. A missing file is an empty log.
    pub fn read_all(&self) -> Result<Vec<Confirmation>, ServiceError> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let io = |source| ServiceError::Log {
            path: self.path.clone(),
            source,
        };
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(record);
        }
        Ok(out)
    }
}
