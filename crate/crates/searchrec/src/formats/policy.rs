//! Versioned JSON envelopes for fitted consumer policies and recommendation
//! policies. Payloads are model dumps and keep the library's zero-based
//! indexing (`"indexing": "zero-based"`).

use std::path::Path;

use searchrec_core::{ConsumerPolicy, RecPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_json, write_json};
use crate::error::{Error, Result};

pub const CONSUMER_POLICY_FORMAT: &str = "searchrec/consumer-policy";
pub const REC_POLICY_FORMAT: &str = "searchrec/rec-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    indexing: String,
    policy: T,
}

fn write<T: Serialize>(path: &Path, format: &str, policy: &T) -> Result<()> {
    write_json(path, &Envelope { format: format.into(), version: POLICY_VERSION, indexing: "zero-based".into(), policy })
}

fn read<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = read_json(path)?;
    if env.format != format {
        return Err(Error::input(path, format!("expected format {format:?}, found {:?}", env.format)));
    }
    if env.version != POLICY_VERSION {
        return Err(Error::input(path, format!("unsupported version {} (this build reads {POLICY_VERSION})", env.version)));
    }
    serde_json::from_value(env.policy).map_err(|e| Error::input(path, e))
}

pub fn write_consumer_policy(path: &Path, policy: &ConsumerPolicy) -> Result<()> {
    write(path, CONSUMER_POLICY_FORMAT, policy)
}

pub fn read_consumer_policy(path: &Path) -> Result<ConsumerPolicy> {
    read(path, CONSUMER_POLICY_FORMAT)
}

pub fn write_rec_policy(path: &Path, policy: &RecPolicy) -> Result<()> {
    write(path, REC_POLICY_FORMAT, policy)
}

pub fn read_rec_policy(path: &Path) -> Result<RecPolicy> {
    read(path, REC_POLICY_FORMAT)
}
