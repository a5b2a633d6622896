//! JSONL clickstreams: one event per line,
//! `{"sid":..,"t":..,"action":{"search":k}|{"convert":k}|"exit","recs":[k,k,k]}`,
//! sorted by session then `t`. Cluster-level files use one-based integer
//! cluster indices; vehicle-level files use vehicle ids in the same places.

use std::fmt::Write as _;
use std::path::Path;

use searchrec_core::clickstream::{RawAction, RawEvent, RawSession};
use searchrec_core::{Action, Event, Session};
use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LineAction<T> {
    Search(T),
    Convert(T),
    Exit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de>"))]
struct Line<T> {
    sid: String,
    t: usize,
    action: LineAction<T>,
    #[serde(default)]
    recs: Vec<T>,
}

/// Vehicle ids may be written as strings or bare numbers.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum VehicleRef {
    Text(String),
    Number(u64),
}

impl VehicleRef {
    fn into_string(self) -> String {
        match self {
            VehicleRef::Text(s) => s,
            VehicleRef::Number(n) => n.to_string(),
        }
    }
}

/// Parses lines and groups them into sessions in file order. A session id
/// that reappears after another session is an error.
fn grouped<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(String, Vec<(usize, Line<T>)>)>> {
    let text = read_text(path)?;
    let mut out: Vec<(String, Vec<(usize, Line<T>)>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line<T> = serde_json::from_str(raw).map_err(|e| Error::input(path, format!("line {lineno}: {e}")))?;
        match out.last_mut() {
            Some((sid, events)) if *sid == line.sid => events.push((lineno, line)),
            _ => {
                if !seen.insert(line.sid.clone()) {
                    return Err(Error::input(path, format!("line {lineno}: session {:?} is not contiguous; sort by (sid, t)", line.sid)));
                }
                out.push((line.sid.clone(), vec![(lineno, line)]));
            }
        }
    }
    Ok(out)
}

fn zero_based(path: &Path, lineno: usize, k: usize) -> Result<usize> {
    if k == 0 {
        Err(Error::input(path, format!("line {lineno}: cluster indices are one-based; found 0")))
    } else {
        Ok(k - 1)
    }
}

/// Reads a cluster-level clickstream. With `k` given, indices above `k` are
/// rejected.
pub fn load_sessions(path: &Path, k: Option<usize>) -> Result<Vec<Session>> {
    let mut sessions = Vec::new();
    for (sid, lines) in grouped::<usize>(path)? {
        let first_line = lines[0].0;
        let mut events = Vec::with_capacity(lines.len());
        for (lineno, l) in lines {
            let action = match l.action {
                LineAction::Search(c) => Action::Search(zero_based(path, lineno, c)?),
                LineAction::Convert(c) => Action::Convert(zero_based(path, lineno, c)?),
                LineAction::Exit => Action::Exit,
            };
            let recs = l.recs.iter().map(|&r| zero_based(path, lineno, r)).collect::<Result<Vec<_>>>()?;
            events.push(Event { t: l.t, action, recs });
        }
        let s = Session::new(sid, events, k).map_err(|e| Error::input(path, format!("line {first_line}: {e}")))?;
        sessions.push(s);
    }
    Ok(sessions)
}

/// One JSON object per event, one-based indices.
pub fn sessions_to_jsonl(sessions: &[Session]) -> String {
    let mut out = String::new();
    for s in sessions {
        for e in &s.events {
            let action = match e.action {
                Action::Search(c) => LineAction::Search(c + 1),
                Action::Convert(c) => LineAction::Convert(c + 1),
                Action::Exit => LineAction::Exit,
            };
            let line = Line { sid: s.id.clone(), t: e.t, action, recs: e.recs.iter().map(|r| r + 1).collect() };
            let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("serialisable"));
        }
    }
    out
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    write_bytes(path, sessions_to_jsonl(sessions).as_bytes())
}

/// Reads a vehicle-level clickstream for re-coding.
pub fn load_raw_sessions(path: &Path) -> Result<Vec<RawSession>> {
    let mut sessions = Vec::new();
    for (sid, lines) in grouped::<VehicleRef>(path)? {
        let events = lines
            .into_iter()
            .map(|(_, l)| RawEvent {
                t: l.t,
                action: match l.action {
                    LineAction::Search(v) => RawAction::Search(v.into_string()),
                    LineAction::Convert(v) => RawAction::Convert(v.into_string()),
                    LineAction::Exit => RawAction::Exit,
                },
                recs: l.recs.into_iter().map(VehicleRef::into_string).collect(),
            })
            .collect();
        sessions.push(RawSession { id: sid, events });
    }
    Ok(sessions)
}

pub fn write_raw_sessions(path: &Path, sessions: &[RawSession]) -> Result<()> {
    let mut out = String::new();
    for s in sessions {
        for e in &s.events {
            let action = match &e.action {
                RawAction::Search(v) => LineAction::Search(v.clone()),
                RawAction::Convert(v) => LineAction::Convert(v.clone()),
                RawAction::Exit => LineAction::Exit,
            };
            let line = Line { sid: s.id.clone(), t: e.t, action, recs: e.recs.clone() };
            let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("serialisable"));
        }
    }
    write_bytes(path, out.as_bytes())
}
