//! Timestamped global-event traces.
//!
//! File format: CSV with header `t,event,params`. `t` is seconds on the trace
//! clock, `params` an optional `;`-separated list of `key=value` bindings. A
//! leading `# sync=<name>` line names the synchronization event (default
//! `sync`). Rows with equal timestamps are kept in file order.

use std::fmt::Write as _;

use csv::{ReaderBuilder, Trim};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexer::is_ident;
use crate::model::Params;

pub const DEFAULT_SYNC_EVENT: &str = "sync";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub name: String,
    pub params: Params,
}

impl Event {
    pub fn new(t: f64, name: impl Into<String>) -> Self {
        Self {
            t,
            name: name.into(),
            params: Params::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTrace {
    events: Vec<Event>,
    sync_name: Option<String>,
}

impl EventTrace {
    /// Builds a trace, checking timestamp ordering and sync uniqueness.
    /// Line numbers in errors are 1-based positions in `events` offset by the
    /// header line.
    pub fn new(events: Vec<Event>, sync_name: Option<String>) -> Result<Self> {
        let mut prev = 0.0_f64;
        let mut sync_seen = false;
        for (i, e) in events.iter().enumerate() {
            let line = i + 2;
            check_event(e, line)?;
            if i > 0 && e.t < prev {
                return Err(Error::InvalidTrace {
                    line,
                    message: format!("timestamp {} precedes previous timestamp {prev}", e.t),
                });
            }
            prev = e.t;
            if sync_name.as_deref() == Some(e.name.as_str()) {
                if sync_seen {
                    return Err(Error::InvalidTrace {
                        line,
                        message: "duplicate sync event".into(),
                    });
                }
                sync_seen = true;
            }
        }
        Ok(Self { events, sync_name })
    }

    pub fn parse(text: &str) -> Result<Self> {
        load_trace(text)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn sync_name(&self) -> Option<&str> {
        self.sync_name.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.t)
    }

    /// Timestamp of the synchronization event.
    pub fn find_sync(&self) -> Result<f64> {
        let name = self.sync_name.as_deref().ok_or(Error::SyncNotFound)?;
        self.events
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.t)
            .ok_or(Error::SyncNotFound)
    }

    /// Returns a copy with every timestamp shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Result<Self> {
        let events = self
            .events
            .iter()
            .map(|e| Event {
                t: e.t + dt,
                ..e.clone()
            })
            .collect();
        Self::new(events, self.sync_name.clone())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.sync_name {
            let _ = writeln!(out, "# sync={name}");
        }
        out.push_str("t,event,params\n");
        for e in &self.events {
            let params: Vec<_> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{},{},{}", e.t, e.name, params.join(";"));
        }
        out
    }
}

fn check_event(e: &Event, line: usize) -> Result<()> {
    if !e.t.is_finite() || e.t < 0.0 {
        return Err(Error::InvalidTrace {
            line,
            message: format!("timestamp {} must be finite and non-negative", e.t),
        });
    }
    if !is_ident(&e.name) {
        return Err(Error::InvalidTrace {
            line,
            message: format!("invalid event name `{}`", e.name),
        });
    }
    for (k, v) in &e.params {
        if !is_ident(k) || !v.is_finite() {
            return Err(Error::InvalidTrace {
                line,
                message: format!("invalid parameter binding `{k}={v}`"),
            });
        }
    }
    Ok(())
}

fn parse_params(field: &str, line: usize) -> Result<Params> {
    let mut params = Params::new();
    for pair in field.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::InvalidTrace {
            line,
            message: format!("malformed parameter `{pair}`, expected key=value"),
        };
        let (k, v) = pair.split_once('=').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        if params.insert(k.trim().to_string(), v).is_some() {
            return Err(Error::InvalidTrace {
                line,
                message: format!("parameter `{}` bound twice", k.trim()),
            });
        }
    }
    Ok(params)
}

pub fn load_trace(text: &str) -> Result<EventTrace> {
    let mut sync_name = Some(DEFAULT_SYNC_EVENT.to_string());
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(meta) = line.strip_prefix('#') else {
            break;
        };
        if let Some(name) = meta.trim().strip_prefix("sync=") {
            sync_name = Some(name.trim().to_string());
        }
    }

    let mut reader = ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let header_line = |r: &csv::StringRecord| r.position().map_or(1, |p| p.line() as usize);
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidTrace {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if !(names == ["t", "event"] || names == ["t", "event", "params"]) {
        return Err(Error::InvalidTrace {
            line: header_line(&headers),
            message: format!("expected header `t,event,params`, found `{}`", names.join(",")),
        });
    }

    let mut events = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidTrace {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = header_line(&record);
        if !(2..=3).contains(&record.len()) {
            return Err(Error::InvalidTrace {
                line,
                message: format!("expected 2 or 3 fields, found {}", record.len()),
            });
        }
        let t: f64 = record[0].parse().map_err(|_| Error::InvalidTrace {
            line,
            message: format!("malformed timestamp `{}`", &record[0]),
        })?;
        let params = parse_params(record.get(2).unwrap_or(""), line)?;
        events.push(Event {
            t,
            name: record[1].to_string(),
            params,
        });
        lines.push(line);
    }

    // Re-run the structural checks so errors carry real file lines.
    EventTrace::new(events, sync_name).map_err(|e| match e {
        Error::InvalidTrace { line, message } => Error::InvalidTrace {
            line: lines.get(line - 2).copied().unwrap_or(line),
            message,
        },
        other => other,
    })
}
