use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::process::ProcessId;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "tick\tevent\tprocess\tsubprocess\tprocessor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Dispatch,
    Allocate,
    Start,
    Preempt,
    CompleteSub,
    CompleteProc,
    Validated,
    Rejected,
    Reclassify,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::Arrival,
        EventKind::Dispatch,
        EventKind::Allocate,
        EventKind::Start,
        EventKind::Preempt,
        EventKind::CompleteSub,
        EventKind::CompleteProc,
        EventKind::Validated,
        EventKind::Rejected,
        EventKind::Reclassify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Dispatch => "dispatch",
            EventKind::Allocate => "allocate",
            EventKind::Start => "start",
            EventKind::Preempt => "preempt",
            EventKind::CompleteSub => "complete_sub",
            EventKind::CompleteProc => "complete_proc",
            EventKind::Validated => "validated",
            EventKind::Rejected => "rejected",
            EventKind::Reclassify => "reclassify",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown event kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub process: ProcessId,
    pub subprocess: Option<usize>,
    pub processor: Option<usize>,
}

/// Ordered event log of one simulation run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimTrace {
    events: Vec<Event>,
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn parse_opt(field: &str) -> Result<Option<usize>> {
    if field == "-" {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::input(format!("bad trace field {field:?}")))
}

impl SimTrace {
    pub(crate) fn push(&mut self, event: Event) {
        debug_assert!(self.events.last().is_none_or(|e| e.tick <= event.tick));
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Tab-separated export, one event per line after a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.events.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.tick,
                e.kind,
                e.process,
                opt(e.subprocess),
                opt(e.processor)
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_HEADER => {}
            _ => return Err(Error::input("trace is missing its header line")),
        }
        let mut events = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::input(format!("trace line has {} fields: {line:?}", f.len())));
            }
            let tick = f[0].parse().map_err(|_| Error::input(format!("bad tick {:?}", f[0])))?;
            let process = f[2]
                .parse()
                .map_err(|_| Error::input(format!("bad process id {:?}", f[2])))?;
            events.push(Event {
                tick,
                kind: f[1].parse()?,
                process: ProcessId(process),
                subprocess: parse_opt(f[3])?,
                processor: parse_opt(f[4])?,
            });
        }
        Ok(SimTrace { events })
    }
}
