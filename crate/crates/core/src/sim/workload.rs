//! Workload files: one JSON record per line, one line per process.
//!
//! ```text
//! {"id":1,"periodicity":"periodic","resource_class":null,"arrival_tick":0,"subprocesses":[[4,12.5]]}
//! {"id":2,"periodicity":"aperiodic","resource_class":"high","arrival_tick":3,"subprocesses":[[2,1.0],[5,80.0]]}
//! ```
//!
//! A record may also carry `"reclassify":[{"tick":..,"periodicity":..,"resource_class":..}]`
//! entries that change the process class mid-run. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::process::{Class, Periodicity, Process, ProcessId, ResourceClass, SubProcess};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reclassification {
    pub tick: u64,
    pub process: ProcessId,
    pub class: Class,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub processes: Vec<Process>,
    pub reclassifications: Vec<Reclassification>,
}

#[derive(Serialize, Deserialize)]
struct ClassChange {
    tick: u64,
    periodicity: Periodicity,
    #[serde(default)]
    resource_class: Option<ResourceClass>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: u32,
    periodicity: Periodicity,
    #[serde(default)]
    resource_class: Option<ResourceClass>,
    arrival_tick: u64,
    subprocesses: Vec<(u64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    reclassify: Vec<ClassChange>,
}

impl Workload {
    pub fn new(processes: Vec<Process>) -> Self {
        Workload {
            processes,
            reclassifications: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    /// Unique ids, well-formed processes, and reclassifications that name
    /// known processes.
    pub fn check(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for p in &self.processes {
            p.check()?;
            if !ids.insert(p.id) {
                return Err(Error::DuplicateProcess(p.id.0));
            }
        }
        for r in &self.reclassifications {
            if !ids.contains(&r.process) {
                return Err(Error::input(format!(
                    "reclassification names unknown process {}",
                    r.process
                )));
            }
        }
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut workload = Workload::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: Record =
                serde_json::from_str(line).map_err(|e| Error::input(format!("workload line {}: {e}", lineno + 1)))?;
            let class = Class::from_parts(rec.periodicity, rec.resource_class)?;
            let subs = rec
                .subprocesses
                .into_iter()
                .map(|(d, v)| SubProcess::new(d, v))
                .collect();
            for change in rec.reclassify {
                workload.reclassifications.push(Reclassification {
                    tick: change.tick,
                    process: ProcessId(rec.id),
                    class: Class::from_parts(change.periodicity, change.resource_class)?,
                });
            }
            workload
                .processes
                .push(Process::new(rec.id, class, rec.arrival_tick, subs));
        }
        workload.check()?;
        Ok(workload)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.processes {
            let rec = Record {
                id: p.id.0,
                periodicity: p.class.periodicity(),
                resource_class: p.class.resource_class(),
                arrival_tick: p.arrival_time,
                subprocesses: p.subprocesses.iter().map(|s| (s.duration, s.output_value)).collect(),
                reclassify: self
                    .reclassifications
                    .iter()
                    .filter(|r| r.process == p.id)
                    .map(|r| ClassChange {
                        tick: r.tick,
                        periodicity: r.class.periodicity(),
                        resource_class: r.class.resource_class(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}
