use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Periodicity {
    Periodic,
    Aperiodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Low,
    Medium,
    High,
}

/// Periodicity together with the resource class, which only aperiodic
/// processes carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Periodic,
    Aperiodic(ResourceClass),
}

impl Class {
    pub fn from_parts(periodicity: Periodicity, resource_class: Option<ResourceClass>) -> Result<Self> {
        match (periodicity, resource_class) {
            (Periodicity::Periodic, None) => Ok(Class::Periodic),
            (Periodicity::Aperiodic, Some(rc)) => Ok(Class::Aperiodic(rc)),
            (Periodicity::Periodic, Some(_)) => Err(Error::input("periodic processes take no resource class")),
            (Periodicity::Aperiodic, None) => Err(Error::input("aperiodic processes need a resource class")),
        }
    }

    pub fn periodicity(self) -> Periodicity {
        match self {
            Class::Periodic => Periodicity::Periodic,
            Class::Aperiodic(_) => Periodicity::Aperiodic,
        }
    }

    pub fn resource_class(self) -> Option<ResourceClass> {
        match self {
            Class::Periodic => None,
            Class::Aperiodic(rc) => Some(rc),
        }
    }

    /// Periodic and low-range aperiodic work may be time-sliced; medium and
    /// high aperiodic work runs in one go.
    pub fn mode(self) -> Mode {
        match self {
            Class::Periodic | Class::Aperiodic(ResourceClass::Low) => Mode::Swappable,
            Class::Aperiodic(_) => Mode::RunToCompletion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Swappable,
    RunToCompletion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubProcess {
    pub duration: u64,
    pub remaining: u64,
    pub output_value: f64,
    pub assigned_processor: Option<usize>,
}

impl SubProcess {
    pub fn new(duration: u64, output_value: f64) -> Self {
        SubProcess {
            duration,
            remaining: duration,
            output_value,
            assigned_processor: None,
        }
    }

    pub fn executed(&self) -> u64 {
        self.duration - self.remaining
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub id: ProcessId,
    pub class: Class,
    pub arrival_time: u64,
    pub subprocesses: Vec<SubProcess>,
}

impl Process {
    pub fn new(id: u32, class: Class, arrival_time: u64, subprocesses: Vec<SubProcess>) -> Self {
        Process {
            id: ProcessId(id),
            class,
            arrival_time,
            subprocesses,
        }
    }

    /// Single-subprocess convenience constructor.
    pub fn single(id: u32, class: Class, arrival_time: u64, duration: u64, output_value: f64) -> Self {
        Process::new(id, class, arrival_time, vec![SubProcess::new(duration, output_value)])
    }

    pub fn check(&self) -> Result<()> {
        if self.subprocesses.is_empty() {
            return Err(Error::input(format!("process {} has no subprocesses", self.id)));
        }
        for (j, sub) in self.subprocesses.iter().enumerate() {
            if sub.duration == 0 {
                return Err(Error::input(format!(
                    "process {} subprocess {j} has zero duration",
                    self.id
                )));
            }
            if sub.remaining > sub.duration {
                return Err(Error::input(format!(
                    "process {} subprocess {j} has remaining > duration",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> u64 {
        self.subprocesses.iter().map(|s| s.duration).sum()
    }
}
