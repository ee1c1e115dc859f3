use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::process::{Class, Mode, Process, ProcessId};
use super::trace::{Event, EventKind, SimTrace};
use super::workload::Workload;
use crate::error::{Error, Result};
use crate::validator::Profile;

pub const DEFAULT_QUANTUM: u64 = 2;
pub const DEFAULT_TICK_LIMIT: u64 = 1_000_000;

/// Receives each completed subprocess output; `true` accepts it.
pub trait OutputValidator {
    fn validate(&mut self, value: f64) -> bool;
}

impl OutputValidator for Profile {
    fn validate(&mut self, value: f64) -> bool {
        self.validate_in_place(value).accepted
    }
}

/// Validator that accepts every output.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl OutputValidator for AcceptAll {
    fn validate(&mut self, _value: f64) -> bool {
        true
    }
}

impl<V: OutputValidator + ?Sized> OutputValidator for &mut V {
    fn validate(&mut self, value: f64) -> bool {
        (**self).validate(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub processors: usize,
    pub quantum: u64,
    pub tick_limit: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            processors: 2,
            quantum: DEFAULT_QUANTUM,
            tick_limit: DEFAULT_TICK_LIMIT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubRef {
    pub process: ProcessId,
    pub index: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Processor {
    pub id: usize,
    pub current: Option<SubRef>,
    /// Round-robin ring of subprocesses waiting for this processor.
    pub ready: VecDeque<SubRef>,
    pub busy_ticks: u64,
    /// Declared duration of every subprocess placed here that the tracker
    /// has not yet reported.
    pub load: u64,
    slice_used: u64,
    completed: Vec<SubRef>,
}

impl Processor {
    fn new(id: usize) -> Self {
        Processor {
            id,
            current: None,
            ready: VecDeque::new(),
            busy_ticks: 0,
            load: 0,
            slice_used: 0,
            completed: Vec::new(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none() && self.ready.is_empty()
    }

    /// Completed subprocesses awaiting a tracker report.
    pub fn unreported(&self) -> &[SubRef] {
        &self.completed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Queued,
    InFlight,
    Completed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRecord {
    pub process: Process,
    pub status: Status,
    pub arrived_at: u64,
    pub finished_at: Option<u64>,
    /// Index of the next subprocess to release.
    next_sub: usize,
    unreported: usize,
}

impl ProcessRecord {
    /// Subprocesses handed to the allocator so far.
    pub fn released(&self) -> usize {
        self.next_sub
    }

    pub fn turnaround(&self) -> Option<u64> {
        match self.status {
            Status::Completed => self.finished_at.map(|f| f - self.arrived_at),
            _ => None,
        }
    }
}

/// Whole middleware state: the manager queue, the in-flight list, the
/// processors, the process table, and the validator fed by completions.
pub struct Simulation<V> {
    config: SimConfig,
    clock: u64,
    pm_queue: VecDeque<ProcessId>,
    in_flight: Vec<ProcessId>,
    processes: BTreeMap<ProcessId, ProcessRecord>,
    processors: Vec<Processor>,
    last_dispatch: Option<u64>,
    trace: SimTrace,
    validator: V,
}

impl<V: OutputValidator> Simulation<V> {
    pub fn new(config: SimConfig, validator: V) -> Result<Self> {
        if config.processors == 0 {
            return Err(Error::input("at least one processor is required"));
        }
        if config.quantum == 0 {
            return Err(Error::input("quantum must be at least one tick"));
        }
        Ok(Simulation {
            config,
            clock: 0,
            pm_queue: VecDeque::new(),
            in_flight: Vec::new(),
            processes: BTreeMap::new(),
            processors: (0..config.processors).map(Processor::new).collect(),
            last_dispatch: None,
            trace: SimTrace::default(),
            validator,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn pm_queue(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.pm_queue.iter().copied()
    }

    pub fn in_flight(&self) -> &[ProcessId] {
        &self.in_flight
    }

    pub fn processors(&self) -> &[Processor] {
        &self.processors
    }

    pub fn process(&self, id: ProcessId) -> Option<&ProcessRecord> {
        self.processes.get(&id)
    }

    pub fn processes(&self) -> impl Iterator<Item = &ProcessRecord> {
        self.processes.values()
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    pub fn validator(&self) -> &V {
        &self.validator
    }

    pub fn into_parts(self) -> (SimTrace, V) {
        (self.trace, self.validator)
    }

    /// No queued, in-flight or running work remains.
    pub fn is_quiescent(&self) -> bool {
        self.pm_queue.is_empty() && self.in_flight.is_empty() && self.processors.iter().all(Processor::is_idle)
    }

    fn emit(&mut self, kind: EventKind, process: ProcessId, subprocess: Option<usize>, processor: Option<usize>) {
        self.trace.push(Event {
            tick: self.clock,
            kind,
            process,
            subprocess,
            processor,
        });
    }

    /// Appends a process to the manager queue at the current tick.
    pub fn submit(&mut self, process: Process) -> Result<()> {
        process.check()?;
        if self.processes.contains_key(&process.id) {
            return Err(Error::DuplicateProcess(process.id.0));
        }
        let id = process.id;
        self.processes.insert(
            id,
            ProcessRecord {
                process,
                status: Status::Queued,
                arrived_at: self.clock,
                finished_at: None,
                next_sub: 0,
                unreported: 0,
            },
        );
        self.pm_queue.push_back(id);
        self.emit(EventKind::Arrival, id, None, None);
        Ok(())
    }

    /// Whether the allocator takes another process this tick.
    pub fn allocator_accepting(&self) -> bool {
        self.last_dispatch != Some(self.clock)
    }

    /// Hands the head of the manager queue to the allocator and moves it to
    /// the in-flight list. No-op when the queue is empty or the allocator
    /// has already taken a process this tick.
    pub fn dispatch(&mut self) -> Option<ProcessId> {
        if !self.allocator_accepting() {
            return None;
        }
        let id = self.pm_queue.pop_front()?;
        self.last_dispatch = Some(self.clock);
        self.in_flight.push(id);
        self.processes.get_mut(&id).expect("queued process is known").status = Status::InFlight;
        self.emit(EventKind::Dispatch, id, None, None);
        self.allocate(id);
        Some(id)
    }

    /// Least-loaded processor, lowest id on ties.
    pub fn least_loaded(&self) -> usize {
        self.processors
            .iter()
            .min_by_key(|p| (p.load, p.id))
            .map(|p| p.id)
            .expect("at least one processor")
    }

    /// Places the next unreleased subprocess of `id` on the least-loaded
    /// processor, with its scheduling mode taken from the process class.
    pub fn allocate(&mut self, id: ProcessId) -> Option<usize> {
        let record = self.processes.get(&id)?;
        if record.status != Status::InFlight || record.next_sub >= record.process.subprocesses.len() {
            return None;
        }
        let index = record.next_sub;
        let mode = record.process.class.mode();
        let target = self.least_loaded();

        let record = self.processes.get_mut(&id).expect("checked above");
        record.next_sub += 1;
        let sub = &mut record.process.subprocesses[index];
        sub.assigned_processor = Some(target);
        let duration = sub.duration;

        let proc = &mut self.processors[target];
        proc.load += duration;
        proc.ready.push_back(SubRef {
            process: id,
            index,
            mode,
        });
        self.emit(EventKind::Allocate, id, Some(index), Some(target));
        Some(target)
    }

    /// Changes a process's class. Subprocesses already placed keep their
    /// mode; later ones use the new class.
    pub fn reclassify(&mut self, id: ProcessId, class: Class) -> Result<()> {
        let record = self
            .processes
            .get_mut(&id)
            .ok_or_else(|| Error::input(format!("cannot reclassify unknown process {id}")))?;
        record.process.class = class;
        let next = record.next_sub;
        self.emit(EventKind::Reclassify, id, Some(next), None);
        Ok(())
    }

    /// Advances the clock by one tick.
    pub fn tick(&mut self) {
        for p in 0..self.processors.len() {
            if self.processors[p].current.is_none() {
                if let Some(next) = self.processors[p].ready.pop_front() {
                    self.processors[p].current = Some(next);
                    self.processors[p].slice_used = 0;
                    self.emit(EventKind::Start, next.process, Some(next.index), Some(p));
                }
            }
        }

        for proc in &mut self.processors {
            if let Some(cur) = proc.current {
                let sub = &mut self
                    .processes
                    .get_mut(&cur.process)
                    .expect("running process is known")
                    .process
                    .subprocesses[cur.index];
                sub.remaining -= 1;
                proc.busy_ticks += 1;
                proc.slice_used += 1;
            }
        }

        self.clock += 1;

        for p in 0..self.processors.len() {
            if let Some(cur) = self.processors[p].current {
                let remaining = self.processes[&cur.process].process.subprocesses[cur.index].remaining;
                if remaining == 0 {
                    let proc = &mut self.processors[p];
                    proc.current = None;
                    proc.completed.push(cur);
                    self.processes.get_mut(&cur.process).expect("known").unreported += 1;
                    self.emit(EventKind::CompleteSub, cur.process, Some(cur.index), Some(p));
                    self.on_subprocess_complete(cur.process, cur.index);
                } else if cur.mode == Mode::Swappable && self.processors[p].slice_used >= self.config.quantum {
                    let proc = &mut self.processors[p];
                    if proc.ready.is_empty() {
                        proc.slice_used = 0;
                    } else {
                        proc.current = None;
                        proc.ready.push_back(cur);
                        self.emit(EventKind::Preempt, cur.process, Some(cur.index), Some(p));
                    }
                }
            }
        }

        for p in 0..self.processors.len() {
            if self.processors[p].is_idle() && !self.processors[p].completed.is_empty() {
                self.track(p);
            }
        }
    }

    /// Feeds the finished subprocess's output to the validator; accepted
    /// outputs release the next subprocess (or complete the process),
    /// rejected ones cancel the rest of the process.
    fn on_subprocess_complete(&mut self, id: ProcessId, index: usize) {
        let record = &self.processes[&id];
        let value = record.process.subprocesses[index].output_value;
        let processor = record.process.subprocesses[index].assigned_processor;
        let last = index + 1 == record.process.subprocesses.len();

        if self.validator.validate(value) {
            self.emit(EventKind::Validated, id, Some(index), processor);
            if last {
                let record = self.processes.get_mut(&id).expect("known");
                record.status = Status::Completed;
                record.finished_at = Some(self.clock);
                self.emit(EventKind::CompleteProc, id, None, None);
            } else {
                self.allocate(id);
            }
        } else {
            let record = self.processes.get_mut(&id).expect("known");
            record.status = Status::Rejected;
            record.finished_at = Some(self.clock);
            self.emit(EventKind::Rejected, id, Some(index), processor);
        }
    }

    /// Process tracker report for a processor that has just gone idle:
    /// releases the reported subprocesses from the processor's load and
    /// drops finished processes from the in-flight list.
    pub fn track(&mut self, processor: usize) {
        let reported = std::mem::take(&mut self.processors[processor].completed);
        for sub in reported {
            let record = self.processes.get_mut(&sub.process).expect("known");
            record.unreported -= 1;
            let duration = record.process.subprocesses[sub.index].duration;
            self.processors[processor].load -= duration;
        }
        let processes = &self.processes;
        self.in_flight.retain(|id| {
            let r = &processes[id];
            !(matches!(r.status, Status::Completed | Status::Rejected) && r.unreported == 0)
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub horizon: u64,
    pub busy_ticks: Vec<u64>,
    pub utilization: Vec<f64>,
    pub completed: usize,
    pub rejected_processes: usize,
    pub validated: usize,
    pub rejected: usize,
    pub mean_turnaround: Option<f64>,
    pub max_turnaround: Option<u64>,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: SimTrace,
    pub metrics: SimMetrics,
    pub records: Vec<ProcessRecord>,
}

/// Runs `workload` from tick 0 until quiescence or the tick limit.
pub fn run_simulation<V: OutputValidator>(config: SimConfig, workload: &Workload, validator: V) -> Result<SimOutcome> {
    workload.check()?;
    let mut sim = Simulation::new(config, validator)?;

    let mut arrivals: Vec<&Process> = workload.processes.iter().collect();
    arrivals.sort_by_key(|p| p.arrival_time);
    let mut arrivals = arrivals.into_iter().peekable();
    let mut changes = workload.reclassifications.clone();
    changes.sort_by_key(|r| r.tick);
    let mut changes = changes.into_iter().peekable();

    let truncated = loop {
        while let Some(p) = arrivals.next_if(|p| p.arrival_time <= sim.clock()) {
            sim.submit(p.clone())?;
        }
        while let Some(r) = changes.next_if(|r| r.tick <= sim.clock()) {
            sim.reclassify(r.process, r.class)?;
        }
        sim.dispatch();
        if sim.is_quiescent() && arrivals.peek().is_none() {
            break false;
        }
        if sim.clock() >= config.tick_limit {
            break true;
        }
        sim.tick();
    };

    let horizon = sim.clock();
    let busy_ticks: Vec<u64> = sim.processors().iter().map(|p| p.busy_ticks).collect();
    let utilization = busy_ticks
        .iter()
        .map(|&b| if horizon == 0 { 0.0 } else { b as f64 / horizon as f64 })
        .collect();
    let turnarounds: Vec<u64> = sim.processes().filter_map(ProcessRecord::turnaround).collect();
    let mean_turnaround = if turnarounds.is_empty() {
        None
    } else {
        Some(turnarounds.iter().sum::<u64>() as f64 / turnarounds.len() as f64)
    };
    let records: Vec<ProcessRecord> = sim.processes().cloned().collect();
    let trace = sim.trace().clone();
    let metrics = SimMetrics {
        horizon,
        busy_ticks,
        utilization,
        completed: records.iter().filter(|r| r.status == Status::Completed).count(),
        rejected_processes: records.iter().filter(|r| r.status == Status::Rejected).count(),
        validated: trace.count(EventKind::Validated),
        rejected: trace.count(EventKind::Rejected),
        mean_turnaround,
        max_turnaround: turnarounds.iter().copied().max(),
        truncated,
    };
    Ok(SimOutcome {
        trace,
        metrics,
        records,
    })
}
