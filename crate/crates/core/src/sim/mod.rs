//! Deterministic discrete-event simulation of the middleware stack.
//!
//! Time advances in integer ticks. Each tick, in order: due arrivals are
//! submitted to the manager queue, due reclassifications are applied, the
//! allocator takes at most one process from the queue, idle processors
//! start the head of their ready ring, every busy processor executes one
//! tick of work, and finally completions, quantum expiries and tracker
//! reports are handled in processor-id order. Start events carry the tick
//! at which execution begins; stop events (preempt, complete) carry the
//! tick at which it ended.

mod engine;
mod process;
mod trace;
mod workload;

pub use engine::{
    run_simulation, AcceptAll, OutputValidator, ProcessRecord, Processor, SimConfig, SimMetrics, SimOutcome,
    Simulation, Status, SubRef, DEFAULT_QUANTUM, DEFAULT_TICK_LIMIT,
};
pub use process::{Class, Mode, Periodicity, Process, ProcessId, ResourceClass, SubProcess};
pub use trace::{Event, EventKind, SimTrace, TRACE_HEADER};
pub use workload::{Reclassification, Workload};
