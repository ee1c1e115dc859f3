use serde::Serialize;
use validmw::sim::{SimOutcome, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Turnaround {
    pub mean: f64,
    pub max: u64,
}

/// Summary of one validate or simulate run. `validated + rejected +
/// preflagged + cancelled + unfinished == items`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub items: usize,
    pub validated: usize,
    pub rejected: usize,
    /// Transfers outside every size layer, never submitted.
    pub preflagged: usize,
    /// Subprocesses dropped because an earlier one of the same process was rejected.
    pub cancelled: usize,
    /// Subprocesses still pending when the tick limit hit.
    pub unfinished: usize,
    pub utilization: Vec<f64>,
    pub turnaround: Option<Turnaround>,
    pub horizon: Option<u64>,
    pub truncated: bool,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
}

impl RunReport {
    pub fn for_stream(validated: usize, rejected: usize, threshold: f64) -> Self {
        RunReport {
            items: validated + rejected,
            validated,
            rejected,
            preflagged: 0,
            cancelled: 0,
            unfinished: 0,
            utilization: Vec::new(),
            turnaround: None,
            horizon: None,
            truncated: false,
            threshold: Some(threshold),
            seed: None,
        }
    }

    pub fn for_simulation(outcome: &SimOutcome, preflagged: usize, threshold: Option<f64>, seed: u64) -> Self {
        let m = &outcome.metrics;
        let total: usize = outcome.records.iter().map(|r| r.process.subprocesses.len()).sum();
        let cancelled: usize = outcome
            .records
            .iter()
            .filter(|r| r.status == Status::Rejected)
            .map(|r| r.process.subprocesses.len() - r.released())
            .sum();
        let turnaround = m
            .mean_turnaround
            .zip(m.max_turnaround)
            .map(|(mean, max)| Turnaround { mean, max });
        RunReport {
            items: total + preflagged,
            validated: m.validated,
            rejected: m.rejected,
            preflagged,
            cancelled,
            unfinished: total - m.validated - m.rejected - cancelled,
            utilization: m.utilization.clone(),
            turnaround,
            horizon: Some(m.horizon),
            truncated: m.truncated,
            threshold,
            seed: Some(seed),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} items: {} validated, {} rejected",
            self.items, self.validated, self.rejected
        );
        if self.preflagged > 0 {
            s += &format!(", {} pre-flagged", self.preflagged);
        }
        if self.cancelled > 0 {
            s += &format!(", {} cancelled", self.cancelled);
        }
        if self.unfinished > 0 {
            s += &format!(", {} unfinished", self.unfinished);
        }
        if let Some(t) = self.threshold {
            s += &format!(" (threshold {t})");
        }
        if !self.utilization.is_empty() {
            let u: Vec<String> = self.utilization.iter().map(|u| format!("{:.3}", u)).collect();
            s += &format!("\nutilization: {}", u.join(" "));
        }
        if let Some(t) = self.turnaround {
            s += &format!("\nturnaround: mean {:.2}, max {}", t.mean, t.max);
        }
        if self.truncated {
            s += "\ntick limit reached before the workload drained";
        }
        s
    }
}
