//! Synthetic traffic for the two applications: card transactions drawn
//! from a spending profile, and file transfers drawn from size layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Class, Process, ResourceClass, SimConfig, Workload, DEFAULT_QUANTUM, DEFAULT_TICK_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpenderKind {
    LowSpender,
    MediumSpender,
    HighSpender,
}

pub const DEFAULT_CARD_RANGES: [(f64, f64); 3] = [(5.0, 100.0), (150.0, 600.0), (1000.0, 3000.0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpendingProfileSpec {
    pub kind: SpenderKind,
    /// Low, medium and high amount intervals.
    pub ranges: [(f64, f64); 3],
    /// Probability of drawing from each interval.
    pub mix: [f64; 3],
}

impl SpendingProfileSpec {
    pub fn preset(kind: SpenderKind) -> Self {
        let mix = match kind {
            SpenderKind::LowSpender => [0.9, 0.08, 0.02],
            SpenderKind::MediumSpender => [0.25, 0.65, 0.1],
            SpenderKind::HighSpender => [0.1, 0.3, 0.6],
        };
        SpendingProfileSpec {
            kind,
            ranges: DEFAULT_CARD_RANGES,
            mix,
        }
    }

    pub fn check(&self) -> Result<()> {
        check_mix(&self.mix)?;
        check_intervals(&self.ranges)
    }
}

fn check_mix(mix: &[f64]) -> Result<()> {
    if mix.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::input("mix entries must lie in [0, 1]"));
    }
    let sum: f64 = mix.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("mix sums to {sum}, not 1")));
    }
    Ok(())
}

fn check_intervals(intervals: &[(f64, f64)]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::input("at least one interval is required"));
    }
    for &(lo, hi) in intervals {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::input(format!("interval ({lo}, {hi}) is empty or not finite")));
        }
    }
    if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
        return Err(Error::input("intervals must be ascending and non-overlapping"));
    }
    Ok(())
}

fn pick(rng: &mut ChaCha8Rng, mix: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in mix.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    mix.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn splice(values: &mut [f64], injections: &[(usize, f64)]) -> Result<()> {
    for &(pos, v) in injections {
        let slot = values
            .get_mut(pos)
            .ok_or_else(|| Error::input(format!("injection position {pos} is past the stream end")))?;
        *slot = v;
    }
    Ok(())
}

/// Seeded stream of transaction amounts (rounded to cents) with the given
/// fraud amounts written over their positions. Every position consumes the
/// same random draws, so injections never shift the genuine values.
pub fn gen_card_stream(
    spec: &SpendingProfileSpec,
    length: usize,
    fraud: &[(usize, f64)],
    seed: u64,
) -> Result<Vec<f64>> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = (0..length)
        .map(|_| {
            let (lo, hi) = spec.ranges[pick(&mut rng, &spec.mix)];
            (rng.gen_range(lo..hi) * 100.0).round() / 100.0
        })
        .collect();
    splice(&mut out, fraud)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Ascending, non-overlapping `(min, max)` size bounds, inclusive.
    pub layers: Vec<(f64, f64)>,
    /// Probability of drawing from each layer; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<Vec<f64>>,
}

impl LayerSpec {
    pub fn new(layers: Vec<(f64, f64)>) -> Result<Self> {
        let spec = LayerSpec { layers, mix: None };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        check_intervals(&self.layers)?;
        if let Some(mix) = &self.mix {
            if mix.len() != self.layers.len() {
                return Err(Error::input("layer mix length differs from the layer count"));
            }
            check_mix(mix)?;
        }
        Ok(())
    }

    /// Index of the first layer containing `size`; `None` means the transfer
    /// fits no layer and is inconsistent before any likelihood check.
    pub fn layer_of(&self, size: f64) -> Option<usize> {
        self.layers.iter().position(|&(lo, hi)| lo <= size && size <= hi)
    }

    /// Lowest third of the layers is low range, middle third medium, top third high.
    pub fn resource_class(&self, layer: usize) -> ResourceClass {
        match layer * 3 / self.layers.len() {
            0 => ResourceClass::Low,
            1 => ResourceClass::Medium,
            _ => ResourceClass::High,
        }
    }

    fn weights(&self) -> Vec<f64> {
        self.mix
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.layers.len() as f64; self.layers.len()])
    }
}

/// Seeded stream of whole-unit transfer sizes drawn from the layers, with
/// the overload sizes written over their positions.
pub fn gen_transfer_stream(spec: &LayerSpec, length: usize, overload: &[(usize, f64)], seed: u64) -> Result<Vec<f64>> {
    spec.check()?;
    let weights = spec.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = (0..length)
        .map(|_| {
            let (lo, hi) = spec.layers[pick(&mut rng, &weights)];
            rng.gen_range(lo..=hi)
                .round()
                .clamp(lo.ceil(), hi.floor().max(lo.ceil()))
        })
        .collect();
    splice(&mut out, overload)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadPlan {
    /// One periodic single-subprocess process per transaction.
    Card { duration: u64, interarrival: u64 },
    /// One aperiodic process per in-layer transfer, classed by layer, with
    /// duration `ceil(size * ticks_per_unit)`.
    Transfer {
        layers: LayerSpec,
        ticks_per_unit: f64,
        interarrival: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioWorkload {
    pub workload: Workload,
    /// Stream positions that fit no layer and were never submitted.
    pub preflagged: Vec<usize>,
}

/// Maps a value stream onto middleware processes. Process ids are the
/// stream positions and item `i` arrives at tick `i * interarrival`.
pub fn scenario_to_workload(stream: &[f64], plan: &WorkloadPlan) -> Result<ScenarioWorkload> {
    let mut out = ScenarioWorkload::default();
    for (i, &value) in stream.iter().enumerate() {
        let id = u32::try_from(i).map_err(|_| Error::input("stream too long for process ids"))?;
        let process = match plan {
            WorkloadPlan::Card { duration, interarrival } => {
                Process::single(id, Class::Periodic, i as u64 * interarrival, (*duration).max(1), value)
            }
            WorkloadPlan::Transfer {
                layers,
                ticks_per_unit,
                interarrival,
            } => {
                let Some(layer) = layers.layer_of(value) else {
                    out.preflagged.push(i);
                    continue;
                };
                let duration = ((value * ticks_per_unit).ceil() as u64).max(1);
                let class = Class::Aperiodic(layers.resource_class(layer));
                Process::single(id, class, i as u64 * interarrival, duration, value)
            }
        };
        out.workload.processes.push(process);
    }
    Ok(out)
}

fn default_duration() -> u64 {
    2
}

fn default_interarrival() -> u64 {
    1
}

fn default_ticks_per_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Card {
        spender: SpenderKind,
        #[serde(default)]
        ranges: Option<[(f64, f64); 3]>,
        #[serde(default)]
        mix: Option<[f64; 3]>,
        #[serde(default)]
        fraud: Vec<(usize, f64)>,
        #[serde(default = "default_duration")]
        duration: u64,
        #[serde(default = "default_interarrival")]
        interarrival: u64,
    },
    Transfer {
        layers: Vec<(f64, f64)>,
        #[serde(default)]
        mix: Option<Vec<f64>>,
        #[serde(default)]
        overload: Vec<(usize, f64)>,
        #[serde(default = "default_ticks_per_unit")]
        ticks_per_unit: f64,
        #[serde(default = "default_interarrival")]
        interarrival: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub processors: usize,
    pub quantum: u64,
    pub tick_limit: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            processors: 2,
            quantum: DEFAULT_QUANTUM,
            tick_limit: DEFAULT_TICK_LIMIT,
        }
    }
}

/// Scenario configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub length: usize,
    #[serde(flatten)]
    pub kind: ScenarioKind,
    #[serde(default)]
    pub sim: SimSettings,
}

impl ScenarioConfig {
    pub fn card_spec(&self) -> Option<SpendingProfileSpec> {
        match &self.kind {
            ScenarioKind::Card {
                spender, ranges, mix, ..
            } => {
                let mut spec = SpendingProfileSpec::preset(*spender);
                if let Some(r) = ranges {
                    spec.ranges = *r;
                }
                if let Some(m) = mix {
                    spec.mix = *m;
                }
                Some(spec)
            }
            ScenarioKind::Transfer { .. } => None,
        }
    }

    pub fn layer_spec(&self) -> Option<LayerSpec> {
        match &self.kind {
            ScenarioKind::Transfer { layers, mix, .. } => Some(LayerSpec {
                layers: layers.clone(),
                mix: mix.clone(),
            }),
            ScenarioKind::Card { .. } => None,
        }
    }

    pub fn generate(&self) -> Result<Vec<f64>> {
        match &self.kind {
            ScenarioKind::Card { fraud, .. } => {
                gen_card_stream(&self.card_spec().expect("card"), self.length, fraud, self.seed)
            }
            ScenarioKind::Transfer { overload, .. } => {
                gen_transfer_stream(&self.layer_spec().expect("transfer"), self.length, overload, self.seed)
            }
        }
    }

    pub fn plan(&self) -> WorkloadPlan {
        match &self.kind {
            ScenarioKind::Card {
                duration, interarrival, ..
            } => WorkloadPlan::Card {
                duration: *duration,
                interarrival: *interarrival,
            },
            ScenarioKind::Transfer {
                ticks_per_unit,
                interarrival,
                ..
            } => WorkloadPlan::Transfer {
                layers: self.layer_spec().expect("transfer"),
                ticks_per_unit: *ticks_per_unit,
                interarrival: *interarrival,
            },
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            processors: self.sim.processors,
            quantum: self.sim.quantum,
            tick_limit: self.sim.tick_limit,
            seed: self.seed,
        }
    }
}
