//! The `validmw` command line: train validator profiles, validate value
//! streams, run middleware simulations and generate synthetic scenario data.

pub mod error;
pub mod io;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use validmw::scenarios::{scenario_to_workload, ScenarioConfig};
use validmw::sim::{run_simulation, AcceptAll, SimConfig, Workload, DEFAULT_QUANTUM, DEFAULT_TICK_LIMIT};
use validmw::validator::{train_profile, Profile, ProfileConfig};

use error::Classify;
pub use error::{CliError, CliResult, EXIT_BAD_INPUT, EXIT_RUNTIME};
pub use report::RunReport;

#[derive(Debug, Parser)]
#[command(
    name = "validmw",
    version,
    about = "HMM-validated middleware: train, validate, simulate, generate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a validator profile from a history CSV
    Train(TrainArgs),
    /// Validate a value stream against a profile, one verdict line per value
    Validate(ValidateArgs),
    /// Run a scenario or workload file through the middleware simulator
    Simulate(SimulateArgs),
    /// Write a synthetic scenario stream as CSV
    GenData(GenArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// History CSV with header `index,value`
    #[arg(long)]
    pub history: PathBuf,
    /// Where to write the profile document
    #[arg(long, short)]
    pub out: PathBuf,
    /// Hidden states
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    /// Observation symbols (k-means clusters)
    #[arg(long, default_value_t = 3)]
    pub symbols: usize,
    /// Sliding window length R
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Rejection threshold on the relative likelihood drop
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Seed for k-means restarts and the initial model
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum Baum-Welch iterations
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Stop once an iteration gains less log-likelihood than this
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Profile document written by `train`
    #[arg(long)]
    pub profile: PathBuf,
    /// Stream CSV with header `index,value`
    #[arg(long)]
    pub stream: PathBuf,
    /// Override the profile's threshold
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also write the JSON run report here
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["scenario", "workload"])))]
pub struct SimulateArgs {
    /// Scenario config (TOML)
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Workload file, one JSON process record per line
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Profile that validates each subprocess output; without one every output is accepted
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Override the profile's threshold
    #[arg(long, requires = "profile")]
    pub threshold: Option<f64>,
    /// Write the event trace (TSV) here
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the JSON run report here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Seed [default: scenario seed, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Processor count [default: scenario value, else 2]
    #[arg(long)]
    pub processors: Option<usize>,
    /// Round-robin quantum in ticks [default: scenario value, else 2]
    #[arg(long)]
    pub quantum: Option<u64>,
    /// Stop after this many ticks [default: scenario value, else 1000000]
    #[arg(long)]
    pub ticks_limit: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario config (TOML)
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario length
    #[arg(long)]
    pub length: Option<usize>,
    /// Override the scenario seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV [default: stdout]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => train(&a, out),
        Command::Validate(a) => validate(&a, out, err),
        Command::Simulate(a) => simulate(&a, out, err),
        Command::GenData(a) => gen_data(&a, out),
    }
}

fn emit(w: &mut dyn Write, text: &str) -> CliResult<()> {
    w.write_all(text.as_bytes()).runtime("cannot write output")
}

pub fn load_scenario(path: &Path) -> CliResult<ScenarioConfig> {
    let text = io::read_text(path)?;
    toml::from_str(&text).bad_input(format!("malformed scenario {}", path.display()))
}

pub fn load_profile(path: &Path, threshold: Option<f64>) -> CliResult<Profile> {
    let text = io::read_text(path)?;
    let profile = Profile::from_document(&text).bad_input(format!("malformed profile {}", path.display()))?;
    match threshold {
        Some(t) => profile.with_threshold(t).bad_input("bad --threshold"),
        None => Ok(profile),
    }
}

pub fn train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let rows = io::read_stream(&a.history)?;
    let history: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let config = ProfileConfig {
        n_states: a.states,
        n_symbols: a.symbols,
        window_length: a.window,
        threshold: a.threshold,
        train_iters: a.iters,
        train_tol: a.tol,
        seed: a.seed,
    };
    let (profile, summary) = train_profile(&history, &config).bad_input("training failed")?;
    io::write_text(&a.out, &profile.to_document())?;
    let q = profile.quantizer();
    let centroids: Vec<String> = q
        .centroids()
        .iter()
        .enumerate()
        .map(|(s, c)| format!("{}={c}", q.label(s)))
        .collect();
    emit(
        out,
        &format!(
            "log_likelihood\t{}\niterations\t{}\ncentroids\t{}\n",
            summary.final_log_likelihood(),
            summary.log_likelihood_history.len() - 1,
            centroids.join(" ")
        ),
    )
}

pub const VERDICT_HEADER: &str = "index\tvalue\tsymbol\talpha1\talpha2\tdelta_rel\tverdict";

pub fn validate(a: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let mut profile = load_profile(&a.profile, a.threshold)?;
    let rows = io::read_stream(&a.stream)?;
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(VERDICT_HEADER);
    text.push('\n');
    let (mut validated, mut rejected) = (0, 0);
    for row in &rows {
        let v = profile.validate_in_place(row.value);
        if v.accepted {
            validated += 1;
        } else {
            rejected += 1;
        }
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            row.index,
            row.value,
            profile.quantizer().label(v.symbol),
            v.alpha1,
            v.alpha2,
            v.delta_rel,
            if v.accepted { "valid" } else { "invalid" }
        ));
    }
    emit(out, &text)?;
    let report = RunReport::for_stream(validated, rejected, profile.threshold());
    if let Some(path) = &a.report {
        io::write_text(path, &report.to_json())?;
    }
    emit(err, &format!("{}\n", report.summary()))
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (workload, preflagged, mut config) = match (&a.scenario, &a.workload) {
        (Some(path), _) => {
            let mut scenario = load_scenario(path)?;
            if let Some(seed) = a.seed {
                scenario.seed = seed;
            }
            let stream = scenario.generate().bad_input("bad scenario")?;
            let mapped = scenario_to_workload(&stream, &scenario.plan()).bad_input("bad scenario")?;
            (mapped.workload, mapped.preflagged.len(), scenario.sim_config())
        }
        (None, Some(path)) => {
            let text = io::read_text(path)?;
            let workload = Workload::from_jsonl(&text).bad_input(format!("malformed workload {}", path.display()))?;
            let config = SimConfig {
                processors: 2,
                quantum: DEFAULT_QUANTUM,
                tick_limit: DEFAULT_TICK_LIMIT,
                seed: a.seed.unwrap_or(0),
            };
            (workload, 0, config)
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    if let Some(p) = a.processors {
        config.processors = p;
    }
    if let Some(q) = a.quantum {
        config.quantum = q;
    }
    if let Some(t) = a.ticks_limit {
        config.tick_limit = t;
    }

    let (outcome, threshold) = match &a.profile {
        Some(path) => {
            let profile = load_profile(path, a.threshold)?;
            let threshold = profile.threshold();
            (run_simulation(config, &workload, profile), Some(threshold))
        }
        None => (run_simulation(config, &workload, AcceptAll), None),
    };
    let outcome = outcome.bad_input("simulation rejected its inputs")?;

    if let Some(path) = &a.trace {
        io::write_text(path, &outcome.trace.to_tsv())?;
    }
    let report = RunReport::for_simulation(&outcome, preflagged, threshold, config.seed);
    match &a.report {
        Some(path) => io::write_text(path, &report.to_json())?,
        None => emit(out, &report.to_json())?,
    }
    emit(err, &format!("{}\n", report.summary()))
}

pub fn gen_data(a: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(n) = a.length {
        scenario.length = n;
    }
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let stream = scenario.generate().bad_input("bad scenario")?;
    let text = io::format_stream(&stream);
    match &a.out {
        Some(path) => io::write_text(path, &text),
        None => emit(out, &text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_defaults() {
        let help = Cli::command()
            .find_subcommand_mut("train")
            .unwrap()
            .render_help()
            .to_string();
        for needle in [
            "[default: 5]",
            "[default: 3]",
            "[default: 10]",
            "[default: 0.5]",
            "[default: 0]",
        ] {
            assert!(help.contains(needle), "{needle} missing from\n{help}");
        }
        let help = Cli::command()
            .find_subcommand_mut("simulate")
            .unwrap()
            .render_help()
            .to_string();
        assert!(help.contains("--ticks-limit"));
    }

    #[test]
    fn simulate_needs_an_input() {
        assert!(Cli::try_parse_from(["validmw", "simulate"]).is_err());
        assert!(Cli::try_parse_from(["validmw", "simulate", "--workload", "w", "--threshold", "0.1"]).is_err());
        assert!(Cli::try_parse_from(["validmw", "simulate", "--workload", "w"]).is_ok());
    }
}
