#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use validmw::hmm::HmmModel;

pub fn validmw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_validmw"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[track_caller]
pub fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), stderr(&o));
    o
}

/// P(obs | model) by summing every state path in raw probability space.
pub fn brute_force_probability(model: &HmmModel, obs: &[usize]) -> f64 {
    let n = model.n_states;
    let t = obs.len();
    let mut path = vec![0usize; t];
    let mut total = 0.0;
    loop {
        let mut p = model.initial[path[0]] * model.emission[path[0]][obs[0]];
        for i in 1..t {
            p *= model.transition[path[i - 1]][path[i]] * model.emission[path[i]][obs[i]];
        }
        total += p;
        let mut i = 0;
        loop {
            if i == t {
                return total;
            }
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Relative drop computed from raw probabilities.
pub fn raw_delta(model: &HmmModel, window: &[usize], symbol: usize) -> (f64, f64, f64) {
    let p1 = brute_force_probability(model, window);
    let mut shifted = window[1..].to_vec();
    shifted.push(symbol);
    let p2 = brute_force_probability(model, &shifted);
    (p1, p2, (p1 - p2) / p1)
}

pub const LOW_SPENDER_HISTORY: &str = "kind = \"card\"\nseed = 1\nlength = 300\nspender = \"low_spender\"\n";
