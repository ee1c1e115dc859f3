//! Discrete hidden Markov models.
//!
//! A model is the triple of transition matrix, emission matrix and initial
//! state distribution over `n_states` hidden states and `n_symbols`
//! observation symbols. Observation sequences are plain slices of symbol
//! indices in `0..n_symbols`.
//!
//! Likelihoods are always evaluated with the scaled forward recursion and
//! reported as natural logarithms; an impossible sequence has log-likelihood
//! `f64::NEG_INFINITY`.

mod forward;
mod sample;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forward::{backward_pass, forward_likelihood, log_likelihood, posteriors, Forward};
pub use sample::sample_sequence;
pub use train::{baum_welch_train, reestimate, uniform_initial_model, Training};

/// Tolerance on row sums used by [`validate_model`].
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub n_states: usize,
    pub n_symbols: usize,
    /// `transition[i][j]` = P(next state j | current state i).
    pub transition: Vec<Vec<f64>>,
    /// `emission[j][k]` = P(symbol k | state j).
    pub emission: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Transition,
    Emission,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `n_states` or `n_symbols` is zero.
    EmptyDimension,
    /// Row (or vector) has the wrong length, or the matrix has the wrong row count.
    Shape {
        expected: usize,
        found: usize,
    },
    /// Entry is NaN or infinite.
    NonFinite {
        col: usize,
    },
    Negative {
        col: usize,
        value: f64,
    },
    AboveOne {
        col: usize,
        value: f64,
    },
    RowSum {
        sum: f64,
    },
}

/// One broken invariant. `row` is `None` for the initial vector and for
/// matrix-level shape errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub part: Part,
    pub row: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = match self.part {
            Part::Transition => "transition",
            Part::Emission => "emission",
            Part::Initial => "initial",
        };
        match self.row {
            Some(r) => write!(f, "{part} row {r}: ")?,
            None => write!(f, "{part}: ")?,
        }
        match self.kind {
            ViolationKind::EmptyDimension => write!(f, "zero dimension"),
            ViolationKind::Shape { expected, found } => {
                write!(f, "expected length {expected}, found {found}")
            }
            ViolationKind::NonFinite { col } => write!(f, "entry {col} is not finite"),
            ViolationKind::Negative { col, value } => write!(f, "entry {col} = {value} < 0"),
            ViolationKind::AboveOne { col, value } => write!(f, "entry {col} = {value} > 1"),
            ViolationKind::RowSum { sum } => write!(f, "sums to {sum}"),
        }
    }
}

fn check_row(part: Part, row: Option<usize>, values: &[f64], len: usize, out: &mut Vec<Violation>) {
    if values.len() != len {
        out.push(Violation {
            part,
            row,
            kind: ViolationKind::Shape {
                expected: len,
                found: values.len(),
            },
        });
        return;
    }
    let before = out.len();
    for (col, &value) in values.iter().enumerate() {
        let kind = if !value.is_finite() {
            ViolationKind::NonFinite { col }
        } else if value < 0.0 {
            ViolationKind::Negative { col, value }
        } else if value > 1.0 {
            ViolationKind::AboveOne { col, value }
        } else {
            continue;
        };
        out.push(Violation { part, row, kind });
    }
    if out.len() == before {
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation {
                part,
                row,
                kind: ViolationKind::RowSum { sum },
            });
        }
    }
}

fn check_matrix(part: Part, rows: &[Vec<f64>], n_rows: usize, n_cols: usize, out: &mut Vec<Violation>) {
    if rows.len() != n_rows {
        out.push(Violation {
            part,
            row: None,
            kind: ViolationKind::Shape {
                expected: n_rows,
                found: rows.len(),
            },
        });
        return;
    }
    for (i, r) in rows.iter().enumerate() {
        check_row(part, Some(i), r, n_cols, out);
    }
}

/// Lists every broken invariant of `model`. An empty list means the model is
/// a valid set of stochastic parameters.
pub fn validate_model(model: &HmmModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.n_states == 0 || model.n_symbols == 0 {
        let part = if model.n_states == 0 {
            Part::Transition
        } else {
            Part::Emission
        };
        out.push(Violation {
            part,
            row: None,
            kind: ViolationKind::EmptyDimension,
        });
        return out;
    }
    check_matrix(
        Part::Transition,
        &model.transition,
        model.n_states,
        model.n_states,
        &mut out,
    );
    check_matrix(
        Part::Emission,
        &model.emission,
        model.n_states,
        model.n_symbols,
        &mut out,
    );
    check_row(Part::Initial, None, &model.initial, model.n_states, &mut out);
    out
}

impl HmmModel {
    /// Builds a model from its parameter matrices, rejecting anything that
    /// is not a valid stochastic parameter set.
    pub fn new(transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let model = HmmModel {
            n_states: initial.len(),
            n_symbols: emission.first().map_or(0, Vec::len),
            transition,
            emission,
            initial,
        };
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_model(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// Checks that `obs` is non-empty and within this model's alphabet.
    pub fn check_sequence(&self, obs: &[usize]) -> Result<()> {
        if obs.is_empty() {
            return Err(Error::input("observation sequence is empty"));
        }
        match obs.iter().position(|&s| s >= self.n_symbols) {
            Some(position) => Err(Error::SymbolOutOfRange {
                position,
                symbol: obs[position],
                n_symbols: self.n_symbols,
            }),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: HmmModel = serde_json::from_str(text)?;
        model.ensure_valid()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model() -> HmmModel {
        HmmModel {
            n_states: 3,
            n_symbols: 3,
            transition: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            emission: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            initial: vec![1.0 / 3.0; 3],
        }
    }

    #[test]
    fn identity_model_is_valid() {
        assert!(validate_model(&identity_model()).is_empty());
    }

    #[test]
    fn short_row_sum_is_reported_once() {
        let mut m = identity_model();
        m.transition[1] = vec![0.0, 0.9, 0.0];
        let v = validate_model(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].part, Part::Transition);
        assert_eq!(v[0].row, Some(1));
        assert!(matches!(v[0].kind, ViolationKind::RowSum { .. }));
    }

    #[test]
    fn negative_emission_entry() {
        let mut m = identity_model();
        m.emission[2] = vec![-0.1, 0.1, 1.0];
        let v = validate_model(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].part, Part::Emission);
        assert_eq!(v[0].row, Some(2));
        assert!(matches!(v[0].kind, ViolationKind::Negative { col: 0, .. }));
    }

    #[test]
    fn shape_and_nan_are_flagged() {
        let mut m = identity_model();
        m.emission.pop();
        m.initial[0] = f64::NAN;
        let v = validate_model(&m);
        assert!(v
            .iter()
            .any(|x| x.part == Part::Emission && matches!(x.kind, ViolationKind::Shape { expected: 3, found: 2 })));
        assert!(v
            .iter()
            .any(|x| x.part == Part::Initial && matches!(x.kind, ViolationKind::NonFinite { col: 0 })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = uniform_initial_model(4, 3, 11);
        let text = m.to_json();
        let back = HmmModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn from_json_rejects_invalid_rows() {
        let text = r#"{"n_states":1,"n_symbols":2,"transition":[[1.0]],"emission":[[0.5,0.6]],"initial":[1.0]}"#;
        assert!(matches!(HmmModel::from_json(text), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn check_sequence_reports_position() {
        let m = identity_model();
        match m.check_sequence(&[0, 1, 5]) {
            Err(Error::SymbolOutOfRange {
                position: 2,
                symbol: 5,
                n_symbols: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(m.check_sequence(&[]).is_err());
    }
}
