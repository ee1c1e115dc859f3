//! Sliding-window likelihood validation of incoming values.
//!
//! A [`Profile`] holds a trained HMM, the quantizer that symbolizes raw
//! values, and the last `window_length` accepted symbols. For a new value
//! with symbol `s`, the validator compares
//!
//! * `alpha1 = ln P(window)` and
//! * `alpha2 = ln P(window[1..] ++ [s])`
//!
//! and rejects the value when the relative likelihood drop
//! `1 - exp(alpha2 - alpha1)` exceeds the profile threshold. Accepted
//! symbols slide into the window; rejected ones are discarded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{baum_welch_train, log_likelihood, uniform_initial_model, HmmModel};
use crate::quantizer::{KMeans, Quantizer};

pub const PROFILE_FORMAT: &str = "validmw-profile/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub n_states: usize,
    pub n_symbols: usize,
    pub window_length: usize,
    pub threshold: f64,
    pub train_iters: usize,
    pub train_tol: f64,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            n_states: 5,
            n_symbols: 3,
            window_length: 10,
            threshold: 0.5,
            train_iters: 100,
            train_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta_rel: f64,
    pub symbol: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub log_likelihood_history: Vec<f64>,
}

impl TrainingSummary {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood_history.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    model: HmmModel,
    quantizer: Quantizer,
    window: Vec<usize>,
    threshold: f64,
    /// `ln P(window)` for the current window.
    alpha1: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileDocument {
    format: String,
    window_length: usize,
    threshold: f64,
    centroids: Quantizer,
    window: Vec<usize>,
    model: HmmModel,
}

impl Profile {
    pub fn new(model: HmmModel, quantizer: Quantizer, window: Vec<usize>, threshold: f64) -> Result<Self> {
        model.ensure_valid()?;
        if quantizer.k() != model.n_symbols {
            return Err(Error::input(format!(
                "quantizer has {} centroids but the model has {} symbols",
                quantizer.k(),
                model.n_symbols
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::input(format!("threshold {threshold} is outside [0, 1]")));
        }
        let alpha1 = log_likelihood(&model, &window)?;
        Ok(Profile {
            model,
            quantizer,
            window,
            threshold,
            alpha1,
        })
    }

    pub fn model(&self) -> &HmmModel {
        &self.model
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    pub fn window_length(&self) -> usize {
        self.window.len()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::input(format!("threshold {threshold} is outside [0, 1]")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// Scores `value` against the current window without changing it.
    pub fn evaluate(&self, value: f64) -> Verdict {
        let symbol = self.quantizer.quantize(value);
        let shifted: Vec<usize> = self.window[1..]
            .iter()
            .copied()
            .chain(std::iter::once(symbol))
            .collect();
        let alpha1 = self.alpha1;
        let alpha2 = log_likelihood(&self.model, &shifted).expect("profile invariants hold");
        let (delta_rel, accepted) = decide(alpha1, alpha2, self.threshold);
        Verdict {
            accepted,
            alpha1,
            alpha2,
            delta_rel,
            symbol,
        }
    }

    /// Validates `value` and returns the verdict with the follow-on profile:
    /// the window slides on acceptance and is untouched on rejection.
    pub fn validate_next(&self, value: f64) -> (Verdict, Profile) {
        let mut next = self.clone();
        let verdict = next.validate_in_place(value);
        (verdict, next)
    }

    pub fn validate_in_place(&mut self, value: f64) -> Verdict {
        let verdict = self.evaluate(value);
        if verdict.accepted {
            self.window.remove(0);
            self.window.push(verdict.symbol);
            self.alpha1 = verdict.alpha2;
        }
        verdict
    }

    pub fn to_document(&self) -> String {
        let doc = ProfileDocument {
            format: PROFILE_FORMAT.to_string(),
            window_length: self.window.len(),
            threshold: self.threshold,
            centroids: self.quantizer.clone(),
            window: self.window.clone(),
            model: self.model.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("profile serializes");
        text.push('\n');
        text
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let doc: ProfileDocument = serde_json::from_str(text)?;
        if doc.format != PROFILE_FORMAT {
            return Err(Error::input(format!(
                "unsupported profile format {:?}, expected {PROFILE_FORMAT:?}",
                doc.format
            )));
        }
        if doc.window.len() != doc.window_length {
            return Err(Error::input(format!(
                "window holds {} symbols but window_length is {}",
                doc.window.len(),
                doc.window_length
            )));
        }
        Profile::new(doc.model, doc.centroids, doc.window, doc.threshold)
    }
}

/// Relative drop and decision for a pair of window log-likelihoods.
///
/// An impossible current window accepts (and resynchronizes); an impossible
/// shifted window is always rejected.
pub fn decide(alpha1: f64, alpha2: f64, threshold: f64) -> (f64, bool) {
    if alpha1 == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, true);
    }
    if alpha2 == f64::NEG_INFINITY {
        return (1.0, false);
    }
    // 1 - exp(a2 - a1), exact near zero; `+ 0.0` folds -0 into 0
    let delta_rel = -(alpha2 - alpha1).exp_m1() + 0.0;
    (delta_rel, delta_rel <= threshold)
}

/// Builds a profile from raw historical values: cluster, symbolize, train
/// from a near-uniform start, and seed the window with the most recent
/// `window_length` symbols.
pub fn train_profile(history: &[f64], config: &ProfileConfig) -> Result<(Profile, TrainingSummary)> {
    if config.n_states == 0 || config.n_symbols == 0 || config.window_length == 0 || config.train_iters == 0 {
        return Err(Error::input(
            "n_states, n_symbols, window_length and train_iters must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::input(format!(
            "threshold {} is outside [0, 1]",
            config.threshold
        )));
    }
    let needed = config.window_length + 1;
    if history.len() < needed {
        return Err(Error::HistoryTooShort {
            needed,
            got: history.len(),
        });
    }
    let (quantizer, _) = KMeans::new(config.n_symbols).seed(config.seed).fit(history)?;
    let symbols = quantizer.quantize_all(history);
    let start = uniform_initial_model(config.n_states, config.n_symbols, config.seed);
    let training = baum_welch_train(&start, &symbols, config.train_iters, config.train_tol)?;
    let window = symbols[symbols.len() - config.window_length..].to_vec();
    let profile = Profile::new(training.model, quantizer, window, config.threshold)?;
    Ok((
        profile,
        TrainingSummary {
            log_likelihood_history: training.log_likelihood_history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::sample_sequence;
    use proptest::prelude::*;

    fn small_config() -> ProfileConfig {
        ProfileConfig {
            n_states: 2,
            n_symbols: 3,
            window_length: 6,
            ..ProfileConfig::default()
        }
    }

    fn low_history(n: usize) -> Vec<f64> {
        // mostly low values with a sprinkle of medium and one high
        (0..n)
            .map(|i| match i % 25 {
                7 => 250.0 + i as f64 % 11.0,
                19 if i == 19 => 1500.0,
                _ => 20.0 + (i * 37 % 50) as f64,
            })
            .collect()
    }

    #[test]
    fn degenerate_profile_accepts_everything() {
        let cfg = ProfileConfig {
            n_states: 1,
            n_symbols: 1,
            window_length: 4,
            ..ProfileConfig::default()
        };
        let (profile, _) = train_profile(&[42.0; 12], &cfg).unwrap();
        for v in [-1e9, 0.0, 42.0, 1e12] {
            let (verdict, next) = profile.validate_next(v);
            assert!(verdict.accepted);
            assert_eq!(verdict.delta_rel, 0.0);
            assert_eq!(next.window(), &[0, 0, 0, 0]);
        }
    }

    #[test]
    fn history_too_short() {
        let err = train_profile(&[1.0, 2.0, 3.0], &ProfileConfig::default()).unwrap_err();
        assert!(matches!(err, Error::HistoryTooShort { needed: 11, got: 3 }));
    }

    #[test]
    fn window_is_tail_of_history() {
        let history = low_history(120);
        let (profile, summary) = train_profile(&history, &small_config()).unwrap();
        let symbols = profile.quantizer().quantize_all(&history);
        assert_eq!(profile.window(), &symbols[114..]);
        assert!(summary.final_log_likelihood().is_finite());
    }

    #[test]
    fn identical_window_and_value_is_accepted() {
        let model = uniform_initial_model(3, 3, 4);
        let q = Quantizer::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = Profile::new(model, q, vec![2; 5], 0.0).unwrap();
        let (v, next) = p.validate_next(3.0);
        assert_eq!(v.symbol, 2);
        assert_eq!(v.alpha1, v.alpha2);
        assert_eq!(v.delta_rel, 0.0);
        assert!(v.accepted);
        assert_eq!(next.window(), p.window());
    }

    #[test]
    fn out_of_profile_value_is_rejected_and_matches_direct_evaluation() {
        let history = low_history(200);
        let (profile, _) = train_profile(&history, &small_config()).unwrap();
        let high = profile.quantizer().centroids()[2];
        let (v, next) = profile.validate_next(high);
        let mut shifted = profile.window()[1..].to_vec();
        shifted.push(2);
        let a1 = log_likelihood(profile.model(), profile.window()).unwrap();
        let a2 = log_likelihood(profile.model(), &shifted).unwrap();
        let raw = (a1.exp() - a2.exp()) / a1.exp();
        assert!((v.delta_rel - raw).abs() < 1e-9);
        assert!(raw > 0.5);
        assert!(!v.accepted);
        assert_eq!(next, profile);
    }

    #[test]
    fn impossible_windows() {
        assert_eq!(decide(f64::NEG_INFINITY, -3.0, 0.0), (f64::NEG_INFINITY, true));
        assert_eq!(
            decide(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.5),
            (f64::NEG_INFINITY, true)
        );
        assert_eq!(decide(-3.0, f64::NEG_INFINITY, 1.0), (1.0, false));
    }

    #[test]
    fn impossible_current_window_resynchronizes() {
        let model = HmmModel::new(vec![vec![1.0]], vec![vec![0.5, 0.5, 0.0]], vec![1.0]).unwrap();
        let q = Quantizer::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mut p = Profile::new(model, q, vec![2, 0, 0], 0.5).unwrap();
        assert_eq!(p.alpha1(), f64::NEG_INFINITY);
        assert!(p.validate_in_place(1.0).accepted);
        assert_eq!(p.window(), &[0, 0, 0]);
        assert!(p.alpha1().is_finite());
        // the impossible symbol is now the canonical anomaly
        assert!(!p.validate_in_place(3.0).accepted);
    }

    #[test]
    fn document_round_trip() {
        let (profile, _) = train_profile(&low_history(150), &small_config()).unwrap();
        let text = profile.to_document();
        let back = Profile::from_document(&text).unwrap();
        assert_eq!(back, profile);
        assert_eq!(back.to_document(), text);
    }

    #[test]
    fn document_errors() {
        let (profile, _) = train_profile(&low_history(150), &small_config()).unwrap();
        let text = profile.to_document();
        assert!(Profile::from_document(&text.replace(PROFILE_FORMAT, "other/9")).is_err());
        assert!(Profile::from_document(&text.replace("\"window_length\": 6", "\"window_length\": 7")).is_err());
        assert!(Profile::from_document("{").is_err());
    }

    #[test]
    fn bad_threshold() {
        let cfg = ProfileConfig {
            threshold: 1.5,
            ..small_config()
        };
        assert!(train_profile(&low_history(100), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn window_length_conserved_and_rejection_idempotent(seed in any::<u64>(), theta in 0.0f64..=1.0, values in prop::collection::vec(0.0f64..4.0, 1..40)) {
            let model = uniform_initial_model(3, 4, seed);
            let q = Quantizer::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
            let window = sample_sequence(&model, 7, seed).unwrap();
            let mut p = Profile::new(model, q, window, theta).unwrap();
            for v in values {
                let (verdict, next) = p.validate_next(v);
                prop_assert_eq!(next.window_length(), 7);
                if verdict.delta_rel <= 0.0 {
                    prop_assert!(verdict.accepted);
                }
                if !verdict.accepted {
                    prop_assert_eq!(&next, &p);
                    prop_assert_eq!(next.validate_next(v).0, verdict);
                }
                p = next;
            }
        }
    }
}
