#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{backward_unchecked, forward_unchecked};
use super::HmmModel;
use crate::error::{Error, Result};

/// Largest per-entry perturbation applied by [`uniform_initial_model`].
const MAX_PERTURBATION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub model: HmmModel,
    /// Log-likelihood of the starting model followed by the log-likelihood
    /// after each completed re-estimation.
    pub log_likelihood_history: Vec<f64>,
}

impl Training {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_history.last().expect("history is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.log_likelihood_history.len() - 1
    }
}

fn perturbed_uniform_row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let base = 1.0 / len as f64;
    let eps = MAX_PERTURBATION.min(0.5 * base);
    let raw: Vec<f64> = (0..len).map(|_| base + rng.gen_range(-eps..=eps)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Starting point for Baum-Welch: exactly uniform initial distribution and
/// near-uniform transition/emission rows with a small seeded perturbation
/// (the exact uniform point is a fixed point of re-estimation).
pub fn uniform_initial_model(n_states: usize, n_symbols: usize, seed: u64) -> HmmModel {
    assert!(n_states >= 1 && n_symbols >= 1, "model dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..n_states)
        .map(|_| perturbed_uniform_row(&mut rng, n_states))
        .collect();
    let emission = (0..n_states)
        .map(|_| perturbed_uniform_row(&mut rng, n_symbols))
        .collect();
    HmmModel {
        n_states,
        n_symbols,
        transition,
        emission,
        initial: vec![1.0 / n_states as f64; n_states],
    }
}

/// One Baum-Welch re-estimation step on a single sequence.
///
/// Returns the re-estimated model together with the log-likelihood of the
/// *input* model. Rows of states with zero expected occupancy are kept.
pub fn reestimate(model: &HmmModel, obs: &[usize]) -> Result<(HmmModel, f64)> {
    model.ensure_valid()?;
    model.check_sequence(obs)?;
    if obs.len() < 2 {
        return Err(Error::input("training needs a sequence of at least two symbols"));
    }
    let fwd = forward_unchecked(model, obs);
    if fwd.is_impossible() {
        return Err(Error::input(
            "training sequence has zero probability under the starting model",
        ));
    }
    let betas = backward_unchecked(model, obs, &fwd.scales);
    let n = model.n_states;
    let m = model.n_symbols;
    let len = obs.len();

    let mut trans_num = vec![vec![0.0; n]; n];
    for t in 0..len - 1 {
        let next = obs[t + 1];
        let scale = fwd.scales[t + 1];
        for i in 0..n {
            let a = fwd.alphas[t][i];
            if a == 0.0 {
                continue;
            }
            for j in 0..n {
                trans_num[i][j] += a * model.transition[i][j] * model.emission[j][next] * betas[t + 1][j] / scale;
            }
        }
    }

    let mut emit_num = vec![vec![0.0; m]; n];
    for t in 0..len {
        for i in 0..n {
            emit_num[i][obs[t]] += fwd.alphas[t][i] * betas[t][i];
        }
    }

    let gamma0: Vec<f64> = (0..n).map(|i| fwd.alphas[0][i] * betas[0][i]).collect();
    let g0_sum: f64 = gamma0.iter().sum();
    let initial = gamma0.into_iter().map(|g| g / g0_sum).collect();

    let normalize = |num: Vec<Vec<f64>>, prev: &[Vec<f64>]| -> Vec<Vec<f64>> {
        num.into_iter()
            .zip(prev)
            .map(|(row, old)| {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.into_iter().map(|x| x / total).collect()
                } else {
                    old.clone()
                }
            })
            .collect()
    };

    let next = HmmModel {
        n_states: n,
        n_symbols: m,
        transition: normalize(trans_num, &model.transition),
        emission: normalize(emit_num, &model.emission),
        initial,
    };
    Ok((next, fwd.log_likelihood))
}

/// Baum-Welch training on one observation sequence. Stops after `max_iters`
/// re-estimations or as soon as one improves the log-likelihood by less
/// than `tol`.
pub fn baum_welch_train(initial_model: &HmmModel, obs: &[usize], max_iters: usize, tol: f64) -> Result<Training> {
    if max_iters == 0 {
        return Err(Error::input("max_iters must be at least 1"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::input("tol must be positive"));
    }
    let mut model = initial_model.clone();
    let mut history = Vec::with_capacity(max_iters + 1);
    for _ in 0..max_iters {
        let (next, ll) = reestimate(&model, obs)?;
        if history.is_empty() {
            history.push(ll);
        }
        let next_ll = forward_unchecked(&next, obs).log_likelihood;
        let gain = next_ll - ll;
        history.push(next_ll);
        model = next;
        if gain < tol {
            break;
        }
    }
    Ok(Training {
        model,
        log_likelihood_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{log_likelihood, sample_sequence, validate_model};
    use proptest::prelude::*;

    #[test]
    fn five_states_have_uniform_initial() {
        let m = uniform_initial_model(5, 3, 42);
        assert_eq!(m.initial, vec![0.2; 5]);
        assert!(validate_model(&m).is_empty());
        for row in m.transition.iter().chain(&m.emission) {
            for &x in row {
                assert!((x - 1.0 / row.len() as f64).abs() <= 0.011);
            }
        }
    }

    #[test]
    fn single_state_initial_model() {
        let m = uniform_initial_model(1, 4, 0);
        assert_eq!(m.initial, vec![1.0]);
        assert_eq!(m.transition, vec![vec![1.0]]);
        assert!(validate_model(&m).is_empty());
    }

    #[test]
    fn same_seed_same_model() {
        assert_eq!(uniform_initial_model(4, 6, 9), uniform_initial_model(4, 6, 9));
        assert_ne!(uniform_initial_model(4, 6, 9), uniform_initial_model(4, 6, 10));
    }

    #[test]
    fn single_state_training_is_empirical_frequency() {
        let obs = [0, 2, 2, 1, 2, 0, 2, 2, 2, 1, 0];
        let t = baum_welch_train(&uniform_initial_model(1, 3, 5), &obs, 10, 1e-12).unwrap();
        let len = obs.len() as f64;
        assert_eq!(t.model.emission[0], vec![3.0 / len, 2.0 / len, 6.0 / len]);
    }

    #[test]
    fn constant_sequence_with_many_states_stays_finite() {
        let obs = vec![1; 50];
        let t = baum_welch_train(&uniform_initial_model(3, 2, 1), &obs, 50, 1e-10).unwrap();
        assert!(validate_model(&t.model).is_empty());
        assert!(t.final_log_likelihood().is_finite());
        assert!(t.final_log_likelihood() > -1e-6);
    }

    #[test]
    fn training_from_generating_model_does_not_lose_likelihood() {
        let truth = HmmModel::new(
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]],
            vec![0.6, 0.4],
        )
        .unwrap();
        let obs = sample_sequence(&truth, 300, 8).unwrap();
        let t = baum_welch_train(&truth, &obs, 1, 1e-9).unwrap();
        assert!(t.log_likelihood_history[1] >= t.log_likelihood_history[0]);
        assert!(validate_model(&t.model).is_empty());
    }

    #[test]
    fn history_matches_independent_evaluation() {
        let truth = HmmModel::new(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.6, 0.3, 0.1], vec![0.05, 0.25, 0.7]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let obs = sample_sequence(&truth, 200, 3).unwrap();
        let mut model = uniform_initial_model(2, 3, 77);
        let t = baum_welch_train(&model, &obs, 30, 1e-300).unwrap();
        for w in t.log_likelihood_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        for k in 0..t.iterations() {
            let (next, ll) = reestimate(&model, &obs).unwrap();
            assert!((ll - t.log_likelihood_history[k]).abs() < 1e-9);
            model = next;
        }
        assert!((log_likelihood(&model, &obs).unwrap() - t.final_log_likelihood()).abs() < 1e-9);
    }

    #[test]
    fn bad_arguments() {
        let m = uniform_initial_model(2, 2, 0);
        assert!(baum_welch_train(&m, &[0], 5, 1e-6).is_err());
        assert!(baum_welch_train(&m, &[0, 1], 0, 1e-6).is_err());
        assert!(baum_welch_train(&m, &[0, 1], 5, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn likelihood_never_decreases(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
            let truth = uniform_initial_model(n, m, seed);
            let obs = sample_sequence(&truth, 120, seed.wrapping_add(1)).unwrap();
            let t = baum_welch_train(&uniform_initial_model(n, m, seed ^ 7), &obs, 25, 1e-300).unwrap();
            for w in t.log_likelihood_history.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-8);
            }
            prop_assert!(validate_model(&t.model).is_empty());
        }
    }
}
