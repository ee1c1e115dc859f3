#![allow(clippy::needless_range_loop)]

use super::HmmModel;
use crate::error::{Error, Result};

/// Output of the scaled forward recursion.
///
/// `alphas[t]` are the forward variables at step `t` normalized to sum to 1,
/// `scales[t]` the normalizer applied at that step. The log-likelihood is the
/// sum of `ln(scales)`. Once a step has zero mass the remaining scales and
/// alphas are zero and the log-likelihood is `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub log_likelihood: f64,
    pub scales: Vec<f64>,
    pub alphas: Vec<Vec<f64>>,
}

impl Forward {
    pub fn is_impossible(&self) -> bool {
        self.log_likelihood == f64::NEG_INFINITY
    }
}

pub fn forward_likelihood(model: &HmmModel, obs: &[usize]) -> Result<Forward> {
    model.ensure_valid()?;
    model.check_sequence(obs)?;
    Ok(forward_unchecked(model, obs))
}

/// `ln P(obs | model)`.
pub fn log_likelihood(model: &HmmModel, obs: &[usize]) -> Result<f64> {
    forward_likelihood(model, obs).map(|f| f.log_likelihood)
}

pub(crate) fn forward_unchecked(model: &HmmModel, obs: &[usize]) -> Forward {
    let n = model.n_states;
    let len = obs.len();
    let mut alphas = vec![vec![0.0; n]; len];
    let mut scales = vec![0.0; len];
    let mut log_likelihood = 0.0;

    for (t, &symbol) in obs.iter().enumerate() {
        let (prev, cur) = alphas.split_at_mut(t);
        let cur = &mut cur[0];
        if t == 0 {
            for i in 0..n {
                cur[i] = model.initial[i] * model.emission[i][symbol];
            }
        } else {
            let prev = &prev[t - 1];
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += prev[i] * model.transition[i][j];
                }
                cur[j] = acc * model.emission[j][symbol];
            }
        }
        let scale: f64 = cur.iter().sum();
        if scale <= 0.0 {
            cur.iter_mut().for_each(|a| *a = 0.0);
            return Forward {
                log_likelihood: f64::NEG_INFINITY,
                scales,
                alphas,
            };
        }
        cur.iter_mut().for_each(|a| *a /= scale);
        scales[t] = scale;
        log_likelihood += scale.ln();
    }

    Forward {
        log_likelihood,
        scales,
        alphas,
    }
}

/// Scaled backward recursion matching the scaling of `forward`.
///
/// The last step's betas are all 1; earlier steps are divided by the forward
/// scale of the following step, so `alphas[t][i] * betas[t][i]` is the
/// posterior probability of state `i` at step `t`.
pub fn backward_pass(model: &HmmModel, obs: &[usize], forward: &Forward) -> Result<Vec<Vec<f64>>> {
    model.check_sequence(obs)?;
    if forward.scales.len() != obs.len() || forward.alphas.len() != obs.len() {
        return Err(Error::input(format!(
            "scaling record covers {} steps but the sequence has {}",
            forward.scales.len(),
            obs.len()
        )));
    }
    if forward.is_impossible() {
        return Err(Error::input("sequence has zero probability; posteriors are undefined"));
    }
    Ok(backward_unchecked(model, obs, &forward.scales))
}

pub(crate) fn backward_unchecked(model: &HmmModel, obs: &[usize], scales: &[f64]) -> Vec<Vec<f64>> {
    let n = model.n_states;
    let len = obs.len();
    let mut betas = vec![vec![1.0; n]; len];
    for t in (0..len.saturating_sub(1)).rev() {
        let next_symbol = obs[t + 1];
        let (cur, next) = betas.split_at_mut(t + 1);
        let next = &next[0];
        let cur = &mut cur[t];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += model.transition[i][j] * model.emission[j][next_symbol] * next[j];
            }
            cur[i] = acc / scales[t + 1];
        }
    }
    betas
}

/// Posterior state marginals `gamma[t][i]` from a forward/backward pair.
pub fn posteriors(forward: &Forward, betas: &[Vec<f64>]) -> Vec<Vec<f64>> {
    forward
        .alphas
        .iter()
        .zip(betas)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
        .collect()
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::hmm::{sample_sequence, uniform_initial_model};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    fn random_model(seed: u64, n: usize, m: usize) -> HmmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HmmModel {
            n_states: n,
            n_symbols: m,
            transition: (0..n).map(|_| random_row(&mut rng, n)).collect(),
            emission: (0..n).map(|_| random_row(&mut rng, m)).collect(),
            initial: random_row(&mut rng, n),
        }
    }

    #[test]
    fn degenerate_single_state_has_probability_one() {
        let m = HmmModel::new(vec![vec![1.0]], vec![vec![1.0]], vec![1.0]).unwrap();
        let f = forward_likelihood(&m, &[0, 0, 0]).unwrap();
        assert_eq!(f.log_likelihood, 0.0);
    }

    #[test]
    fn impossible_first_symbol_gives_neg_infinity() {
        let m = HmmModel::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let f = forward_likelihood(&m, &[1, 0]).unwrap();
        assert!(f.is_impossible());
        assert!(backward_pass(&m, &[1, 0], &f).is_err());
    }

    #[test]
    fn out_of_range_symbol_is_an_input_error() {
        let m = uniform_initial_model(2, 2, 0);
        assert!(matches!(
            forward_likelihood(&m, &[0, 2]),
            Err(Error::SymbolOutOfRange { position: 1, .. })
        ));
    }

    #[test]
    fn invalid_model_is_a_model_error() {
        let mut m = uniform_initial_model(2, 2, 0);
        m.initial = vec![0.7, 0.7];
        assert!(matches!(forward_likelihood(&m, &[0]), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn two_state_length_three_matches_enumeration() {
        let m = random_model(3, 2, 2);
        let obs = [1, 0, 1];
        let got = forward_likelihood(&m, &obs).unwrap().log_likelihood.exp();
        let want = brute_force_probability(&m, &obs);
        assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn last_betas_are_ones_and_single_state_posterior_is_one() {
        let m = HmmModel::new(vec![vec![1.0]], vec![vec![0.3, 0.7]], vec![1.0]).unwrap();
        let obs = [0, 1, 1, 0];
        let f = forward_likelihood(&m, &obs).unwrap();
        let b = backward_pass(&m, &obs, &f).unwrap();
        assert_eq!(b[3], vec![1.0]);
        for g in posteriors(&f, &b) {
            assert_eq!(g, vec![1.0]);
        }
    }

    #[test]
    fn posteriors_match_enumeration() {
        let m = random_model(17, 2, 3);
        let obs = [2, 0, 0, 1];
        let f = forward_likelihood(&m, &obs).unwrap();
        let b = backward_pass(&m, &obs, &f).unwrap();
        let got = posteriors(&f, &b);
        let want = brute_force_posteriors(&m, &obs);
        for (g, w) in got.iter().zip(&want) {
            for (x, y) in g.iter().zip(w) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_scaling_record_is_rejected() {
        let m = random_model(1, 2, 2);
        let f = forward_likelihood(&m, &[0, 1]).unwrap();
        assert!(backward_pass(&m, &[0, 1, 1], &f).is_err());
    }

    #[test]
    fn long_sequences_do_not_underflow() {
        let m = random_model(9, 3, 3);
        let obs = sample_sequence(&m, 5000, 4).unwrap();
        let ll = log_likelihood(&m, &obs).unwrap();
        assert!(ll.is_finite() && ll < -1000.0);
    }

    proptest! {
        #[test]
        fn forward_equals_enumeration(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, len in 1usize..=8, sseed in any::<u64>()) {
            let model = random_model(seed, n, m);
            let mut rng = ChaCha8Rng::seed_from_u64(sseed);
            let obs: Vec<usize> = (0..len).map(|_| rng.gen_range(0..m)).collect();
            let got = forward_likelihood(&model, &obs).unwrap().log_likelihood.exp();
            let want = brute_force_probability(&model, &obs);
            prop_assert!(((got - want) / want).abs() < 1e-9);
        }

        #[test]
        fn posteriors_sum_to_one(seed in any::<u64>(), n in 1usize..=4, len in 1usize..=30) {
            let model = random_model(seed, n, 3);
            let obs = sample_sequence(&model, len, seed ^ 0x55).unwrap();
            let f = forward_likelihood(&model, &obs).unwrap();
            let b = backward_pass(&model, &obs, &f).unwrap();
            for g in posteriors(&f, &b) {
                prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
