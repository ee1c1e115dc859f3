use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HmmModel;
use crate::error::{Error, Result};

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // rounding left u above the cumulative total
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `length` symbols from the model's generative process.
pub fn sample_sequence(model: &HmmModel, length: usize, seed: u64) -> Result<Vec<usize>> {
    model.ensure_valid()?;
    if length == 0 {
        return Err(Error::input("sample length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = pick(&mut rng, &model.initial);
    let mut out = Vec::with_capacity(length);
    for t in 0..length {
        if t > 0 {
            state = pick(&mut rng, &model.transition[state]);
        }
        out.push(pick(&mut rng, &model.emission[state]));
    }
    Ok(out)
}
