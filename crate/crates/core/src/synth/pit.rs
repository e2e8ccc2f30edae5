//! Randomized probability integral transform.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gev::CensoredGevParams;

/// PIT value of `y`: `F(y)` for `y > 0`, uniform on `[0, F(0)]` at the
/// zero atom.
pub fn randomized_pit<R: Rng + ?Sized>(p: &CensoredGevParams, y: f64, rng: &mut R) -> f64 {
    if y > 0.0 {
        p.cdf(y)
    } else {
        rng.random::<f64>() * p.prob_zero()
    }
}

/// Relative frequencies of randomized PIT values in `n_bins` equal bins.
pub fn pit_histogram<R: Rng + ?Sized>(
    predictions: &[CensoredGevParams],
    observations: &[f64],
    n_bins: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if predictions.len() != observations.len() {
        return Err(Error::data(format!(
            "{} predictions for {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    if n_bins == 0 {
        return Err(Error::Config("PIT histogram needs at least one bin".into()));
    }
    let mut counts = vec![0usize; n_bins];
    for (p, y) in predictions.iter().zip(observations) {
        let u = randomized_pit(p, *y, rng);
        let b = ((u * n_bins as f64) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let n = predictions.len().max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}
