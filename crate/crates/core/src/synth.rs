//! Synthetic Gaussian mixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::model::Dataset;

/// `n` samples around `centers` centres drawn uniformly from the unit
/// hypercube, with isotropic Gaussian noise of standard deviation `sigma`.
/// Label counts differ by at most one. Returns the data and per-sample labels.
pub fn gen_mixture(
    n: usize,
    d: usize,
    centers: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if centers < 1 || centers > n {
        return Err(invalid(format!(
            "centers = {centers} must lie in [1, n = {n}]"
        )));
    }
    if d < 1 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!(
            "sigma = {sigma} must be finite and non-negative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..centers * d).map(|_| rng.random::<f64>()).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % centers).collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(n * d);
    for &label in &labels {
        for &m in &means[label * d..(label + 1) * d] {
            let v = if sigma > 0.0 {
                m + noise.sample(&mut rng)
            } else {
                m
            };
            values.push(v as f32);
        }
    }
    Ok((Dataset::new(d, values)?, labels))
}
