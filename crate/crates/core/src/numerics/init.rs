//! Weight initialisers. All draw from a caller-supplied seeded generator.

use rand::Rng;

use super::{Real, Tensor};

/// Uniform in `[-bound, bound]`.
pub fn uniform<F: Real, R: Rng>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor<F> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| F::of(rng.random_range(-bound..=bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Glorot/Xavier uniform for a `fan_in × fan_out` matrix.
pub fn xavier_uniform<F: Real, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor<F> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], bound)
}
