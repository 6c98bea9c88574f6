use alloc::vec::Vec;
use rand::Rng;

use super::{Scalar, Tensor};
use crate::math;

/// a = √(6 / (fan_in + fan_out)).
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Glorot-uniform draw on [−a, a].
pub fn xavier_uniform<T: Scalar, R: Rng>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let a = xavier_bound(fan_in, fan_out);
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n).map(|_| T::of(rng.random_range(-a..=a))).collect();
    Tensor::from_vec(shape, data)
}
