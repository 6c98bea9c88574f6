use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub trait Optimizer<T: Scalar> {
    /// Applies one update from each tensor's accumulated `grad`.
    fn step(&mut self, params: &mut [Tensor<T>]);
}

fn state_for<T: Scalar>(state: &mut Vec<Vec<T>>, params: &[Tensor<T>]) {
    if state.len() != params.len() {
        *state = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
    }
}

/// SGD with classical momentum: v ← μv + g, θ ← θ − lr·v.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: Vec::new() }
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn step(&mut self, params: &mut [Tensor<T>]) {
        state_for(&mut self.velocity, params);
        let (lr, mu) = (T::of(self.lr), T::of(self.momentum));
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            let Some(g) = &p.grad else { continue };
            for ((x, &gi), vi) in p.data.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = mu * *vi + gi;
                *x -= lr * *vi;
            }
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut [Tensor<T>]) {
        state_for(&mut self.m, params);
        state_for(&mut self.v, params);
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - crate::math::powf(self.beta1, self.t as f64));
        let c2 = T::of(1.0 - crate::math::powf(self.beta2, self.t as f64));
        let (lr, eps, one) = (T::of(self.lr), T::of(self.eps), T::one());
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = &p.grad else { continue };
            for (((x, &gi), mi), vi) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
