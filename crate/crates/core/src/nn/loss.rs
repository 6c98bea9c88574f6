use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{NnError, Scalar};
use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    #[default]
    Ce,
    WeightedCe,
    GaussianCe,
}

impl core::str::FromStr for LossKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(Self::Mse),
            "ce" => Ok(Self::Ce),
            "weighted_ce" => Ok(Self::WeightedCe),
            "gaussian_ce" => Ok(Self::GaussianCe),
            _ => Err(NnError::BadLoss(format!("unknown loss '{s}'"))),
        }
    }
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        self != LossKind::Mse
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSpec {
    pub kind: LossKind,
    pub n_bins: usize,
    /// Per-bin weights for `weighted_ce`; computed from the training
    /// histogram when absent.
    pub class_weights: Option<Vec<f64>>,
    pub sigma: f64,
    pub lambda: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::Ce,
            n_bins: crate::pipeline::DEFAULT_BINS,
            class_weights: None,
            sigma: 1.5,
            lambda: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Value(f64),
    Class(usize),
}

impl LossSpec {
    pub fn of_kind(kind: LossKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if let Some(w) = &self.class_weights {
            if w.len() != self.n_bins || w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(NnError::BadLoss(format!(
                    "class_weights must be {} finite non-negative values",
                    self.n_bins
                )));
            }
        }
        if self.kind == LossKind::GaussianCe && !(self.sigma > 0.0) {
            return Err(NnError::BadLoss("sigma must be positive".into()));
        }
        Ok(())
    }

    /// Loss and gradient for one sample's network output.
    pub fn evaluate<T: Scalar>(&self, output: &[T], target: Target) -> Result<(T, Vec<T>), NnError> {
        match (self.kind, target) {
            (LossKind::Mse, Target::Value(y)) => Ok(loss_mse(output, &[T::of(y)])),
            (LossKind::Ce, Target::Class(c)) => Ok(loss_ce(output, c)),
            (LossKind::WeightedCe, Target::Class(c)) => {
                let w = self
                    .class_weights
                    .as_ref()
                    .ok_or_else(|| NnError::BadLoss("weighted_ce needs class_weights".into()))?;
                Ok(loss_weighted_ce(output, c, w))
            }
            (LossKind::GaussianCe, Target::Class(c)) => loss_gaussian_ce(output, c, self.sigma, self.lambda),
            (kind, t) => Err(NnError::BadLoss(format!("{kind:?} loss cannot take target {t:?}"))),
        }
    }
}

/// Mean of (ŷ − y)² over the elements; gradient 2(ŷ − y)/N.
pub fn loss_mse<T: Scalar>(pred: &[T], target: &[T]) -> (T, Vec<T>) {
    assert_eq!(pred.len(), target.len());
    let n = T::of(pred.len() as f64);
    let loss = pred.iter().zip(target).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>() / n;
    let grad = pred.iter().zip(target).map(|(&p, &t)| T::of(2.0) * (p - t) / n).collect();
    (loss, grad)
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut p = logits.to_vec();
    super::layers::softmax_in_place(&mut p);
    p
}

fn log_softmax_at<T: Scalar>(logits: &[T], c: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    logits[c] - lse
}

/// Softmax cross entropy; gradient p − onehot(c).
pub fn loss_ce<T: Scalar>(logits: &[T], c: usize) -> (T, Vec<T>) {
    let mut grad = softmax(logits);
    grad[c] -= T::one();
    (-log_softmax_at(logits, c), grad)
}

/// `weights[c]` × cross entropy, gradient scaled identically.
pub fn loss_weighted_ce<T: Scalar>(logits: &[T], c: usize, weights: &[f64]) -> (T, Vec<T>) {
    let w = T::of(weights[c]);
    let (l, g) = loss_ce(logits, c);
    (w * l, g.into_iter().map(|v| v * w).collect())
}

/// Cross entropy plus λ·E_p[D(j, c)], with distance penalty
/// D(j, c) = 1 − exp(−(j − c)² / 2σ²), so probability mass far from the
/// target bin costs more than mass on its neighbors.
pub fn loss_gaussian_ce<T: Scalar>(logits: &[T], c: usize, sigma: f64, lambda: f64) -> Result<(T, Vec<T>), NnError> {
    if !(sigma > 0.0) {
        return Err(NnError::BadLoss("sigma must be positive".into()));
    }
    let p = softmax(logits);
    let d: Vec<T> = (0..logits.len())
        .map(|j| {
            let k = j as f64 - c as f64;
            T::of(1.0 - math::exp(-k * k / (2.0 * sigma * sigma)))
        })
        .collect();
    let mean_d: T = p.iter().zip(&d).map(|(&pj, &dj)| pj * dj).sum();
    let lam = T::of(lambda);
    let loss = -log_softmax_at(logits, c) + lam * mean_d;
    let grad = p
        .iter()
        .zip(&d)
        .enumerate()
        .map(|(j, (&pj, &dj))| {
            let onehot = if j == c { T::one() } else { T::zero() };
            pj - onehot + lam * pj * (dj - mean_d)
        })
        .collect();
    Ok((loss, grad))
}

/// w_c = N / (C_nonzero · n_c) for occupied bins and 0 for empty ones, so
/// that Σ n_c·w_c = N.
pub fn inverse_freq_weights(hist: &[usize]) -> Result<Vec<f64>, NnError> {
    let n: usize = hist.iter().sum();
    if n == 0 {
        return Err(NnError::EmptyHistogram);
    }
    let nonzero = hist.iter().filter(|&&c| c > 0).count() as f64;
    Ok(hist
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n as f64 / (nonzero * c as f64) })
        .collect())
}

/// Shannon entropy in nats; 0·ln 0 counts as 0.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * math::ln(v)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn numeric<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], rel: f64) {
        for (x, y) in a.iter().zip(b) {
            let e = (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
            assert!(e <= rel, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn mse_values() {
        assert_eq!(loss_mse(&[0.3], &[0.3]).0, 0.0);
        let (l, g) = loss_mse(&[0.5], &[-0.5]);
        assert_eq!((l, g[0]), (1.0, 2.0));
    }

    #[test]
    fn ce_uniform_is_ln_c() {
        let (l, _) = loss_ce(&[0.0f64; 15], 3);
        assert!((l - math::ln(15.0)).abs() < 1e-12);
        assert!((l - 2.708).abs() < 1e-3);
    }

    #[test]
    fn ce_decreases_toward_zero() {
        let mut prev = f64::INFINITY;
        for z in [0.0, 5.0, 10.0, 20.0] {
            let mut logits = vec![0.0; 15];
            logits[4] = z;
            let (l, _) = loss_ce(&logits, 4);
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn weighted_is_scaled_ce() {
        let logits = [0.2, -1.0, 0.7];
        let (l1, g1) = loss_ce(&logits, 2);
        let (lw, gw) = loss_weighted_ce(&logits, 2, &[1.0, 1.0, 1.0]);
        assert_eq!((l1, &g1), (lw, &gw));
        let (l2, g2) = loss_weighted_ce(&logits, 2, &[0.0, 0.0, 2.0]);
        assert_eq!(l2, 2.0 * l1);
        assert_eq!(g2, g1.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
    }

    #[test]
    fn gaussian_reduces_to_ce() {
        let logits = [0.3, -0.2, 1.1, 0.0];
        assert_eq!(loss_gaussian_ce(&logits, 1, 1.5, 0.0).unwrap(), loss_ce(&logits, 1));
        assert!(loss_gaussian_ce(&logits, 1, 0.0, 1.0).is_err());
        // all mass on the target: CE → 0 and penalty D(c, c) = 0
        let mut peaked = [0.0; 5];
        peaked[2] = 60.0;
        assert!(loss_gaussian_ce(&peaked, 2, 1.5, 1.0).unwrap().0 < 1e-20);
    }

    #[test]
    fn finite_difference_gradients() {
        let logits = [0.4, -1.3, 0.9, 2.0, -0.1, 0.05, 0.7];
        let w = [0.5, 1.0, 3.0, 0.2, 1.0, 2.0, 1.5];
        for c in [0, 3, 6] {
            assert_close(&loss_ce(&logits, c).1, &numeric(|z| loss_ce(z, c).0, &logits), 1e-6);
            assert_close(&loss_weighted_ce(&logits, c, &w).1, &numeric(|z| loss_weighted_ce(z, c, &w).0, &logits), 1e-6);
            let g = loss_gaussian_ce(&logits, c, 1.5, 0.8).unwrap().1;
            assert_close(&g, &numeric(|z| loss_gaussian_ce(z, c, 1.5, 0.8).unwrap().0, &logits), 1e-6);
        }
        let pred = [0.3, -0.7, 0.1];
        let target = [0.1, 0.2, -0.4];
        assert_close(&loss_mse(&pred, &target).1, &numeric(|p| loss_mse(p, &target).0, &pred), 1e-6);
    }

    #[test]
    fn weights_examples() {
        assert_eq!(inverse_freq_weights(&[5, 5, 5]).unwrap(), [1.0, 1.0, 1.0]);
        let w = inverse_freq_weights(&[70, 20, 10]).unwrap();
        assert_close(&w, &[10.0 / 21.0, 10.0 / 6.0, 10.0 / 3.0], 1e-12);
        let total: f64 = [70.0, 20.0, 10.0].iter().zip(&w).map(|(n, w)| n * w).sum();
        assert!((total - 100.0).abs() < 1e-12);
        assert_eq!(inverse_freq_weights(&[100, 0]).unwrap(), [1.0, 0.0]);
        assert_eq!(inverse_freq_weights(&[0, 0]), Err(NnError::EmptyHistogram));
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[1.0 / 15.0; 15]) - math::ln(15.0)).abs() < 1e-12);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_shift_invariant(
            logits in proptest::collection::vec(-30.0..30.0f64, 1..20),
            shift in -100.0..100.0f64,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
            prop_assert_eq!(argmax(&p), argmax(&logits));
        }

        #[test]
        fn losses_non_negative(logits in proptest::collection::vec(-10.0..10.0f64, 2..16), c in 0usize..16, lam in 0.0..3.0f64) {
            let c = c % logits.len();
            prop_assert!(loss_ce(&logits, c).0 >= 0.0);
            prop_assert!(loss_gaussian_ce(&logits, c, 1.5, lam).unwrap().0 >= 0.0);
            prop_assert!(loss_weighted_ce(&logits, c, &vec![0.7; logits.len()]).0 >= 0.0);
            prop_assert!(loss_mse(&logits, &vec![0.1; logits.len()]).0 >= 0.0);
        }

        #[test]
        fn weights_preserve_total(hist in proptest::collection::vec(0usize..10_000, 1..40)) {
            let n: usize = hist.iter().sum();
            prop_assume!(n > 0);
            let w = inverse_freq_weights(&hist).unwrap();
            let total: f64 = hist.iter().zip(&w).map(|(&c, &w)| c as f64 * w).sum();
            prop_assert!((total - n as f64).abs() <= 1e-9 * n as f64);
        }
    }
}
