//! Steering-angle categories: `n` uniform bins over [−1, 1].

use super::PipelineError;
use crate::math;

/// Default category count; odd so that straight (0) is a bin center.
pub const DEFAULT_BINS: usize = 15;

/// Bin of `angle` among `n` uniform bins over [−1, 1], for any `n ≥ 1`.
///
/// Angles outside the range are clamped. A value exactly on an interior edge
/// goes to the bin nearer zero, so the assignment is mirror-symmetric:
/// `bin_of(−a) = n − 1 − bin_of(a)` whenever `a ≠ 0`. Zero itself lands in
/// the upper of two bins when `n` is even.
pub fn bin_of(angle: f64, n: usize) -> usize {
    let a = if angle.is_nan() { 0.0 } else { angle.clamp(-1.0, 1.0) };
    let lower = |x: f64| -> usize {
        let raw = math::floor((1.0 + x) * n as f64 / 2.0);
        (raw.max(0.0) as usize).min(n - 1)
    };
    if a == 0.0 {
        lower(0.0)
    } else if a < 0.0 {
        lower(a)
    } else {
        n - 1 - lower(-a)
    }
}

/// Category of a steering label; `n_bins` must be odd.
pub fn label_to_bin(angle: f64, n_bins: usize) -> Result<usize, PipelineError> {
    check_odd(n_bins)?;
    Ok(bin_of(angle, n_bins))
}

/// Center angle of category `index`.
pub fn bin_to_angle(index: usize, n_bins: usize) -> Result<f64, PipelineError> {
    check_odd(n_bins)?;
    if index >= n_bins {
        return Err(PipelineError::BinOutOfRange { index, n_bins });
    }
    Ok(-1.0 + (2 * index + 1) as f64 / n_bins as f64)
}

/// Index of the bin containing angle 0.
pub fn straight_bin(n_bins: usize) -> usize {
    bin_of(0.0, n_bins)
}

fn check_odd(n_bins: usize) -> Result<(), PipelineError> {
    if n_bins == 0 || n_bins % 2 == 0 {
        Err(PipelineError::EvenBins)
    } else {
        Ok(())
    }
}
