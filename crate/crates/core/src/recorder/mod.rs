//! Frame/label pairing and the in-memory dataset model.

mod session;
mod sync;

pub use session::{record_expert, RecordConfig, Recording, COLLISION_RADIUS};
pub use sync::{sync_pairs, Timed, Timestamped};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::image::{DepthImage, RgbImage};
use crate::pipeline::bin_of;
use crate::simworld::CameraConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("stream not monotone")]
    NotMonotone,
    #[error("slop must be positive")]
    BadSlop,
    #[error("expert failed at t={t:.2}: {reason}")]
    Expert { t: f64, reason: String },
}

/// One recorded frame with its steering label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub rgb: RgbImage,
    pub depth: Option<DepthImage>,
    /// Steering in [−1, 1], +1 = full left.
    pub angle: f64,
    pub timestamp: f64,
}

impl Sample {
    pub fn new(id: u64, rgb: RgbImage, angle: f64, timestamp: f64) -> Self {
        Self {
            id,
            rgb,
            depth: None,
            angle: quantize_angle(angle),
            timestamp,
        }
    }
}

/// Rounds a label to the six decimals stored in `labels.csv`, so a written
/// dataset reads back bit-identical.
pub fn quantize_angle(angle: f64) -> f64 {
    let a = angle.clamp(-1.0, 1.0);
    format!("{a:.6}").parse().unwrap_or(a)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub camera: Option<CameraConfig>,
    pub map: String,
    pub expert: String,
    #[serde(default)]
    pub hz: Option<f64>,
    #[serde(default)]
    pub slop: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, meta: DatasetMeta) -> Self {
        Self { samples, meta }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.angle)
    }
}

/// Counts per uniform bin over [−1, 1]; the last bin includes +1.
pub fn label_histogram(angles: impl IntoIterator<Item = f64>, n_bins: usize) -> Vec<usize> {
    assert!(n_bins >= 1, "n_bins must be at least 1");
    let mut counts = vec![0; n_bins];
    for a in angles {
        counts[bin_of(a, n_bins)] += 1;
    }
    counts
}
