//! Preprocessing and augmentation operators, and the declarative chain that
//! applies them identically at train and inference time.

mod augment;
mod bins;
mod color;
mod crop;
mod edges;
mod kmeans;
mod patch;
mod spec;

pub use augment::{gaussian_noise, noisy_copies, rebalance_omit, reflect, reflect_dataset};
pub use bins::{bin_of, bin_to_angle, label_to_bin, straight_bin, DEFAULT_BINS};
pub use color::{color_convert, rgb_to_hsv, rgb_to_lab, rgb_to_ycbcr, ColorScheme};
pub use crop::{bilinear_resize, crop_scale, CropRect, CropScale};
pub use edges::{edge_map, grayscale, hough_accumulator, hough_lines, Accumulator, HoughConfig, Line};
pub use kmeans::{kmeans_quantize, KmeansResult};
pub use patch::{composite_patch, homography, noise_patch, Homography, Point};
pub use spec::{Op, PipelineSpec};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("n_bins must be odd")]
    EvenBins,
    #[error("bin {index} out of range for {n_bins} bins")]
    BinOutOfRange { index: usize, n_bins: usize },
    #[error("crop rect {rect:?} outside {width}x{height} image")]
    CropOutOfBounds { rect: CropRect, width: usize, height: usize },
    #[error("output size must be non-zero")]
    EmptyOutput,
    #[error("unknown color scheme '{0}'")]
    UnknownScheme(String),
    #[error("expected {expected} channels, got {got}")]
    Channels { expected: usize, got: usize },
    #[error("degenerate quad")]
    DegenerateQuad,
    #[error("quad outside image bounds")]
    QuadOutOfBounds,
    #[error("invalid parameter: {0}")]
    Param(String),
}
