use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{
    color_convert, composite_patch, edge_map, kmeans_quantize, noise_patch, noisy_copies, rebalance_omit,
    reflect_dataset, ColorScheme, CropScale, PipelineError, Point, DEFAULT_BINS,
};
use crate::image::Image;
use crate::recorder::Dataset;

fn default_restarts() -> usize {
    3
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// One pipeline stage. Dataset stages (`reflect`, `rebalance_omit`,
/// `noisy_copies`) reshape the sample set; the rest transform images and run
/// identically on training samples and on live frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    CropScale(CropScale),
    ColorConvert {
        scheme: ColorScheme,
    },
    Kmeans {
        k: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    EdgeMap {
        threshold: f32,
    },
    NoisePatch {
        quad: [Point; 4],
        width: usize,
        height: usize,
    },
    Reflect,
    RebalanceOmit {
        cap: f64,
        #[serde(default = "default_bins")]
        n_bins: usize,
    },
    NoisyCopies {
        sigma: f32,
    },
}

impl Op {
    pub fn is_dataset_op(&self) -> bool {
        matches!(self, Op::Reflect | Op::RebalanceOmit { .. } | Op::NoisyCopies { .. })
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Param(m.into()));
        match self {
            Op::Kmeans { k: 0, .. } => bad("kmeans k must be at least 1"),
            Op::RebalanceOmit { cap, .. } if !(*cap > 0.0 && *cap <= 1.0) => bad("rebalance_omit cap must be in (0, 1]"),
            Op::RebalanceOmit { n_bins, .. } if n_bins % 2 == 0 => Err(PipelineError::EvenBins),
            Op::NoisyCopies { sigma } if !(*sigma >= 0.0) => bad("noisy_copies sigma must be non-negative"),
            Op::NoisePatch { width, height, .. } if *width < 2 || *height < 2 => bad("noise patch must be at least 2x2"),
            _ => Ok(()),
        }
    }
}

/// Ordered operator chain, serialized as a bare JSON array.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PipelineSpec {
    pub ops: Vec<Op>,
    #[serde(skip)]
    pub seed: u64,
}

impl PipelineSpec {
    pub fn new(ops: Vec<Op>) -> Result<Self, PipelineError> {
        let spec = Self { ops, seed: 0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.ops.iter().try_for_each(Op::validate)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| PipelineError::Param(alloc::format!("{e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> alloc::string::String {
        serde_json::to_string(self).expect("pipeline specs always serialize")
    }

    /// Runs the dataset stages in order; image stages are skipped here.
    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset, PipelineError> {
        let mut out = ds.clone();
        for op in &self.ops {
            out = match op {
                Op::Reflect => reflect_dataset(&out),
                Op::RebalanceOmit { cap, n_bins } => rebalance_omit(&out, *cap, *n_bins, self.seed)?,
                Op::NoisyCopies { sigma } => noisy_copies(&out, *sigma, self.seed),
                _ => out,
            };
        }
        Ok(out)
    }

    /// Runs the image stages in order. Randomized stages draw from
    /// `seed ^ id`, so a sample's result does not depend on batch order.
    pub fn apply_image(&self, image: &Image, id: u64) -> Result<Image, PipelineError> {
        let seed = self.seed ^ id;
        let mut img = image.clone();
        for op in &self.ops {
            img = match op {
                Op::CropScale(cs) => cs.apply(&img)?,
                Op::ColorConvert { scheme } => color_convert(&img, *scheme)?,
                Op::Kmeans { k, restarts } => kmeans_quantize(&img, *k, *restarts, seed)?.image,
                Op::EdgeMap { threshold } => edge_map(&img, *threshold),
                Op::NoisePatch { quad, width, height } => {
                    composite_patch(&img, &noise_patch(*width, *height, img.channels, seed), *quad)?
                }
                _ => img,
            };
        }
        Ok(img)
    }

    /// (width, height, channels) produced from an input of the given shape.
    pub fn output_shape(&self, width: usize, height: usize, channels: usize) -> (usize, usize, usize) {
        let (mut w, mut h, mut c) = (width, height, channels);
        for op in &self.ops {
            match op {
                Op::CropScale(cs) => (w, h) = cs.output_size(w, h),
                Op::ColorConvert { scheme } => c = scheme.channels(),
                Op::EdgeMap { .. } => c = 1,
                _ => {}
            }
        }
        (w, h, c)
    }
}
