use alloc::format;
use alloc::vec::Vec;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{bin_of, straight_bin, PipelineError};
use crate::image::Image;
use crate::recorder::{Dataset, Sample};

/// Horizontal mirror of the frame (and depth) with the steering negated.
pub fn reflect(sample: &Sample) -> Sample {
    Sample {
        id: sample.id,
        rgb: sample.rgb.mirrored(),
        depth: sample.depth.as_ref().map(|d| d.mirrored()),
        angle: -sample.angle,
        timestamp: sample.timestamp,
    }
}

fn next_id(ds: &Dataset) -> u64 {
    ds.samples.iter().map(|s| s.id + 1).max().unwrap_or(0)
}

/// The dataset followed by the reflection of every sample; reflected copies
/// get fresh ids after the current maximum, in the original order.
pub fn reflect_dataset(ds: &Dataset) -> Dataset {
    let base = next_id(ds);
    let mut samples = ds.samples.clone();
    samples.extend(ds.samples.iter().enumerate().map(|(i, s)| {
        let mut r = reflect(s);
        r.id = base + i as u64;
        r
    }));
    Dataset::new(samples, ds.meta.clone())
}

/// Uniformly drops samples from the straight bin until its share is at most
/// `cap`. The kept count is ⌊cap·others / (1 − cap)⌋; other bins and the
/// relative order of survivors are untouched.
pub fn rebalance_omit(ds: &Dataset, cap: f64, n_bins: usize, seed: u64) -> Result<Dataset, PipelineError> {
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(PipelineError::Param(format!("cap must be in (0, 1], got {cap}")));
    }
    let sb = straight_bin(n_bins);
    let straight: Vec<usize> = (0..ds.len()).filter(|&i| bin_of(ds.samples[i].angle, n_bins) == sb).collect();
    let others = ds.len() - straight.len();
    let share = |k: usize| k as f64 / (k + others).max(1) as f64;
    if cap >= 1.0 || share(straight.len()) <= cap {
        return Ok(ds.clone());
    }
    let mut keep = libm::floor(cap * others as f64 / (1.0 - cap)) as usize;
    while keep > 0 && share(keep) > cap {
        keep -= 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = alloc::vec![false; ds.len()];
    for &i in &straight {
        drop[i] = true;
    }
    for j in index::sample(&mut rng, straight.len(), keep) {
        drop[straight[j]] = false;
    }
    let samples = ds
        .samples
        .iter()
        .zip(drop)
        .filter(|(_, d)| !d)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(Dataset::new(samples, ds.meta.clone()))
}

/// Adds i.i.d. N(0, σ²) to every channel value and clamps to [0, 1].
pub fn gaussian_noise(image: &Image, sigma: f32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for v in &mut out.data {
        let z: f32 = StandardNormal.sample(&mut rng);
        *v = (*v + sigma * z).clamp(0.0, 1.0);
    }
    out
}

/// Appends one noisy copy of every sample; copy `i` is seeded with
/// `seed ^ id` of its source and gets a fresh id.
pub fn noisy_copies(ds: &Dataset, sigma: f32, seed: u64) -> Dataset {
    let base = next_id(ds);
    let mut samples = ds.samples.clone();
    samples.extend(ds.samples.iter().enumerate().map(|(i, s)| {
        let noisy = gaussian_noise(&Image::from_rgb(&s.rgb), sigma, seed ^ s.id);
        Sample {
            id: base + i as u64,
            rgb: noisy.to_rgb(),
            depth: s.depth.clone(),
            angle: s.angle,
            timestamp: s.timestamp,
        }
    }));
    Dataset::new(samples, ds.meta.clone())
}
