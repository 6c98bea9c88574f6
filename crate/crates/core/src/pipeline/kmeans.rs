use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::image::{unit_to_byte, Image};
use crate::math;

const MAX_ITERS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    pub image: Image,
    /// Byte-valued centroids of the winning restart.
    pub centroids: Vec<[f64; 3]>,
    pub wcss: f64,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

/// Lloyd's algorithm over distinct colors weighted by pixel count.
fn lloyd(points: &[([f64; 3], f64)], mut centroids: Vec<[f64; 3]>) -> (Vec<[f64; 3]>, f64) {
    let k = centroids.len();
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (a, (p, _)) in assign.iter_mut().zip(points) {
            let j = nearest(p, &centroids);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut weights = vec![0.0; k];
        for (&a, (p, w)) in assign.iter().zip(points) {
            for ch in 0..3 {
                sums[a][ch] += p[ch] * w;
            }
            weights[a] += w;
        }
        for j in 0..k {
            // an emptied cluster keeps its previous centroid
            if weights[j] > 0.0 {
                centroids[j] = sums[j].map(|s| s / weights[j]);
            }
        }
    }
    let wcss = points.iter().map(|(p, w)| w * dist2(p, &centroids[nearest(p, &centroids)])).sum();
    (centroids, wcss)
}

/// Color quantization to at most `k` colors. Each restart seeds its
/// centroids with `k` distinct colors of the image; the restart with the
/// lowest within-cluster sum of squares wins. Pixels become their centroid
/// rounded to bytes. Images with at most `k` distinct colors come back
/// unchanged.
pub fn kmeans_quantize(image: &Image, k: usize, restarts: usize, seed: u64) -> Result<KmeansResult, PipelineError> {
    if k == 0 {
        return Err(PipelineError::Param("k must be at least 1".into()));
    }
    if image.channels != 3 {
        return Err(PipelineError::Channels { expected: 3, got: image.channels });
    }
    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for px in image.data.chunks_exact(3) {
        *counts.entry([unit_to_byte(px[0]), unit_to_byte(px[1]), unit_to_byte(px[2])]).or_default() += 1;
    }
    let points: Vec<([f64; 3], f64)> = counts.iter().map(|(c, &n)| (c.map(|v| v as f64), n as f64)).collect();
    if points.len() <= k {
        let centroids = points.iter().map(|(c, _)| *c).collect();
        return Ok(KmeansResult { image: image.clone(), centroids, wcss: 0.0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<[f64; 3]>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let init = index::sample(&mut rng, points.len(), k).into_iter().map(|i| points[i].0).collect();
        let (centroids, wcss) = lloyd(&points, init);
        if best.as_ref().is_none_or(|(_, b)| wcss < *b) {
            best = Some((centroids, wcss));
        }
    }
    let (centroids, wcss) = best.expect("at least one restart");

    let palette: BTreeMap<[u8; 3], [f32; 3]> = counts
        .keys()
        .map(|c| {
            let p = c.map(|v| v as f64);
            let q = centroids[nearest(&p, &centroids)];
            (*c, q.map(|v| math::round(v).clamp(0.0, 255.0) as f32 / 255.0))
        })
        .collect();
    let mut out = image.clone();
    for px in out.data.chunks_exact_mut(3) {
        px.copy_from_slice(&palette[&[unit_to_byte(px[0]), unit_to_byte(px[1]), unit_to_byte(px[2])]]);
    }
    Ok(KmeansResult { image: out, centroids, wcss })
}
