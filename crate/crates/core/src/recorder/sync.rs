use alloc::vec;
use alloc::vec::Vec;

use super::RecordError;

pub trait Timestamped {
    fn timestamp(&self) -> f64;
}

/// A value stamped with a time in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timed<T> {
    pub t: f64,
    pub value: T,
}

impl<T> Timestamped for Timed<T> {
    fn timestamp(&self) -> f64 {
        self.t
    }
}

impl Timestamped for crate::simworld::CameraFrame {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

fn check_monotone<T: Timestamped>(items: &[T]) -> Result<(), RecordError> {
    if items.windows(2).any(|w| w[1].timestamp() < w[0].timestamp()) {
        Err(RecordError::NotMonotone)
    } else {
        Ok(())
    }
}

/// Approximate time synchronization.
///
/// Every (frame, label) pair within `slop` seconds is a candidate; candidates
/// are accepted greedily in order of increasing time difference (ties by
/// frame, then label index) as long as neither message is already used.
/// Labels left unmatched are dropped. Output is ordered by frame time.
pub fn sync_pairs<F, L>(frames: Vec<F>, labels: Vec<L>, slop: f64) -> Result<Vec<(F, L)>, RecordError>
where
    F: Timestamped,
    L: Timestamped,
{
    if !(slop > 0.0) {
        return Err(RecordError::BadSlop);
    }
    check_monotone(&frames)?;
    check_monotone(&labels)?;

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut lo = 0;
    for (i, f) in frames.iter().enumerate() {
        let t = f.timestamp();
        while lo < labels.len() && labels[lo].timestamp() < t - slop {
            lo += 1;
        }
        let mut j = lo;
        while j < labels.len() && labels[j].timestamp() <= t + slop {
            let dt = (labels[j].timestamp() - t).abs();
            if dt <= slop {
                candidates.push((dt, i, j));
            }
            j += 1;
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut frame_match = vec![None; frames.len()];
    let mut label_used = vec![false; labels.len()];
    for (_, i, j) in candidates {
        if frame_match[i].is_none() && !label_used[j] {
            frame_match[i] = Some(j);
            label_used[j] = true;
        }
    }

    let mut labels: Vec<Option<L>> = labels.into_iter().map(Some).collect();
    Ok(frames
        .into_iter()
        .zip(frame_match)
        .filter_map(|(f, m)| m.map(|j| (f, labels[j].take().expect("label used once"))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stamps(ts: &[f64]) -> Vec<Timed<usize>> {
        ts.iter().enumerate().map(|(i, &t)| Timed { t, value: i }).collect()
    }

    #[test]
    fn within_slop_pairs() {
        let p = sync_pairs(stamps(&[1.00]), stamps(&[1.02]), 0.05).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn outside_slop_drops_label() {
        assert!(sync_pairs(stamps(&[1.00]), stamps(&[1.10]), 0.05).unwrap().is_empty());
    }

    /// Minimum total |Δt| over all partial matchings of maximum size.
    fn brute_force(frames: &[f64], labels: &[f64], slop: f64) -> (usize, f64, Vec<Option<usize>>) {
        fn go(i: usize, frames: &[f64], labels: &[f64], slop: f64, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>,
              best: &mut (usize, f64, Vec<Option<usize>>)) {
            if i == frames.len() {
                let n = cur.iter().filter(|m| m.is_some()).count();
                let cost: f64 = cur.iter().enumerate().filter_map(|(f, m)| m.map(|j| (frames[f] - labels[j]).abs())).sum();
                if n > best.0 || (n == best.0 && cost < best.1) {
                    *best = (n, cost, cur.clone());
                }
                return;
            }
            cur.push(None);
            go(i + 1, frames, labels, slop, used, cur, best);
            cur.pop();
            for j in 0..labels.len() {
                if !used[j] && (frames[i] - labels[j]).abs() <= slop {
                    used[j] = true;
                    cur.push(Some(j));
                    go(i + 1, frames, labels, slop, used, cur, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (0, f64::INFINITY, Vec::new());
        go(0, frames, labels, slop, &mut vec![false; labels.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn nearest_label_wins() {
        let p = sync_pairs(stamps(&[1.00]), stamps(&[0.98, 1.01]), 0.05).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].1.t, 1.01);
        let (n, _, m) = brute_force(&[1.00], &[0.98, 1.01], 0.05);
        assert_eq!((n, m), (1, vec![Some(1)]));
    }

    #[test]
    fn unsorted_rejected() {
        assert_eq!(sync_pairs(stamps(&[2.0, 1.0]), stamps(&[1.0]), 0.05).unwrap_err(), RecordError::NotMonotone);
        assert_eq!(sync_pairs(stamps(&[1.0]), stamps(&[2.0, 1.0]), 0.05).unwrap_err(), RecordError::NotMonotone);
        assert_eq!(RecordError::NotMonotone.to_string(), "stream not monotone");
    }

    use alloc::string::ToString;

    proptest! {
        #[test]
        fn never_violates_slop(mut f in proptest::collection::vec(0.0..5.0f64, 0..40),
                               mut l in proptest::collection::vec(0.0..5.0f64, 0..40),
                               slop in 0.001..0.2f64) {
            f.sort_by(f64::total_cmp);
            l.sort_by(f64::total_cmp);
            let pairs = sync_pairs(stamps(&f), stamps(&l), slop).unwrap();
            prop_assert!(pairs.len() <= f.len().min(l.len()));
            let mut seen = vec![false; l.len()];
            for (a, b) in &pairs {
                prop_assert!((a.t - b.t).abs() <= slop);
                prop_assert!(!seen[b.value]);
                seen[b.value] = true;
            }
        }

        #[test]
        fn matches_brute_force_size(mut f in proptest::collection::vec(0.0..1.0f64, 0..6),
                                    mut l in proptest::collection::vec(0.0..1.0f64, 0..6)) {
            f.sort_by(f64::total_cmp);
            l.sort_by(f64::total_cmp);
            let pairs = sync_pairs(stamps(&f), stamps(&l), 0.1).unwrap();
            let (n, _, _) = brute_force(&f, &l, 0.1);
            // greedy is maximal, so at least half the optimum
            prop_assert!(2 * pairs.len() >= n);
        }
    }
}
