//! Ziegler–Nichols ultimate-gain tuning.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{wall_follow_error, ExpertError, PidGains, Side};
use crate::simworld::{lidar_scan, step, CarState, Controls, LidarConfig, Pose, WorldMap};

/// Number of trailing peak amplitudes that must agree for an oscillation to
/// count as sustained.
pub const SUSTAINED_PEAKS: usize = 5;
/// Allowed relative spread, (max − min)/max, across those amplitudes.
pub const SUSTAINED_TOLERANCE: f64 = 0.10;
/// Amplitudes below this are treated as a settled loop, not an oscillation.
const MIN_AMPLITUDE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZnResult {
    pub ku: f64,
    pub tu: f64,
    pub gains: PidGains,
}

/// Classic Ziegler–Nichols PID table.
pub fn classic_gains(ku: f64, tu: f64) -> PidGains {
    PidGains {
        kp: 0.6 * ku,
        ki: 1.2 * ku / tu,
        kd: 0.075 * ku * tu,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
    pub is_max: bool,
}

/// Strict local extrema of a sampled signal (plateaus report their first sample).
pub fn find_peaks(series: &[(f64, f64)]) -> Vec<Peak> {
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < series.len() {
        let prev = series[i - 1].1;
        let cur = series[i].1;
        // skip over a flat run to find the next differing sample
        let mut j = i + 1;
        while j < series.len() && series[j].1 == cur {
            j += 1;
        }
        if j == series.len() {
            break;
        }
        let next = series[j].1;
        if cur > prev && cur > next {
            peaks.push(Peak { t: series[i].0, value: cur, is_max: true });
        } else if cur < prev && cur < next {
            peaks.push(Peak { t: series[i].0, value: cur, is_max: false });
        }
        i = j;
    }
    peaks
}

/// Summary of the trailing oscillation in an error series: `(amplitudes, period)`.
/// Amplitudes are half the swing between consecutive opposite peaks.
pub fn trailing_oscillation(series: &[(f64, f64)]) -> Option<(Vec<f64>, f64)> {
    let peaks = find_peaks(series);
    if peaks.len() < SUSTAINED_PEAKS + 1 {
        return None;
    }
    let tail = &peaks[peaks.len() - (SUSTAINED_PEAKS + 1)..];
    let amplitudes: Vec<f64> = tail.windows(2).map(|w| (w[1].value - w[0].value).abs() / 2.0).collect();
    let periods: Vec<f64> = tail.windows(3).map(|w| w[2].t - w[0].t).collect();
    let period = periods.iter().sum::<f64>() / periods.len() as f64;
    Some((amplitudes, period))
}

/// True when the last five peak amplitudes spread by less than 10%.
pub fn is_sustained(amplitudes: &[f64]) -> bool {
    let max = amplitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = amplitudes.iter().copied().fold(f64::INFINITY, f64::min);
    max > MIN_AMPLITUDE && (max - min) / max < SUSTAINED_TOLERANCE
}

/// Runs the P-only loop for each gain in `kp_grid` (ascending) and returns the
/// first gain whose error oscillation is sustained, with its period and the
/// classic PID gains derived from them.
///
/// `closed_loop` maps a proportional gain to the `(t, error)` series of one run.
pub fn zn_tune<F>(mut closed_loop: F, kp_grid: &[f64]) -> Result<ZnResult, ExpertError>
where
    F: FnMut(f64) -> Vec<(f64, f64)>,
{
    if kp_grid.len() < 2 || kp_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExpertError::BadGrid);
    }
    for &kp in kp_grid {
        let series = closed_loop(kp);
        if let Some((amps, tu)) = trailing_oscillation(&series) {
            if is_sustained(&amps) && tu > 0.0 {
                return Ok(ZnResult {
                    ku: kp,
                    tu,
                    gains: classic_gains(kp, tu),
                });
            }
        }
    }
    Err(ExpertError::NoUltimateGain)
}

/// Closed-loop wall-following run used as the tuning plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorPlant {
    pub map: WorldMap,
    pub start: Pose,
    pub speed: f64,
    pub dt: f64,
    pub duration: f64,
    pub setpoint: f64,
    pub side: Side,
    pub lidar: LidarConfig,
}

impl CorridorPlant {
    /// Straight-corridor plant: start offset `offset` meters toward the left
    /// wall from the map's start pose, following the right wall at half width.
    pub fn straight(map: WorldMap, offset: f64) -> Self {
        let start = Pose {
            y: map.start.y + offset,
            ..map.start
        };
        let setpoint = map.start.y;
        Self {
            map,
            start,
            speed: 0.8,
            dt: 0.01,
            duration: 90.0,
            setpoint,
            side: Side::Right,
            lidar: LidarConfig::default(),
        }
    }

    /// Runs `gains` from the start pose; the series stops early if the car
    /// loses the wall or comes within 0.1 m of one.
    pub fn run(&self, gains: &PidGains) -> Vec<(f64, f64)> {
        let mut controller = super::PidController::new(*gains);
        let mut state = CarState::at(self.start, self.speed);
        let steps = crate::math::round(self.duration / self.dt) as usize;
        let mut out = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = k as f64 * self.dt;
            let scan = lidar_scan(&self.map, &state, &self.lidar, t);
            let Ok(e) = wall_follow_error(&scan, self.setpoint, self.side) else {
                break;
            };
            out.push((t, e));
            let u = controller.update(e, self.dt);
            state = step(state, Controls::new(u, self.speed), self.dt);
            if self.map.nearest_wall_distance(state.position()) < 0.1 {
                break;
            }
        }
        out
    }

    pub fn p_only_runner(&self) -> impl FnMut(f64) -> Vec<(f64, f64)> + '_ {
        move |kp| self.run(&PidGains::p_only(kp))
    }
}
