//! PID wall-following expert and Ziegler–Nichols tuning.

mod pid;
mod tuning;
mod wall;

pub use pid::{pid_step, PidController, PidGains, PidState};
pub use tuning::{
    classic_gains, find_peaks, is_sustained, trailing_oscillation, zn_tune, CorridorPlant, Peak, ZnResult,
    SUSTAINED_PEAKS, SUSTAINED_TOLERANCE,
};
pub use wall::{wall_follow_error, Side, WallFollower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ExpertError {
    #[error("no wall visible")]
    NoWallVisible,
    #[error("empty scan")]
    EmptyScan,
    #[error("no ultimate gain found")]
    NoUltimateGain,
    #[error("gain grid must be ascending with at least 2 entries")]
    BadGrid,
}

/// Ultimate gain and period of the straight 2 m corridor plant when the P-only
/// sweep starts at 4.0 (`tune-pid --grid 4:8:0.5`, 0.1 m start offset).
pub const EXPERT_KU: f64 = 4.0;
pub const EXPERT_TU: f64 = 3.87;

/// Gains used by the recording expert: the classic table at
/// (`EXPERT_KU`, `EXPERT_TU`). The sweep from 0.5 settles on ku = 0.5, whose
/// gains hold a straight corridor but are too soft to take the loop's corners.
pub fn expert_gains() -> PidGains {
    classic_gains(EXPERT_KU, EXPERT_TU)
}
