use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn p_only(kp: f64) -> Self {
        Self { kp, ki: 0.0, kd: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite() && self.kp >= 0.0
    }

    /// Anti-windup bound on the integral: 1 / max(ki, ε).
    pub fn integral_limit(&self) -> f64 {
        1.0 / self.ki.abs().max(1e-9)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One controller update. The derivative term is zero on the first call and
/// the output is clamped to the steering range [−1, 1].
pub fn pid_step(gains: &PidGains, state: PidState, error: f64, dt: f64) -> (PidState, f64) {
    debug_assert!(dt > 0.0);
    let limit = gains.integral_limit();
    let integral = (state.integral + error * dt).clamp(-limit, limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let next = PidState {
        integral,
        prev_error: error,
        initialized: true,
    };
    (next, if u.is_nan() { 0.0 } else { u.clamp(-1.0, 1.0) })
}

/// Stateful wrapper with an optional exponential low-pass on the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
    /// Weight of the new command in `α·u + (1−α)·u_prev`; `None` disables
    /// smoothing.
    pub smoothing: Option<f64>,
    last_output: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            state: PidState::default(),
            smoothing: None,
            last_output: None,
        }
    }

    pub fn with_smoothing(mut self, alpha: f64) -> Self {
        self.smoothing = Some(alpha.clamp(0.0, 1.0));
        self
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
        self.last_output = None;
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let (state, u) = pid_step(&self.gains, self.state, error, dt);
        self.state = state;
        let out = match (self.smoothing, self.last_output) {
            (Some(alpha), Some(prev)) => alpha * u + (1.0 - alpha) * prev,
            _ => u,
        };
        self.last_output = Some(out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_error_zero_output() {
        let (_, u) = pid_step(&PidGains { kp: 1.0, ki: 1.0, kd: 1.0 }, PidState::default(), 0.0, 0.1);
        assert_eq!(u, 0.0);
    }

    #[test]
    fn proportional_hits_clamp_boundary() {
        let (_, u) = pid_step(&PidGains::p_only(2.0), PidState::default(), 0.5, 0.1);
        assert_eq!(u, 1.0);
    }

    #[test]
    fn integral_accumulates() {
        let gains = PidGains { kp: 0.0, ki: 1.0, kd: 0.0 };
        let mut s = PidState::default();
        let mut u = 0.0;
        for _ in 0..4 {
            (s, u) = pid_step(&gains, s, 0.5, 0.1);
        }
        // 4 × 0.5 × 0.1
        assert!((u - 0.2).abs() < 1e-12);
    }

    #[test]
    fn derivative_skipped_on_first_call() {
        let gains = PidGains { kp: 0.0, ki: 0.0, kd: 1.0 };
        let (s, u) = pid_step(&gains, PidState::default(), 0.3, 0.1);
        assert_eq!(u, 0.0);
        let (_, u) = pid_step(&gains, s, 0.35, 0.1);
        assert!((u - 0.5).abs() < 1e-9);
    }

    #[test]
    fn integral_is_clamped() {
        let gains = PidGains { kp: 0.0, ki: 4.0, kd: 0.0 };
        let mut s = PidState::default();
        for _ in 0..100 {
            s = pid_step(&gains, s, 1.0, 0.1).0;
        }
        assert_eq!(s.integral, 0.25);
    }

    #[test]
    fn smoothing_low_passes() {
        let mut c = PidController::new(PidGains::p_only(1.0)).with_smoothing(0.5);
        assert_eq!(c.update(0.4, 0.1), 0.4);
        assert!((c.update(0.0, 0.1) - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn output_always_in_range(kp in 0.0..50.0f64, ki in -5.0..5.0f64, kd in -5.0..5.0f64,
                                  errs in proptest::collection::vec(-10.0..10.0f64, 1..30)) {
            let gains = PidGains { kp, ki, kd };
            let mut s = PidState::default();
            for e in errs {
                let (n, u) = pid_step(&gains, s, e, 0.05);
                prop_assert!((-1.0..=1.0).contains(&u));
                s = n;
            }
        }

        #[test]
        fn p_only_is_memoryless(kp in 0.0..10.0f64, e in -1.0..1.0f64, history in proptest::collection::vec(-1.0..1.0f64, 0..10)) {
            let gains = PidGains::p_only(kp);
            let mut s = PidState::default();
            for h in history {
                s = pid_step(&gains, s, h, 0.05).0;
            }
            let fresh = pid_step(&gains, PidState::default(), e, 0.05).1;
            prop_assert_eq!(pid_step(&gains, s, e, 0.05).1, fresh);
        }

        #[test]
        fn doubling_kp_doubles_unclamped_output(kp in 0.01..1.0f64, e in -0.45..0.45f64) {
            let u1 = pid_step(&PidGains::p_only(kp), PidState::default(), e, 0.05).1;
            let u2 = pid_step(&PidGains::p_only(2.0 * kp), PidState::default(), e, 0.05).1;
            prop_assert!((u2 - 2.0 * u1).abs() < 1e-12);
        }
    }
}
