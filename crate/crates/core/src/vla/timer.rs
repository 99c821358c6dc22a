use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FaultCode, Level, VlaAction, VlaError, WorkerVlaContext, WorkerVlaEvent};
use crate::farm::PaStatus;
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerPhase {
    Disarmed,
    Initial,
    Grace,
}

/// The worker agent's watchdog.
///
/// Legal phase moves: disarmed -> initial -> grace -> disarmed, and
/// initial -> disarmed when the PA finishes in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeadlineTimer {
    pub estimate: SimTime,
    pub grace: SimTime,
    pub phase: TimerPhase,
    pub armed_at: SimTime,
}

impl Default for DeadlineTimer {
    fn default() -> Self {
        DeadlineTimer {
            estimate: SimTime::ZERO,
            grace: SimTime::ZERO,
            phase: TimerPhase::Disarmed,
            armed_at: SimTime::ZERO,
        }
    }
}

impl DeadlineTimer {
    /// Arms with the PA's declared budget. Returns the expiry instant.
    pub fn arm(&mut self, now: SimTime, estimate: SimTime, grace: SimTime) -> Result<SimTime, VlaError> {
        if self.phase != TimerPhase::Disarmed {
            return Err(VlaError::AlreadyArmed);
        }
        if grace == SimTime::ZERO {
            return Err(VlaError::ZeroGrace);
        }
        self.estimate = estimate;
        self.grace = grace;
        self.phase = TimerPhase::Initial;
        self.armed_at = now;
        Ok(now + estimate)
    }

    /// Stops the timer. Returns whether it was armed.
    pub fn disarm(&mut self) -> bool {
        let was_armed = self.phase != TimerPhase::Disarmed;
        self.phase = TimerPhase::Disarmed;
        was_armed
    }

    /// Expiry handling. A disarmed timer yields nothing (stale expiry).
    pub fn on_expiry(&mut self, now: SimTime, wr: bool) -> Vec<VlaAction> {
        match self.phase {
            TimerPhase::Disarmed => Vec::new(),
            TimerPhase::Initial => {
                self.phase = TimerPhase::Grace;
                self.armed_at = now;
                vec![VlaAction::NotifyPa, VlaAction::ArmTimer { duration: self.grace }]
            }
            TimerPhase::Grace => {
                self.phase = TimerPhase::Disarmed;
                if wr {
                    vec![VlaAction::ResetPa { worker: None }]
                } else {
                    vec![VlaAction::Escalate {
                        level: Level::Farmlet,
                        code: FaultCode::E1,
                    }]
                }
            }
        }
    }
}

/// Worker agent decision logic. Implemented by hand here and by the
/// statechart interpreter in [`crate::dsl`].
pub trait WorkerVlaLogic {
    fn on_event(&mut self, now: SimTime, event: WorkerVlaEvent, ctx: &WorkerVlaContext) -> Result<Vec<VlaAction>, VlaError>;

    /// Returns to the initial state after an external PA restart.
    fn reset(&mut self);

    fn state_name(&self) -> &str;
}

/// Hand-coded worker agent: a [`DeadlineTimer`] driven by PA events.
#[derive(Clone, Debug, Default)]
pub struct HandWorkerVla {
    pub timer: DeadlineTimer,
}

impl HandWorkerVla {
    pub fn new() -> Self {
        Self::default()
    }
}

impl WorkerVlaLogic for HandWorkerVla {
    fn on_event(&mut self, now: SimTime, event: WorkerVlaEvent, ctx: &WorkerVlaContext) -> Result<Vec<VlaAction>, VlaError> {
        match event {
            WorkerVlaEvent::CrossingStarted => {
                self.timer.arm(now, ctx.estimate, ctx.grace)?;
                Ok(vec![VlaAction::ArmTimer { duration: ctx.estimate }])
            }
            WorkerVlaEvent::PaCompleted => Ok(if self.timer.disarm() {
                vec![VlaAction::StopTimer]
            } else {
                Vec::new()
            }),
            WorkerVlaEvent::DeadlineExpired => Ok(self.timer.on_expiry(now, ctx.wr)),
        }
    }

    fn reset(&mut self) {
        self.timer.disarm();
    }

    fn state_name(&self) -> &str {
        match self.timer.phase {
            TimerPhase::Disarmed => "Idle",
            TimerPhase::Initial => "Normal",
            TimerPhase::Grace => "Grace",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CleanupResult {
    Success,
    Failure,
}

/// The PA's attempt to finish after a deadline notification. A hung PA never
/// cleans up; an overrunning one succeeds with probability `p_cleanup`.
pub fn pa_cleanup(status: PaStatus, p_cleanup: f64, rng: &mut RngStream) -> CleanupResult {
    if status == PaStatus::Hung {
        return CleanupResult::Failure;
    }
    if rng.bernoulli(p_cleanup) {
        CleanupResult::Success
    } else {
        CleanupResult::Failure
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(wr: bool) -> WorkerVlaContext {
        WorkerVlaContext {
            wr,
            estimate: SimTime::from_millis(2),
            grace: SimTime::from_micros(500),
        }
    }

    #[test]
    fn arm_schedules_expiry_at_now_plus_estimate() {
        let mut t = DeadlineTimer::default();
        let now = SimTime::from_millis(10_000);
        let at = t.arm(now, SimTime::from_millis(2), SimTime::from_micros(500)).unwrap();
        assert_eq!(at, SimTime::from_nanos(10_002_000_000));
        assert_eq!(t.phase, TimerPhase::Initial);
    }

    #[test]
    fn arming_twice_is_rejected() {
        let mut t = DeadlineTimer::default();
        t.arm(SimTime::ZERO, SimTime::from_millis(2), SimTime::from_millis(1)).unwrap();
        assert_eq!(
            t.arm(SimTime::ZERO, SimTime::from_millis(2), SimTime::from_millis(1)),
            Err(VlaError::AlreadyArmed)
        );
    }

    #[test]
    fn zero_grace_rejected() {
        let mut t = DeadlineTimer::default();
        assert_eq!(
            t.arm(SimTime::ZERO, SimTime::from_millis(2), SimTime::ZERO),
            Err(VlaError::ZeroGrace)
        );
    }

    #[test]
    fn completion_before_expiry_stops_timer() {
        let mut v = HandWorkerVla::new();
        let c = ctx(true);
        v.on_event(SimTime::from_millis(10_000), WorkerVlaEvent::CrossingStarted, &c).unwrap();
        let a = v.on_event(SimTime::from_millis(10_001), WorkerVlaEvent::PaCompleted, &c).unwrap();
        assert_eq!(a, vec![VlaAction::StopTimer]);
        assert_eq!(v.timer.phase, TimerPhase::Disarmed);
        // a stale expiry afterwards does nothing
        assert!(v.on_event(SimTime::from_millis(10_002), WorkerVlaEvent::DeadlineExpired, &c).unwrap().is_empty());
    }

    #[test]
    fn first_expiry_notifies_and_grants_grace() {
        let mut v = HandWorkerVla::new();
        let c = ctx(true);
        v.on_event(SimTime::ZERO, WorkerVlaEvent::CrossingStarted, &c).unwrap();
        let a = v.on_event(SimTime::from_millis(2), WorkerVlaEvent::DeadlineExpired, &c).unwrap();
        assert_eq!(
            a,
            vec![VlaAction::NotifyPa, VlaAction::ArmTimer { duration: c.grace }]
        );
        assert_eq!(v.timer.phase, TimerPhase::Grace);
    }

    #[test]
    fn second_expiry_resets_with_wr() {
        let mut v = HandWorkerVla::new();
        let c = ctx(true);
        v.on_event(SimTime::ZERO, WorkerVlaEvent::CrossingStarted, &c).unwrap();
        v.on_event(SimTime::from_millis(2), WorkerVlaEvent::DeadlineExpired, &c).unwrap();
        let a = v.on_event(SimTime::from_micros(2500), WorkerVlaEvent::DeadlineExpired, &c).unwrap();
        assert_eq!(a, vec![VlaAction::ResetPa { worker: None }]);
    }

    #[test]
    fn second_expiry_escalates_without_wr() {
        let mut v = HandWorkerVla::new();
        let c = ctx(false);
        v.on_event(SimTime::ZERO, WorkerVlaEvent::CrossingStarted, &c).unwrap();
        v.on_event(SimTime::from_millis(2), WorkerVlaEvent::DeadlineExpired, &c).unwrap();
        let a = v.on_event(SimTime::from_micros(2500), WorkerVlaEvent::DeadlineExpired, &c).unwrap();
        assert_eq!(
            a,
            vec![VlaAction::Escalate {
                level: Level::Farmlet,
                code: FaultCode::E1
            }]
        );
        assert_eq!(v.timer.phase, TimerPhase::Disarmed);
    }

    #[test]
    fn cleanup_probabilities() {
        let mut rng = RngStream::new(1, "cleanup");
        assert!((0..100).all(|_| pa_cleanup(PaStatus::Processing, 1.0, &mut rng) == CleanupResult::Success));
        assert!((0..100).all(|_| pa_cleanup(PaStatus::Processing, 0.0, &mut rng) == CleanupResult::Failure));
        assert!((0..100).all(|_| pa_cleanup(PaStatus::Hung, 1.0, &mut rng) == CleanupResult::Failure));
    }
}
