use serde::{Deserialize, Serialize};

use super::{FarmletId, WorkerId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaStatus {
    Idle,
    Processing,
    Hung,
    Restarting,
}

/// How the PA reacts to corrupt crossings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Ignore corrupt data (counted processed and rejected).
    #[default]
    RunWell,
    /// Hang on corrupt data.
    RunPoor,
}

/// What the worker's processor is doing right now.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activity {
    Idle,
    /// VLA bookkeeping until `vla_until`, physics application afterwards.
    Busy { vla_until: SimTime },
    /// VLA-driven handling such as a PA restart.
    Vla,
}

/// Accumulated P/V/I time for one worker.
///
/// Accrual is lazy: time is attributed when the activity changes or a
/// snapshot is taken. While paused (run stopped) all time counts as idle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utilization {
    started_at: SimTime,
    since: SimTime,
    activity: Activity,
    paused: bool,
    time_p: SimTime,
    time_v: SimTime,
    time_i: SimTime,
}

impl Utilization {
    pub fn new(start: SimTime) -> Self {
        Utilization {
            started_at: start,
            since: start,
            activity: Activity::Idle,
            paused: false,
            time_p: SimTime::ZERO,
            time_v: SimTime::ZERO,
            time_i: SimTime::ZERO,
        }
    }

    pub fn activity(&self) -> Activity {
        self.activity
    }

    fn split(&self, now: SimTime) -> (SimTime, SimTime, SimTime) {
        let span = now.saturating_sub(self.since);
        if self.paused {
            return (SimTime::ZERO, SimTime::ZERO, span);
        }
        match self.activity {
            Activity::Idle => (SimTime::ZERO, SimTime::ZERO, span),
            Activity::Vla => (SimTime::ZERO, span, SimTime::ZERO),
            Activity::Busy { vla_until } => {
                let v = vla_until.saturating_sub(self.since).min(span);
                (span - v, v, SimTime::ZERO)
            }
        }
    }

    pub fn accrue(&mut self, now: SimTime) {
        let (p, v, i) = self.split(now);
        self.time_p += p;
        self.time_v += v;
        self.time_i += i;
        self.since = self.since.max(now);
    }

    pub fn set_activity(&mut self, now: SimTime, activity: Activity) {
        self.accrue(now);
        self.activity = activity;
    }

    pub fn pause(&mut self, now: SimTime) {
        self.accrue(now);
        self.paused = true;
    }

    /// Ends a pause; pending VLA overhead windows shift by the paused span.
    pub fn resume(&mut self, now: SimTime, paused_for: SimTime) {
        self.accrue(now);
        self.paused = false;
        if let Activity::Busy { vla_until } = &mut self.activity {
            *vla_until += paused_for;
        }
    }

    /// `(P, V, I)` totals as of `now`.
    pub fn totals_at(&self, now: SimTime) -> (SimTime, SimTime, SimTime) {
        let (p, v, i) = self.split(now);
        (self.time_p + p, self.time_v + v, self.time_i + i)
    }

    pub fn elapsed_at(&self, now: SimTime) -> SimTime {
        now.saturating_sub(self.started_at)
    }

    /// `(P, V, I)` fractions; `(0, 0, 1)` when no time has elapsed.
    pub fn fractions_at(&self, now: SimTime) -> (f64, f64, f64) {
        let elapsed = self.elapsed_at(now).as_nanos();
        if elapsed == 0 {
            return (0.0, 0.0, 1.0);
        }
        let (p, v, i) = self.totals_at(now);
        let e = elapsed as f64;
        (p.as_nanos() as f64 / e, v.as_nanos() as f64 / e, i.as_nanos() as f64 / e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState {
    pub id: WorkerId,
    pub farmlet: FarmletId,
    pub pa_status: PaStatus,
    pub behavior: Behavior,
    /// Removed from dispatch by subsumption.
    pub quarantined: bool,
    pub util: Utilization,
}

impl WorkerState {
    pub fn new(id: WorkerId, farmlet: FarmletId, start: SimTime) -> Self {
        WorkerState {
            id,
            farmlet,
            pa_status: PaStatus::Idle,
            behavior: Behavior::RunWell,
            quarantined: false,
            util: Utilization::new(start),
        }
    }
}

pub fn utilization_snapshot(worker: &WorkerState, now: SimTime) -> (f64, f64, f64) {
    worker.util.fractions_at(now)
}
