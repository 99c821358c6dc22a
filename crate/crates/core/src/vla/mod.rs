//! Very Lightweight Agents.
//!
//! The worker-level agent is a deadline watchdog around each crossing: the
//! PA declares a time budget, the timer is armed with it, a first expiry
//! notifies the PA and grants a grace period, and a second expiry either
//! resets the PA (with WR) or escalates `e1` to the farmlet agent.
//!
//! The farmlet-level agent tracks escalation trends per worker, resets or
//! subsumes workers, drives farmlet prescale and forwards summaries upward.

mod farmlet;
mod message;
mod timer;


use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::farm::{FarmletId, WorkerId};
use crate::time::SimTime;

pub use farmlet::{
    farmlet_decide, EscalationRecord, FarmletContext, FarmletEvent, FarmletPolicy, FarmletResponse, FarmletVla, FarmletVlaConfig,
    HandFarmletPolicy,
};
pub use message::{FaultCode, MessageClass, Topic, VlaMessage};
pub use timer::{pa_cleanup, CleanupResult, DeadlineTimer, HandWorkerVla, TimerPhase, WorkerVlaLogic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Worker,
    Farmlet,
    Global,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Worker => "worker",
            Level::Farmlet => "farmlet",
            Level::Global => "global",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

/// Concrete mitigation actions emitted by agents (hand-coded or statechart).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum VlaAction {
    NotifyPa,
    ArmTimer { duration: SimTime },
    StopTimer,
    /// `None` targets the agent's own worker.
    ResetPa { worker: Option<WorkerId> },
    Escalate { level: Level, code: FaultCode },
    SetPrescale { rate: f64 },
    Reroute { from: FarmletId, to: FarmletId },
    Quarantine { worker: WorkerId },
    Forward { direction: Direction },
}

/// Inputs to the worker agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerVlaEvent {
    CrossingStarted,
    PaCompleted,
    DeadlineExpired,
}

impl WorkerVlaEvent {
    pub const ALL: [WorkerVlaEvent; 3] = [
        WorkerVlaEvent::CrossingStarted,
        WorkerVlaEvent::PaCompleted,
        WorkerVlaEvent::DeadlineExpired,
    ];

    /// Event name as used by statechart triggers.
    pub fn name(self) -> &'static str {
        match self {
            WorkerVlaEvent::CrossingStarted => "crossing_start",
            WorkerVlaEvent::PaCompleted => "pa_done",
            WorkerVlaEvent::DeadlineExpired => "deadline_expired",
        }
    }
}

/// What the worker agent may consult when deciding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerVlaContext {
    /// Effective reset authority: WR granted and not revoked by subsumption.
    pub wr: bool,
    pub estimate: SimTime,
    pub grace: SimTime,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VlaError {
    #[error("deadline timer already armed")]
    AlreadyArmed,
    #[error("grace period must be positive")]
    ZeroGrace,
    #[error("unknown {0}")]
    UnknownWorker(WorkerId),
    #[error("message is not a fault: {0:?}")]
    NotAFault(MessageClass),
    #[error("fault messages must carry a code")]
    MissingCode,
    #[error("statechart: {0}")]
    Statechart(alloc::string::String),
}
