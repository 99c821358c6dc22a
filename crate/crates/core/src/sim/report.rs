use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::armor::{ArmorAction, ArmorLevel};
use crate::control::VlaCounters;
use crate::farm::FarmCounters;
use crate::vla::{VlaAction, VlaMessage};

/// One agent decision, in emission order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t_ns: u64,
    pub node: u32,
    #[serde(flatten)]
    pub action: VlaAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmorRecord {
    pub t_ns: u64,
    pub level: ArmorLevel,
    #[serde(flatten)]
    pub action: ArmorAction,
}

/// A statistical message as emitted by a farmlet agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub farmlet: u32,
    pub message: VlaMessage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailoverRecord {
    pub unfit: u32,
    pub spare: u32,
    pub effective_time_ns: u64,
    /// Crossings the unfit farmlet had received at the switch.
    pub unfit_received: u64,
}

/// End-of-run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    /// Virtual seconds simulated.
    pub t: f64,
    pub efficiency: f64,
    pub counters: FarmCounters,
    pub in_flight: u64,
    pub vla: VlaCounters,
    pub failovers: Vec<FailoverRecord>,
    pub executed_events: u64,
    pub telemetry_records: u64,
    pub journal_entries: u64,
    pub invariant_violations: Vec<String>,
    pub warnings: Vec<String>,
}
