use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::farm::{efficiency, Behavior, FarmCounters, FarmletRole, PaStatus};
use crate::mitigation::AuthorityMask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarmletTelemetry {
    pub id: u32,
    pub role: FarmletRole,
    pub occupancy: usize,
    pub capacity: usize,
    pub fraction: f64,
    pub drop_rate: f64,
    pub received: u64,
    pub processed: u64,
    pub overflowed: u64,
    pub dropped_prescale: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerTelemetry {
    pub id: u32,
    pub farmlet: u32,
    pub status: PaStatus,
    pub behavior: Behavior,
    pub quarantined: bool,
    pub p: f64,
    pub v: f64,
    pub i: f64,
    pub notifies: u64,
    pub resets: u64,
    pub escalations: u64,
}

/// Running totals of mitigation activity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VlaCounters {
    pub notifies: u64,
    pub cleanups: u64,
    /// Local resets under WR.
    pub worker_resets: u64,
    pub escalations: u64,
    /// Resets ordered by a farmlet agent.
    pub farmlet_resets: u64,
    pub quarantines: u64,
    pub operator_restarts: u64,
    /// Farmlet prescale updates that set a non-zero rate.
    pub fp_updates: u64,
    /// Global prescale broadcasts.
    pub gp_updates: u64,
    pub failovers: u64,
    pub failover_alarms: u64,
    pub fault_summaries: u64,
    pub armor_actions: u64,
}

/// One System Monitor snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    /// Virtual seconds.
    pub t: f64,
    pub efficiency: f64,
    pub missing_events: u64,
    pub in_flight: u64,
    pub stopped: bool,
    pub authority: AuthorityMask,
    pub counters: FarmCounters,
    pub farmlets: Vec<FarmletTelemetry>,
    pub workers: Vec<WorkerTelemetry>,
    pub vla: VlaCounters,
}

/// Internal consistency of one record; returns every violated property.
pub fn check_record(r: &TelemetryRecord) -> Vec<String> {
    let mut bad = Vec::new();
    let c = &r.counters;
    let rhs = c.processed + c.dropped_prescale + c.lost + r.in_flight;
    if c.generated != rhs {
        bad.push(format!(
            "t={}: generated {} != processed {} + dropped {} + lost {} + in_flight {}",
            r.t, c.generated, c.processed, c.dropped_prescale, c.lost, r.in_flight
        ));
    }
    if c.accepted_l1 + c.rejected_l1 != c.processed {
        bad.push(format!("t={}: accepted + rejected != processed", r.t));
    }
    if r.efficiency != efficiency(c) {
        bad.push(format!("t={}: efficiency field disagrees with counters", r.t));
    }
    if r.missing_events != c.lost {
        bad.push(format!("t={}: missing_events != lost", r.t));
    }
    for f in &r.farmlets {
        if f.occupancy > f.capacity {
            bad.push(format!("t={}: farmlet {} occupancy above capacity", r.t, f.id));
        }
        if !(0.0..=1.0).contains(&f.drop_rate) {
            bad.push(format!("t={}: farmlet {} drop rate {}", r.t, f.id, f.drop_rate));
        }
    }
    for w in &r.workers {
        let sum = w.p + w.v + w.i;
        if (sum - 1.0).abs() > 1e-9 || w.p < 0.0 || w.v < 0.0 || w.i < 0.0 {
            bad.push(format!("t={}: worker {} P+V+I = {}", r.t, w.id, sum));
        }
    }
    bad
}
