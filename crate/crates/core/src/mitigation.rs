//! Authority-gated mitigation strategies: worker reset (WR), farmlet
//! prescale (FP), global prescale (GP), global failover (GF), and the
//! subsumption escalation policy.
//!
//! Everything here is a pure decision function. The simulation applies the
//! decisions and journals authority changes.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::farm::{FarmletId, FarmletRole, WorkerId};
use crate::time::SimTime;
use crate::vla::EscalationRecord;

/// Which mitigation strategies the operator has enabled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorityMask {
    pub wr: bool,
    pub fp: bool,
    pub gp: bool,
    pub gf: bool,
}

impl AuthorityMask {
    pub const NONE: AuthorityMask = AuthorityMask {
        wr: false,
        fp: false,
        gp: false,
        gf: false,
    };
    pub const ALL: AuthorityMask = AuthorityMask {
        wr: true,
        fp: true,
        gp: true,
        gf: true,
    };

    /// The mask a fresh session starts with.
    pub const fn standard() -> Self {
        AuthorityMask {
            wr: true,
            fp: true,
            gp: false,
            gf: true,
        }
    }
}

impl fmt::Display for AuthorityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<&str> = Vec::new();
        for (on, name) in [(self.wr, "WR"), (self.fp, "FP"), (self.gp, "GP"), (self.gf, "GF")] {
            if on {
                parts.push(name);
            }
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join("|"))
        }
    }
}

/// Proportional prescale law `clamp(k * (occupancy - target), 0, max_rate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrescaleController {
    pub target_occupancy: f64,
    pub gain: f64,
    pub max_rate: f64,
}

impl Default for PrescaleController {
    fn default() -> Self {
        PrescaleController {
            target_occupancy: 0.5,
            gain: 2.0,
            max_rate: 1.0,
        }
    }
}

impl PrescaleController {
    pub fn law(&self, occupancy_fraction: f64) -> f64 {
        let raw = self.gain * (occupancy_fraction - self.target_occupancy);
        if raw.is_nan() {
            return 0.0;
        }
        raw.clamp(0.0, self.max_rate.clamp(0.0, 1.0))
    }
}

/// Farmlet-local drop rate. Inert (0) without FP.
pub fn farmlet_prescale(ctrl: &PrescaleController, authority: AuthorityMask, occupancy_fraction: f64) -> f64 {
    if !authority.fp {
        return 0.0;
    }
    ctrl.law(occupancy_fraction)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

/// Uniform drop rate for every active farmlet, or `None` without GP.
pub fn global_prescale(
    ctrl: &PrescaleController,
    authority: AuthorityMask,
    occupancies: &[f64],
    aggregation: Aggregation,
) -> Option<f64> {
    if !authority.gp {
        return None;
    }
    if occupancies.is_empty() {
        return Some(0.0);
    }
    let agg = match aggregation {
        Aggregation::Max => occupancies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => occupancies.iter().sum::<f64>() / occupancies.len() as f64,
    };
    Some(ctrl.law(agg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailoverPlan {
    pub unfit: FarmletId,
    pub spare: FarmletId,
    pub effective_time: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailoverConfig {
    /// Efficiency below which a farmlet is unfit.
    pub unfit_efficiency: f64,
    /// Window over which farmlet efficiency is measured, seconds.
    pub window: f64,
    /// Minimum crossings routed within the window before efficiency counts.
    pub min_routed: u64,
}

impl Default for FailoverConfig {
    fn default() -> Self {
        FailoverConfig {
            unfit_efficiency: 0.5,
            window: 2.0,
            min_routed: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct HealthSample {
    t: SimTime,
    routed: u64,
    handled: u64,
}

/// The global level's view of one farmlet.
#[derive(Clone, Debug, PartialEq)]
pub struct FarmletHealth {
    pub farmlet: FarmletId,
    pub role: FarmletRole,
    pub data_link_up: bool,
    samples: VecDeque<HealthSample>,
}

impl FarmletHealth {
    pub fn new(farmlet: FarmletId, role: FarmletRole) -> Self {
        FarmletHealth {
            farmlet,
            role,
            data_link_up: true,
            samples: VecDeque::new(),
        }
    }

    /// Records cumulative routed and handled counts, keeping one window of
    /// history. Handled means processed or deliberately prescaled: a farmlet
    /// shedding load under a prescale grant is not failing.
    pub fn record(&mut self, t: SimTime, routed: u64, handled: u64, window: SimTime) {
        self.samples.push_back(HealthSample { t, routed, handled });
        while self.samples.len() > 2 {
            match self.samples.get(1) {
                Some(s) if t.saturating_sub(s.t) >= window => {
                    self.samples.pop_front();
                }
                _ => break,
            }
        }
    }

    /// `(handled delta, routed delta)` across the retained window.
    pub fn window_counts(&self) -> (u64, u64) {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => (b.handled.saturating_sub(a.handled), b.routed.saturating_sub(a.routed)),
            _ => (0, 0),
        }
    }

    fn window_span(&self) -> SimTime {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.t.saturating_sub(a.t),
            _ => SimTime::ZERO,
        }
    }

    /// Efficiency is judged only over a full window, so queue filling at
    /// start-up or after a role change is not mistaken for loss.
    pub fn is_unfit(&self, cfg: &FailoverConfig) -> bool {
        if !self.data_link_up {
            return true;
        }
        if self.window_span() < SimTime::from_secs_f64(cfg.window) {
            return false;
        }
        let (handled, routed) = self.window_counts();
        routed >= cfg.min_routed && (handled as f64) < cfg.unfit_efficiency * routed as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FailoverOutcome {
    pub plans: Vec<FailoverPlan>,
    /// Unfit farmlets for which no spare was left.
    pub alarms: Vec<FarmletId>,
}

/// Declares unfit active farmlets and pairs each with a hot spare, lowest ids first.
pub fn evaluate_failover(
    health: &[FarmletHealth],
    authority: AuthorityMask,
    cfg: &FailoverConfig,
    now: SimTime,
) -> FailoverOutcome {
    let mut out = FailoverOutcome::default();
    if !authority.gf {
        return out;
    }
    let mut spares = health
        .iter()
        .filter(|h| h.role == FarmletRole::HotSpare && h.data_link_up)
        .map(|h| h.farmlet);
    for h in health.iter().filter(|h| h.role == FarmletRole::Active) {
        if !h.is_unfit(cfg) {
            continue;
        }
        match spares.next() {
            Some(spare) => out.plans.push(FailoverPlan {
                unfit: h.farmlet,
                spare,
                effective_time: now,
            }),
            None => out.alarms.push(h.farmlet),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsumeConfig {
    pub n_subsume: u32,
    /// Sliding window, seconds.
    pub window: f64,
}

impl Default for SubsumeConfig {
    fn default() -> Self {
        SubsumeConfig {
            n_subsume: 3,
            window: 10.0,
        }
    }
}

/// The farmlet level takes over a worker's mitigation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsumeAction {
    pub worker: WorkerId,
    pub revoke_local_reset: bool,
    pub quarantine: bool,
    pub summary: String,
}

/// Fires once the record's in-window count reaches the threshold.
pub fn subsume(record: &EscalationRecord, cfg: &SubsumeConfig) -> Option<SubsumeAction> {
    if record.count() < cfg.n_subsume as usize {
        return None;
    }
    Some(SubsumeAction {
        worker: record.worker,
        revoke_local_reset: true,
        quarantine: true,
        summary: alloc::format!(
            "{} subsumed after {} {} faults within {:.3}s",
            record.worker,
            record.count(),
            record.code,
            record.window.as_secs_f64()
        ),
    })
}
