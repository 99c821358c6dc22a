use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Direction, FaultCode, MessageClass, VlaAction, VlaError, VlaMessage};
use crate::farm::WorkerId;
use crate::mitigation::{subsume, AuthorityMask, PrescaleController, SubsumeAction, SubsumeConfig};
use crate::time::SimTime;

/// Fault timestamps for one `(worker, code)` pair inside a sliding window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EscalationRecord {
    pub worker: WorkerId,
    pub code: FaultCode,
    pub window: SimTime,
    timestamps: VecDeque<SimTime>,
}

impl EscalationRecord {
    pub fn new(worker: WorkerId, code: FaultCode, window: SimTime) -> Self {
        EscalationRecord {
            worker,
            code,
            window,
            timestamps: VecDeque::new(),
        }
    }

    /// Records a fault at `t` and forgets those older than `t - window`.
    pub fn observe(&mut self, t: SimTime) {
        self.timestamps.push_back(t);
        self.expire(t);
    }

    /// Drops faults older than `now - window`; the boundary is inclusive.
    pub fn expire(&mut self, now: SimTime) {
        while let Some(&front) = self.timestamps.front() {
            if now.saturating_sub(front) > self.window {
                self.timestamps.pop_front();
            } else {
                break;
            }
        }
    }

    /// Faults in the window as of the last observation.
    pub fn count(&self) -> usize {
        self.timestamps.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FarmletVlaConfig {
    /// Whether the farmlet agent may itself reset a worker's PA.
    pub reset_authority: bool,
    pub subsume: SubsumeConfig,
}

/// Inputs to the farmlet agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FarmletEvent {
    Fault { worker: WorkerId, code: FaultCode },
    /// Periodic statistics tick; drives the farmlet prescale controller.
    StatsTick,
}

impl FarmletEvent {
    /// Event name as used by statechart triggers.
    pub fn name(&self) -> &'static str {
        match self {
            FarmletEvent::Fault { .. } => "fault",
            FarmletEvent::StatsTick => "stats_tick",
        }
    }

    pub fn code(&self) -> Option<FaultCode> {
        match self {
            FarmletEvent::Fault { code, .. } => Some(*code),
            FarmletEvent::StatsTick => None,
        }
    }
}

/// What the farmlet agent may consult when deciding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarmletContext {
    pub authority: AuthorityMask,
    pub reset_authority: bool,
    /// In-window faults for the event's `(worker, code)`; 0 on ticks.
    pub count: u32,
    pub n_subsume: u32,
    /// The event's worker is already subsumed.
    pub subsumed: bool,
    pub occupancy: f64,
    pub prescale: PrescaleController,
}

pub trait FarmletPolicy {
    fn decide(&mut self, event: FarmletEvent, ctx: &FarmletContext) -> Result<Vec<VlaAction>, VlaError>;

    fn state_name(&self) -> &str;
}

/// Reference farmlet decision rule.
///
/// Faults: quarantine at the subsumption threshold, else reset if the farmlet
/// holds reset authority; every fault is forwarded upward. Ticks: with GP the
/// global level owns the rate, with FP only the farmlet law applies, with
/// neither the rate is pinned to zero.
pub fn farmlet_decide(event: FarmletEvent, ctx: &FarmletContext) -> Vec<VlaAction> {
    let up = VlaAction::Forward {
        direction: Direction::Up,
    };
    match event {
        FarmletEvent::Fault { worker, .. } => {
            if ctx.subsumed {
                vec![up]
            } else if ctx.count >= ctx.n_subsume {
                vec![VlaAction::Quarantine { worker }, up]
            } else if ctx.reset_authority {
                vec![VlaAction::ResetPa { worker: Some(worker) }, up]
            } else {
                vec![up]
            }
        }
        FarmletEvent::StatsTick => {
            if ctx.authority.gp {
                Vec::new()
            } else if ctx.authority.fp {
                vec![VlaAction::SetPrescale {
                    rate: ctx.prescale.law(ctx.occupancy),
                }]
            } else {
                vec![VlaAction::SetPrescale { rate: 0.0 }]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HandFarmletPolicy;

impl FarmletPolicy for HandFarmletPolicy {
    fn decide(&mut self, event: FarmletEvent, ctx: &FarmletContext) -> Result<Vec<VlaAction>, VlaError> {
        Ok(farmlet_decide(event, ctx))
    }

    fn state_name(&self) -> &str {
        "Monitoring"
    }
}

/// Response of the farmlet agent to one fault message.
#[derive(Clone, Debug, PartialEq)]
pub struct FarmletResponse {
    pub actions: Vec<VlaAction>,
    pub subsumed: Option<SubsumeAction>,
    /// In-window count for the message's `(worker, code)` after recording it.
    pub count: u32,
}

/// Farmlet agent state: escalation trends and subsumed workers.
#[derive(Clone, Debug)]
pub struct FarmletVla {
    pub config: FarmletVlaConfig,
    workers: BTreeSet<WorkerId>,
    records: BTreeMap<(WorkerId, FaultCode), EscalationRecord>,
    subsumed: BTreeSet<WorkerId>,
}

impl FarmletVla {
    pub fn new(config: FarmletVlaConfig, workers: impl IntoIterator<Item = WorkerId>) -> Self {
        FarmletVla {
            config,
            workers: workers.into_iter().collect(),
            records: BTreeMap::new(),
            subsumed: BTreeSet::new(),
        }
    }

    pub fn is_subsumed(&self, worker: WorkerId) -> bool {
        self.subsumed.contains(&worker)
    }

    pub fn subsumed(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.subsumed.iter().copied()
    }

    /// Lifts subsumption after an operator restart and clears its history.
    pub fn release(&mut self, worker: WorkerId) {
        self.subsumed.remove(&worker);
        self.records.retain(|(w, _), _| *w != worker);
    }

    /// Forgets escalation trends after a supervisor restart. Subsumption
    /// survives: only an operator restart lifts it.
    pub fn clear_history(&mut self) {
        self.records.clear();
    }

    pub fn record(&self, worker: WorkerId, code: FaultCode) -> Option<&EscalationRecord> {
        self.records.get(&(worker, code))
    }

    fn base_context(&self, authority: AuthorityMask, occupancy: f64, prescale: PrescaleController) -> FarmletContext {
        FarmletContext {
            authority,
            reset_authority: self.config.reset_authority,
            count: 0,
            n_subsume: self.config.subsume.n_subsume,
            subsumed: false,
            occupancy,
            prescale,
        }
    }

    /// Handles a fault message whose body names the reporting `worker`.
    pub fn handle(
        &mut self,
        msg: &VlaMessage,
        authority: AuthorityMask,
        occupancy: f64,
        prescale: PrescaleController,
        policy: &mut dyn FarmletPolicy,
    ) -> Result<FarmletResponse, VlaError> {
        if msg.class != MessageClass::Fault {
            return Err(VlaError::NotAFault(msg.class));
        }
        let code = msg.code.ok_or(VlaError::MissingCode)?;
        let worker = msg
            .get("worker")
            .map(|w| WorkerId(w as u32))
            .ok_or(VlaError::UnknownWorker(WorkerId(u32::MAX)))?;
        if !self.workers.contains(&worker) {
            return Err(VlaError::UnknownWorker(worker));
        }
        let window = SimTime::from_secs_f64(self.config.subsume.window);
        let record = self
            .records
            .entry((worker, code))
            .or_insert_with(|| EscalationRecord::new(worker, code, window));
        record.observe(msg.t);
        let count = record.count() as u32;

        let mut ctx = self.base_context(authority, occupancy, prescale);
        ctx.count = count;
        ctx.subsumed = self.subsumed.contains(&worker);
        let actions = policy.decide(FarmletEvent::Fault { worker, code }, &ctx)?;

        let mut subsumed = None;
        if actions.iter().any(|a| matches!(a, VlaAction::Quarantine { worker: w } if *w == worker)) {
            if let Some(record) = self.records.get(&(worker, code)) {
                subsumed = subsume(record, &self.config.subsume);
            }
            self.subsumed.insert(worker);
        }
        Ok(FarmletResponse {
            actions,
            subsumed,
            count,
        })
    }

    /// Periodic tick: prescale decision for this farmlet.
    pub fn tick(
        &mut self,
        authority: AuthorityMask,
        occupancy: f64,
        prescale: PrescaleController,
        policy: &mut dyn FarmletPolicy,
    ) -> Result<Vec<VlaAction>, VlaError> {
        let ctx = self.base_context(authority, occupancy, prescale);
        policy.decide(FarmletEvent::StatsTick, &ctx)
    }
}
