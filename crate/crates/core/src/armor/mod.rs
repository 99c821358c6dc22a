//! ARMOR supervisors: processes built from pluggable detection, analysis
//! and recovery elements that talk through a FIFO mailbox.
//!
//! Only recovery elements may turn messages into actions. Every enqueued
//! message is either handled by at least one subscriber or dead-lettered.

mod elements;

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

pub use elements::{
    match_return_codes, recovery_migrate, HeartbeatDetection, MigrationRecovery, QualityAnalysis, RestartRecovery,
    ReturnCodeAnalysis, ReturnCodePattern,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmorLevel {
    Node,
    Regional,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Detection,
    Analysis,
    Recovery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgType {
    HeartbeatOk,
    HeartbeatMiss,
    ReturnCode,
    QualityReport,
    LoadReport,
    RestartRequest,
    RecoveryRequest,
    QualityAlarm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    None,
    Code { code: i32 },
    Quality { processed_rate: f64, error_fraction: f64 },
    Loads { loads: Vec<f64> },
    Recovery { action: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementMessage {
    pub ty: MsgType,
    pub t: SimTime,
    /// Supervised target the message concerns.
    pub target: u32,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ArmorAction {
    Restart { target: u32 },
    Migrate { from: u32, to: u32 },
    Alarm { target: u32, name: String },
    /// Fault summary for the next level up.
    ReportUp { target: u32, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Emission {
    pub messages: Vec<ElementMessage>,
    pub actions: Vec<ArmorAction>,
}

/// A pluggable ARMOR building block. Handlers must be deterministic.
pub trait Element {
    fn id(&self) -> &str;
    fn kind(&self) -> ElementKind;
    fn subscriptions(&self) -> &[MsgType];
    fn handle(&mut self, msg: &ElementMessage) -> Emission;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArmorError {
    #[error("element `{0}` already registered")]
    DuplicateElement(String),
    #[error("no element `{0}`")]
    UnknownElement(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MailboxStats {
    pub enqueued: u64,
    pub handled: u64,
    pub dead_lettered: u64,
    /// Actions returned by non-recovery elements and discarded.
    pub suppressed_actions: u64,
}

/// An ARMOR process.
pub struct ArmorProcess {
    pub id: u32,
    pub level: ArmorLevel,
    elements: Vec<Box<dyn Element + Send>>,
    mailbox: VecDeque<ElementMessage>,
    stats: MailboxStats,
}

impl core::fmt::Debug for ArmorProcess {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ArmorProcess")
            .field("id", &self.id)
            .field("level", &self.level)
            .field("elements", &self.element_ids())
            .field("pending", &self.mailbox.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl ArmorProcess {
    pub fn new(id: u32, level: ArmorLevel) -> Self {
        ArmorProcess {
            id,
            level,
            elements: Vec::new(),
            mailbox: VecDeque::new(),
            stats: MailboxStats::default(),
        }
    }

    pub fn register_element(&mut self, element: Box<dyn Element + Send>) -> Result<(), ArmorError> {
        if self.elements.iter().any(|e| e.id() == element.id()) {
            return Err(ArmorError::DuplicateElement(String::from(element.id())));
        }
        self.elements.push(element);
        Ok(())
    }

    pub fn unregister_element(&mut self, id: &str) -> Result<(), ArmorError> {
        let i = self
            .elements
            .iter()
            .position(|e| e.id() == id)
            .ok_or_else(|| ArmorError::UnknownElement(String::from(id)))?;
        self.elements.remove(i);
        Ok(())
    }

    pub fn element_ids(&self) -> Vec<&str> {
        self.elements.iter().map(|e| e.id()).collect()
    }

    pub fn stats(&self) -> MailboxStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.mailbox.len()
    }

    pub fn post(&mut self, msg: ElementMessage) {
        self.stats.enqueued += 1;
        self.mailbox.push_back(msg);
    }

    /// Application-side report straight to the analysis elements.
    /// Malformed reports are dead-lettered on arrival.
    pub fn api_report(&mut self, t: SimTime, source: u32, payload: Payload) {
        let well_formed = match &payload {
            Payload::Quality {
                processed_rate,
                error_fraction,
            } => processed_rate.is_finite() && *processed_rate >= 0.0 && (0.0..=1.0).contains(error_fraction),
            Payload::Code { .. } => true,
            _ => false,
        };
        let ty = match payload {
            Payload::Code { .. } => MsgType::ReturnCode,
            _ => MsgType::QualityReport,
        };
        if !well_formed {
            self.stats.enqueued += 1;
            self.stats.dead_lettered += 1;
            return;
        }
        self.post(ElementMessage {
            ty,
            t,
            target: source,
            payload,
        });
    }

    /// Drains the mailbox, including messages emitted while draining.
    /// Returns the recovery actions in emission order.
    pub fn run(&mut self) -> Vec<ArmorAction> {
        let mut actions = Vec::new();
        while let Some(msg) = self.mailbox.pop_front() {
            let mut delivered = false;
            let mut emitted = Vec::new();
            for el in self.elements.iter_mut() {
                if !el.subscriptions().contains(&msg.ty) {
                    continue;
                }
                delivered = true;
                let out = el.handle(&msg);
                emitted.extend(out.messages);
                if el.kind() == ElementKind::Recovery {
                    actions.extend(out.actions);
                } else {
                    self.stats.suppressed_actions += out.actions.len() as u64;
                }
            }
            if delivered {
                self.stats.handled += 1;
            } else {
                self.stats.dead_lettered += 1;
            }
            for m in emitted {
                self.post(m);
            }
        }
        actions
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmorConfig {
    pub heartbeat_period: f64,
    pub miss_threshold: u32,
    pub patterns: Vec<ReturnCodePattern>,
    pub imbalance_ratio: f64,
    /// Quality alarm threshold on the reported error fraction.
    pub quality_error_threshold: f64,
    /// Work units per L2/L3 node.
    pub l23_node_loads: Vec<f64>,
}

impl Default for ArmorConfig {
    fn default() -> Self {
        ArmorConfig {
            heartbeat_period: 0.5,
            miss_threshold: 3,
            patterns: alloc::vec![ReturnCodePattern {
                pattern: alloc::vec![3, 3, 3],
                action: String::from("alarm_starvation"),
            }],
            imbalance_ratio: 2.0,
            quality_error_threshold: 0.5,
            l23_node_loads: alloc::vec![2.0, 2.0],
        }
    }
}

/// The standard element set: heartbeat detection, return-code and quality
/// analysis, restart and migration recovery.
pub fn standard_armor(id: u32, level: ArmorLevel, cfg: &ArmorConfig) -> ArmorProcess {
    let mut a = ArmorProcess::new(id, level);
    let elements: [Box<dyn Element + Send>; 5] = [
        Box::new(HeartbeatDetection::new(cfg.miss_threshold)),
        Box::new(ReturnCodeAnalysis::new(cfg.patterns.clone())),
        Box::new(QualityAnalysis::new(cfg.quality_error_threshold)),
        Box::new(RestartRecovery::new()),
        Box::new(MigrationRecovery::new(cfg.imbalance_ratio)),
    ];
    for e in elements {
        // the ids above are distinct
        let _ = a.register_element(e);
    }
    a
}

/// One execution-monitor tick: feeds each target's heartbeat status in and
/// drains the mailbox.
pub fn execution_monitor_tick(armor: &mut ArmorProcess, t: SimTime, heartbeats: &[(u32, bool)]) -> Vec<ArmorAction> {
    for &(target, ok) in heartbeats {
        armor.post(ElementMessage {
            ty: if ok { MsgType::HeartbeatOk } else { MsgType::HeartbeatMiss },
            t,
            target,
            payload: Payload::None,
        });
    }
    armor.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    use std::sync::{Arc, Mutex};

    type Log = Arc<Mutex<Vec<String>>>;

    struct Probe {
        id: &'static str,
        kind: ElementKind,
        subs: Vec<MsgType>,
        seen: Log,
    }

    impl Element for Probe {
        fn id(&self) -> &str {
            self.id
        }
        fn kind(&self) -> ElementKind {
            self.kind
        }
        fn subscriptions(&self) -> &[MsgType] {
            &self.subs
        }
        fn handle(&mut self, msg: &ElementMessage) -> Emission {
            self.seen.lock().unwrap().push(alloc::format!("{}:{}", self.id, msg.target));
            Emission {
                messages: vec![],
                actions: vec![ArmorAction::Restart { target: msg.target }],
            }
        }
    }

    fn probe(id: &'static str, kind: ElementKind, log: &Log) -> Box<dyn Element + Send> {
        Box::new(Probe {
            id,
            kind,
            subs: vec![MsgType::HeartbeatMiss],
            seen: log.clone(),
        })
    }

    fn miss(target: u32) -> ElementMessage {
        ElementMessage {
            ty: MsgType::HeartbeatMiss,
            t: SimTime::ZERO,
            target,
            payload: Payload::None,
        }
    }

    #[test]
    fn fan_out_in_registration_order_and_only_recovery_acts() {
        let log = Log::default();
        let mut a = ArmorProcess::new(0, ArmorLevel::Global);
        a.register_element(probe("det", ElementKind::Detection, &log)).unwrap();
        a.register_element(probe("rec", ElementKind::Recovery, &log)).unwrap();
        assert_eq!(
            a.register_element(probe("det", ElementKind::Analysis, &log)),
            Err(ArmorError::DuplicateElement("det".into()))
        );
        a.post(miss(7));
        let actions = a.run();
        assert_eq!(*log.lock().unwrap(), vec!["det:7", "rec:7"]);
        assert_eq!(actions, vec![ArmorAction::Restart { target: 7 }]);
        assert_eq!(a.stats().suppressed_actions, 1);
    }

    #[test]
    fn orphaned_types_dead_letter_after_unregister() {
        let log = Log::default();
        let mut a = ArmorProcess::new(0, ArmorLevel::Node);
        a.register_element(probe("det", ElementKind::Detection, &log)).unwrap();
        a.post(miss(1));
        a.run();
        assert_eq!(a.stats().dead_lettered, 0);
        a.unregister_element("det").unwrap();
        a.post(miss(1));
        a.run();
        let s = a.stats();
        assert_eq!(s.dead_lettered, 1);
        assert_eq!(s.enqueued, s.handled + s.dead_lettered);
    }

    #[test]
    fn api_reports_route_or_dead_letter() {
        let mut a = standard_armor(0, ArmorLevel::Regional, &ArmorConfig::default());
        a.api_report(
            SimTime::ZERO,
            4,
            Payload::Quality {
                processed_rate: 100.0,
                error_fraction: 0.1,
            },
        );
        a.run();
        assert_eq!(a.stats().handled, 1);
        a.api_report(
            SimTime::ZERO,
            4,
            Payload::Quality {
                processed_rate: f64::NAN,
                error_fraction: 0.1,
            },
        );
        a.api_report(SimTime::ZERO, 4, Payload::None);
        a.run();
        let s = a.stats();
        assert_eq!(s.dead_lettered, 2);
        assert_eq!(s.enqueued, s.handled + s.dead_lettered);

        let mut bare = ArmorProcess::new(1, ArmorLevel::Node);
        bare.api_report(SimTime::ZERO, 4, Payload::Code { code: 1 });
        bare.run();
        assert_eq!(bare.stats().dead_lettered, 1);
    }

    #[test]
    fn three_misses_restart_once() {
        let mut a = standard_armor(0, ArmorLevel::Global, &ArmorConfig::default());
        let t = SimTime::ZERO;
        assert!(execution_monitor_tick(&mut a, t, &[(2, true)]).is_empty());
        assert!(execution_monitor_tick(&mut a, t, &[(2, false)]).is_empty());
        assert!(execution_monitor_tick(&mut a, t, &[(2, false)]).is_empty());
        let acts = execution_monitor_tick(&mut a, t, &[(2, false)]);
        assert!(acts.contains(&ArmorAction::Restart { target: 2 }));
        assert!(acts.iter().any(|x| matches!(x, ArmorAction::ReportUp { target: 2, .. })));
    }
}
