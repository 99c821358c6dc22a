use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ArmorAction, Element, ElementKind, ElementMessage, Emission, MsgType, Payload};

/// Counts consecutive heartbeat misses per target; at `threshold` asks for a restart.
#[derive(Clone, Debug)]
pub struct HeartbeatDetection {
    threshold: u32,
    misses: BTreeMap<u32, u32>,
}

impl HeartbeatDetection {
    pub fn new(threshold: u32) -> Self {
        HeartbeatDetection {
            threshold: threshold.max(1),
            misses: BTreeMap::new(),
        }
    }
}

impl Element for HeartbeatDetection {
    fn id(&self) -> &str {
        "heartbeat_detection"
    }

    fn kind(&self) -> ElementKind {
        ElementKind::Detection
    }

    fn subscriptions(&self) -> &[MsgType] {
        &[MsgType::HeartbeatOk, MsgType::HeartbeatMiss]
    }

    fn handle(&mut self, msg: &ElementMessage) -> Emission {
        let n = self.misses.entry(msg.target).or_insert(0);
        if msg.ty == MsgType::HeartbeatOk {
            *n = 0;
            return Emission::default();
        }
        *n += 1;
        if *n < self.threshold {
            return Emission::default();
        }
        *n = 0;
        Emission {
            messages: vec![ElementMessage {
                ty: MsgType::RestartRequest,
                t: msg.t,
                target: msg.target,
                payload: Payload::None,
            }],
            actions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnCodePattern {
    pub pattern: Vec<i32>,
    pub action: String,
}

/// Longest pattern that is a suffix of `history`; ties go to the earlier pattern.
pub fn match_return_codes<'a>(history: &[i32], patterns: &'a [ReturnCodePattern]) -> Option<&'a str> {
    let mut best: Option<&ReturnCodePattern> = None;
    for p in patterns {
        if p.pattern.is_empty() || !history.ends_with(&p.pattern) {
            continue;
        }
        if best.is_none_or(|b| p.pattern.len() > b.pattern.len()) {
            best = Some(p);
        }
    }
    best.map(|p| p.action.as_str())
}

/// Watches each target's return codes for configured patterns.
#[derive(Clone, Debug)]
pub struct ReturnCodeAnalysis {
    patterns: Vec<ReturnCodePattern>,
    depth: usize,
    history: BTreeMap<u32, VecDeque<i32>>,
}

impl ReturnCodeAnalysis {
    /// Empty patterns are discarded.
    pub fn new(patterns: Vec<ReturnCodePattern>) -> Self {
        let patterns: Vec<_> = patterns.into_iter().filter(|p| !p.pattern.is_empty()).collect();
        let depth = patterns.iter().map(|p| p.pattern.len()).max().unwrap_or(0);
        ReturnCodeAnalysis {
            patterns,
            depth,
            history: BTreeMap::new(),
        }
    }
}

impl Element for ReturnCodeAnalysis {
    fn id(&self) -> &str {
        "return_code_analysis"
    }

    fn kind(&self) -> ElementKind {
        ElementKind::Analysis
    }

    fn subscriptions(&self) -> &[MsgType] {
        &[MsgType::ReturnCode]
    }

    fn handle(&mut self, msg: &ElementMessage) -> Emission {
        let Payload::Code { code } = msg.payload else {
            return Emission::default();
        };
        let h = self.history.entry(msg.target).or_default();
        h.push_back(code);
        while h.len() > self.depth {
            h.pop_front();
        }
        let hist: Vec<i32> = h.iter().copied().collect();
        match match_return_codes(&hist, &self.patterns) {
            Some(action) => {
                // the matched run is consumed so one episode triggers once
                h.clear();
                Emission {
                    messages: vec![ElementMessage {
                        ty: MsgType::RecoveryRequest,
                        t: msg.t,
                        target: msg.target,
                        payload: Payload::Recovery {
                            action: String::from(action),
                        },
                    }],
                    actions: Vec::new(),
                }
            }
            None => Emission::default(),
        }
    }
}

/// Flags quality reports whose error fraction exceeds a threshold.
#[derive(Clone, Debug)]
pub struct QualityAnalysis {
    threshold: f64,
    pub reports: u64,
}

impl QualityAnalysis {
    pub fn new(threshold: f64) -> Self {
        QualityAnalysis { threshold, reports: 0 }
    }
}

impl Element for QualityAnalysis {
    fn id(&self) -> &str {
        "quality_analysis"
    }

    fn kind(&self) -> ElementKind {
        ElementKind::Analysis
    }

    fn subscriptions(&self) -> &[MsgType] {
        &[MsgType::QualityReport]
    }

    fn handle(&mut self, msg: &ElementMessage) -> Emission {
        self.reports += 1;
        match msg.payload {
            Payload::Quality { error_fraction, .. } if error_fraction > self.threshold => Emission {
                messages: vec![ElementMessage {
                    ty: MsgType::QualityAlarm,
                    t: msg.t,
                    target: msg.target,
                    payload: msg.payload.clone(),
                }],
                actions: Vec::new(),
            },
            _ => Emission::default(),
        }
    }
}

/// Turns restart and recovery requests into actions and reports upward.
#[derive(Clone, Debug, Default)]
pub struct RestartRecovery;

impl RestartRecovery {
    pub fn new() -> Self {
        RestartRecovery
    }
}

impl Element for RestartRecovery {
    fn id(&self) -> &str {
        "restart_recovery"
    }

    fn kind(&self) -> ElementKind {
        ElementKind::Recovery
    }

    fn subscriptions(&self) -> &[MsgType] {
        &[MsgType::RestartRequest, MsgType::RecoveryRequest, MsgType::QualityAlarm]
    }

    fn handle(&mut self, msg: &ElementMessage) -> Emission {
        let target = msg.target;
        let actions = match (&msg.ty, &msg.payload) {
            (MsgType::RestartRequest, _) => vec![
                ArmorAction::Restart { target },
                ArmorAction::ReportUp {
                    target,
                    reason: String::from("heartbeat lost"),
                },
            ],
            (MsgType::RecoveryRequest, Payload::Recovery { action }) if action == "restart" => {
                vec![ArmorAction::Restart { target }]
            }
            (MsgType::RecoveryRequest, Payload::Recovery { action }) => vec![ArmorAction::Alarm {
                target,
                name: action.clone(),
            }],
            (MsgType::QualityAlarm, Payload::Quality { error_fraction, .. }) => vec![ArmorAction::ReportUp {
                target,
                reason: format!("error fraction {error_fraction:.3}"),
            }],
            _ => Vec::new(),
        };
        Emission {
            messages: Vec::new(),
            actions,
        }
    }
}

/// One migration from the most to the least loaded node when
/// `max / min > ratio` and moving a unit still narrows the gap.
pub fn recovery_migrate(loads: &[f64], ratio: f64) -> Option<ArmorAction> {
    if loads.len() < 2 {
        return None;
    }
    let (mut imax, mut imin) = (0usize, 0usize);
    for (i, &l) in loads.iter().enumerate() {
        if l > loads[imax] {
            imax = i;
        }
        if l < loads[imin] {
            imin = i;
        }
    }
    let (max, min) = (loads[imax], loads[imin]);
    let imbalanced = if min <= 0.0 { max > 0.0 } else { max / min > ratio };
    (imbalanced && max - min > 1.0).then_some(ArmorAction::Migrate {
        from: imax as u32,
        to: imin as u32,
    })
}

/// Balances node load reports.
#[derive(Clone, Debug)]
pub struct MigrationRecovery {
    ratio: f64,
}

impl MigrationRecovery {
    pub fn new(ratio: f64) -> Self {
        MigrationRecovery { ratio }
    }
}

impl Element for MigrationRecovery {
    fn id(&self) -> &str {
        "migration_recovery"
    }

    fn kind(&self) -> ElementKind {
        ElementKind::Recovery
    }

    fn subscriptions(&self) -> &[MsgType] {
        &[MsgType::LoadReport]
    }

    fn handle(&mut self, msg: &ElementMessage) -> Emission {
        let actions = match &msg.payload {
            Payload::Loads { loads } => recovery_migrate(loads, self.ratio).into_iter().collect(),
            _ => Vec::new(),
        };
        Emission {
            messages: Vec::new(),
            actions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armor::{execution_monitor_tick, standard_armor, ArmorConfig, ArmorLevel};
    use crate::time::SimTime;

    fn pat(p: &[i32], a: &str) -> ReturnCodePattern {
        ReturnCodePattern {
            pattern: p.to_vec(),
            action: a.into(),
        }
    }

    #[test]
    fn suffix_matching_examples() {
        let ps = [pat(&[2, 2], "restart")];
        assert_eq!(match_return_codes(&[0, 0, 0], &ps), None);
        assert_eq!(match_return_codes(&[0, 2, 2], &ps), Some("restart"));
        let ps = [pat(&[2, 2], "short"), pat(&[1, 2, 2], "long")];
        assert_eq!(match_return_codes(&[1, 2, 2], &ps), Some("long"));
        assert_eq!(match_return_codes(&[0, 2, 2], &ps), Some("short"));
    }

    /// Brute-force oracle: try every suffix length from longest down.
    fn oracle(history: &[i32], patterns: &[ReturnCodePattern]) -> Option<String> {
        for len in (1..=history.len()).rev() {
            let suffix = &history[history.len() - len..];
            if let Some(p) = patterns.iter().find(|p| p.pattern == suffix) {
                return Some(p.action.clone());
            }
        }
        None
    }

    #[test]
    fn suffix_matching_agrees_with_oracle_on_small_alphabet() {
        let ps = [
            pat(&[2, 2], "a"),
            pat(&[1, 2, 2], "b"),
            pat(&[0], "c"),
            pat(&[1, 0, 1, 0], "d"),
            pat(&[2, 1], "e"),
        ];
        let mut n = 0;
        for len in 0..=4u32 {
            for idx in 0..3usize.pow(len) {
                let mut k = idx;
                let h: Vec<i32> = (0..len)
                    .map(|_| {
                        let c = (k % 3) as i32;
                        k /= 3;
                        c
                    })
                    .collect();
                assert_eq!(match_return_codes(&h, &ps).map(String::from), oracle(&h, &ps), "{h:?}");
                n += 1;
            }
        }
        assert_eq!(n, 1 + 3 + 9 + 27 + 81);
    }

    #[test]
    fn migration_examples() {
        assert_eq!(recovery_migrate(&[4.0, 4.0], 2.0), None);
        assert_eq!(recovery_migrate(&[10.0, 2.0], 2.0), Some(ArmorAction::Migrate { from: 0, to: 1 }));
        assert_eq!(recovery_migrate(&[10.0], 2.0), None);
    }

    #[test]
    fn repeated_migration_converges() {
        for start in [[10.0, 2.0, 1.0], [50.0, 0.0, 0.0], [7.0, 7.0, 1.0], [3.0, 1.0, 1.0]] {
            let mut loads = start.to_vec();
            let total: f64 = loads.iter().sum();
            let mut steps = 0;
            while let Some(ArmorAction::Migrate { from, to }) = recovery_migrate(&loads, 2.0) {
                loads[from as usize] -= 1.0;
                loads[to as usize] += 1.0;
                steps += 1;
                assert!(steps <= total as usize, "no fixed point from {start:?}");
            }
            let (max, min) = loads.iter().fold((f64::MIN, f64::MAX), |(a, b), &l| (a.max(l), b.min(l)));
            assert!(max - min <= 1.0 || (min > 0.0 && max / min <= 2.0), "{loads:?}");
            assert_eq!(loads.iter().sum::<f64>(), total);
        }
    }

    #[test]
    fn restart_then_recovered_heartbeats_stop_restarting() {
        // scripted trace: 3 misses, restart, then healthy beats
        let mut a = standard_armor(0, ArmorLevel::Global, &ArmorConfig::default());
        let script = [false, false, false, true, true, true, true, true, true];
        let mut restarts = Vec::new();
        for (i, ok) in script.into_iter().enumerate() {
            let acts = execution_monitor_tick(&mut a, SimTime::from_millis(500 * i as u64), &[(5, ok)]);
            if acts.contains(&ArmorAction::Restart { target: 5 }) {
                restarts.push(i);
            }
        }
        assert_eq!(restarts, vec![2]);
        let s = a.stats();
        assert_eq!(s.enqueued, s.handled + s.dead_lettered);
    }

    #[test]
    fn starvation_pattern_alarms_once_per_episode() {
        let mut a = standard_armor(0, ArmorLevel::Regional, &ArmorConfig::default());
        let mut alarms = 0;
        for code in [0, 3, 3, 3, 3, 3, 0] {
            a.api_report(SimTime::ZERO, 9, Payload::Code { code });
            alarms += a
                .run()
                .iter()
                .filter(|x| matches!(x, ArmorAction::Alarm { name, .. } if name == "alarm_starvation"))
                .count();
        }
        assert_eq!(alarms, 1);
    }

    #[test]
    fn burst_of_reports_is_fifo() {
        let mut a = standard_armor(0, ArmorLevel::Regional, &ArmorConfig::default());
        for i in 0..100u32 {
            a.api_report(
                SimTime::from_micros(u64::from(i)),
                i,
                Payload::Quality {
                    processed_rate: 1.0,
                    error_fraction: 0.9,
                },
            );
        }
        let acts = a.run();
        let targets: Vec<u32> = acts
            .iter()
            .filter_map(|x| match x {
                ArmorAction::ReportUp { target, .. } => Some(*target),
                _ => None,
            })
            .collect();
        assert_eq!(targets, (0..100).collect::<Vec<_>>());
    }
}
