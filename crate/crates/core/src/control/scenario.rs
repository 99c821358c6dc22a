use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Command, LinkRef, NodeName};
use crate::armor::ArmorConfig;
use crate::engine::LinkKind;
use crate::farm::{Behavior, DownstreamConfig, ExperimentParams, FarmError, FarmletRole, PaConfig};
use crate::mitigation::{Aggregation, AuthorityMask, FailoverConfig, PrescaleController};
use crate::vla::FarmletVlaConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarmletSpec {
    pub workers: u32,
    /// `active` or `hot_spare` at start.
    pub role: FarmletRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    pub farmlets: Vec<FarmletSpec>,
    pub queue_capacity: usize,
    /// Seconds.
    pub data_latency: f64,
    /// Seconds.
    pub control_latency: f64,
}

impl Default for Topology {
    fn default() -> Self {
        let active = FarmletSpec {
            workers: 5,
            role: FarmletRole::Active,
        };
        Topology {
            farmlets: vec![
                active,
                active,
                FarmletSpec {
                    workers: 6,
                    role: FarmletRole::HotSpare,
                },
            ],
            queue_capacity: 64,
            data_latency: 0.0,
            control_latency: 0.0,
        }
    }
}

impl Topology {
    pub fn worker_count(&self) -> u32 {
        self.farmlets.iter().map(|f| f.workers).sum()
    }

    /// Farmlet owning each worker, in worker-id order.
    pub fn worker_farmlets(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.worker_count() as usize);
        for (i, f) in self.farmlets.iter().enumerate() {
            out.extend(core::iter::repeat_n(i as u32, f.workers as usize));
        }
        out
    }

    /// Whether `link` is one of the links this topology declares.
    pub fn has_link(&self, link: &LinkRef) -> bool {
        let nf = self.farmlets.len() as u32;
        let owners = self.worker_farmlets();
        match (link.source, link.dest, link.kind) {
            (NodeName::Global, NodeName::Farmlet(f), _) => f.0 < nf,
            (NodeName::Farmlet(f), NodeName::Global, LinkKind::Control) => f.0 < nf,
            (NodeName::Farmlet(f), NodeName::Worker(w), LinkKind::Control)
            | (NodeName::Worker(w), NodeName::Farmlet(f), LinkKind::Control) => {
                owners.get(w.0 as usize) == Some(&f.0)
            }
            _ => false,
        }
    }
}

/// Which implementation drives the agents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicKind {
    Hand,
    /// Statechart interpreter; the shipped specs unless others are supplied.
    #[default]
    Dsl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VlaConfig {
    /// Grace period as a fraction of the PA estimate.
    pub grace_factor: f64,
    pub p_cleanup: f64,
    /// Seconds a restarting PA is unavailable.
    pub restart_latency: f64,
    /// Seconds of agent bookkeeping per dispatched crossing.
    pub vla_overhead: f64,
    pub farmlet: FarmletVlaConfig,
    pub logic: LogicKind,
}

impl Default for VlaConfig {
    fn default() -> Self {
        VlaConfig {
            grace_factor: 0.25,
            p_cleanup: 0.5,
            restart_latency: 0.05,
            vla_overhead: 2e-6,
            farmlet: FarmletVlaConfig::default(),
            logic: LogicKind::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub prescale: PrescaleController,
    pub aggregation: Aggregation,
    pub failover: FailoverConfig,
}

/// Statechart source files, resolved relative to the scenario file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DslPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub farmlet: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedCommand {
    /// Virtual seconds.
    pub t: f64,
    pub cmd: Command,
}

/// A complete, replayable experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioScript {
    pub seed: u64,
    /// Virtual seconds.
    pub duration: f64,
    pub topology: Topology,
    pub params: ExperimentParams,
    pub pa: PaConfig,
    pub downstream: DownstreamConfig,
    pub vla: VlaConfig,
    pub mitigation: MitigationConfig,
    pub armor: ArmorConfig,
    pub authority: AuthorityMask,
    pub behavior: Behavior,
    pub telemetry_period: f64,
    /// Statistical-message and controller period.
    pub stats_period: f64,
    pub generation_tick: f64,
    pub dsl: DslPaths,
    pub commands: Vec<TimedCommand>,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        ScenarioScript {
            seed: 1,
            duration: 10.0,
            topology: Topology::default(),
            params: ExperimentParams::default(),
            pa: PaConfig::default(),
            downstream: DownstreamConfig::default(),
            vla: VlaConfig::default(),
            mitigation: MitigationConfig::default(),
            armor: ArmorConfig::default(),
            authority: AuthorityMask::standard(),
            behavior: Behavior::RunWell,
            telemetry_period: 0.1,
            stats_period: 0.002,
            generation_tick: 0.001,
            dsl: DslPaths::default(),
            commands: Vec::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{0}")]
    Param(#[from] FarmError),
    #[error("invalid {name}: {value}")]
    Invalid { name: &'static str, value: f64 },
    #[error("topology: {0}")]
    Topology(&'static str),
    #[error("command {index} at t={t} is outside [0, {duration}]")]
    CommandOutOfRange { index: usize, t: f64, duration: f64 },
    #[error("command {index} at t={t} precedes the previous command")]
    CommandsUnsorted { index: usize, t: f64 },
    #[error("command {index}: {reason}")]
    BadCommand { index: usize, reason: String },
}

fn positive(name: &'static str, value: f64) -> Result<(), ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid { name, value })
    }
}

fn probability(name: &'static str, value: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ScenarioError::Invalid { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ScenarioError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid { name, value })
    }
}

impl ScenarioScript {
    /// Checks everything that can be checked before execution.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        positive("duration", self.duration)?;
        positive("telemetry_period", self.telemetry_period)?;
        positive("stats_period", self.stats_period)?;
        positive("generation_tick", self.generation_tick)?;
        positive("armor.heartbeat_period", self.armor.heartbeat_period)?;
        self.params.validate()?;
        self.pa.validate()?;
        probability("downstream.l2_pass", self.downstream.l2_pass)?;
        probability("downstream.l3_pass", self.downstream.l3_pass)?;
        positive("vla.grace_factor", self.vla.grace_factor)?;
        probability("vla.p_cleanup", self.vla.p_cleanup)?;
        non_negative("vla.restart_latency", self.vla.restart_latency)?;
        non_negative("vla.vla_overhead", self.vla.vla_overhead)?;
        positive("vla.farmlet.subsume.window", self.vla.farmlet.subsume.window)?;
        if self.vla.farmlet.subsume.n_subsume == 0 {
            return Err(ScenarioError::Invalid {
                name: "vla.farmlet.subsume.n_subsume",
                value: 0.0,
            });
        }
        let p = &self.mitigation.prescale;
        non_negative("mitigation.prescale.gain", p.gain)?;
        probability("mitigation.prescale.target_occupancy", p.target_occupancy)?;
        probability("mitigation.prescale.max_rate", p.max_rate)?;
        let f = &self.mitigation.failover;
        probability("mitigation.failover.unfit_efficiency", f.unfit_efficiency)?;
        positive("mitigation.failover.window", f.window)?;
        non_negative("topology.data_latency", self.topology.data_latency)?;
        non_negative("topology.control_latency", self.topology.control_latency)?;

        let t = &self.topology;
        if t.queue_capacity == 0 {
            return Err(ScenarioError::Topology("queue_capacity must be at least 1"));
        }
        if t.farmlets.iter().any(|f| f.workers == 0) {
            return Err(ScenarioError::Topology("every farmlet needs at least one worker"));
        }
        if t.farmlets.iter().any(|f| f.role == FarmletRole::Unfit) {
            return Err(ScenarioError::Topology("farmlets start active or hot_spare"));
        }
        if !t.farmlets.iter().any(|f| f.role == FarmletRole::Active) {
            return Err(ScenarioError::Topology("at least one farmlet must be active"));
        }

        let mut last = 0.0;
        for (index, c) in self.commands.iter().enumerate() {
            if !(0.0..=self.duration).contains(&c.t) {
                return Err(ScenarioError::CommandOutOfRange {
                    index,
                    t: c.t,
                    duration: self.duration,
                });
            }
            if c.t < last {
                return Err(ScenarioError::CommandsUnsorted { index, t: c.t });
            }
            last = c.t;
            self.check_command(&c.cmd)
                .map_err(|reason| ScenarioError::BadCommand { index, reason })?;
        }
        Ok(())
    }

    fn check_command(&self, cmd: &Command) -> Result<(), String> {
        let n = self.topology.worker_count();
        let worker_ok = |w: u32| {
            if w < n {
                Ok(())
            } else {
                Err(alloc::format!("unknown worker {w}"))
            }
        };
        match cmd {
            Command::HangPa { worker } | Command::RestartPa { worker } => worker_ok(*worker),
            Command::SetBehavior { worker: Some(w), .. } => worker_ok(*w),
            Command::Sever { link } | Command::Restore { link } => {
                if self.topology.has_link(link) {
                    Ok(())
                } else {
                    Err(alloc::format!("unknown link {link}"))
                }
            }
            Command::SetErrorRate { p } if !(0.0..=1.0).contains(p) => Err(alloc::format!("error rate {p}")),
            Command::SetParams { rate, size } if !(*rate >= 0.0 && rate.is_finite() && *size >= 1.0 && size.is_finite()) => {
                Err(alloc::format!("rate {rate}, size {size}"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm::{FarmletId, WorkerId};

    #[test]
    fn default_topology_is_two_active_plus_spare_with_sixteen_workers() {
        let t = Topology::default();
        assert_eq!(t.worker_count(), 16);
        assert_eq!(t.farmlets.iter().filter(|f| f.role == FarmletRole::Active).count(), 2);
        assert_eq!(t.worker_farmlets()[10], 2);
        assert!(ScenarioScript::default().validate().is_ok());
    }

    #[test]
    fn command_after_duration_is_rejected() {
        let s = ScenarioScript {
            duration: 5.0,
            commands: vec![TimedCommand {
                t: 6.0,
                cmd: Command::Stop,
            }],
            ..ScenarioScript::default()
        };
        assert!(matches!(s.validate(), Err(ScenarioError::CommandOutOfRange { index: 0, .. })));
    }

    #[test]
    fn unsorted_commands_are_rejected() {
        let s = ScenarioScript {
            commands: vec![
                TimedCommand { t: 2.0, cmd: Command::Stop },
                TimedCommand { t: 1.0, cmd: Command::Go },
            ],
            ..ScenarioScript::default()
        };
        assert!(matches!(s.validate(), Err(ScenarioError::CommandsUnsorted { index: 1, .. })));
    }

    #[test]
    fn links_follow_the_hierarchy() {
        let t = Topology::default();
        let link = |source, dest, kind| LinkRef { source, dest, kind };
        let g = NodeName::Global;
        let f1 = NodeName::Farmlet(FarmletId(1));
        assert!(t.has_link(&link(g, f1, LinkKind::Data)));
        assert!(t.has_link(&link(f1, g, LinkKind::Control)));
        assert!(!t.has_link(&link(f1, g, LinkKind::Data)));
        assert!(t.has_link(&link(NodeName::Worker(WorkerId(7)), f1, LinkKind::Control)));
        assert!(!t.has_link(&link(NodeName::Worker(WorkerId(2)), f1, LinkKind::Control)));
        assert!(!t.has_link(&link(g, NodeName::Farmlet(FarmletId(3)), LinkKind::Data)));
    }
}
