//! Operator commands, the control-change journal, telemetry records and
//! scenario scripts.

mod command;
mod journal;
mod scenario;
mod telemetry;

pub use command::{Command, CommandAck, CommandError, LinkRef, NodeName};
pub use journal::{Journal, JournalEntry};
pub use scenario::{
    FarmletSpec, LogicKind, MitigationConfig, ScenarioError, ScenarioScript, TimedCommand, Topology, VlaConfig,
};
pub use telemetry::{check_record, FarmletTelemetry, TelemetryRecord, VlaCounters, WorkerTelemetry};
