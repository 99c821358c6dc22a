use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::LinkKind;
use crate::farm::{Behavior, FarmletId, WorkerId};
use crate::mitigation::AuthorityMask;

/// A node name as operators write it: `global`, `farmlet-N` or `worker-N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeName {
    Global,
    Farmlet(FarmletId),
    Worker(WorkerId),
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeName::Global => f.write_str("global"),
            NodeName::Farmlet(x) => write!(f, "{x}"),
            NodeName::Worker(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for NodeName {
    type Err = CommandError;
    fn from_str(s: &str) -> Result<Self, CommandError> {
        let bad = || CommandError::UnknownNode(String::from(s));
        if s == "global" {
            return Ok(NodeName::Global);
        }
        let (kind, n) = s.split_once('-').ok_or_else(bad)?;
        let n: u32 = n.parse().map_err(|_| bad())?;
        match kind {
            "farmlet" => Ok(NodeName::Farmlet(FarmletId(n))),
            "worker" => Ok(NodeName::Worker(WorkerId(n))),
            _ => Err(bad()),
        }
    }
}

impl Serialize for NodeName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRef {
    pub source: NodeName,
    pub dest: NodeName,
    pub kind: LinkKind,
}

impl fmt::Display for LinkRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.source, self.dest, self.kind)
    }
}

/// Operator command. Every accepted command is journaled exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    HangPa {
        worker: u32,
    },
    RestartPa {
        worker: u32,
    },
    Sever {
        link: LinkRef,
    },
    Restore {
        link: LinkRef,
    },
    SetErrorRate {
        p: f64,
    },
    /// Without `worker`, applies to every worker.
    SetBehavior {
        behavior: Behavior,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        worker: Option<u32>,
    },
    /// Rate and size take effect together.
    SetParams {
        rate: f64,
        size: f64,
    },
    SetAuthority {
        mask: AuthorityMask,
    },
    Stop,
    Go,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::HangPa { .. } => "hang_pa",
            Command::RestartPa { .. } => "restart_pa",
            Command::Sever { .. } => "sever",
            Command::Restore { .. } => "restore",
            Command::SetErrorRate { .. } => "set_error_rate",
            Command::SetBehavior { .. } => "set_behavior",
            Command::SetParams { .. } => "set_params",
            Command::SetAuthority { .. } => "set_authority",
            Command::Stop => "stop",
            Command::Go => "go",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandAck {
    /// Journal sequence number; `None` while deferred by a stop.
    pub seq: Option<u64>,
    /// Virtual seconds at which the command applied, or will apply at go.
    pub t: f64,
    pub deferred: bool,
    pub previous: String,
    pub new: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommandError {
    #[error("unknown worker {0}")]
    UnknownWorker(u32),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("invalid parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("run is already {0}")]
    RunState(&'static str),
}

impl CommandError {
    pub(crate) fn link(l: &LinkRef) -> Self {
        CommandError::UnknownLink(format!("{l}"))
    }
}
