//! The Level-1 farm: crossing generation, farmlet buffer queues, the
//! physics application model, downstream L2/L3 thinning and P/V/I
//! utilization accounting.

mod counters;
mod crossing;
mod farmlet;
mod filter;
mod pa;
mod routing;
mod worker;

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use counters::{efficiency, FarmCounters};
pub use crossing::{Crossing, CrossingGenerator, ExperimentParams};
pub use farmlet::{EnqueueOutcome, Farmlet, FarmletRole};
pub use filter::{downstream_filter, DownstreamConfig, DownstreamFilter};
pub use pa::{pa_process, PaConfig, PaOutcome, Verdict};
pub use routing::RoutingTable;
pub use worker::{utilization_snapshot, Activity, Behavior, PaStatus, Utilization, WorkerState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub u32);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "worker-{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FarmletId(pub u32);

impl fmt::Display for FarmletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "farmlet-{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FarmError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("{0} is hung and cannot process")]
    WorkerHung(WorkerId),
    #[error("{0} is not idle")]
    WorkerBusy(WorkerId),
    #[error("{0} is not active")]
    FarmletNotActive(FarmletId),
}
