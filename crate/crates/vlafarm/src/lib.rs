//! Scenario runner, replay verifier, control service and command-line
//! front end for the `vlafarm-core` simulator.

pub mod replay;
pub mod rundir;
pub mod runner;
pub mod scenario;
pub mod service;

/// Process exit codes. Stable for CI.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad arguments, unreadable or invalid scenario or statechart, IO failure.
    pub const VALIDATION: i32 = 1;
    /// The run completed but broke a runtime invariant.
    pub const INVARIANT: i32 = 2;
    pub const REPLAY_DIVERGENCE: i32 = 3;
}
