//! Deterministic discrete-event simulator of a hierarchical, fault-adaptive
//! Level-1 trigger farm.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. Everything
//! that touches files, sockets or the command line lives in the `vlafarm`
//! companion crate.
//!
//! Module map:
//!
//! - [`engine`]: virtual clock, ordered event queue, severable link table.
//! - [`rng`]: named, seed-derived random streams.
//! - [`farm`]: crossings, farmlet queues, the physics application model,
//!   downstream filtering and utilization accounting.
//! - [`vla`]: worker deadline watchdog and the farmlet-level agent.
//! - [`mitigation`]: authority mask, prescale laws, failover and subsumption.
//! - [`armor`]: supervisor processes built from pluggable elements.
//! - [`dsl`]: the statechart mitigation language.
//! - [`control`]: commands, journal, telemetry and scenario definitions.
//! - [`sim`]: the wired-up simulation session.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod armor;
pub mod control;
pub mod dsl;
pub mod engine;
pub mod farm;
pub mod mitigation;
pub mod rng;
pub mod sim;
pub mod time;
pub mod vla;

pub use engine::{Engine, EventHandle, LinkKey, LinkKind, LinkStatus, NodeId, SimError};
pub use sim::Simulation;
pub use time::SimTime;
