use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Command;
use crate::time::SimTime;

/// One control change: who did what, when, and what it replaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    /// Virtual seconds at which the command applied.
    pub t: f64,
    /// Exact virtual time, nanoseconds; replay keys on this.
    pub t_ns: u64,
    /// Wall-clock milliseconds since the Unix epoch, when issued live.
    pub wall_ms: Option<u64>,
    pub actor: String,
    pub command: Command,
    pub previous: String,
    pub new: String,
}

/// Append-only, totally ordered control-change log.
#[derive(Clone, Debug, Default)]
pub struct Journal {
    entries: Vec<JournalEntry>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(
        &mut self,
        t: SimTime,
        wall_ms: Option<u64>,
        actor: &str,
        command: Command,
        previous: String,
        new: String,
    ) -> u64 {
        let seq = self.entries.len() as u64;
        self.entries.push(JournalEntry {
            seq,
            t: t.as_secs_f64(),
            t_ns: t.as_nanos(),
            wall_ms,
            actor: String::from(actor),
            command,
            previous,
            new,
        });
        seq
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with `from <= t <= to`, in journal order. Either bound may be open.
    pub fn query(&self, from: Option<SimTime>, to: Option<SimTime>) -> Vec<&JournalEntry> {
        let lo = from.map_or(0, SimTime::as_nanos);
        let hi = to.map_or(u64::MAX, SimTime::as_nanos);
        self.entries.iter().filter(|e| e.t_ns >= lo && e.t_ns <= hi).collect()
    }
}
