//! Re-executes a run directory from its scenario copy and journal, and
//! compares the regenerated output byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use vlafarm_core::control::JournalEntry;
use vlafarm_core::sim::RunSummary;
use vlafarm_core::{SimTime, Simulation};

use crate::rundir::{self, Sink};
use crate::runner::{drive, RunFailure, Timed};
use crate::scenario::{self, LoadError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{0}")]
    Load(#[from] LoadError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("re-execution failed: {0}")]
    Run(#[from] RunFailure),
}

/// First line at which a recorded file and its regeneration disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub file: &'static str,
    /// One-based.
    pub line: usize,
    pub recorded: Option<String>,
    pub replayed: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub dir: PathBuf,
    /// At most one entry per file, in layout order.
    pub divergences: Vec<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergences.is_empty()
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ReplayError> {
    fs::read(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn first_divergence(file: &'static str, recorded: &[u8], replayed: &[u8]) -> Option<Divergence> {
    if recorded == replayed {
        return None;
    }
    let text = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
    let mut a = recorded.split(|&b| b == b'\n');
    let mut b = replayed.split(|&b| b == b'\n');
    let mut line = 0;
    loop {
        line += 1;
        match (a.next(), b.next()) {
            (Some(x), Some(y)) if x == y => continue,
            (None, None) => return None,
            (x, y) => {
                return Some(Divergence {
                    file,
                    line,
                    recorded: x.map(text),
                    replayed: y.map(text),
                })
            }
        }
    }
}

fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, ReplayError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ReplayError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

/// Replays `dir`. The journal, not the script's command list, drives the
/// re-execution, so live-service runs replay the same way as scripted ones.
pub fn replay(dir: &Path) -> Result<ReplayReport, ReplayError> {
    let mut loaded = scenario::load(&dir.join(rundir::SCENARIO))?;
    let journal = read_journal(&dir.join(rundir::JOURNAL))?;
    let summary_bytes = read(&dir.join(rundir::SUMMARY_JSON))?;
    let recorded: RunSummary = serde_json::from_slice(&summary_bytes).map_err(|source| ReplayError::Parse {
        path: dir.join(rundir::SUMMARY_JSON),
        line: 1,
        source,
    })?;

    loaded.script.commands.clear();
    let timeline: Vec<Timed> = journal.iter().map(Timed::from_entry).collect();
    let mut sim = Simulation::with_options(loaded.script.clone(), loaded.sim_options()).map_err(RunFailure::from)?;
    let mut sink = Sink::new(Vec::new(), Vec::new(), Vec::new());
    // a live run may have ended before the scripted duration
    drive(&mut sim, &timeline, SimTime::from_secs_f64(recorded.t), &mut sink)?;
    let summary = sim.summary();

    let replayed: [(&'static str, Vec<u8>); 4] = [
        (rundir::JOURNAL, sink.journal),
        (rundir::TELEMETRY, sink.telemetry),
        (rundir::TRACE, sink.trace),
        (rundir::SUMMARY_JSON, rundir::summary_json(&summary)),
    ];
    let mut divergences = Vec::new();
    for (file, bytes) in replayed {
        let recorded = if file == rundir::SUMMARY_JSON {
            summary_bytes.clone()
        } else {
            read(&dir.join(file))?
        };
        divergences.extend(first_divergence(file, &recorded, &bytes));
    }
    Ok(ReplayReport {
        dir: dir.to_path_buf(),
        divergences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_bytes_do_not_diverge() {
        assert_eq!(first_divergence("f", b"a\nb\n", b"a\nb\n"), None);
    }

    #[test]
    fn reports_first_differing_line() {
        let d = first_divergence("f", b"a\nb\nc\n", b"a\nB\nc\n").unwrap();
        assert_eq!(d.line, 2);
        assert_eq!(d.recorded.as_deref(), Some("b"));
        assert_eq!(d.replayed.as_deref(), Some("B"));
    }

    #[test]
    fn truncation_diverges_at_the_missing_line() {
        let d = first_divergence("f", b"a\n", b"a\nb\n").unwrap();
        assert_eq!(d.line, 2);
        assert_eq!(d.recorded.as_deref(), Some(""));
    }
}
