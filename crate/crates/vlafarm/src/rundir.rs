//! Run-directory layout and the NDJSON writers that fill it.
//!
//! ```text
//! <out>/<seed>-<hash prefix>/
//!     scenario.json      script as run (statechart paths point at the copies)
//!     worker_vla.sc      only when the scenario supplied one
//!     farmlet_vla.sc
//!     journal.ndjson
//!     telemetry.ndjson
//!     trace.ndjson
//!     summary.json
//!     summary.csv
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use vlafarm_core::control::TelemetryRecord;
use vlafarm_core::sim::RunSummary;
use vlafarm_core::Simulation;

use crate::scenario::LoadedScenario;

pub const SCENARIO: &str = "scenario.json";
pub const JOURNAL: &str = "journal.ndjson";
pub const TELEMETRY: &str = "telemetry.ndjson";
pub const TRACE: &str = "trace.ndjson";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const WORKER_SPEC: &str = "worker_vla.sc";
pub const FARMLET_SPEC: &str = "farmlet_vla.sc";

/// Characters of the scenario hash used in directory names.
const HASH_PREFIX: usize = 12;

pub fn dir_name(seed: u64, hash: &str) -> String {
    format!("{seed}-{}", &hash[..HASH_PREFIX.min(hash.len())])
}

fn line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

/// Streams telemetry, trace and journal lines out of a running simulation.
pub struct Sink<W: Write> {
    pub telemetry: W,
    pub trace: W,
    pub journal: W,
    journal_written: usize,
}

impl<W: Write> Sink<W> {
    pub fn new(telemetry: W, trace: W, journal: W) -> Self {
        Sink {
            telemetry,
            trace,
            journal,
            journal_written: 0,
        }
    }

    /// Writes everything the simulation has produced since the last drain.
    pub fn drain(&mut self, sim: &mut Simulation) -> io::Result<()> {
        self.write_telemetry(&sim.take_telemetry())?;
        for r in sim.take_trace() {
            line(&mut self.trace, &r)?;
        }
        let entries = sim.journal().entries();
        for e in &entries[self.journal_written..] {
            line(&mut self.journal, e)?;
        }
        self.journal_written = entries.len();
        Ok(())
    }

    /// For callers that consume telemetry themselves before draining.
    pub fn write_telemetry(&mut self, records: &[TelemetryRecord]) -> io::Result<()> {
        for r in records {
            line(&mut self.telemetry, r)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.telemetry.flush()?;
        self.trace.flush()?;
        self.journal.flush()
    }
}

/// One flat row for spreadsheets.
#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    t: f64,
    efficiency: f64,
    generated: u64,
    processed: u64,
    accepted_l1: u64,
    rejected_l1: u64,
    dropped_prescale: u64,
    lost: u64,
    in_flight: u64,
    l2_passed: u64,
    l3_passed: u64,
    notifies: u64,
    cleanups: u64,
    worker_resets: u64,
    escalations: u64,
    farmlet_resets: u64,
    quarantines: u64,
    operator_restarts: u64,
    fp_updates: u64,
    gp_updates: u64,
    failovers: u64,
    failover_alarms: u64,
    invariant_violations: usize,
}

impl From<&RunSummary> for CsvRow {
    fn from(s: &RunSummary) -> Self {
        let (c, v) = (&s.counters, &s.vla);
        CsvRow {
            seed: s.seed,
            t: s.t,
            efficiency: s.efficiency,
            generated: c.generated,
            processed: c.processed,
            accepted_l1: c.accepted_l1,
            rejected_l1: c.rejected_l1,
            dropped_prescale: c.dropped_prescale,
            lost: c.lost,
            in_flight: s.in_flight,
            l2_passed: c.l2_passed,
            l3_passed: c.l3_passed,
            notifies: v.notifies,
            cleanups: v.cleanups,
            worker_resets: v.worker_resets,
            escalations: v.escalations,
            farmlet_resets: v.farmlet_resets,
            quarantines: v.quarantines,
            operator_restarts: v.operator_restarts,
            fp_updates: v.fp_updates,
            gp_updates: v.gp_updates,
            failovers: v.failovers,
            failover_alarms: v.failover_alarms,
            invariant_violations: s.invariant_violations.len(),
        }
    }
}

pub fn summary_json(summary: &RunSummary) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(summary).unwrap_or_default();
    out.push(b'\n');
    out
}

pub fn summary_csv(summary: &RunSummary) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(CsvRow::from(summary)).map_err(io::Error::other)?;
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// An open run directory being written.
pub struct RunDir {
    pub path: PathBuf,
    pub sink: Sink<BufWriter<File>>,
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

impl RunDir {
    /// Creates `<out>/<seed>-<hash>/`, replacing a previous run of the same
    /// scenario, and writes the scenario copy.
    pub fn create(out: &Path, scenario: &LoadedScenario) -> io::Result<Self> {
        let path = out.join(dir_name(scenario.script.seed, &scenario.hash()));
        if path.exists() {
            fs::remove_dir_all(&path)?;
        }
        fs::create_dir_all(&path)?;

        let mut script = scenario.script.clone();
        if let Some(s) = &scenario.worker_spec {
            fs::write(path.join(WORKER_SPEC), &s.text)?;
            script.dsl.worker = Some(WORKER_SPEC.into());
        }
        if let Some(s) = &scenario.farmlet_spec {
            fs::write(path.join(FARMLET_SPEC), &s.text)?;
            script.dsl.farmlet = Some(FARMLET_SPEC.into());
        }
        let mut copy = serde_json::to_vec_pretty(&script)?;
        copy.push(b'\n');
        fs::write(path.join(SCENARIO), copy)?;

        let sink = Sink::new(
            create(&path.join(TELEMETRY))?,
            create(&path.join(TRACE))?,
            create(&path.join(JOURNAL))?,
        );
        Ok(RunDir { path, sink })
    }

    pub fn finish(mut self, summary: &RunSummary) -> io::Result<PathBuf> {
        self.sink.flush()?;
        fs::write(self.path.join(SUMMARY_JSON), summary_json(summary))?;
        fs::write(self.path.join(SUMMARY_CSV), summary_csv(summary)?)?;
        Ok(self.path)
    }
}
