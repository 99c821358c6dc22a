//! Headless scenario execution.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use vlafarm_core::control::{Command, CommandError, JournalEntry};
use vlafarm_core::sim::{BuildError, RunSummary};
use vlafarm_core::{SimError, SimTime, Simulation};

use crate::rundir::{RunDir, Sink};
use crate::scenario::LoadedScenario;

/// A command to apply at a virtual instant, with its journal attribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Timed {
    pub t: SimTime,
    pub command: Command,
    pub actor: String,
    pub wall_ms: Option<u64>,
}

impl Timed {
    pub fn from_entry(e: &JournalEntry) -> Self {
        Timed {
            t: SimTime::from_nanos(e.t_ns),
            command: e.command.clone(),
            actor: e.actor.clone(),
            wall_ms: e.wall_ms,
        }
    }
}

pub const SCRIPT_ACTOR: &str = "script";

pub fn script_timeline(scenario: &LoadedScenario) -> Vec<Timed> {
    scenario
        .script
        .commands
        .iter()
        .map(|c| Timed {
            t: SimTime::from_secs_f64(c.t),
            command: c.cmd.clone(),
            actor: SCRIPT_ACTOR.into(),
            wall_ms: None,
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum RunFailure {
    #[error("build: {0}")]
    Build(#[from] BuildError),
    #[error("engine: {0}")]
    Engine(#[from] SimError),
    #[error("command {command} at t={t}: {error}")]
    Command {
        t: f64,
        command: &'static str,
        error: CommandError,
    },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Output is drained at least this often (virtual time) to bound memory.
const DRAIN_EVERY: SimTime = SimTime::from_secs(1);

fn step_to<W: Write>(sim: &mut Simulation, to: SimTime, sink: &mut Sink<W>) -> Result<(), RunFailure> {
    while sim.now() < to {
        let next = (sim.now() + DRAIN_EVERY).min(to);
        sim.run_until(next)?;
        sink.drain(sim)?;
    }
    Ok(())
}

/// Runs `sim` to `end`, applying `timeline` (sorted by time) at event
/// boundaries, and streams every output line into `sink`.
pub fn drive<W: Write>(
    sim: &mut Simulation,
    timeline: &[Timed],
    end: SimTime,
    sink: &mut Sink<W>,
) -> Result<(), RunFailure> {
    for item in timeline {
        step_to(sim, item.t, sink)?;
        sim.apply_command(item.command.clone(), &item.actor, item.wall_ms)
            .map_err(|error| RunFailure::Command {
                t: item.t.as_secs_f64(),
                command: item.command.name(),
                error,
            })?;
    }
    step_to(sim, end, sink)?;
    sink.drain(sim)?;
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub telemetry_period: Option<f64>,
}

impl RunOptions {
    /// Applies overrides; the result is what gets hashed and copied.
    pub fn apply(&self, scenario: &LoadedScenario) -> LoadedScenario {
        let mut s = scenario.clone();
        if let Some(seed) = self.seed {
            s.script.seed = seed;
        }
        if let Some(p) = self.telemetry_period {
            s.script.telemetry_period = p;
        }
        s
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Executes a scenario headlessly into a fresh run directory under `out`.
pub fn run_scenario(scenario: &LoadedScenario, out: &Path) -> Result<RunOutcome, RunFailure> {
    let mut sim = Simulation::with_options(scenario.script.clone(), scenario.sim_options())?;
    let mut dir = RunDir::create(out, scenario)?;
    let end = SimTime::from_secs_f64(scenario.script.duration);
    drive(&mut sim, &script_timeline(scenario), end, &mut dir.sink)?;
    let summary = sim.summary();
    let dir = dir.finish(&summary)?;
    Ok(RunOutcome { dir, summary })
}
