use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vlafarm::exit;
use vlafarm::replay::replay;
use vlafarm::runner::{run_scenario, RunOptions};
use vlafarm::scenario::{self, LoadedScenario};
use vlafarm::service::{serve, ServiceConfig};
use vlafarm_core::control::ScenarioScript;
use vlafarm_core::dsl::{parse, validate, Diagnostic, Severity};
use vlafarm_core::sim::RunSummary;

/// Fault-adaptive trigger farm simulator.
///
/// Every flag can also come from a `VLAFARM_*` environment variable; a flag
/// on the command line wins over the environment.
#[derive(Debug, Parser)]
#[command(name = "vlafarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scenario headlessly and write a run directory.
    Run(RunArgs),
    /// Re-execute a run directory from its journal and compare outputs.
    Replay {
        /// Run directory written by `run` or `serve --out`.
        #[arg(env = "VLAFARM_RUN_DIR")]
        dir: PathBuf,
    },
    /// Serve the HTTP/WebSocket control API around a live simulation.
    Serve(ServeArgs),
    /// Parse and validate a statechart file.
    ValidateDsl {
        #[arg(env = "VLAFARM_DSL")]
        spec: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long, env = "VLAFARM_SCENARIO")]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, env = "VLAFARM_SEED")]
    seed: Option<u64>,
    /// Telemetry period in virtual seconds.
    #[arg(long, env = "VLAFARM_PERIOD")]
    period: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Root for run directories.
    #[arg(long, env = "VLAFARM_OUT", default_value = "runs")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Persist a run directory under this root.
    #[arg(long, env = "VLAFARM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "VLAFARM_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Virtual seconds per wall-clock second.
    #[arg(long, env = "VLAFARM_SPEED", default_value_t = 1.0)]
    speed: f64,
}

fn load(args: &ScenarioArgs) -> Result<LoadedScenario, String> {
    let base = match &args.scenario {
        Some(p) => scenario::load(p),
        None => LoadedScenario::from_script(ScenarioScript::default()),
    }
    .map_err(|e| e.to_string())?;
    let s = RunOptions {
        seed: args.seed,
        telemetry_period: args.period,
    }
    .apply(&base);
    s.script.validate().map_err(|e| format!("scenario: {e}"))?;
    Ok(s)
}

fn print_summary(s: &RunSummary) {
    let c = &s.counters;
    let v = &s.vla;
    println!("t                 {:.3} s", s.t);
    println!("efficiency        {:.6}", s.efficiency);
    println!("missing events    {}", c.lost);
    println!("generated         {}", c.generated);
    println!("processed         {}", c.processed);
    println!("dropped prescale  {}", c.dropped_prescale);
    println!("in flight         {}", s.in_flight);
    println!("actions by authority:");
    println!("  WR  notifies={} cleanups={} resets={} escalations={}", v.notifies, v.cleanups, v.worker_resets, v.escalations);
    println!("  FP  updates={}", v.fp_updates);
    println!("  GP  updates={}", v.gp_updates);
    println!("  GF  failovers={} alarms={}", v.failovers, v.failover_alarms);
    println!(
        "  farmlet  resets={} quarantines={} summaries={}",
        v.farmlet_resets, v.quarantines, v.fault_summaries
    );
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_run(args: &RunArgs) -> i32 {
    let scenario = match load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::VALIDATION;
        }
    };
    match run_scenario(&scenario, &args.out) {
        Ok(outcome) => {
            print_summary(&outcome.summary);
            println!("run directory     {}", outcome.dir.display());
            if outcome.summary.invariant_violations.is_empty() {
                exit::OK
            } else {
                for v in &outcome.summary.invariant_violations {
                    eprintln!("invariant violation: {v}");
                }
                exit::INVARIANT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::VALIDATION
        }
    }
}

fn cmd_replay(dir: &Path) -> i32 {
    match replay(dir) {
        Ok(report) if report.identical() => {
            println!("identical");
            exit::OK
        }
        Ok(report) => {
            for d in &report.divergences {
                println!("divergent: {}:{}", d.file, d.line);
                println!("  recorded: {}", d.recorded.as_deref().unwrap_or("<end of file>"));
                println!("  replayed: {}", d.replayed.as_deref().unwrap_or("<end of file>"));
            }
            exit::REPLAY_DIVERGENCE
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::VALIDATION
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> i32 {
    let scenario = match load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::VALIDATION;
        }
    };
    if args.speed.is_nan() || args.speed <= 0.0 {
        eprintln!("error: --speed must be positive");
        return exit::VALIDATION;
    }
    let cfg = ServiceConfig {
        speed: args.speed,
        step: scenario.script.telemetry_period,
        out: args.out.clone(),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::VALIDATION;
        }
    };
    match rt.block_on(serve(args.listen, &scenario, &cfg)) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit::VALIDATION
        }
    }
}

#[derive(Serialize)]
struct DslReport<'a> {
    file: String,
    ok: bool,
    diagnostics: &'a [Diagnostic],
}

/// Prints machine-readable diagnostics on stdout; warnings do not fail.
fn cmd_validate_dsl(path: &Path) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return exit::VALIDATION;
        }
    };
    let spec = match parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return exit::VALIDATION;
        }
    };
    let diags = validate(&spec);
    let ok = diags.iter().all(|d| d.severity != Severity::Error);
    let report = DslReport {
        file: path.display().to_string(),
        ok,
        diagnostics: &diags,
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    for d in &diags {
        eprintln!("{}: {d}", path.display());
    }
    if ok {
        exit::OK
    } else {
        exit::VALIDATION
    }
}

fn main() -> ExitCode {
    // clap's own failure code (2) would collide with the invariant code
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::VALIDATION as u8 } else { 0 });
        }
    };
    let code = match &cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Replay { dir } => cmd_replay(dir),
        Cmd::Serve(a) => cmd_serve(a),
        Cmd::ValidateDsl { spec } => cmd_validate_dsl(spec),
    };
    ExitCode::from(code as u8)
}
