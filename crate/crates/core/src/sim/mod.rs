//! The wired-up simulation session.
//!
//! Node ids: the global controller is `0`, farmlet `f` is `1 + f` and
//! worker `w` is `1 + F + w` for `F` farmlets. Links follow the hierarchy:
//! global to farmlet data and control, farmlet to global control, and
//! control both ways between a farmlet and each of its workers.
//!
//! Operator commands apply between events: callers advance the clock with
//! [`Simulation::run_until`] and then call [`Simulation::apply_command`].
//! Scripts and journal replays go through the same path, which is what makes
//! a journal replay reproduce the original trace.

mod events;
mod report;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::armor::{standard_armor, ArmorLevel, ArmorProcess};
use crate::control::{
    check_record, Command, CommandAck, CommandError, FarmletTelemetry, Journal, LinkRef, LogicKind, NodeName,
    ScenarioError, ScenarioScript, TelemetryRecord, VlaCounters, WorkerTelemetry,
};
use crate::dsl::{has_errors, validate, DslFarmletPolicy, DslWorkerVla, StatechartSpec};
use crate::engine::{Engine, EventHandle, FrozenEvents, LinkEntry, LinkKey, LinkKind, LinkTable, NodeId, SimError, TraceRecord};
use crate::farm::{
    efficiency, Activity, Crossing, CrossingGenerator, DownstreamFilter, ExperimentParams, FarmCounters, Farmlet,
    FarmletId, FarmletRole, PaConfig, PaStatus, RoutingTable, Verdict, WorkerId, WorkerState,
};
use crate::mitigation::{AuthorityMask, FarmletHealth};
use crate::rng::RngStream;
use crate::time::SimTime;
use crate::vla::{FarmletPolicy, FarmletVla, HandFarmletPolicy, HandWorkerVla, VlaMessage, WorkerVlaLogic};

pub use events::Event;
pub use report::{ActionRecord, ArmorRecord, FailoverRecord, RunSummary, StatsRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("{which} statechart: {reason}")]
    Spec { which: &'static str, reason: String },
}

/// Construction options beyond the scenario itself.
#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Replaces the shipped worker statechart when the logic is `dsl`.
    pub worker_spec: Option<StatechartSpec>,
    pub farmlet_spec: Option<StatechartSpec>,
    pub record_trace: bool,
    pub record_actions: bool,
    pub record_stats: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            worker_spec: None,
            farmlet_spec: None,
            record_trace: true,
            record_actions: false,
            record_stats: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ResetCause {
    Local,
    Farmlet,
    Operator,
}

pub(crate) struct WorkerRuntime {
    pub in_hand: Option<Crossing>,
    pub verdict: Option<Verdict>,
    pub completion: Option<EventHandle>,
    pub timer: Option<EventHandle>,
    pub restart: Option<EventHandle>,
    pub logic: Box<dyn WorkerVlaLogic + Send>,
    /// Local reset handling revoked by subsumption.
    pub wr_revoked: bool,
    pub notified: bool,
    pub notifies: u64,
    pub resets: u64,
    pub escalations: u64,
    pub rng: RngStream,
}

pub(crate) struct GlobalState {
    pub health: Vec<FarmletHealth>,
    /// Latest `(occupancy fraction, processed + prescaled)` heard from each farmlet.
    pub last_stats: Vec<Option<(f64, u64)>>,
    pub heard: Vec<bool>,
    pub alarmed: Vec<bool>,
    pub armor: ArmorProcess,
    pub regional: ArmorProcess,
    pub l23_loads: Vec<f64>,
    /// `(accepted_l1, processed, corrupt processed)` at the previous ARMOR tick.
    pub last_tick: (u64, u64, u64),
}

struct Stopped {
    at: SimTime,
    frozen: FrozenEvents<Event>,
}

struct Deferred {
    cmd: Command,
    actor: String,
    wall_ms: Option<u64>,
}

/// One simulation session.
pub struct Simulation {
    script: ScenarioScript,
    engine: Engine<Event>,
    estimate: SimTime,
    grace: SimTime,
    restart_latency: SimTime,
    overhead: SimTime,
    stats_period: SimTime,
    telemetry_period: SimTime,
    generation_tick: SimTime,
    heartbeat_period: SimTime,
    params: ExperimentParams,
    pa: PaConfig,
    authority: AuthorityMask,
    counters: FarmCounters,
    vla: VlaCounters,
    generator: CrossingGenerator,
    filter: DownstreamFilter,
    cleanup_rng: RngStream,
    routing: RoutingTable,
    /// Crossings routed to each farmlet, as seen by the global level.
    routed: Vec<u64>,
    farmlets: Vec<Farmlet>,
    farmlet_vlas: Vec<FarmletVla>,
    policies: Vec<Box<dyn FarmletPolicy + Send>>,
    workers: Vec<WorkerState>,
    runtime: Vec<WorkerRuntime>,
    global: GlobalState,
    corrupt_processed: u64,
    journal: Journal,
    stopped: Option<Stopped>,
    deferred: Vec<Deferred>,
    telemetry: Vec<TelemetryRecord>,
    telemetry_count: u64,
    stats: Vec<StatsRecord>,
    actions: Vec<ActionRecord>,
    armor_log: Vec<ArmorRecord>,
    failovers: Vec<FailoverRecord>,
    violations: Vec<String>,
    warnings: Vec<String>,
    record_actions: bool,
    record_stats: bool,
}

impl core::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Simulation")
            .field("now", &self.engine.now())
            .field("seed", &self.script.seed)
            .finish_non_exhaustive()
    }
}

fn spec_or_default(
    which: &'static str,
    spec: Option<StatechartSpec>,
    default: fn() -> StatechartSpec,
) -> Result<StatechartSpec, BuildError> {
    let spec = spec.unwrap_or_else(default);
    let diags = validate(&spec);
    if has_errors(&diags) {
        let reason = diags
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(BuildError::Spec { which, reason });
    }
    Ok(spec)
}

impl Simulation {
    pub fn new(script: ScenarioScript) -> Result<Self, BuildError> {
        Self::with_options(script, SimOptions::default())
    }

    pub fn with_options(script: ScenarioScript, opts: SimOptions) -> Result<Self, BuildError> {
        script.validate()?;
        let seed = script.seed;
        let topo = &script.topology;
        let nf = topo.farmlets.len() as u32;
        let owners = topo.worker_farmlets();

        let (worker_spec, farmlet_spec) = match script.vla.logic {
            LogicKind::Hand => (None, None),
            LogicKind::Dsl => (
                Some(spec_or_default("worker", opts.worker_spec, crate::dsl::default_worker_spec)?),
                Some(spec_or_default("farmlet", opts.farmlet_spec, crate::dsl::default_farmlet_spec)?),
            ),
        };

        let mut links = LinkTable::new();
        let data = SimTime::from_secs_f64(topo.data_latency);
        let ctl = SimTime::from_secs_f64(topo.control_latency);
        let g = NodeId(0);
        // Declarations are unique by construction.
        for f in 0..nf {
            let fnode = NodeId(1 + f);
            let _ = links.declare(LinkKey::new(g, fnode, LinkKind::Data), data);
            let _ = links.declare(LinkKey::new(g, fnode, LinkKind::Control), ctl);
            let _ = links.declare(LinkKey::new(fnode, g, LinkKind::Control), ctl);
        }
        for (w, &f) in owners.iter().enumerate() {
            let wnode = NodeId(1 + nf + w as u32);
            let fnode = NodeId(1 + f);
            let _ = links.declare(LinkKey::new(fnode, wnode, LinkKind::Control), ctl);
            let _ = links.declare(LinkKey::new(wnode, fnode, LinkKind::Control), ctl);
        }
        let mut engine = Engine::with_links(links);
        engine.set_tracing(opts.record_trace);

        let mut farmlets = Vec::new();
        let mut farmlet_vlas = Vec::new();
        let mut policies: Vec<Box<dyn FarmletPolicy + Send>> = Vec::new();
        let mut health = Vec::new();
        for (f, spec) in topo.farmlets.iter().enumerate() {
            let members: Vec<WorkerId> = owners
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == f as u32)
                .map(|(w, _)| WorkerId(w as u32))
                .collect();
            let id = FarmletId(f as u32);
            farmlet_vlas.push(FarmletVla::new(script.vla.farmlet, members.iter().copied()));
            farmlets.push(Farmlet::new(
                id,
                members,
                spec.role,
                topo.queue_capacity,
                RngStream::new(seed, format!("prescale/{f}")),
            ));
            policies.push(match &farmlet_spec {
                Some(s) => Box::new(DslFarmletPolicy::new(s.clone())),
                None => Box::new(HandFarmletPolicy),
            });
            health.push(FarmletHealth::new(id, spec.role));
        }

        let mut workers = Vec::new();
        let mut runtime = Vec::new();
        for (w, &f) in owners.iter().enumerate() {
            let mut ws = WorkerState::new(WorkerId(w as u32), FarmletId(f), SimTime::ZERO);
            ws.behavior = script.behavior;
            workers.push(ws);
            runtime.push(WorkerRuntime {
                in_hand: None,
                verdict: None,
                completion: None,
                timer: None,
                restart: None,
                logic: match &worker_spec {
                    Some(s) => Box::new(DslWorkerVla::new(s.clone())),
                    None => Box::new(HandWorkerVla::new()),
                },
                wr_revoked: false,
                notified: false,
                notifies: 0,
                resets: 0,
                escalations: 0,
                rng: RngStream::new(seed, format!("pa/{w}")),
            });
        }

        let routing = RoutingTable::new(
            topo.farmlets
                .iter()
                .enumerate()
                .filter(|(_, s)| s.role == FarmletRole::Active)
                .map(|(f, _)| FarmletId(f as u32)),
        );

        let estimate = script.pa.estimate_time();
        let global = GlobalState {
            health,
            last_stats: vec![None; nf as usize],
            heard: vec![false; nf as usize],
            alarmed: vec![false; nf as usize],
            armor: standard_armor(0, ArmorLevel::Global, &script.armor),
            regional: standard_armor(1, ArmorLevel::Regional, &script.armor),
            l23_loads: script.armor.l23_node_loads.clone(),
            last_tick: (0, 0, 0),
        };

        let mut sim = Simulation {
            engine,
            estimate,
            grace: estimate.mul_f64(script.vla.grace_factor),
            restart_latency: SimTime::from_secs_f64(script.vla.restart_latency),
            overhead: SimTime::from_secs_f64(script.vla.vla_overhead),
            stats_period: SimTime::from_secs_f64(script.stats_period),
            telemetry_period: SimTime::from_secs_f64(script.telemetry_period),
            generation_tick: SimTime::from_secs_f64(script.generation_tick),
            heartbeat_period: SimTime::from_secs_f64(script.armor.heartbeat_period),
            params: script.params,
            pa: script.pa,
            authority: script.authority,
            counters: FarmCounters::default(),
            vla: VlaCounters::default(),
            generator: CrossingGenerator::new(RngStream::new(seed, "generation")),
            filter: DownstreamFilter::new(script.downstream, RngStream::new(seed, "thinning")),
            cleanup_rng: RngStream::new(seed, "cleanup"),
            routing,
            routed: vec![0; nf as usize],
            farmlets,
            farmlet_vlas,
            policies,
            workers,
            runtime,
            global,
            corrupt_processed: 0,
            journal: Journal::new(),
            stopped: None,
            deferred: Vec::new(),
            telemetry: Vec::new(),
            telemetry_count: 0,
            stats: Vec::new(),
            actions: Vec::new(),
            armor_log: Vec::new(),
            failovers: Vec::new(),
            violations: Vec::new(),
            warnings: Vec::new(),
            record_actions: opts.record_actions,
            record_stats: opts.record_stats,
            script,
        };
        sim.schedule_periodic();
        Ok(sim)
    }

    // Telemetry is scheduled first so that at equal times it observes the
    // state before that instant's controller ticks.
    fn schedule_periodic(&mut self) {
        let g = NodeId(0);
        let e = &mut self.engine;
        e.schedule_in(self.telemetry_period, g, Event::Telemetry);
        for f in 0..self.farmlets.len() as u32 {
            e.schedule_in(self.stats_period, NodeId(1 + f), Event::FarmletTick { farmlet: f });
        }
        e.schedule_in(self.stats_period, g, Event::GlobalTick);
        for f in 0..self.farmlets.len() as u32 {
            e.schedule_in(self.heartbeat_period, NodeId(1 + f), Event::HeartbeatTick { farmlet: f });
        }
        let offset = SimTime::from_nanos(self.heartbeat_period.as_nanos() / 2);
        e.schedule_in(self.heartbeat_period + offset, g, Event::ArmorTick);
        e.schedule_in(self.generation_tick, g, Event::Generate);
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped.is_some()
    }

    pub fn authority(&self) -> AuthorityMask {
        self.authority
    }

    pub fn params(&self) -> &ExperimentParams {
        &self.params
    }

    pub fn counters(&self) -> &FarmCounters {
        &self.counters
    }

    pub fn vla_counters(&self) -> &VlaCounters {
        &self.vla
    }

    pub fn farmlets(&self) -> &[Farmlet] {
        &self.farmlets
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn links(&self) -> &LinkTable {
        self.engine.links()
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    pub fn failovers(&self) -> &[FailoverRecord] {
        &self.failovers
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Agent actions so far; empty unless enabled in [`SimOptions`].
    pub fn action_log(&self) -> &[ActionRecord] {
        &self.actions
    }

    pub fn armor_log(&self) -> &[ArmorRecord] {
        &self.armor_log
    }

    /// Name of the worker agent's current state.
    pub fn worker_vla_state(&self, worker: u32) -> Option<&str> {
        self.runtime.get(worker as usize).map(|r| r.logic.state_name())
    }

    /// The farmlet agent currently holding `worker` subsumed, if any.
    pub fn is_subsumed(&self, worker: u32) -> bool {
        let Some(w) = self.workers.get(worker as usize) else {
            return false;
        };
        self.farmlet_vlas[w.farmlet.0 as usize].is_subsumed(w.id)
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.engine.take_trace()
    }

    pub fn take_telemetry(&mut self) -> Vec<TelemetryRecord> {
        core::mem::take(&mut self.telemetry)
    }

    pub fn take_stats(&mut self) -> Vec<StatsRecord> {
        core::mem::take(&mut self.stats)
    }

    /// Executes every event with `fire_time <= t`, then sets the clock to `t`.
    pub fn run_until(&mut self, t: SimTime) -> Result<(), SimError> {
        if t < self.engine.now() {
            return Err(SimError::RunInPast {
                requested: t,
                now: self.engine.now(),
            });
        }
        while let Some(ev) = self.engine.pop_next(t) {
            self.handle(ev);
        }
        self.engine.advance_to(t)
    }

    /// Applies timed commands in order, then runs to `end`. `drain` is called
    /// after every virtual second so callers can stream output.
    pub fn run_commands(
        &mut self,
        commands: &[(SimTime, Command)],
        actor: &str,
        end: SimTime,
        mut drain: impl FnMut(&mut Simulation),
    ) -> Result<(), RunError> {
        for (t, cmd) in commands {
            self.advance(*t, &mut drain)?;
            self.apply_command(cmd.clone(), actor, None)
                .map_err(|e| RunError::Command {
                    t: t.as_secs_f64(),
                    cmd: cmd.name(),
                    error: e,
                })?;
        }
        self.advance(end, &mut drain)?;
        drain(self);
        Ok(())
    }

    fn advance(&mut self, to: SimTime, drain: &mut dyn FnMut(&mut Simulation)) -> Result<(), RunError> {
        let chunk = SimTime::from_secs(1);
        while self.now() < to {
            let next = (self.now() + chunk).min(to);
            self.run_until(next)?;
            drain(self);
        }
        Ok(())
    }

    fn in_flight(&self) -> u64 {
        let batch = |e: &Event| match e {
            Event::Deliver { batch, .. } => batch.len() as u64,
            _ => 0,
        };
        let mut n: u64 = self.engine.pending_payloads().map(batch).sum();
        if let Some(s) = &self.stopped {
            n += s.frozen.payloads().map(batch).sum::<u64>();
        }
        n += self.farmlets.iter().map(|f| f.occupancy() as u64).sum::<u64>();
        n += self.runtime.iter().filter(|r| r.in_hand.is_some()).count() as u64;
        n
    }

    /// The state as of the current clock, in telemetry form.
    pub fn snapshot(&self) -> TelemetryRecord {
        let now = self.engine.now();
        TelemetryRecord {
            t: now.as_secs_f64(),
            efficiency: efficiency(&self.counters),
            missing_events: self.counters.lost,
            in_flight: self.in_flight(),
            stopped: self.stopped.is_some(),
            authority: self.authority,
            counters: self.counters,
            farmlets: self
                .farmlets
                .iter()
                .map(|f| FarmletTelemetry {
                    id: f.id.0,
                    role: f.role,
                    occupancy: f.occupancy(),
                    capacity: f.capacity(),
                    fraction: f.occupancy_fraction(),
                    drop_rate: f.prescale_drop_rate,
                    received: f.received,
                    processed: f.processed,
                    overflowed: f.overflowed,
                    dropped_prescale: f.dropped_prescale,
                })
                .collect(),
            workers: self
                .workers
                .iter()
                .zip(&self.runtime)
                .map(|(w, r)| {
                    let (p, v, i) = w.util.fractions_at(now);
                    WorkerTelemetry {
                        id: w.id.0,
                        farmlet: w.farmlet.0,
                        status: w.pa_status,
                        behavior: w.behavior,
                        quarantined: w.quarantined,
                        p,
                        v,
                        i,
                        notifies: r.notifies,
                        resets: r.resets,
                        escalations: r.escalations,
                    }
                })
                .collect(),
            vla: self.vla,
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.script.seed,
            t: self.engine.now().as_secs_f64(),
            efficiency: efficiency(&self.counters),
            counters: self.counters,
            in_flight: self.in_flight(),
            vla: self.vla,
            failovers: self.failovers.clone(),
            executed_events: self.engine.executed(),
            telemetry_records: self.telemetry_count,
            journal_entries: self.journal.len() as u64,
            invariant_violations: self.violations.clone(),
            warnings: self.warnings.clone(),
        }
    }

    fn emit_telemetry(&mut self) {
        let rec = self.snapshot();
        for v in check_record(&rec) {
            self.violations.push(v);
        }
        self.telemetry_count += 1;
        self.telemetry.push(rec);
    }

    fn node_of(&self, name: NodeName) -> Option<NodeId> {
        let nf = self.farmlets.len() as u32;
        match name {
            NodeName::Global => Some(NodeId(0)),
            NodeName::Farmlet(f) if f.0 < nf => Some(NodeId(1 + f.0)),
            NodeName::Worker(w) if (w.0 as usize) < self.workers.len() => Some(NodeId(1 + nf + w.0)),
            _ => None,
        }
    }

    /// Inverse of the node numbering: global, then farmlets, then workers.
    pub fn node_name(&self, id: NodeId) -> Option<NodeName> {
        let nf = self.farmlets.len() as u32;
        match id.0 {
            0 => Some(NodeName::Global),
            i if i <= nf => Some(NodeName::Farmlet(FarmletId(i - 1))),
            i if ((i - 1 - nf) as usize) < self.workers.len() => Some(NodeName::Worker(WorkerId(i - 1 - nf))),
            _ => None,
        }
    }

    /// Every declared link by name, with its counters.
    pub fn link_list(&self) -> Vec<(LinkRef, LinkEntry)> {
        self.engine
            .links()
            .iter()
            .filter_map(|(k, e)| {
                let link = LinkRef {
                    source: self.node_name(k.source)?,
                    dest: self.node_name(k.dest)?,
                    kind: k.kind,
                };
                Some((link, e.clone()))
            })
            .collect()
    }

    fn link_key(&self, link: &LinkRef) -> Result<LinkKey, CommandError> {
        let source = self.node_of(link.source).ok_or(CommandError::link(link))?;
        let dest = self.node_of(link.dest).ok_or(CommandError::link(link))?;
        let key = LinkKey::new(source, dest, link.kind);
        self.engine.links().get(&key).ok_or(CommandError::link(link))?;
        Ok(key)
    }

    fn check_command(&self, cmd: &Command) -> Result<(), CommandError> {
        let worker = |w: u32| {
            if (w as usize) < self.workers.len() {
                Ok(())
            } else {
                Err(CommandError::UnknownWorker(w))
            }
        };
        match cmd {
            Command::HangPa { worker: w } | Command::RestartPa { worker: w } => worker(*w),
            Command::SetBehavior { worker: Some(w), .. } => worker(*w),
            Command::Sever { link } | Command::Restore { link } => self.link_key(link).map(|_| ()),
            Command::SetErrorRate { p } if !(0.0..=1.0).contains(p) => {
                Err(CommandError::InvalidParam { name: "p", value: *p })
            }
            Command::SetParams { rate, .. } if !(*rate >= 0.0 && rate.is_finite()) => {
                Err(CommandError::InvalidParam { name: "rate", value: *rate })
            }
            Command::SetParams { size, .. } if !(*size >= 1.0 && size.is_finite()) => {
                Err(CommandError::InvalidParam { name: "size", value: *size })
            }
            Command::Stop if self.stopped.is_some() => Err(CommandError::RunState("stopped")),
            Command::Go if self.stopped.is_none() => Err(CommandError::RunState("running")),
            _ => Ok(()),
        }
    }

    /// Validates, applies and journals one operator command at the current
    /// clock. While stopped, everything except `go` is deferred and applied
    /// (and journaled) right after the next `go`.
    pub fn apply_command(&mut self, cmd: Command, actor: &str, wall_ms: Option<u64>) -> Result<CommandAck, CommandError> {
        self.check_command(&cmd)?;
        let now = self.engine.now();
        if self.stopped.is_some() && !matches!(cmd, Command::Go) {
            self.deferred.push(Deferred {
                cmd,
                actor: String::from(actor),
                wall_ms,
            });
            return Ok(CommandAck {
                seq: None,
                t: now.as_secs_f64(),
                deferred: true,
                previous: String::new(),
                new: String::new(),
            });
        }
        let (previous, new) = self.execute(&cmd);
        let seq = self
            .journal
            .append(now, wall_ms, actor, cmd.clone(), previous.clone(), new.clone());
        if matches!(cmd, Command::Go) {
            for d in core::mem::take(&mut self.deferred) {
                // Re-checked: an earlier deferred command may have changed the state.
                if let Err(e) = self.check_command(&d.cmd) {
                    self.warnings.push(format!("deferred {} rejected at go: {e}", d.cmd.name()));
                    continue;
                }
                let (p, n) = self.execute(&d.cmd);
                self.journal.append(now, d.wall_ms, &d.actor, d.cmd, p, n);
            }
        }
        Ok(CommandAck {
            seq: Some(seq),
            t: now.as_secs_f64(),
            deferred: false,
            previous,
            new,
        })
    }

    /// Commands waiting for `go`.
    pub fn deferred_commands(&self) -> impl Iterator<Item = &Command> {
        self.deferred.iter().map(|d| &d.cmd)
    }

    fn execute(&mut self, cmd: &Command) -> (String, String) {
        let now = self.engine.now();
        match cmd {
            Command::HangPa { worker } => {
                let w = *worker as usize;
                let prev = status_name(&self.workers[w]);
                let rt = &mut self.runtime[w];
                if let Some(h) = rt.completion.take() {
                    self.engine.cancel(h);
                }
                if let Some(h) = rt.restart.take() {
                    self.engine.cancel(h);
                    self.workers[w].util.set_activity(now, Activity::Idle);
                }
                self.workers[w].pa_status = PaStatus::Hung;
                (prev, status_name(&self.workers[w]))
            }
            Command::RestartPa { worker } => {
                let w = *worker as usize;
                let prev = status_name(&self.workers[w]);
                let id = self.workers[w].id;
                if self.workers[w].quarantined {
                    self.farmlet_vlas[self.workers[w].farmlet.0 as usize].release(id);
                    self.workers[w].quarantined = false;
                }
                self.runtime[w].wr_revoked = false;
                self.reset_worker(now, w, ResetCause::Operator);
                (prev, status_name(&self.workers[w]))
            }
            Command::Sever { link } | Command::Restore { link } => {
                // checked by check_command
                let Ok(key) = self.link_key(link) else {
                    return (String::new(), String::new());
                };
                let links = self.engine.links_mut();
                let prev = links.status(&key).map(|s| s.to_string()).unwrap_or_default();
                let new = if matches!(cmd, Command::Sever { .. }) {
                    links.sever(&key)
                } else {
                    links.restore(&key)
                };
                (prev, new.map(|s| s.to_string()).unwrap_or_default())
            }
            Command::SetErrorRate { p } => {
                let prev = format!("{}", self.params.error_rate);
                self.params.error_rate = *p;
                (prev, format!("{p}"))
            }
            Command::SetBehavior { behavior, worker } => {
                let name = |b| match b {
                    crate::farm::Behavior::RunWell => "run_well",
                    crate::farm::Behavior::RunPoor => "run_poor",
                };
                let targets: Vec<usize> = match worker {
                    Some(w) => vec![*w as usize],
                    None => (0..self.workers.len()).collect(),
                };
                let prev = targets
                    .iter()
                    .map(|&w| name(self.workers[w].behavior))
                    .collect::<Vec<_>>()
                    .join(",");
                for &w in &targets {
                    self.workers[w].behavior = *behavior;
                }
                (prev, String::from(name(*behavior)))
            }
            Command::SetParams { rate, size } => {
                let prev = format!(
                    "rate={}, size={}",
                    self.params.crossing_rate, self.params.mean_size_bytes
                );
                self.params.crossing_rate = *rate;
                self.params.mean_size_bytes = *size;
                (prev, format!("rate={rate}, size={size}"))
            }
            Command::SetAuthority { mask } => {
                let prev = self.authority.to_string();
                self.authority = *mask;
                (prev, mask.to_string())
            }
            Command::Stop => {
                let frozen = self.engine.freeze(|e| !matches!(e, Event::Telemetry));
                for w in &mut self.workers {
                    w.util.pause(now);
                }
                self.stopped = Some(Stopped { at: now, frozen });
                (String::from("running"), String::from("stopped"))
            }
            Command::Go => {
                if let Some(s) = self.stopped.take() {
                    let delay = now - s.at;
                    self.engine.thaw(s.frozen, delay);
                    for w in &mut self.workers {
                        w.util.resume(now, delay);
                    }
                }
                (String::from("stopped"), String::from("running"))
            }
        }
    }

    fn violation(&mut self, what: String) {
        self.violations.push(format!("t={}: {what}", self.engine.now().as_secs_f64()));
    }

    fn farmlet_node(&self, f: usize) -> NodeId {
        NodeId(1 + f as u32)
    }

    fn worker_node(&self, w: usize) -> NodeId {
        NodeId(1 + self.farmlets.len() as u32 + w as u32)
    }

    fn send(&mut self, msg: VlaMessage) {
        let (s, d) = (msg.source, msg.dest);
        if let Err(e) = self.engine.send(Event::Control(msg), s, d, LinkKind::Control) {
            self.violation(format!("{e}"));
        }
    }
}

fn status_name(w: &WorkerState) -> String {
    let s = match w.pa_status {
        PaStatus::Idle => "idle",
        PaStatus::Processing => "processing",
        PaStatus::Hung => "hung",
        PaStatus::Restarting => "restarting",
    };
    if w.quarantined {
        format!("{s} (quarantined)")
    } else {
        String::from(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("{0}")]
    Engine(#[from] SimError),
    #[error("command {cmd} at t={t}: {error}")]
    Command {
        t: f64,
        cmd: &'static str,
        error: CommandError,
    },
}

/// Script commands as `(virtual time, command)` pairs.
pub fn script_commands(script: &ScenarioScript) -> Vec<(SimTime, Command)> {
    script
        .commands
        .iter()
        .map(|c| (SimTime::from_secs_f64(c.t), c.cmd.clone()))
        .collect()
}
