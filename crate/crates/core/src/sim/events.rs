use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{ActionRecord, ArmorRecord, FailoverRecord, ResetCause, Simulation, StatsRecord};
use crate::armor::{execution_monitor_tick, ArmorAction, ArmorLevel, ElementMessage, MsgType, Payload};
use crate::engine::{EventKind, LinkKey, LinkKind, LinkStatus, NodeId, SendOutcome, SimEvent};
use crate::farm::{pa_process, Activity, Crossing, EnqueueOutcome, FarmletRole, PaOutcome, PaStatus, Verdict};
use crate::mitigation::{evaluate_failover, global_prescale};
use crate::time::SimTime;
use crate::vla::{
    pa_cleanup, CleanupResult, Direction, FaultCode, MessageClass, Topic, VlaAction, VlaMessage, WorkerVlaContext,
    WorkerVlaEvent,
};

/// Everything that can happen inside the simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    /// Crossing source tick.
    Generate,
    /// A routed batch arriving over a global-to-farmlet data link.
    Deliver { farmlet: u32, batch: Vec<Crossing> },
    PaDone { worker: u32 },
    /// The PA finished its crossing after a deadline notification.
    CleanupDone { worker: u32 },
    TimerExpiry { worker: u32 },
    RestartDone { worker: u32 },
    /// Agent message over a control link; the target node interprets it.
    Control(VlaMessage),
    FarmletTick { farmlet: u32 },
    GlobalTick,
    HeartbeatTick { farmlet: u32 },
    ArmorTick,
    Telemetry,
}

impl EventKind for Event {
    fn kind(&self) -> &'static str {
        match self {
            Event::Generate => "generate",
            Event::Deliver { .. } => "deliver",
            Event::PaDone { .. } => "pa_done",
            Event::CleanupDone { .. } => "cleanup_done",
            Event::TimerExpiry { .. } => "timer_expiry",
            Event::RestartDone { .. } => "restart_done",
            Event::Control(_) => "control",
            Event::FarmletTick { .. } => "farmlet_tick",
            Event::GlobalTick => "global_tick",
            Event::HeartbeatTick { .. } => "heartbeat",
            Event::ArmorTick => "armor_tick",
            Event::Telemetry => "telemetry",
        }
    }
}

impl Simulation {
    pub(super) fn handle(&mut self, ev: SimEvent<Event>) {
        let now = ev.fire_time;
        match ev.payload {
            Event::Generate => self.on_generate(now),
            Event::Deliver { farmlet, batch } => self.on_deliver(now, farmlet as usize, batch),
            Event::PaDone { worker } | Event::CleanupDone { worker } => self.on_pa_done(now, worker as usize),
            Event::TimerExpiry { worker } => {
                let w = worker as usize;
                self.runtime[w].timer = None;
                self.worker_event(now, w, WorkerVlaEvent::DeadlineExpired);
            }
            Event::RestartDone { worker } => self.on_restart_done(now, worker as usize),
            Event::Control(msg) => self.on_control(now, ev.target, msg),
            Event::FarmletTick { farmlet } => self.on_farmlet_tick(now, farmlet as usize),
            Event::GlobalTick => self.on_global_tick(now),
            Event::HeartbeatTick { farmlet } => {
                let f = farmlet as usize;
                self.engine
                    .schedule_in(self.heartbeat_period, self.farmlet_node(f), Event::HeartbeatTick { farmlet });
                let msg = VlaMessage {
                    class: MessageClass::Statistical,
                    topic: Topic::Heartbeat,
                    code: None,
                    source: self.farmlet_node(f),
                    dest: NodeId(0),
                    t: now,
                    body: Default::default(),
                };
                self.send(msg);
            }
            Event::ArmorTick => self.on_armor_tick(now),
            Event::Telemetry => {
                self.engine.schedule_in(self.telemetry_period, NodeId(0), Event::Telemetry);
                self.emit_telemetry();
            }
        }
    }

    fn log_action(&mut self, now: SimTime, node: NodeId, action: VlaAction) {
        if self.record_actions {
            self.actions.push(ActionRecord {
                t_ns: now.as_nanos(),
                node: node.0,
                action,
            });
        }
    }

    fn on_generate(&mut self, now: SimTime) {
        self.engine.schedule_in(self.generation_tick, NodeId(0), Event::Generate);
        let crossings = self.generator.generate(&self.params, self.generation_tick);
        let mut batches: Vec<Vec<Crossing>> = vec![Vec::new(); self.farmlets.len()];
        for c in crossings {
            self.counters.generated += 1;
            self.counters.generated_bytes += c.size_bytes;
            match self.routing.route() {
                Some(f) => {
                    self.routed[f.0 as usize] += 1;
                    batches[f.0 as usize].push(c);
                }
                None => self.counters.lost += 1,
            }
        }
        let _ = now;
        for (f, batch) in batches.into_iter().enumerate() {
            if batch.is_empty() {
                continue;
            }
            let n = batch.len() as u64;
            let dest = self.farmlet_node(f);
            match self.engine.send(
                Event::Deliver {
                    farmlet: f as u32,
                    batch,
                },
                NodeId(0),
                dest,
                LinkKind::Data,
            ) {
                Ok(SendOutcome::Delivered { .. }) => {}
                Ok(SendOutcome::Dropped) => self.counters.lost += n,
                Err(e) => {
                    self.counters.lost += n;
                    self.violation(format!("{e}"));
                }
            }
        }
    }

    fn on_deliver(&mut self, now: SimTime, f: usize, batch: Vec<Crossing>) {
        for c in batch {
            match self.farmlets[f].enqueue(c, now) {
                Ok(EnqueueOutcome::Accepted) => {}
                Ok(EnqueueOutcome::DroppedPrescale) => self.counters.dropped_prescale += 1,
                Ok(EnqueueOutcome::Overflowed) | Err(_) => self.counters.lost += 1,
            }
        }
        self.dispatch(now, f);
    }

    /// Hands queued crossings to the lowest-numbered available workers. A
    /// hung but empty-handed PA still takes a crossing: dispatch cannot see
    /// the hang, which is what the deadline watchdog is for.
    pub(super) fn dispatch(&mut self, now: SimTime, f: usize) {
        while !self.farmlets[f].is_empty() {
            let next = self.farmlets[f].workers.iter().map(|w| w.0 as usize).find(|&w| {
                let ws = &self.workers[w];
                !ws.quarantined
                    && self.runtime[w].in_hand.is_none()
                    && matches!(ws.pa_status, PaStatus::Idle | PaStatus::Hung)
            });
            let Some(w) = next else { break };
            let Some(c) = self.farmlets[f].dequeue() else { break };
            self.start_crossing(now, w, c);
        }
    }

    fn start_crossing(&mut self, now: SimTime, w: usize, c: Crossing) {
        self.runtime[w].in_hand = Some(c);
        self.runtime[w].notified = false;
        let vla_until = now + self.overhead;
        self.workers[w].util.set_activity(now, Activity::Busy { vla_until });
        self.worker_event(now, w, WorkerVlaEvent::CrossingStarted);
        if self.workers[w].pa_status == PaStatus::Hung {
            return;
        }
        let outcome = pa_process(&self.workers[w], &c, &self.pa, &mut self.runtime[w].rng);
        let node = self.worker_node(w);
        let worker = w as u32;
        let (verdict, duration) = match outcome {
            Ok(PaOutcome::Accept { service }) => (Verdict::Accept, service),
            Ok(PaOutcome::Reject { service }) => (Verdict::Reject, service),
            Ok(PaOutcome::Overrun { duration, verdict }) => (verdict, duration),
            Ok(PaOutcome::Hang) => {
                self.workers[w].pa_status = PaStatus::Hung;
                return;
            }
            Err(e) => {
                self.violation(format!("{e}"));
                return;
            }
        };
        self.workers[w].pa_status = PaStatus::Processing;
        self.runtime[w].verdict = Some(verdict);
        let h = self.engine.schedule_in(self.overhead + duration, node, Event::PaDone { worker });
        self.runtime[w].completion = Some(h);
    }

    fn worker_event(&mut self, now: SimTime, w: usize, event: WorkerVlaEvent) {
        let ctx = WorkerVlaContext {
            wr: self.authority.wr && !self.runtime[w].wr_revoked,
            estimate: self.estimate,
            grace: self.grace,
        };
        match self.runtime[w].logic.on_event(now, event, &ctx) {
            Ok(actions) => {
                let node = self.worker_node(w);
                for a in actions {
                    self.log_action(now, node, a);
                    self.apply_worker_action(now, w, a, ctx.wr);
                }
            }
            Err(e) => self.violation(format!("worker {w} agent: {e}")),
        }
    }

    fn apply_worker_action(&mut self, now: SimTime, w: usize, action: VlaAction, wr: bool) {
        match action {
            VlaAction::ArmTimer { duration } => {
                if let Some(h) = self.runtime[w].timer.take() {
                    self.engine.cancel(h);
                }
                let node = self.worker_node(w);
                let h = self
                    .engine
                    .schedule_in(duration, node, Event::TimerExpiry { worker: w as u32 });
                self.runtime[w].timer = Some(h);
            }
            VlaAction::StopTimer => {
                if let Some(h) = self.runtime[w].timer.take() {
                    self.engine.cancel(h);
                }
            }
            VlaAction::NotifyPa => {
                let rt = &mut self.runtime[w];
                if rt.notified {
                    self.violation(format!("worker {w} notified twice for one crossing"));
                }
                let rt = &mut self.runtime[w];
                rt.notified = true;
                rt.notifies += 1;
                self.vla.notifies += 1;
                let status = self.workers[w].pa_status;
                if pa_cleanup(status, self.script.vla.p_cleanup, &mut self.cleanup_rng) == CleanupResult::Success {
                    if let Some(h) = self.runtime[w].completion.take() {
                        self.engine.cancel(h);
                        let at = SimTime::from_nanos(self.grace.as_nanos() / 2);
                        let node = self.worker_node(w);
                        let h = self.engine.schedule_in(at, node, Event::CleanupDone { worker: w as u32 });
                        self.runtime[w].completion = Some(h);
                        self.vla.cleanups += 1;
                    }
                }
            }
            VlaAction::ResetPa { worker } if worker.is_none() || worker.map(|x| x.0 as usize) == Some(w) => {
                if !wr {
                    self.violation(format!("worker {w} reset without WR"));
                    return;
                }
                self.reset_worker(now, w, ResetCause::Local);
            }
            VlaAction::Escalate { level, code } => {
                self.runtime[w].escalations += 1;
                self.vla.escalations += 1;
                let f = self.workers[w].farmlet.0 as usize;
                let msg = VlaMessage::fault(code, self.worker_node(w), self.farmlet_node(f), now)
                    .with("worker", w as f64)
                    .with(
                        "level",
                        match level {
                            crate::vla::Level::Worker => 0.0,
                            crate::vla::Level::Farmlet => 1.0,
                            crate::vla::Level::Global => 2.0,
                        },
                    );
                self.send(msg);
            }
            other => self.violation(format!("worker agent cannot perform {other:?}")),
        }
    }

    /// Aborts the crossing in hand, counting it lost.
    fn abort_crossing(&mut self, w: usize) {
        let rt = &mut self.runtime[w];
        if let Some(h) = rt.completion.take() {
            self.engine.cancel(h);
        }
        let rt = &mut self.runtime[w];
        if let Some(h) = rt.timer.take() {
            self.engine.cancel(h);
        }
        let rt = &mut self.runtime[w];
        rt.verdict = None;
        if rt.in_hand.take().is_some() {
            self.counters.lost += 1;
        }
    }

    pub(super) fn reset_worker(&mut self, now: SimTime, w: usize, cause: ResetCause) {
        self.abort_crossing(w);
        let rt = &mut self.runtime[w];
        rt.logic.reset();
        match cause {
            ResetCause::Local => {
                rt.resets += 1;
                self.vla.worker_resets += 1;
            }
            ResetCause::Farmlet => {
                rt.resets += 1;
                self.vla.farmlet_resets += 1;
            }
            ResetCause::Operator => self.vla.operator_restarts += 1,
        }
        if let Some(h) = self.runtime[w].restart.take() {
            self.engine.cancel(h);
        }
        self.workers[w].pa_status = PaStatus::Restarting;
        self.workers[w].util.set_activity(now, Activity::Vla);
        let node = self.worker_node(w);
        let h = self
            .engine
            .schedule_in(self.restart_latency, node, Event::RestartDone { worker: w as u32 });
        self.runtime[w].restart = Some(h);
    }

    fn on_restart_done(&mut self, now: SimTime, w: usize) {
        self.runtime[w].restart = None;
        self.workers[w].pa_status = PaStatus::Idle;
        self.workers[w].util.set_activity(now, Activity::Idle);
        let f = self.workers[w].farmlet.0 as usize;
        self.dispatch(now, f);
    }

    fn on_pa_done(&mut self, now: SimTime, w: usize) {
        self.runtime[w].completion = None;
        let Some(c) = self.runtime[w].in_hand.take() else {
            self.violation(format!("worker {w} completed without a crossing"));
            return;
        };
        let verdict = self.runtime[w].verdict.take();
        self.worker_event(now, w, WorkerVlaEvent::PaCompleted);
        let f = self.workers[w].farmlet.0 as usize;
        self.counters.processed += 1;
        self.farmlets[f].processed += 1;
        if c.corrupt {
            self.corrupt_processed += 1;
        }
        if verdict == Some(Verdict::Accept) {
            self.counters.accepted_l1 += 1;
            let (l2, l3) = self.filter.filter_one();
            self.counters.l2_passed += u64::from(l2);
            if l3 {
                self.counters.l3_passed += 1;
                self.counters.l3_bytes += c.size_bytes;
            }
        } else {
            self.counters.rejected_l1 += 1;
        }
        self.workers[w].pa_status = PaStatus::Idle;
        self.workers[w].util.set_activity(now, Activity::Idle);
        self.dispatch(now, f);
    }

    fn quarantine(&mut self, now: SimTime, w: usize) {
        self.vla.quarantines += 1;
        self.abort_crossing(w);
        let rt = &mut self.runtime[w];
        rt.logic.reset();
        rt.wr_revoked = true;
        let ws = &mut self.workers[w];
        ws.quarantined = true;
        if ws.pa_status == PaStatus::Processing {
            ws.pa_status = PaStatus::Idle;
        }
        if ws.pa_status != PaStatus::Restarting {
            ws.util.set_activity(now, Activity::Idle);
        }
    }

    fn on_control(&mut self, now: SimTime, target: NodeId, msg: VlaMessage) {
        let nf = self.farmlets.len() as u32;
        if target.0 == 0 {
            let f = msg.source.0.wrapping_sub(1) as usize;
            if f >= self.farmlets.len() {
                return;
            }
            match msg.topic {
                Topic::Statistics => {
                    let frac = msg.get("fraction").unwrap_or(0.0);
                    let handled = msg.get("processed").unwrap_or(0.0) + msg.get("dropped_prescale").unwrap_or(0.0);
                    self.global.last_stats[f] = Some((frac, handled as u64));
                }
                Topic::Heartbeat => self.global.heard[f] = true,
                Topic::FaultSummary => self.vla.fault_summaries += 1,
                _ => {}
            }
        } else if target.0 <= nf {
            let f = (target.0 - 1) as usize;
            match msg.topic {
                Topic::Fault => self.on_farmlet_fault(now, f, msg),
                Topic::SetPrescale => {
                    let rate = msg.get("rate").unwrap_or(0.0);
                    self.farmlets[f].set_drop_rate(rate);
                }
                _ => {}
            }
        } else {
            let w = (target.0 - 1 - nf) as usize;
            if msg.topic == Topic::Reset && w < self.workers.len() {
                self.reset_worker(now, w, ResetCause::Farmlet);
            }
        }
    }

    fn on_farmlet_fault(&mut self, now: SimTime, f: usize, msg: VlaMessage) {
        let occupancy = self.farmlets[f].occupancy_fraction();
        let prescale = self.script.mitigation.prescale;
        let resp = self.farmlet_vlas[f].handle(&msg, self.authority, occupancy, prescale, self.policies[f].as_mut());
        match resp {
            Ok(resp) => {
                let node = self.farmlet_node(f);
                for a in resp.actions {
                    self.log_action(now, node, a);
                    self.apply_farmlet_action(now, f, a, &msg, resp.count);
                }
            }
            Err(crate::vla::VlaError::Statechart(e)) => self.violation(format!("farmlet {f} agent: {e}")),
            Err(e) => {
                let t = now.as_secs_f64();
                self.warnings.push(format!("t={t}: farmlet {f} ignored message: {e}"));
            }
        }
    }

    fn apply_farmlet_action(&mut self, now: SimTime, f: usize, action: VlaAction, cause: &VlaMessage, count: u32) {
        let node = self.farmlet_node(f);
        let owns = |sim: &Simulation, w: usize| w < sim.workers.len() && sim.workers[w].farmlet.0 as usize == f;
        match action {
            VlaAction::ResetPa { worker: Some(w) } if owns(self, w.0 as usize) => {
                let mut msg = VlaMessage {
                    class: MessageClass::Control,
                    topic: Topic::Reset,
                    code: None,
                    source: node,
                    dest: self.worker_node(w.0 as usize),
                    t: now,
                    body: Default::default(),
                };
                msg = msg.with("worker", f64::from(w.0));
                self.send(msg);
            }
            VlaAction::Quarantine { worker } if owns(self, worker.0 as usize) => {
                self.quarantine(now, worker.0 as usize);
            }
            VlaAction::Forward { direction: Direction::Up } => {
                let mut msg = VlaMessage {
                    class: MessageClass::Fault,
                    topic: Topic::FaultSummary,
                    code: Some(cause.code.unwrap_or(FaultCode::E1)),
                    source: node,
                    dest: NodeId(0),
                    t: now,
                    body: Default::default(),
                };
                msg = msg
                    .with("worker", cause.get("worker").unwrap_or(-1.0))
                    .with("count", f64::from(count));
                self.send(msg);
            }
            VlaAction::Forward { direction: Direction::Down } => {}
            VlaAction::SetPrescale { rate } => {
                if rate > 0.0 {
                    self.vla.fp_updates += 1;
                }
                self.farmlets[f].set_drop_rate(rate);
            }
            other => self.violation(format!("farmlet agent cannot perform {other:?}")),
        }
    }

    fn on_farmlet_tick(&mut self, now: SimTime, f: usize) {
        let node = self.farmlet_node(f);
        self.engine
            .schedule_in(self.stats_period, node, Event::FarmletTick { farmlet: f as u32 });

        // The statistical message reports the state before this tick's own update.
        let fl = &self.farmlets[f];
        let msg = VlaMessage {
            class: MessageClass::Statistical,
            topic: Topic::Statistics,
            code: None,
            source: node,
            dest: NodeId(0),
            t: now,
            body: Default::default(),
        }
        .with("occupancy", fl.occupancy() as f64)
        .with("fraction", fl.occupancy_fraction())
        .with("capacity", fl.capacity() as f64)
        .with("drop_rate", fl.prescale_drop_rate)
        .with("received", fl.received as f64)
        .with("processed", fl.processed as f64)
        .with("overflowed", fl.overflowed as f64)
        .with("dropped_prescale", fl.dropped_prescale as f64);
        if self.record_stats {
            self.stats.push(StatsRecord {
                farmlet: f as u32,
                message: msg.clone(),
            });
        }

        let occupancy = self.farmlets[f].occupancy_fraction();
        let prescale = self.script.mitigation.prescale;
        match self.farmlet_vlas[f].tick(self.authority, occupancy, prescale, self.policies[f].as_mut()) {
            Ok(actions) => {
                for a in actions {
                    self.log_action(now, node, a);
                    self.apply_farmlet_action(now, f, a, &msg, 0);
                }
            }
            Err(e) => self.violation(format!("farmlet {f} agent: {e}")),
        }
        self.send(msg);
    }

    fn on_global_tick(&mut self, now: SimTime) {
        self.engine.schedule_in(self.stats_period, NodeId(0), Event::GlobalTick);
        let cfg = self.script.mitigation.failover;
        let window = SimTime::from_secs_f64(cfg.window);
        for f in 0..self.farmlets.len() {
            let key = LinkKey::new(NodeId(0), self.farmlet_node(f), LinkKind::Data);
            let up = self.engine.links().status(&key) == Ok(LinkStatus::Up);
            let handled = self.global.last_stats[f].map_or(0, |s| s.1);
            let h = &mut self.global.health[f];
            h.role = self.farmlets[f].role;
            h.data_link_up = up;
            h.record(now, self.routed[f], handled, window);
        }

        let outcome = evaluate_failover(&self.global.health, self.authority, &cfg, now);
        for plan in outcome.plans {
            let (u, s) = (plan.unfit.0 as usize, plan.spare.0 as usize);
            if self.farmlets[s].role != FarmletRole::HotSpare {
                self.violation(format!("failover targets non-spare farmlet {s}"));
                continue;
            }
            self.routing.redirect(plan.unfit, plan.spare);
            self.farmlets[u].role = FarmletRole::Unfit;
            self.farmlets[s].role = FarmletRole::Active;
            self.global.health[u].role = FarmletRole::Unfit;
            self.global.health[s].role = FarmletRole::Active;
            self.vla.failovers += 1;
            self.failovers.push(FailoverRecord {
                unfit: plan.unfit.0,
                spare: plan.spare.0,
                effective_time_ns: now.as_nanos(),
                unfit_received: self.farmlets[u].received,
            });
            self.log_action(
                now,
                NodeId(0),
                VlaAction::Reroute {
                    from: plan.unfit,
                    to: plan.spare,
                },
            );
        }
        for f in outcome.alarms {
            let i = f.0 as usize;
            if !self.global.alarmed[i] {
                self.global.alarmed[i] = true;
                self.vla.failover_alarms += 1;
            }
        }

        let active: Vec<usize> = (0..self.farmlets.len())
            .filter(|&f| self.farmlets[f].role == FarmletRole::Active)
            .collect();
        let occupancies: Vec<f64> = active
            .iter()
            .filter_map(|&f| self.global.last_stats[f].map(|s| s.0))
            .collect();
        if occupancies.is_empty() {
            return;
        }
        let rate = global_prescale(
            &self.script.mitigation.prescale,
            self.authority,
            &occupancies,
            self.script.mitigation.aggregation,
        );
        if let Some(rate) = rate {
            self.vla.gp_updates += 1;
            self.log_action(now, NodeId(0), VlaAction::SetPrescale { rate });
            for f in active {
                let msg = VlaMessage {
                    class: MessageClass::Control,
                    topic: Topic::SetPrescale,
                    code: None,
                    source: NodeId(0),
                    dest: self.farmlet_node(f),
                    t: now,
                    body: Default::default(),
                }
                .with("rate", rate);
                self.send(msg);
            }
        }
    }

    fn on_armor_tick(&mut self, now: SimTime) {
        self.engine.schedule_in(self.heartbeat_period, NodeId(0), Event::ArmorTick);
        let beats: Vec<(u32, bool)> = self
            .global
            .heard
            .iter()
            .enumerate()
            .map(|(f, &ok)| (f as u32, ok))
            .collect();
        self.global.heard.iter_mut().for_each(|h| *h = false);
        let actions = execution_monitor_tick(&mut self.global.armor, now, &beats);
        for a in actions {
            if let ArmorAction::Restart { target } = &a {
                if let Some(v) = self.farmlet_vlas.get_mut(*target as usize) {
                    v.clear_history();
                }
            }
            self.record_armor(now, ArmorLevel::Global, a);
        }

        // Level-2/3 stage supervision: 3 means starved (no L1 accepts since
        // the last tick), 0 means fed.
        let (acc0, proc0, bad0) = self.global.last_tick;
        let c = &self.counters;
        let (acc, proc, bad) = (c.accepted_l1, c.processed, self.corrupt_processed);
        self.global.last_tick = (acc, proc, bad);
        let dt = self.heartbeat_period.as_secs_f64();
        let processed = proc - proc0;
        let regional = &mut self.global.regional;
        regional.api_report(now, 0, Payload::Code { code: if acc == acc0 { 3 } else { 0 } });
        regional.api_report(
            now,
            0,
            Payload::Quality {
                processed_rate: processed as f64 / dt,
                error_fraction: if processed == 0 {
                    0.0
                } else {
                    (bad - bad0) as f64 / processed as f64
                },
            },
        );
        regional.post(ElementMessage {
            ty: MsgType::LoadReport,
            t: now,
            target: 0,
            payload: Payload::Loads {
                loads: self.global.l23_loads.clone(),
            },
        });
        for a in regional.run() {
            if let ArmorAction::Migrate { from, to } = &a {
                let loads = &mut self.global.l23_loads;
                if let (Some(_), Some(_)) = (loads.get(*from as usize), loads.get(*to as usize)) {
                    loads[*from as usize] -= 1.0;
                    loads[*to as usize] += 1.0;
                }
            }
            self.record_armor(now, ArmorLevel::Regional, a);
        }
    }

    fn record_armor(&mut self, now: SimTime, level: ArmorLevel, action: ArmorAction) {
        self.vla.armor_actions += 1;
        self.armor_log.push(ArmorRecord {
            t_ns: now.as_nanos(),
            level,
            action,
        });
    }
}
