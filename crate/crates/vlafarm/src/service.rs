//! HTTP and WebSocket control plane around a single live simulation.
//!
//! The simulation is owned by one session task. Handlers talk to it over an
//! ordered command queue, so concurrent clients are serialized in receipt
//! order. Telemetry leaves through a broadcast channel and, when a run
//! directory is configured, is mirrored to disk line for line.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use vlafarm_core::control::{Command, CommandAck, JournalEntry, TelemetryRecord};
use vlafarm_core::farm::ExperimentParams;
use vlafarm_core::mitigation::AuthorityMask;
use vlafarm_core::sim::RunSummary;
use vlafarm_core::{LinkStatus, SimTime, Simulation};

use crate::rundir::RunDir;
use crate::runner::RunFailure;
use crate::scenario::LoadedScenario;

/// Actor recorded in the journal for HTTP commands.
pub const HTTP_ACTOR: &str = "operator";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Virtual seconds advanced per wall-clock second.
    pub speed: f64,
    /// Virtual seconds per session step; commands apply between steps.
    pub step: f64,
    /// Run directory root; nothing is persisted when absent.
    pub out: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            speed: 1.0,
            step: 0.1,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkView {
    pub link: String,
    pub status: LinkStatus,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Everything a client needs to rebuild its view without history.
#[derive(Clone, Debug, Serialize)]
pub struct StateView {
    pub t: f64,
    pub stopped: bool,
    /// The scripted duration has elapsed; the clock no longer advances.
    pub finished: bool,
    pub authority: AuthorityMask,
    pub params: ExperimentParams,
    pub record: TelemetryRecord,
    pub links: Vec<LinkView>,
    pub journal_entries: usize,
    /// Commands accepted while stopped, applied at the next go.
    pub deferred: Vec<Command>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
pub struct JournalQuery {
    pub from: Option<f64>,
    pub to: Option<f64>,
}

enum Request {
    Command {
        command: Command,
        reply: oneshot::Sender<Result<CommandAck, String>>,
    },
    State {
        reply: oneshot::Sender<StateView>,
    },
    Journal {
        query: JournalQuery,
        reply: oneshot::Sender<Vec<JournalEntry>>,
    },
}

#[derive(Clone)]
pub struct AppState {
    requests: mpsc::Sender<Request>,
    telemetry: broadcast::Sender<Arc<str>>,
}

impl AppState {
    /// A receiver for the telemetry stream: one JSON line per record.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.telemetry.subscribe()
    }
}

fn wall_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn state_view(sim: &Simulation, finished: bool) -> StateView {
    StateView {
        t: sim.now().as_secs_f64(),
        stopped: sim.is_stopped(),
        finished,
        authority: sim.authority(),
        params: *sim.params(),
        record: sim.snapshot(),
        links: sim
            .link_list()
            .into_iter()
            .map(|(link, e)| LinkView {
                link: link.to_string(),
                status: e.status,
                sent: e.sent,
                delivered: e.delivered,
                dropped: e.dropped,
            })
            .collect(),
        journal_entries: sim.journal().len(),
        deferred: sim.deferred_commands().cloned().collect(),
    }
}

struct Session {
    sim: Simulation,
    dir: Option<RunDir>,
    telemetry: broadcast::Sender<Arc<str>>,
    end: SimTime,
    step: SimTime,
    finished: bool,
}

impl Session {
    fn handle(&mut self, req: Request) {
        match req {
            Request::Command { reply, .. } if self.finished => {
                let _ = reply.send(Err(String::from("the run has finished")));
            }
            Request::Command { command, reply } => {
                let ack = self
                    .sim
                    .apply_command(command, HTTP_ACTOR, Some(wall_ms()))
                    .map_err(|e| e.to_string());
                let _ = reply.send(ack);
            }
            Request::State { reply } => {
                let _ = reply.send(state_view(&self.sim, self.finished));
            }
            Request::Journal { query, reply } => {
                let from = query.from.map(SimTime::from_secs_f64);
                let to = query.to.map(SimTime::from_secs_f64);
                let _ = reply.send(self.sim.journal().query(from, to).into_iter().cloned().collect());
            }
        }
    }

    fn advance(&mut self) -> Result<(), RunFailure> {
        if self.finished {
            return Ok(());
        }
        let to = (self.sim.now() + self.step).min(self.end);
        self.sim.run_until(to)?;
        // mirror to disk from the same records that go to clients
        let records = self.sim.take_telemetry();
        for r in &records {
            if let Ok(mut line) = serde_json::to_string(r) {
                line.push('\n');
                let _ = self.telemetry.send(line.into());
            }
        }
        if let Some(dir) = &mut self.dir {
            dir.sink.write_telemetry(&records)?;
            dir.sink.drain(&mut self.sim)?;
        } else {
            self.sim.take_trace();
        }
        if to >= self.end {
            self.finished = true;
            self.finish()?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), RunFailure> {
        if let Some(mut dir) = self.dir.take() {
            dir.sink.drain(&mut self.sim)?;
            dir.finish(&self.sim.summary())?;
        }
        Ok(())
    }
}

async fn session_loop(mut s: Session, mut rx: mpsc::Receiver<Request>, period: Duration) -> Result<RunSummary, RunFailure> {
    let mut tick = tokio::time::interval(period);
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            biased;
            req = rx.recv() => match req {
                Some(req) => s.handle(req),
                None => break,
            },
            _ = tick.tick() => s.advance()?,
        }
    }
    s.finish()?;
    Ok(s.sim.summary())
}

/// Starts the session task. It ends when every [`AppState`] clone is dropped.
pub fn spawn_session(
    scenario: &LoadedScenario,
    cfg: &ServiceConfig,
) -> Result<(AppState, JoinHandle<Result<RunSummary, RunFailure>>), RunFailure> {
    let mut opts = scenario.sim_options();
    opts.record_trace = cfg.out.is_some();
    let sim = Simulation::with_options(scenario.script.clone(), opts)?;
    let dir = cfg.out.as_deref().map(|out| RunDir::create(out, scenario)).transpose()?;
    let (tx, rx) = mpsc::channel(256);
    let (telemetry, _) = broadcast::channel(1024);
    let session = Session {
        sim,
        dir,
        telemetry: telemetry.clone(),
        end: SimTime::from_secs_f64(scenario.script.duration),
        step: SimTime::from_secs_f64(cfg.step),
        finished: false,
    };
    let period = Duration::from_secs_f64((cfg.step / cfg.speed.max(1e-9)).max(1e-4));
    let handle = tokio::spawn(session_loop(session, rx, period));
    Ok((
        AppState {
            requests: tx,
            telemetry,
        },
        handle,
    ))
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn ask<T>(state: &AppState, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Result<T, Response> {
    let (tx, rx) = oneshot::channel();
    let gone = || error(StatusCode::SERVICE_UNAVAILABLE, "simulation session has ended");
    state.requests.send(make(tx)).await.map_err(|_| gone())?;
    rx.await.map_err(|_| gone())
}

async fn command(state: &AppState, command: Command) -> Response {
    match ask(state, |reply| Request::Command { command, reply }).await {
        Ok(Ok(ack)) => Json(ack).into_response(),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e),
        Err(r) => r,
    }
}

async fn run_control(State(state): State<AppState>, Path(action): Path<String>) -> Response {
    match action.as_str() {
        "go" => command(&state, Command::Go).await,
        "stop" => command(&state, Command::Stop).await,
        other => error(StatusCode::NOT_FOUND, format!("unknown run action `{other}`")),
    }
}

async fn inject(State(state): State<AppState>, body: axum::body::Bytes) -> Response {
    match serde_json::from_slice::<Command>(&body) {
        Ok(cmd) => command(&state, cmd).await,
        Err(e) => error(StatusCode::BAD_REQUEST, format!("malformed command: {e}")),
    }
}

async fn get_state(State(state): State<AppState>) -> Response {
    match ask(&state, |reply| Request::State { reply }).await {
        Ok(view) => Json(view).into_response(),
        Err(r) => r,
    }
}

async fn get_journal(State(state): State<AppState>, Query(query): Query<JournalQuery>) -> Response {
    match ask(&state, |reply| Request::Journal { query, reply }).await {
        Ok(entries) => Json(entries).into_response(),
        Err(r) => r,
    }
}

async fn telemetry_ws(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    let rx = state.subscribe();
    ws.on_upgrade(move |socket| stream_telemetry(socket, rx))
}

async fn stream_telemetry(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>) {
    loop {
        match rx.recv().await {
            Ok(line) => {
                if socket.send(Message::Text(line.as_ref().into())).await.is_err() {
                    return;
                }
            }
            // a slow client skips records rather than stalling the session
            Err(broadcast::error::RecvError::Lagged(_)) => continue,
            Err(broadcast::error::RecvError::Closed) => {
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/run/{action}", post(run_control))
        .route("/inject", post(inject))
        .route("/state", get(get_state))
        .route("/journal", get(get_journal))
        .route("/telemetry", get(telemetry_ws))
        .with_state(state)
}

/// Serves until the process is interrupted.
pub async fn serve(listen: SocketAddr, scenario: &LoadedScenario, cfg: &ServiceConfig) -> Result<(), RunFailure> {
    let (state, session) = spawn_session(scenario, cfg)?;
    let listener = TcpListener::bind(listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    // the router held the last AppState; the session now drains and exits
    match session.await {
        Ok(r) => r.map(|_| ()),
        Err(e) => Err(RunFailure::Io(std::io::Error::other(e))),
    }
}
