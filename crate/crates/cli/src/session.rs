//! Live simulation sessions: an append-only command log over one membrane.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use clutch_driver::{apply_event, ClutchError, ClutchEvent, ClutchPattern};
use inflation_solver::{apex, DeformedState, MembraneModel, SolveError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{Command, DeltaKind, RejectReason, SessionSummary, StateDelta};
use crate::surface::{Decimation, MAX_STREAM_VERTICES};

/// Upper bound accepted by `set_pressure` (Pa).
pub const MAX_PRESSURE: f64 = 20_000.0;
/// Upper bound accepted by `trigger_transient` (s).
pub const MAX_TRANSIENT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// 1-based, contiguous.
    pub seq: u64,
    /// Session clock when the command was applied (s).
    pub time: f64,
    #[serde(flatten)]
    pub command: Command,
}

impl LogEntry {
    /// The entry as a clutch event, if it is one.
    pub fn clutch_event(&self) -> Option<ClutchEvent> {
        match self.command {
            Command::ClutchEvent { clutch, transition } => Some(ClutchEvent::new(self.time, clutch, transition)),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is busy with another command; retry in {retry_after_ms} ms")]
    Busy { retry_after_ms: u64 },
    #[error("invalid command: {0}")]
    Invalid(String),
    #[error(transparent)]
    Clutch(#[from] ClutchError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("replay diverged at entry {seq}: {message}")]
    Replay { seq: u64, message: String },
}

impl SessionError {
    pub fn reason(&self) -> RejectReason {
        match self {
            SessionError::Busy { .. } => RejectReason::Busy,
            SessionError::Invalid(_) => RejectReason::Malformed,
            SessionError::Clutch(_) => RejectReason::Illegal,
            SessionError::Solve(SolveError::Pressure(_)) => RejectReason::Malformed,
            SessionError::Solve(_) | SessionError::Replay { .. } => RejectReason::Failed,
        }
    }

    pub fn retry_after_ms(&self) -> Option<u64> {
        match self {
            SessionError::Busy { retry_after_ms } => Some(*retry_after_ms),
            _ => None,
        }
    }
}

/// Result of one applied command.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub entry: LogEntry,
    pub deltas: Vec<StateDelta>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    model: Arc<MembraneModel>,
    decimation: Arc<Decimation>,
    /// Commanded pattern; may lead `state.pattern` until the next solve.
    pattern: ClutchPattern,
    state: DeformedState,
    clock: f64,
    log: Vec<LogEntry>,
}

impl Session {
    pub fn new(id: impl Into<String>, model: Arc<MembraneModel>) -> Self {
        let decimation = Arc::new(Decimation::new(&model.mesh, MAX_STREAM_VERTICES));
        Self::with_decimation(id, model, decimation)
    }

    fn with_decimation(id: impl Into<String>, model: Arc<MembraneModel>, decimation: Arc<Decimation>) -> Self {
        let pattern = ClutchPattern::default();
        Session {
            id: id.into(),
            state: DeformedState::rest(Arc::clone(&model.mesh), pattern.clone()),
            model,
            decimation,
            pattern,
            clock: 0.0,
            log: Vec::new(),
        }
    }

    /// Rebuilds a session by applying `log` to a fresh one.
    pub fn replay(id: impl Into<String>, model: Arc<MembraneModel>, log: &[LogEntry]) -> Result<Self, SessionError> {
        let mut s = Session::new(id, model);
        for e in log {
            let applied = s.apply(e.command)?;
            if applied.entry.seq != e.seq || applied.entry.time != e.time {
                return Err(SessionError::Replay {
                    seq: e.seq,
                    message: format!("replayed as seq {} at t = {}", applied.entry.seq, applied.entry.time),
                });
            }
        }
        Ok(s)
    }

    pub fn model(&self) -> &Arc<MembraneModel> {
        &self.model
    }

    pub fn state(&self) -> &DeformedState {
        &self.state
    }

    pub fn pattern(&self) -> &ClutchPattern {
        &self.pattern
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            pattern: self.pattern.clone(),
            pressure_pa: self.state.pressure,
            apex_mm: apex(&self.state).height * 1e3,
            time: self.clock,
            busy: false,
            vertices: self.model.mesh.vertex_count(),
            streamed_vertices: self.decimation.vertex_count(),
            log: self.log.clone(),
        }
    }

    /// The current state as a delta, tagged with the last sequence number.
    pub fn current(&self) -> StateDelta {
        let kind = if self.log.is_empty() { DeltaKind::Reset } else { DeltaKind::Equilibrium };
        self.delta(self.log.len() as u64, kind, &self.state, self.clock, None)
    }

    fn delta(&self, seq: u64, kind: DeltaKind, state: &DeformedState, time: f64, frame: Option<[usize; 2]>) -> StateDelta {
        let a = apex(state);
        let surface = (kind != DeltaKind::Pattern).then(|| self.decimation.surface(&state.positions()));
        StateDelta {
            seq,
            kind,
            time,
            pressure_pa: state.pressure,
            pattern: self.pattern.clone(),
            solved_pattern: state.pattern.clone(),
            apex_mm: a.height * 1e3,
            apex: a.point.into(),
            residual: state.residual_norm,
            frame,
            surface,
        }
    }

    /// Applies one command. On error the session is unchanged and nothing is
    /// logged.
    pub fn apply(&mut self, command: Command) -> Result<Applied, SessionError> {
        let seq = self.log.len() as u64 + 1;
        let time = self.clock;
        let deltas = match command {
            Command::SetPressure { pa } => {
                if !(pa.is_finite() && (0.0..=MAX_PRESSURE).contains(&pa)) {
                    return Err(SessionError::Invalid(format!("pressure must lie in [0, {MAX_PRESSURE}] Pa, got {pa}")));
                }
                let state = self.model.solve_equilibrium(&self.pattern, pa, Some(&self.state))?;
                // Slipped clutches show up in the commanded pattern too.
                self.pattern = state.pattern.clone();
                self.state = state;
                vec![self.delta(seq, DeltaKind::Equilibrium, &self.state, time, None)]
            }
            Command::ClutchEvent { clutch, transition } => {
                self.pattern = apply_event(&self.pattern, &ClutchEvent::new(time, clutch, transition))?;
                vec![self.delta(seq, DeltaKind::Pattern, &self.state, time, None)]
            }
            Command::TriggerTransient { duration } => {
                if !(duration.is_finite() && duration > 0.0 && duration <= MAX_TRANSIENT) {
                    return Err(SessionError::Invalid(format!("transient duration must lie in (0, {MAX_TRANSIENT}] s, got {duration}")));
                }
                let mut start = self.state.clone();
                start.time = 0.0;
                let frames = self.model.transient_frames(&start, self.pattern.clone(), duration)?;
                let n = frames.len();
                let deltas = frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| self.delta(seq, DeltaKind::Frame, f, time + f.time, Some([i, n])))
                    .collect();
                self.state = frames.into_iter().next_back().expect("at least the start frame");
                self.clock = time + duration;
                deltas
            }
            Command::Reset => {
                self.pattern = ClutchPattern::default();
                self.state = DeformedState::rest(Arc::clone(&self.model.mesh), self.pattern.clone());
                vec![self.delta(seq, DeltaKind::Reset, &self.state, time, None)]
            }
        };
        let entry = LogEntry { seq, time, command };
        self.log.push(entry.clone());
        Ok(Applied { entry, deltas })
    }
}

/// A session shared between connections. At most one command runs at a time;
/// others are rejected with a retry hint instead of queueing.
#[derive(Debug)]
pub struct SharedSession {
    session: Mutex<Session>,
    busy: AtomicBool,
    /// Wall time of the last command (ms), used as the retry hint.
    last_run_ms: AtomicU64,
    snapshot: RwLock<(SessionSummary, StateDelta)>,
}

/// Exclusive right to run one command; dropping it frees the session.
#[derive(Debug)]
pub struct Ticket {
    shared: Arc<SharedSession>,
}

impl SharedSession {
    pub fn new(session: Session) -> Arc<Self> {
        let snapshot = RwLock::new((session.summary(), session.current()));
        Arc::new(SharedSession { session: Mutex::new(session), busy: AtomicBool::new(false), last_run_ms: AtomicU64::new(100), snapshot })
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }

    pub fn try_begin(self: &Arc<Self>) -> Result<Ticket, SessionError> {
        if self.busy.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(SessionError::Busy { retry_after_ms: self.last_run_ms.load(Ordering::Relaxed).max(50) });
        }
        Ok(Ticket { shared: Arc::clone(self) })
    }

    /// Latest summary; never waits for a running solve.
    pub fn summary(&self) -> SessionSummary {
        let mut s = self.snapshot.read().expect("snapshot lock").0.clone();
        s.busy = self.is_busy();
        s
    }

    pub fn current(&self) -> StateDelta {
        self.snapshot.read().expect("snapshot lock").1.clone()
    }

    /// Runs `f` on the session without a ticket; waits for any running command.
    pub fn inspect<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        f(&self.session.lock().expect("session lock"))
    }
}

impl Ticket {
    /// Applies `command`. The session stays busy until the ticket is dropped,
    /// so callers can publish the result before the next command starts.
    pub fn run(&self, command: Command) -> Result<Applied, SessionError> {
        let started = Instant::now();
        let mut session = self.shared.session.lock().expect("session lock");
        let result = session.apply(command);
        if result.is_ok() {
            *self.shared.snapshot.write().expect("snapshot lock") = (session.summary(), session.current());
        }
        self.shared.last_run_ms.store(started.elapsed().as_millis() as u64, Ordering::Relaxed);
        result
    }
}

impl Drop for Ticket {
    fn drop(&mut self) {
        self.shared.busy.store(false, Ordering::Release);
    }
}
