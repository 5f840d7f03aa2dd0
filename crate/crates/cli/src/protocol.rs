//! Versioned JSON messages of the live session channel. The schema is
//! documented in `docs/protocol.md`.

use clutch_driver::{ClutchPattern, Transition};
use membrane_core::design::{ClutchId, MembraneDesign};
use inflation_solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::session::LogEntry;
use crate::surface::Surface;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    SetPressure { pa: f64 },
    ClutchEvent { clutch: ClutchId, transition: Transition },
    /// Free response under the commanded pattern for `duration` seconds.
    TriggerTransient { duration: f64 },
    Reset,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    pub v: u32,
    /// Client-chosen request id, echoed in the reply.
    pub id: u64,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    /// New static equilibrium.
    Equilibrium,
    /// Commanded clutch pattern changed; the surface is unchanged.
    Pattern,
    /// One frame of a transient.
    Frame,
    Reset,
}

/// Snapshot of a session after (part of) a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    /// Log sequence number of the command that produced this delta.
    pub seq: u64,
    pub kind: DeltaKind,
    /// Session clock (s); advances only during transients.
    pub time: f64,
    pub pressure_pa: f64,
    /// Commanded pattern.
    pub pattern: ClutchPattern,
    /// Pattern the surface was solved with, after any slip.
    pub solved_pattern: ClutchPattern,
    pub apex_mm: f64,
    /// Apex point (m).
    pub apex: [f64; 3],
    /// N
    pub residual: f64,
    /// `[index, count]` within a transient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<Surface>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub pattern: ClutchPattern,
    pub pressure_pa: f64,
    pub apex_mm: f64,
    pub time: f64,
    pub busy: bool,
    pub vertices: usize,
    pub streamed_vertices: usize,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Another command of this session is still being solved.
    Busy,
    UnsupportedVersion,
    Malformed,
    /// The command is illegal in the current state (e.g. a clutch transition).
    Illegal,
    /// The solver failed; the session state is unchanged.
    Failed,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every live connection.
    Hello { v: u32, session: SessionSummary, state: StateDelta },
    Delta { v: u32, delta: StateDelta },
    /// A command was applied and logged. Broadcast after its deltas.
    Applied { v: u32, entry: LogEntry, origin: Option<Origin> },
    /// Sent only to the requesting client.
    Rejected {
        v: u32,
        id: Option<u64>,
        reason: RejectReason,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        retry_after_ms: Option<u64>,
    },
}

/// Which connection and request produced a log entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub connection: u64,
    pub id: u64,
}

/// Body of `POST /sessions`; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    pub design: Option<MembraneDesign>,
    pub config: Option<SolverConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub v: u32,
    pub id: String,
    /// Path of the websocket upgrade endpoint.
    pub live: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn client_messages_are_flat() {
        let m: ClientMessage = serde_json::from_value(json!({
            "v": 1, "id": 7, "type": "clutch_event", "clutch": "outboard_e", "transition": "activate"
        }))
        .unwrap();
        assert_eq!(m.command, Command::ClutchEvent { clutch: ClutchId::OutboardE, transition: Transition::Activate });
        let back = serde_json::to_value(ClientMessage { v: 1, id: 2, command: Command::SetPressure { pa: 3100.0 } }).unwrap();
        assert_eq!(back, json!({ "v": 1, "id": 2, "type": "set_pressure", "pa": 3100.0 }));
        let reset: ClientMessage = serde_json::from_str(r#"{"v":1,"id":3,"type":"reset"}"#).unwrap();
        assert_eq!(reset.command, Command::Reset);
        assert!(serde_json::from_str::<ClientMessage>(r#"{"v":1,"id":3,"type":"explode"}"#).is_err());
    }

    #[test]
    fn rejection_wire_form() {
        let r = ServerMessage::Rejected { v: 1, id: Some(4), reason: RejectReason::Busy, message: "busy".into(), retry_after_ms: Some(250) };
        assert_eq!(
            serde_json::to_value(&r).unwrap(),
            json!({ "type": "rejected", "v": 1, "id": 4, "reason": "busy", "message": "busy", "retry_after_ms": 250 })
        );
    }
}
