//! Scenario runner and live session service.

pub mod error;
pub mod manifest;
pub mod protocol;
pub mod scenario;
pub mod server;
pub mod session;
pub mod surface;

pub use error::{CliError, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME};
pub use manifest::{Manifest, ManifestEntry};
pub use protocol::{ClientMessage, Command, ServerMessage, StateDelta, PROTOCOL_VERSION};
pub use scenario::{run_scenario, PatternSpec, ScenarioKind, ScenarioSpec};
pub use session::{LogEntry, Session, SessionError, SharedSession};
