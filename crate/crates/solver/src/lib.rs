pub mod equilibrium;
pub mod export;
pub mod loads;
pub mod plate;

pub use equilibrium::*;
pub use export::{export_state, StateSidecar};
pub use plate::{PlatePose, RigidPlate, GRAVITY};
