//! Payload motion directions and the clutch patterns that produce them.
//!
//! Axes: Right is +x (East), Front is +y (North), Up is +z. The stiffened side
//! stays low, so the central patch carrying the payload tilts and shifts
//! toward the engaged outboard clutches; each planar direction engages the
//! clutch(es) on its own side together with the inboard clutch.

use std::fmt;
use std::str::FromStr;

use clutch_driver::ClutchPattern;
use membrane_core::design::ClutchId;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoFDirection {
    FrontLeft,
    BackRight,
    FrontRight,
    BackLeft,
    Front,
    Back,
    Left,
    Right,
    Up,
}

impl DoFDirection {
    /// Table order: ordinals, cardinals, then Up.
    pub const ALL: [DoFDirection; 9] = [
        DoFDirection::FrontLeft,
        DoFDirection::BackRight,
        DoFDirection::FrontRight,
        DoFDirection::BackLeft,
        DoFDirection::Front,
        DoFDirection::Back,
        DoFDirection::Left,
        DoFDirection::Right,
        DoFDirection::Up,
    ];

    pub const PLANAR: [DoFDirection; 8] = [
        DoFDirection::FrontLeft,
        DoFDirection::BackRight,
        DoFDirection::FrontRight,
        DoFDirection::BackLeft,
        DoFDirection::Front,
        DoFDirection::Back,
        DoFDirection::Left,
        DoFDirection::Right,
    ];

    pub fn is_cardinal(self) -> bool {
        matches!(self, DoFDirection::Front | DoFDirection::Back | DoFDirection::Left | DoFDirection::Right)
    }

    pub fn is_ordinal(self) -> bool {
        !self.is_cardinal() && self != DoFDirection::Up
    }

    /// Unit vector of the intended motion.
    pub fn unit(self) -> Vector3<f64> {
        let (x, y, z): (f64, f64, f64) = match self {
            DoFDirection::FrontLeft => (-1.0, 1.0, 0.0),
            DoFDirection::BackRight => (1.0, -1.0, 0.0),
            DoFDirection::FrontRight => (1.0, 1.0, 0.0),
            DoFDirection::BackLeft => (-1.0, -1.0, 0.0),
            DoFDirection::Front => (0.0, 1.0, 0.0),
            DoFDirection::Back => (0.0, -1.0, 0.0),
            DoFDirection::Left => (-1.0, 0.0, 0.0),
            DoFDirection::Right => (1.0, 0.0, 0.0),
            DoFDirection::Up => (0.0, 0.0, 1.0),
        };
        Vector3::new(x, y, z).normalize()
    }

    /// Outboard clutches held for this direction: the one on the side of a
    /// cardinal direction, the two flanking an ordinal one, none for Up.
    pub fn outboard_clutches(self) -> Vec<ClutchId> {
        use ClutchId::*;
        match self {
            DoFDirection::Right => vec![OutboardE],
            DoFDirection::Left => vec![OutboardW],
            DoFDirection::Front => vec![OutboardN],
            DoFDirection::Back => vec![OutboardS],
            DoFDirection::FrontRight => vec![OutboardN, OutboardE],
            DoFDirection::FrontLeft => vec![OutboardN, OutboardW],
            DoFDirection::BackRight => vec![OutboardE, OutboardS],
            DoFDirection::BackLeft => vec![OutboardS, OutboardW],
            DoFDirection::Up => vec![],
        }
    }

    /// Pattern for the quasi-static workspace solve: the outboard clutches
    /// plus the inboard clutch for planar directions; nothing for Up.
    pub fn pattern(self) -> ClutchPattern {
        let mut active = self.outboard_clutches();
        if self != DoFDirection::Up {
            active.push(ClutchId::Inboard);
        }
        ClutchPattern::with_active(&active)
    }

    /// Pattern held before a launch; the inboard clutch is released to fire.
    pub fn launch_pattern(self) -> ClutchPattern {
        let mut active = self.outboard_clutches();
        active.push(ClutchId::Inboard);
        ClutchPattern::with_active(&active)
    }

    /// Operating pressure used for force trials (Pa).
    pub fn trial_pressure(self) -> f64 {
        if self.is_ordinal() {
            1700.0
        } else {
            2800.0
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DoFDirection::FrontLeft => "front_left",
            DoFDirection::BackRight => "back_right",
            DoFDirection::FrontRight => "front_right",
            DoFDirection::BackLeft => "back_left",
            DoFDirection::Front => "front",
            DoFDirection::Back => "back",
            DoFDirection::Left => "left",
            DoFDirection::Right => "right",
            DoFDirection::Up => "up",
        }
    }

    /// Display label in table form, e.g. "Front-Left".
    pub fn label(self) -> &'static str {
        match self {
            DoFDirection::FrontLeft => "Front-Left",
            DoFDirection::BackRight => "Back-Right",
            DoFDirection::FrontRight => "Front-Right",
            DoFDirection::BackLeft => "Back-Left",
            DoFDirection::Front => "Front",
            DoFDirection::Back => "Back",
            DoFDirection::Left => "Left",
            DoFDirection::Right => "Right",
            DoFDirection::Up => "Up",
        }
    }
}

impl fmt::Display for DoFDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DoFDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        DoFDirection::ALL
            .into_iter()
            .find(|d| d.as_str() == key)
            .ok_or_else(|| format!("unknown direction {s:?}"))
    }
}
