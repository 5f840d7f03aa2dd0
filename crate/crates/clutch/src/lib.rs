//! Logical state of the five electroadhesive clutches.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use membrane_core::design::ClutchId;

/// Default interfacial shear capacity (8 N/cm²).
pub const DEFAULT_SLIP_THRESHOLD: f64 = 8.0e4;
/// Default drive voltage (V).
pub const DEFAULT_VOLTAGE: f64 = 420.0;

#[derive(Debug, Error, PartialEq)]
pub enum ClutchError {
    #[error("illegal transition {transition} for clutch {clutch} in state {state:?}")]
    IllegalTransition { clutch: ClutchId, state: ClutchState, transition: Transition },
    #[error("event schedule is not time-ordered at row {row} (t = {time})")]
    Unordered { row: usize, time: f64 },
    #[error("event schedule: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutchState {
    Active,
    Inactive,
    Slipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Activate,
    Deactivate,
    Slip,
    /// Manual re-alignment of a slipped clutch; returns it to Inactive.
    Reset,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Activate => "activate",
            Transition::Deactivate => "deactivate",
            Transition::Slip => "slip",
            Transition::Reset => "reset",
        })
    }
}

impl FromStr for Transition {
    type Err = ClutchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "activate" => Ok(Transition::Activate),
            "deactivate" => Ok(Transition::Deactivate),
            "slip" => Ok(Transition::Slip),
            "reset" => Ok(Transition::Reset),
            other => Err(ClutchError::Parse(format!("unknown transition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutchEvent {
    /// s
    pub time: f64,
    pub clutch: ClutchId,
    pub transition: Transition,
}

impl ClutchEvent {
    pub fn new(time: f64, clutch: ClutchId, transition: Transition) -> Self {
        ClutchEvent { time, clutch, transition }
    }
}

/// The canonical inflation shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedPattern {
    /// All four outboard clutches engaged.
    Plateau,
    /// Inboard clutch only.
    Round,
    /// Nothing engaged.
    Pyramid,
}

impl FromStr for NamedPattern {
    type Err = ClutchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plateau" => Ok(NamedPattern::Plateau),
            "round" => Ok(NamedPattern::Round),
            "pyramid" => Ok(NamedPattern::Pyramid),
            other => Err(ClutchError::Parse(format!("unknown pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutchPattern {
    pub states: BTreeMap<ClutchId, ClutchState>,
    pub polarity: BTreeMap<ClutchId, Polarity>,
    /// V, informational.
    pub voltage: f64,
}

impl Default for ClutchPattern {
    fn default() -> Self {
        ClutchPattern {
            states: ClutchId::ALL.iter().map(|&c| (c, ClutchState::Inactive)).collect(),
            polarity: ClutchId::ALL.iter().map(|&c| (c, Polarity::Positive)).collect(),
            voltage: DEFAULT_VOLTAGE,
        }
    }
}

impl ClutchPattern {
    /// Every clutch inactive (the pyramid configuration).
    pub fn all_inactive() -> Self {
        Self::default()
    }

    pub fn with_active(active: &[ClutchId]) -> Self {
        let mut p = Self::default();
        for &c in active {
            p.states.insert(c, ClutchState::Active);
        }
        p
    }

    pub fn named(name: NamedPattern) -> Self {
        match name {
            NamedPattern::Plateau => Self::with_active(&ClutchId::OUTBOARD),
            NamedPattern::Round => Self::with_active(&[ClutchId::Inboard]),
            NamedPattern::Pyramid => Self::all_inactive(),
        }
    }

    pub fn plateau() -> Self {
        Self::named(NamedPattern::Plateau)
    }

    pub fn round() -> Self {
        Self::named(NamedPattern::Round)
    }

    pub fn pyramid() -> Self {
        Self::named(NamedPattern::Pyramid)
    }

    pub fn state(&self, id: ClutchId) -> ClutchState {
        self.states.get(&id).copied().unwrap_or(ClutchState::Inactive)
    }

    pub fn polarity(&self, id: ClutchId) -> Polarity {
        self.polarity.get(&id).copied().unwrap_or(Polarity::Positive)
    }

    /// True when the clutch currently holds (Active, not slipped).
    pub fn is_engaged(&self, id: ClutchId) -> bool {
        self.state(id) == ClutchState::Active
    }

    pub fn active(&self) -> Vec<ClutchId> {
        ClutchId::ALL.into_iter().filter(|&c| self.is_engaged(c)).collect()
    }

    /// The named shape whose activation set this pattern matches, ignoring
    /// polarity and voltage.
    pub fn as_named(&self) -> Option<NamedPattern> {
        [NamedPattern::Plateau, NamedPattern::Round, NamedPattern::Pyramid]
            .into_iter()
            .find(|&n| Self::named(n).states == self.states)
    }

    /// Same pattern with every clutch moved one quarter turn about z.
    pub fn rotated_quarter(&self) -> ClutchPattern {
        ClutchPattern {
            states: self.states.iter().map(|(&c, &s)| (c.rotated_quarter(), s)).collect(),
            polarity: self.polarity.iter().map(|(&c, &p)| (c.rotated_quarter(), p)).collect(),
            voltage: self.voltage,
        }
    }
}

/// Applies one event. Deactivation flips the stored polarity of that clutch.
pub fn apply_event(pattern: &ClutchPattern, event: &ClutchEvent) -> Result<ClutchPattern, ClutchError> {
    use ClutchState::*;
    let id = event.clutch;
    let state = pattern.state(id);
    let illegal = || ClutchError::IllegalTransition { clutch: id, state, transition: event.transition };
    let mut next = pattern.clone();
    match (event.transition, state) {
        (Transition::Activate, Inactive) => {
            next.states.insert(id, Active);
        }
        (Transition::Deactivate, Active | Slipped) => {
            next.states.insert(id, Inactive);
            next.polarity.insert(id, pattern.polarity(id).flipped());
        }
        (Transition::Slip, Active) => {
            next.states.insert(id, Slipped);
        }
        (Transition::Reset, Slipped) => {
            next.states.insert(id, Inactive);
        }
        _ => return Err(illegal()),
    }
    Ok(next)
}

/// Marks every active clutch whose interfacial shear strictly exceeds
/// `threshold` (Pa) as slipped.
pub fn check_slip(pattern: &ClutchPattern, interfacial_shear: &BTreeMap<ClutchId, f64>, threshold: f64) -> ClutchPattern {
    let mut next = pattern.clone();
    for (&id, &shear) in interfacial_shear {
        if pattern.is_engaged(id) && shear > threshold {
            next.states.insert(id, ClutchState::Slipped);
        }
    }
    next
}

#[derive(Debug, Serialize, Deserialize)]
struct ScheduleRow {
    time_s: f64,
    clutch_id: String,
    transition: String,
}

/// Reads a CSV event schedule with header `time_s,clutch_id,transition`.
pub fn read_schedule<R: Read>(reader: R) -> Result<Vec<ClutchEvent>, ClutchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut events = Vec::new();
    for (row, rec) in rdr.deserialize::<ScheduleRow>().enumerate() {
        let rec = rec.map_err(|e| ClutchError::Parse(e.to_string()))?;
        let clutch = rec.clutch_id.parse::<ClutchId>().map_err(|e| ClutchError::Parse(e.to_string()))?;
        let transition = rec.transition.parse::<Transition>()?;
        if let Some(prev) = events.last().map(|e: &ClutchEvent| e.time) {
            if rec.time_s < prev {
                return Err(ClutchError::Unordered { row: row + 1, time: rec.time_s });
            }
        }
        events.push(ClutchEvent { time: rec.time_s, clutch, transition });
    }
    Ok(events)
}

pub fn write_schedule<W: Write>(writer: W, events: &[ClutchEvent]) -> Result<(), ClutchError> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(ScheduleRow {
            time_s: e.time,
            clutch_id: e.clutch.to_string(),
            transition: e.transition.to_string(),
        })
        .map_err(|e| ClutchError::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| ClutchError::Parse(e.to_string()))?;
    Ok(())
}
