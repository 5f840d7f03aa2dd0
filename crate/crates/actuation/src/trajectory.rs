//! Time-stamped payload positions, as recorded by motion capture or produced
//! by the launch simulation.
//!
//! CSV layout: header `t_s,x_m,y_m,z_m` with optional `qw,qx,qy,qz`.
//!
//! Vicon object exports are read with [`TrajectoryRecord::read_vicon_csv`]:
//! after any preamble, the header row naming `Frame` and `TX`, `TY`, `TZ`
//! is located; `t = (Frame − first Frame) / rate` and `TX, TY, TZ` (mm) map
//! to `x, y, z` (m). A units row directly under the header and rows with
//! empty translation cells (marker dropouts) are skipped. Rotation columns
//! are ignored.

use std::io::{Read, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::ActuationError;

/// Default motion-capture sample interval (s).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    /// s
    pub t: f64,
    /// m
    pub position: Vector3<f64>,
    pub orientation: Option<UnitQuaternion<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    /// kg
    pub payload_mass: f64,
    /// Hz
    pub sample_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t_s: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qz: Option<f64>,
}

impl TrajectoryRecord {
    /// Builds a record; the sample rate is taken from the mean interval.
    pub fn new(samples: Vec<TrajectorySample>, payload_mass: f64) -> Result<Self, ActuationError> {
        if !(payload_mass.is_finite() && payload_mass >= 0.0) {
            return Err(ActuationError::Invalid(format!("payload mass {payload_mass}")));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.position.iter().all(|c| c.is_finite())) {
                return Err(ActuationError::Invalid(format!("sample {i} is not finite")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(ActuationError::NotIncreasing(i));
            }
        }
        let sample_rate = match samples.len() {
            0 | 1 => 1.0 / DEFAULT_SAMPLE_INTERVAL,
            n => (n - 1) as f64 / (samples[n - 1].t - samples[0].t),
        };
        Ok(TrajectoryRecord { samples, payload_mass, sample_rate })
    }

    /// Uniformly sampled positions starting at `t0`.
    pub fn from_positions(t0: f64, dt: f64, positions: &[Vector3<f64>], payload_mass: f64) -> Result<Self, ActuationError> {
        let samples = positions
            .iter()
            .enumerate()
            .map(|(i, &position)| TrajectorySample { t: t0 + dt * i as f64, position, orientation: None })
            .collect();
        Self::new(samples, payload_mass)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn read_csv<R: Read>(reader: R, payload_mass: f64) -> Result<Self, ActuationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut samples = Vec::new();
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let orientation = match (row.qw, row.qx, row.qy, row.qz) {
                (Some(w), Some(x), Some(y), Some(z)) => {
                    let q = Quaternion::new(w, x, y, z);
                    if q.norm() == 0.0 {
                        return Err(ActuationError::Parse(format!("row {}: zero quaternion", i + 1)));
                    }
                    Some(UnitQuaternion::from_quaternion(q))
                }
                (None, None, None, None) => None,
                _ => return Err(ActuationError::Parse(format!("row {}: partial quaternion", i + 1))),
            };
            samples.push(TrajectorySample { t: row.t_s, position: Vector3::new(row.x_m, row.y_m, row.z_m), orientation });
        }
        Self::new(samples, payload_mass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ActuationError> {
        let with_q = self.samples.iter().any(|s| s.orientation.is_some());
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let mut header = vec!["t_s", "x_m", "y_m", "z_m"];
        if with_q {
            header.extend(["qw", "qx", "qy", "qz"]);
        }
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![s.t, s.position.x, s.position.y, s.position.z];
            if with_q {
                let q = s.orientation.unwrap_or_else(UnitQuaternion::identity);
                rec.extend([q.w, q.i, q.j, q.k]);
            }
            w.write_record(rec.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a Vicon object export (see the module docs for the mapping).
    pub fn read_vicon_csv<R: Read>(reader: R, frame_rate: f64, payload_mass: f64) -> Result<Self, ActuationError> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(ActuationError::Invalid(format!("frame rate {frame_rate}")));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut columns: Option<[usize; 4]> = None;
        let mut first_frame = None;
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let Some([frame, tx, ty, tz]) = columns else {
                let find = |name: &str| rec.iter().position(|c| c.eq_ignore_ascii_case(name));
                if let (Some(f), Some(x), Some(y), Some(z)) = (find("Frame"), find("TX"), find("TY"), find("TZ")) {
                    columns = Some([f, x, y, z]);
                }
                continue;
            };
            let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
            let Some(f) = num(frame) else { continue };
            let (Some(x), Some(y), Some(z)) = (num(tx), num(ty), num(tz)) else { continue };
            let f0 = *first_frame.get_or_insert(f);
            samples.push(TrajectorySample {
                t: (f - f0) / frame_rate,
                position: Vector3::new(x, y, z) * 1e-3,
                orientation: None,
            });
        }
        if columns.is_none() {
            return Err(ActuationError::Parse("no header with Frame, TX, TY, TZ".into()));
        }
        Self::new(samples, payload_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_and_without_orientation() {
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64 * 0.1, -0.2, 0.3 + 1e-7 * i as f64)).collect();
        let mut rec = TrajectoryRecord::from_positions(0.0, 0.01, &pts, 0.0037).unwrap();
        for with_q in [false, true] {
            if with_q {
                rec.samples[2].orientation = Some(UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
            }
            let mut buf = Vec::new();
            rec.write_csv(&mut buf).unwrap();
            let back = TrajectoryRecord::read_csv(buf.as_slice(), 0.0037).unwrap();
            assert_eq!(back.positions(), rec.positions());
            assert_eq!(back.times(), rec.times());
            if with_q {
                let q = back.samples[2].orientation.unwrap();
                assert!(q.angle_to(&rec.samples[2].orientation.unwrap()) < 1e-12);
                assert!(back.samples[0].orientation.unwrap().angle() < 1e-15);
            } else {
                assert!(back.samples.iter().all(|s| s.orientation.is_none()));
            }
        }
    }

    #[test]
    fn rejects_unordered_times() {
        let csv = "t_s,x_m,y_m,z_m\n0,0,0,0\n0.01,0,0,0\n0.01,0,0,0\n";
        assert!(matches!(TrajectoryRecord::read_csv(csv.as_bytes(), 0.1), Err(ActuationError::NotIncreasing(2))));
    }

    #[test]
    fn partial_quaternion_is_an_error() {
        let csv = "t_s,x_m,y_m,z_m,qw,qx,qy,qz\n0,0,0,0,1,0,0,\n";
        assert!(matches!(TrajectoryRecord::read_csv(csv.as_bytes(), 0.1), Err(ActuationError::Parse(_))));
    }

    #[test]
    fn vicon_mapping() {
        let export = "Objects\n100\nball\nFrame,Sub Frame,RX,RY,RZ,TX,TY,TZ\n,,deg,deg,deg,mm,mm,mm\n\
                      12,0,0,0,0,10,20,30\n13,0,0,0,0,,,\n14,0,0,0,0,12,20,31.5\n";
        let rec = TrajectoryRecord::read_vicon_csv(export.as_bytes(), 100.0, 0.0037).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.samples[0].t, 0.0);
        assert!((rec.samples[1].t - 0.02).abs() < 1e-15);
        assert!((rec.samples[1].position - Vector3::new(0.012, 0.020, 0.0315)).norm() < 1e-15);
        assert!(TrajectoryRecord::read_vicon_csv("a,b\n1,2\n".as_bytes(), 100.0, 0.1).is_err());
    }
}
