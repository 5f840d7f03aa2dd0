//! Point-cloud preprocessing and rigid registration used to compare simulated
//! and measured membrane surfaces.

pub mod filter;
pub mod icp;
pub mod io;
pub mod kdtree;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{knn_noise_filter, statistical_outlier_removal};
pub use icp::{icp_align, rmse, IcpConfig, IcpResult};
pub use io::{read_cloud, write_cloud};
pub use kdtree::KdTree;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("cloud has {got} points, need at least {needed}")]
    TooSmall { needed: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported cloud file extension: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    Simulation,
    DepthCamera,
    #[default]
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// m
    pub points: Vec<Vector3<f64>>,
    pub source: CloudSource,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, source: CloudSource) -> Self {
        PointCloud { points, source }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len().max(1) as f64
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud { points: self.points.iter().map(|p| t.apply(p)).collect(), source: self.source }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if self.points.is_empty() {
            return Err(CloudError::TooSmall { needed: 1, got: 0 });
        }
        match self.points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            Some(i) => Err(CloudError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// `x ↦ R·x + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Largest entry-wise difference of rotation and translation.
    pub fn distance(&self, other: &RigidTransform) -> f64 {
        (self.rotation - other.rotation).amax().max((self.translation - other.translation).amax())
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}
