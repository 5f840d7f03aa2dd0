//! Point-to-point iterative closest point with SVD best-fit transforms.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::kdtree::KdTree;
use crate::{CloudError, PointCloud, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Stop once an iteration improves the RMSE by less than this (m).
    pub tol: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig { max_iters: 100, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Maps the source cloud onto the target.
    pub transform: RigidTransform,
    /// RMSE of the final nearest-neighbour correspondences (m).
    pub rmse: f64,
    pub iterations: usize,
}

/// Root mean squared distance from each point of `a` to its nearest point in `b`.
pub fn rmse(a: &PointCloud, b: &PointCloud) -> Result<f64, CloudError> {
    a.validate()?;
    b.validate()?;
    let tree = KdTree::build(&b.points);
    Ok(rmse_with(&tree, &a.points, &RigidTransform::identity()).0)
}

fn rmse_with(tree: &KdTree, source: &[Vector3<f64>], t: &RigidTransform) -> (f64, Vec<usize>) {
    let mut sum = 0.0;
    let mut matches = Vec::with_capacity(source.len());
    for p in source {
        let n = tree.nearest(&t.apply(p)).expect("target is non-empty");
        sum += n.dist2;
        matches.push(n.index);
    }
    ((sum / source.len() as f64).sqrt(), matches)
}

/// Least-squares rigid transform taking `src[i]` onto `dst[i]`; reflections
/// are rejected by flipping the weakest singular direction.
pub fn best_fit_transform(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<RigidTransform, CloudError> {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    // Two independent directions pin down a rotation; fewer do not.
    if sv[0] <= 0.0 || sv.iter().filter(|&&s| s > 1e-12 * sv[0]).count() < 2 {
        return Err(CloudError::Degenerate(format!("correspondence covariance singular values {sv:?}")));
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    Ok(RigidTransform::new(rotation, cd - rotation * cs))
}

/// Aligns `source` onto `target`. The initial guess matches centroids.
pub fn icp_align(source: &PointCloud, target: &PointCloud, config: &IcpConfig) -> Result<IcpResult, CloudError> {
    for c in [source, target] {
        c.validate()?;
        if c.len() < 3 {
            return Err(CloudError::TooSmall { needed: 3, got: c.len() });
        }
    }
    let tree = KdTree::build(&target.points);
    let mut transform = RigidTransform::new(Matrix3::identity(), target.centroid() - source.centroid());
    let (mut current, mut matches) = rmse_with(&tree, &source.points, &transform);
    let mut iterations = 0;
    let mut matched = Vec::with_capacity(source.len());
    while iterations < config.max_iters {
        iterations += 1;
        matched.clear();
        matched.extend(matches.iter().map(|&j| target.points[j]));
        let candidate = best_fit_transform(&source.points, &matched)?;
        let (next, next_matches) = rmse_with(&tree, &source.points, &candidate);
        let improvement = current - next;
        if improvement < 0.0 {
            // Nearest-neighbour reassignment never raises the fitted error, so
            // a rise means we are at a fixed point up to rounding.
            break;
        }
        transform = candidate;
        current = next;
        matches = next_matches;
        if improvement < config.tol {
            break;
        }
    }
    Ok(IcpResult { transform, rmse: current, iterations })
}
