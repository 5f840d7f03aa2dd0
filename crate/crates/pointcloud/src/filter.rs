//! Neighbourhood-based cleanup: statistical outlier removal and kNN smoothing.

use nalgebra::Vector3;

use crate::kdtree::KdTree;
use crate::{CloudError, PointCloud};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_STD_MULTIPLIER: f64 = 1.0;

/// Mean distance from each point to its `k` nearest other points.
pub fn mean_neighbor_distances(cloud: &PointCloud, k: usize) -> Vec<f64> {
    let tree = KdTree::build(&cloud.points);
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.knn(p, k + 1);
            let others = nn.iter().filter(|n| n.index != i).take(k);
            others.map(|n| n.dist2.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

/// Drops points whose mean distance to their `k` nearest neighbours exceeds
/// the cloud-wide mean of that statistic by more than `std_multiplier`
/// standard deviations.
pub fn statistical_outlier_removal(cloud: &PointCloud, k: usize, std_multiplier: f64) -> Result<PointCloud, CloudError> {
    if k == 0 {
        return Err(CloudError::ZeroK);
    }
    if cloud.len() < k + 1 {
        return Err(CloudError::TooSmall { needed: k + 1, got: cloud.len() });
    }
    cloud.validate()?;
    let d = mean_neighbor_distances(cloud, k);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    // Relative slack so rounding noise in identical neighbourhoods never counts.
    let threshold = mean + std_multiplier * std + 1e-12 * mean;
    let points = cloud.points.iter().zip(&d).filter(|(_, &di)| di <= threshold).map(|(p, _)| *p).collect();
    Ok(PointCloud::new(points, cloud.source))
}

/// Replaces each point by the centroid of itself and its `k` nearest
/// neighbours. `k` larger than the cloud averages over every point.
pub fn knn_noise_filter(cloud: &PointCloud, k: usize) -> Result<PointCloud, CloudError> {
    if k == 0 {
        return Err(CloudError::ZeroK);
    }
    cloud.validate()?;
    let tree = KdTree::build(&cloud.points);
    let points = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.knn(p, k + 1);
            // Self first, then the k nearest others.
            let mut sum = *p;
            let mut count = 1.0;
            for n in nn.iter().filter(|n| n.index != i).take(k) {
                sum += cloud.points[n.index];
                count += 1.0;
            }
            sum / count
        })
        .collect::<Vec<Vector3<f64>>>();
    Ok(PointCloud::new(points, cloud.source))
}
