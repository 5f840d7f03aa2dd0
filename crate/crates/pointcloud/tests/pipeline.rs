use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use pointcloud::filter::mean_neighbor_distances;
use pointcloud::icp::best_fit_transform;
use pointcloud::{
    icp_align, knn_noise_filter, read_cloud, rmse, statistical_outlier_removal, write_cloud, CloudError, CloudSource, IcpConfig,
    PointCloud, RigidTransform,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cloud(points: Vec<Vector3<f64>>) -> PointCloud {
    PointCloud::new(points, CloudSource::Synthetic)
}

/// Evenly spaced points on a circle: a closed grid where every point sees the
/// same neighbourhood.
fn ring(n: usize, spacing: f64) -> Vec<Vector3<f64>> {
    let r = spacing * n as f64 / (2.0 * PI);
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Vector3::new(r * t.cos(), r * t.sin(), 0.0)
        })
        .collect()
}

/// Lopsided dome sampled on a jittered grid (a stand-in for an
/// inflated membrane surface).
fn surface(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    let mut pts = Vec::new();
    let step = 0.15 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let x = -0.075 + (i as f64 + rng.random_range(0.2..0.8)) * step;
            let y = -0.075 + (j as f64 + rng.random_range(0.2..0.8)) * step;
            let r2 = x * x + y * y;
            if r2 > 0.075 * 0.075 {
                continue;
            }
            let z = 0.08 * (1.0 - r2.sqrt() / 0.075).powf(1.3) + 0.01 * (3.0 * x / 0.075).sin() * (y / 0.075 + 0.3);
            pts.push(Vector3::new(x, y, z));
        }
    }
    pts
}

/// Anisotropic scatter with no symmetry for registration tests.
fn scatter(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-0.06..0.06), rng.random_range(-0.035..0.035), rng.random_range(-0.015..0.02)))
        .collect()
}

fn random_transform(rng: &mut ChaCha8Rng, max_angle: f64, max_shift: f64) -> RigidTransform {
    let axis = Unit::new_normalize(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let angle = rng.random_range(-max_angle..max_angle);
    let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
    let shift = dir * rng.random_range(0.0..max_shift);
    RigidTransform::new(Rotation3::from_axis_angle(&axis, angle).into_inner(), shift)
}

#[test]
fn closed_grid_keeps_every_point() {
    let c = cloud(ring(200, 0.001));
    let out = statistical_outlier_removal(&c, 8, 1.0).unwrap();
    assert_eq!(out.len(), 200);
}

#[test]
fn far_point_is_the_only_outlier() {
    let s = 0.001;
    let mut pts = ring(200, s);
    let far = pts[17] * (1.0 + 10.0 * s / pts[17].norm());
    pts.push(far);
    let c = cloud(pts.clone());

    // Brute-force statistic and threshold.
    let stat: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| (p - q).norm()).collect();
            d.sort_by(f64::total_cmp);
            d[..8].iter().sum::<f64>() / 8.0
        })
        .collect();
    let n = stat.len() as f64;
    let mean = stat.iter().sum::<f64>() / n;
    let std = (stat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let expected: Vec<_> = pts.iter().zip(&stat).filter(|(_, &d)| d <= mean + std).map(|(p, _)| *p).collect();
    for (a, b) in mean_neighbor_distances(&c, 8).iter().zip(&stat) {
        assert!((a - b).abs() < 1e-15);
    }

    let out = statistical_outlier_removal(&c, 8, 1.0).unwrap();
    assert_eq!(out.points, expected);
    assert_eq!(out.len(), 200);
    assert!(!out.points.contains(&far));
}

#[test]
fn outlier_removal_preconditions() {
    let five = cloud(ring(5, 0.001));
    assert!(matches!(statistical_outlier_removal(&five, 8, 1.0), Err(CloudError::TooSmall { needed: 9, got: 5 })));
    assert!(matches!(statistical_outlier_removal(&five, 0, 1.0), Err(CloudError::ZeroK)));
    assert!(matches!(knn_noise_filter(&five, 0), Err(CloudError::ZeroK)));
    let nan = cloud(vec![Vector3::new(f64::NAN, 0.0, 0.0); 3]);
    assert!(matches!(knn_noise_filter(&nan, 1), Err(CloudError::NonFinite(0))));
}

#[test]
fn full_neighbourhood_collapses_to_centroid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = cloud(surface(&mut rng, 8));
    let centroid = c.centroid();
    let out = knn_noise_filter(&c, c.len() + 10).unwrap();
    assert_eq!(out.len(), c.len());
    assert!(out.points.iter().all(|p| (p - centroid).amax() < 1e-12));
}

#[test]
fn smoothing_stays_on_a_plane() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Vector3::new(0.3, -0.5, 0.8).normalize();
    let (u, v) = (normal.cross(&Vector3::x()).normalize(), normal.cross(&Vector3::x()).normalize().cross(&normal));
    let origin = Vector3::new(0.01, 0.02, -0.03);
    let pts: Vec<_> = (0..300).map(|_| origin + u * rng.random_range(-0.1..0.1) + v * rng.random_range(-0.1..0.1)).collect();
    for k in [1, 4, 20] {
        let out = knn_noise_filter(&cloud(pts.clone()), k).unwrap();
        assert!(out.points.iter().all(|p| (p - origin).dot(&normal).abs() < 1e-12));
    }
}

#[test]
fn smoothing_keeps_clusters_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts = Vec::new();
    for centre in [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.5, 0.0)] {
        for _ in 0..40 {
            pts.push(centre + Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)));
        }
    }
    let out = knn_noise_filter(&cloud(pts.clone()), 10).unwrap();
    for (cluster, range) in [(0..40), (40..80)].into_iter().enumerate() {
        let lo = pts[range.clone()].iter().fold(Vector3::repeat(f64::INFINITY), |a, p| a.inf(p));
        let hi = pts[range.clone()].iter().fold(Vector3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
        for p in &out.points[range] {
            assert!((0..3).all(|k| p[k] >= lo[k] - 1e-15 && p[k] <= hi[k] + 1e-15), "cluster {cluster} point escaped");
        }
    }
}

#[test]
fn identical_clouds_align_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = cloud(surface(&mut rng, 20));
    let r = icp_align(&c, &c, &IcpConfig::default()).unwrap();
    assert!(r.transform.distance(&RigidTransform::identity()) < 1e-12);
    assert!(r.rmse < 1e-12);
    assert_eq!(rmse(&c, &c).unwrap(), 0.0);
}

#[test]
fn recovers_a_known_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = cloud(scatter(&mut rng, 400));
    let truth = RigidTransform::new(Rotation3::from_axis_angle(&Vector3::z_axis(), 10f64.to_radians()).into_inner(), Vector3::new(0.005, 0.0, 0.0));
    let moved = x.transformed(&truth);
    let r = icp_align(&x, &moved, &IcpConfig::default()).unwrap();
    assert!(r.transform.distance(&truth) < 1e-6, "{:?}", r.transform);
    assert!(r.rmse < 1e-9);
    assert!(r.transform.is_proper(1e-9));
}

#[test]
fn noisy_alignment_reports_the_noise_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = cloud(surface(&mut rng, 30));
    let sigma = 0.002;
    let noise = Normal::new(0.0, sigma).unwrap();
    // Depth-camera noise acts along the viewing (z) axis.
    let noisy = cloud(x.points.iter().map(|p| p + Vector3::new(0.0, 0.0, noise.sample(&mut rng))).collect());
    let r = icp_align(&x, &noisy, &IcpConfig::default()).unwrap();
    assert!(r.rmse >= 0.75 * sigma && r.rmse <= 1.25 * sigma, "rmse {} for sigma {sigma}", r.rmse);
}

#[test]
fn rmse_of_single_points_is_their_distance() {
    let a = cloud(vec![Vector3::new(0.1, 0.2, 0.3)]);
    let b = cloud(vec![Vector3::new(0.1, 0.2, 0.3 + 0.004)]);
    assert!((rmse(&a, &b).unwrap() - 0.004).abs() < 1e-15);
    assert!(rmse(&a, &cloud(vec![])).is_err());
}

#[test]
fn collinear_input_is_degenerate() {
    let line: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
    assert!(matches!(icp_align(&cloud(line.clone()), &cloud(line.clone()), &IcpConfig::default()), Err(CloudError::Degenerate(_))));
    assert!(matches!(best_fit_transform(&line, &line), Err(CloudError::Degenerate(_))));
}

#[test]
fn file_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = cloud(surface(&mut rng, 6));
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.ply", "a.csv", "a.ply.gz", "a.csv.gz"] {
        let p = dir.path().join(name);
        write_cloud(&p, &c).unwrap();
        let back = read_cloud(&p, CloudSource::Synthetic).unwrap();
        assert_eq!(back, c, "{name}");
    }
    assert!(matches!(write_cloud(dir.path().join("a.xyz"), &c), Err(CloudError::Format(_))));
    let headerless = dir.path().join("raw.csv");
    std::fs::write(&headerless, "0.1,0.2,0.3\n1,2,3\n").unwrap();
    assert_eq!(read_cloud(&headerless, CloudSource::DepthCamera).unwrap().len(), 2);
    let mesh_ply = dir.path().join("mesh.ply");
    std::fs::write(
        &mesh_ply,
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float z\nproperty float x\nproperty float y\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n3 1 2\n6 4 5\n9 7 8\n3 0 1 2\n",
    )
    .unwrap();
    let m = read_cloud(&mesh_ply, CloudSource::Simulation).unwrap();
    assert_eq!(m.points[1], Vector3::new(4.0, 5.0, 6.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn icp_inverts_random_rigid_motions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cloud(scatter(&mut rng, 300));
        let t = random_transform(&mut rng, 30f64.to_radians(), 0.02);
        let r = icp_align(&x.transformed(&t), &x, &IcpConfig::default()).unwrap();
        prop_assert!(r.transform.distance(&t.inverse()) < 1e-6, "seed {seed}: {:?}", r.transform);
    }

    #[test]
    fn filters_preserve_membership_and_cardinality(seed in any::<u64>(), k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cloud(surface(&mut rng, 10));
        let kept = statistical_outlier_removal(&c, k, 1.0).unwrap();
        prop_assert!(kept.points.iter().all(|p| c.points.contains(p)));
        prop_assert_eq!(knn_noise_filter(&c, k).unwrap().len(), c.len());
        prop_assert_eq!(rmse(&c, &c).unwrap(), 0.0);
    }
}
