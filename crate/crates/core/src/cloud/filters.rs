use std::collections::HashMap;
use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Vector3;

use super::plane::fit_plane_least_squares;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

fn kd_tree(cloud: &PointCloud) -> ImmutableKdTree<f64, 3> {
    let coords: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    ImmutableKdTree::new_from_slice(&coords)
}

/// Replaces the points of each occupied voxel by their centroid. Output is
/// ordered by voxel index.
pub fn voxel_downsample(cloud: &PointCloud, leaf_size: f64) -> Result<PointCloud> {
    if !(leaf_size > 0.0 && leaf_size.is_finite()) {
        return Err(Error::invalid(format!(
            "leaf size must be positive, got {leaf_size}"
        )));
    }
    let mut voxels: HashMap<[i64; 3], (Vector3<f64>, usize)> = HashMap::new();
    for p in cloud.points() {
        let key = [
            (p.x / leaf_size).floor() as i64,
            (p.y / leaf_size).floor() as i64,
            (p.z / leaf_size).floor() as i64,
        ];
        let slot = voxels.entry(key).or_insert((Vector3::zeros(), 0));
        slot.0 += p.coords;
        slot.1 += 1;
    }
    let mut cells: Vec<_> = voxels.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    let points = cells
        .into_iter()
        .map(|(_, (sum, n))| Point3::from(sum / n as f64))
        .collect();
    Ok(PointCloud::from_finite(cloud.frame(), points))
}

/// Mean distance from each point to its `k` nearest neighbors.
fn knn_mean_distances(cloud: &PointCloud, k: usize) -> Vec<f64> {
    let tree = kd_tree(cloud);
    let qty = NonZero::new(k + 1).unwrap();
    cloud
        .points()
        .iter()
        .map(|p| {
            let found = tree.nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], qty);
            // the query point itself comes back first at distance 0
            found.iter().skip(1).map(|n| n.distance.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

/// Drops points whose mean k-NN distance exceeds `mean + std_mult * std` of
/// those means over the whole cloud. Clouds with at most `k` points pass
/// through unchanged.
pub fn statistical_outlier_removal(
    cloud: &PointCloud,
    k: usize,
    std_mult: f64,
) -> Result<PointCloud> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cloud.len() <= k {
        return Ok(cloud.clone());
    }
    let means = knn_mean_distances(cloud, k);
    let n = means.len() as f64;
    let mu = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n;
    let limit = mu + std_mult * var.sqrt();
    let kept = cloud
        .points()
        .iter()
        .zip(&means)
        .filter(|(_, &m)| m <= limit)
        .map(|(p, _)| *p)
        .collect();
    Ok(PointCloud::from_finite(cloud.frame(), kept))
}

/// First-order moving least squares: every point is projected onto the
/// least-squares plane of its neighbors within `radius` (itself included).
/// Points with fewer than 3 such neighbors are left in place.
pub fn mls_smooth(cloud: &PointCloud, radius: f64) -> Result<PointCloud> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "MLS radius must be positive, got {radius}"
        )));
    }
    if cloud.len() < 3 {
        return Ok(cloud.clone());
    }
    let tree = kd_tree(cloud);
    let pts = cloud.points();
    let r2 = radius * radius;
    let mut neighborhood = Vec::new();
    let smoothed = pts
        .iter()
        .map(|p| {
            let found = tree.within_unsorted::<SquaredEuclidean>(&[p.x, p.y, p.z], r2);
            if found.len() < 3 {
                return *p;
            }
            neighborhood.clear();
            neighborhood.extend(found.iter().map(|n| pts[n.item as usize]));
            match fit_plane_least_squares(&neighborhood) {
                Some(plane) => plane.project(p),
                None => *p,
            }
        })
        .collect();
    Ok(PointCloud::from_finite(cloud.frame(), smoothed))
}
