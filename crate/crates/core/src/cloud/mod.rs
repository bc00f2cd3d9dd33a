//! Point-cloud conditioning and plane-based safety classification.

mod filters;
mod plane;

pub use filters::{mls_smooth, statistical_outlier_removal, voxel_downsample};
pub use plane::{
    classify_cloud, fit_plane_least_squares, plane_slope, point_plane_distance, ransac_plane,
    Classification, Plane, PlaneModel, RansacParams,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    /// Voxel edge length (m).
    pub leaf_size: f64,
    pub sor_neighbors: usize,
    pub sor_std_mult: f64,
    /// Neighborhood radius of the local plane fit (m).
    pub mls_radius: f64,
    pub ransac_dist: f64,
    pub ransac_iters: usize,
    pub slope_max_deg: f64,
    /// Largest admissible point-to-plane distance for a safe point (m).
    pub rough_max: f64,
    pub min_plane_points: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            leaf_size: 0.1,
            sor_neighbors: 20,
            sor_std_mult: 1.0,
            mls_radius: 0.3,
            ransac_dist: 0.05,
            ransac_iters: 200,
            slope_max_deg: 15.0,
            rough_max: 0.05,
            min_plane_points: 30,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("leaf_size", self.leaf_size),
            ("sor_std_mult", self.sor_std_mult),
            ("mls_radius", self.mls_radius),
            ("ransac_dist", self.ransac_dist),
            ("slope_max_deg", self.slope_max_deg),
            ("rough_max", self.rough_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sor_neighbors == 0 || self.ransac_iters == 0 || self.min_plane_points == 0 {
            return Err(Error::invalid(
                "sor_neighbors, ransac_iters and min_plane_points must be positive",
            ));
        }
        if self.slope_max_deg >= 90.0 {
            return Err(Error::invalid("slope_max_deg must be below 90"));
        }
        Ok(())
    }

    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            dist_thresh: self.ransac_dist,
            iters: self.ransac_iters,
            min_points: self.min_plane_points,
        }
    }
}
