use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PipelineParams;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, SafetySplit};

/// Plane `a·x + b·y + c·z + d = 0`. Coefficients need not be normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    fn from_normal(n: Vector3<f64>, through: &Point3) -> Self {
        Self {
            a: n.x,
            b: n.y,
            c: n.z,
            d: -n.dot(&through.coords),
        }
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    /// Unit normal with `c ≥ 0`; when `c` is zero the first non-zero of
    /// `b`, `a` is made positive.
    pub fn normalized(&self) -> Option<Plane> {
        let norm = self.normal().norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        let flip = if self.c != 0.0 {
            self.c < 0.0
        } else if self.b != 0.0 {
            self.b < 0.0
        } else {
            self.a < 0.0
        };
        let s = if flip { -1.0 / norm } else { 1.0 / norm };
        Some(Plane {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        })
    }

    /// Signed distance; only meaningful for normalized planes.
    fn signed(&self, p: &Point3) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }

    /// Orthogonal projection of `p` onto a normalized plane.
    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal() * self.signed(p)
    }
}

/// Fitted plane with the inliers that support it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    /// Normalized, `c ≥ 0`.
    pub plane: Plane,
    /// Indices into the cloud the model was fitted on, ascending.
    pub inlier_indices: Vec<usize>,
    pub slope_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub dist_thresh: f64,
    pub iters: usize,
    /// Planes (and clouds) with fewer supporting points are rejected.
    pub min_points: usize,
}

/// Inclination of the plane normal against world +z, in degrees.
pub fn plane_slope(plane: &Plane) -> f64 {
    let n = plane.normal().norm();
    (plane.c.abs() / n).clamp(0.0, 1.0).acos().to_degrees()
}

pub fn point_plane_distance(p: &Point3, plane: &Plane) -> Result<f64> {
    let n = plane.normal().norm();
    if !(n > 0.0) {
        return Err(Error::invalid("plane normal is zero"));
    }
    Ok((plane.a * p.x + plane.b * p.y + plane.c * p.z + plane.d).abs() / n)
}

/// Total least-squares plane through `points` (normal = direction of least
/// variance around the centroid). `None` for fewer than 3 points.
pub fn fit_plane_least_squares(points: &[Point3]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = Point3::from(
        points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords)
            / n,
    );
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal = eig.eigenvectors.column(idx).into_owned();
    Plane::from_normal(normal, &centroid).normalized()
}

fn inliers_of(points: &[Point3], plane: &Plane, thresh: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed(p).abs() <= thresh)
        .map(|(i, _)| i)
        .collect()
}

fn model(plane: Plane, inlier_indices: Vec<usize>) -> PlaneModel {
    PlaneModel {
        slope_deg: plane_slope(&plane),
        plane,
        inlier_indices,
    }
}

/// Seeded RANSAC over 3-point samples followed by a least-squares refit on
/// the consensus set. Returns `None` when the cloud or the best consensus
/// set is smaller than `params.min_points`.
pub fn ransac_plane(cloud: &PointCloud, params: &RansacParams, seed: u64) -> Option<PlaneModel> {
    let pts = cloud.points();
    let n = pts.len();
    if n < params.min_points.max(3) {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Plane, usize)> = None;
    for _ in 0..params.iters {
        let s = sample(&mut rng, n, 3);
        let (p0, p1, p2) = (pts[s.index(0)], pts[s.index(1)], pts[s.index(2)]);
        let normal = (p1 - p0).cross(&(p2 - p0));
        let scale = (p1 - p0).norm() * (p2 - p0).norm();
        if !(normal.norm() > 1e-12 * scale) {
            continue;
        }
        let Some(plane) = Plane::from_normal(normal, &p0).normalized() else {
            continue;
        };
        let count = pts
            .iter()
            .filter(|p| plane.signed(p).abs() <= params.dist_thresh)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((plane, count));
        }
    }
    let (sampled, count) = best?;
    if count < params.min_points {
        return None;
    }
    let consensus = inliers_of(pts, &sampled, params.dist_thresh);
    let support: Vec<Point3> = consensus.iter().map(|&i| pts[i]).collect();
    if let Some(refined) = fit_plane_least_squares(&support) {
        let refined_inliers = inliers_of(pts, &refined, params.dist_thresh);
        if refined_inliers.len() >= consensus.len() {
            return Some(model(refined, refined_inliers));
        }
    }
    Some(model(sampled, consensus))
}

/// Outcome of [`classify_cloud`]; plane inlier indices refer to the input cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub split: SafetySplit,
    pub planes: Vec<PlaneModel>,
}

/// Extracts planes one after another and labels their inliers safe when the
/// plane is flat enough and the point close enough to it. Everything else,
/// including points no plane claimed, is hazardous.
pub fn classify_cloud(cloud: &PointCloud, params: &PipelineParams, seed: u64) -> Classification {
    let pts = cloud.points();
    let ransac = params.ransac();
    let mut remaining: Vec<usize> = (0..pts.len()).collect();
    let mut is_safe = vec![false; pts.len()];
    let mut planes = Vec::new();

    while remaining.len() >= params.min_plane_points.max(3) {
        let sub = cloud.select(&remaining);
        let Some(found) = ransac_plane(&sub, &ransac, seed.wrapping_add(planes.len() as u64))
        else {
            break;
        };
        let flat = found.slope_deg <= params.slope_max_deg;
        let global: Vec<usize> = found.inlier_indices.iter().map(|&i| remaining[i]).collect();
        if flat {
            for &g in &global {
                if found.plane.signed(&pts[g]).abs() <= params.rough_max {
                    is_safe[g] = true;
                }
            }
        }
        let mut taken = vec![false; remaining.len()];
        for &i in &found.inlier_indices {
            taken[i] = true;
        }
        remaining = remaining
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(&g, _)| g)
            .collect();
        planes.push(PlaneModel {
            inlier_indices: global,
            ..found
        });
    }

    let (safe, hazard): (Vec<_>, Vec<_>) = pts.iter().zip(&is_safe).partition(|(_, &s)| s);
    let strip = |v: Vec<(&Point3, &bool)>| {
        PointCloud::from_finite(cloud.frame(), v.into_iter().map(|(p, _)| *p).collect())
    };
    Classification {
        split: SafetySplit {
            safe: strip(safe),
            hazard: strip(hazard),
        },
        planes,
    }
}
