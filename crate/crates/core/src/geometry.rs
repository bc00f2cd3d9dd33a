//! Pinhole camera model, rigid transforms and image/3D conversions.

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::io::{kv, KvFile};

pub type Point3 = nalgebra::Point3<f64>;

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::invalid(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if !(ortho_err <= ORTHO_TOL) {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (error {ortho_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::from(t),
        }
    }

    /// Rotation of `angle` radians about `axis` followed by translation `t`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Self {
        let axis = Unit::new_normalize(Vector3::from(axis));
        let rot = Rotation3::from_axis_angle(&axis, angle);
        Self {
            rotation: *rot.matrix(),
            translation: Vector3::from(t),
        }
    }

    /// `r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz`.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
        Self::new(rotation, Vector3::new(v[9], v[10], v[11]))
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    StereoLeft,
    Rgb,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    frame: Frame,
}

impl PointCloud {
    /// Rejects clouds containing NaN or infinite coordinates.
    pub fn new(frame: Frame, points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.coords.iter().all(|v| v.is_finite()))
        {
            return Err(Error::invalid(format!(
                "point {i} has non-finite coordinates"
            )));
        }
        Ok(Self { points, frame })
    }

    pub fn empty(frame: Frame) -> Self {
        Self {
            points: Vec::new(),
            frame,
        }
    }

    /// For points derived from an already validated cloud.
    pub(crate) fn from_finite(frame: Frame, points: Vec<Point3>) -> Self {
        debug_assert!(points
            .iter()
            .all(|p| p.coords.iter().all(|v| v.is_finite())));
        Self { points, frame }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud::from_finite(
            self.frame,
            indices.iter().map(|&i| self.points[i]).collect(),
        )
    }

    /// ASCII XYZ dump, one `x y z` line per point.
    pub fn to_xyz(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            s.push_str(&format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z));
        }
        s
    }
}

/// A cloud partitioned into landable and hazardous points.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySplit {
    pub safe: PointCloud,
    pub hazard: PointCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    MetricDepth,
    Disparity,
}

/// Row-major depth or disparity raster; invalid pixels hold exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    values: Vec<f64>,
    kind: DepthKind,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, values: Vec<f64>, kind: DepthKind) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "depth buffer has {} values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "pixel {i} has invalid value {}",
                values[i]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            kind,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    /// Loads a 16-bit PGM holding millimeters.
    pub fn load_millimeter_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = crate::io::Pgm::read(path)?;
        let (w, h) = (img.width as u32, img.height as u32);
        let raw = img.into_gray16(path)?;
        Self::new(
            w,
            h,
            raw.into_iter().map(|mm| mm as f64 / 1000.0).collect(),
            DepthKind::MetricDepth,
        )
    }

    /// Loads a 16-bit PGM holding disparity in 1/16 pixel units.
    pub fn load_disparity_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = crate::io::Pgm::read(path)?;
        let (w, h) = (img.width as u32, img.height as u32);
        let raw = img.into_gray16(path)?;
        Self::new(
            w,
            h,
            raw.into_iter().map(|d| d as f64 / 16.0).collect(),
            DepthKind::Disparity,
        )
    }

    /// Millimeter 16-bit PGM; values are rounded and saturate at 65.535 m.
    pub fn to_millimeter_pgm(&self) -> crate::io::Pgm {
        let data = self
            .values
            .iter()
            .map(|&m| (m * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        crate::io::Pgm::gray16(self.width as usize, self.height as usize, data)
    }
}

/// Sub-pixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    /// Nearest integer pixel, clamped into the image.
    pub fn rounded(&self, intr: &CameraIntrinsics) -> (u32, u32) {
        let u = (self.u.round() as u32).min(intr.width - 1);
        let v = (self.v.round() as u32).min(intr.height - 1);
        (u, v)
    }
}

pub fn disparity_to_depth(
    disp: &DepthImage,
    intr: &CameraIntrinsics,
    baseline: f64,
) -> Result<DepthImage> {
    if disp.kind != DepthKind::Disparity {
        return Err(Error::invalid(
            "disparity_to_depth expects a disparity image",
        ));
    }
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(Error::invalid(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    let fb = intr.fx * baseline;
    let values = disp
        .values
        .iter()
        .map(|&d| if d > 0.0 { fb / d } else { 0.0 })
        .collect();
    Ok(DepthImage {
        width: disp.width,
        height: disp.height,
        values,
        kind: DepthKind::MetricDepth,
    })
}

/// Point at depth `z` (along the optical axis) behind a sub-pixel position.
pub fn back_project(px: Pixel, z: f64, intr: &CameraIntrinsics) -> Point3 {
    Point3::new(
        (px.u - intr.cx) * z / intr.fx,
        (px.v - intr.cy) * z / intr.fy,
        z,
    )
}

/// Back-projects every valid pixel into the stereo-left frame, row-major order.
pub fn depth_to_cloud(depth: &DepthImage, intr: &CameraIntrinsics) -> Result<PointCloud> {
    if depth.kind != DepthKind::MetricDepth {
        return Err(Error::invalid("depth_to_cloud expects metric depth"));
    }
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::invalid(format!(
            "depth image is {}x{} but intrinsics are {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    let mut points = Vec::with_capacity(depth.values.len());
    for v in 0..depth.height {
        let row = &depth.values[v as usize * depth.width as usize..][..depth.width as usize];
        for (u, &z) in row.iter().enumerate() {
            if z > 0.0 {
                points.push(back_project(
                    Pixel {
                        u: u as f64,
                        v: v as f64,
                    },
                    z,
                    intr,
                ));
            }
        }
    }
    Ok(PointCloud::from_finite(Frame::StereoLeft, points))
}

/// Pinhole projection after `xform`; `None` when behind the camera or off-image.
pub fn project_point(p: &Point3, intr: &CameraIntrinsics, xform: &RigidTransform) -> Option<Pixel> {
    let q = xform.apply(p);
    let w = q.z;
    if !(w > 0.0) {
        return None;
    }
    let u = (intr.fx * q.x + intr.cx * w) / w;
    let v = (intr.fy * q.y + intr.cy * w) / w;
    let inside = (0.0..intr.width as f64).contains(&u) && (0.0..intr.height as f64).contains(&v);
    inside.then_some(Pixel { u, v })
}

pub fn transform_cloud(cloud: &PointCloud, xform: &RigidTransform, target: Frame) -> PointCloud {
    PointCloud::from_finite(
        target,
        cloud.points.iter().map(|p| xform.apply(p)).collect(),
    )
}

/// Camera description stored in a dataset's `intrinsics.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub baseline: Option<f64>,
    /// Maps stereo-left coordinates into the label (RGB) camera frame.
    pub sl_to_rgb: RigidTransform,
}

impl CameraConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let kv = KvFile::load(path)?;
        Self::from_kv(&kv)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.reject_unknown(&[
            "fx",
            "fy",
            "cx",
            "cy",
            "width",
            "height",
            "baseline",
            "sl_to_rgb",
        ])?;
        let intrinsics = CameraIntrinsics::new(
            kv.require("fx")?,
            kv.require("fy")?,
            kv.require("cx")?,
            kv.require("cy")?,
            kv.require("width")?,
            kv.require("height")?,
        )
        .map_err(|e| Error::parse(kv.path(), 0, e.to_string()))?;
        Ok(Self {
            intrinsics,
            baseline: kv.get("baseline")?,
            sl_to_rgb: kv
                .transform("sl_to_rgb")?
                .unwrap_or_else(RigidTransform::identity),
        })
    }

    pub fn to_text(&self) -> String {
        let i = &self.intrinsics;
        let mut s = format!(
            "fx={}\nfy={}\ncx={}\ncy={}\nwidth={}\nheight={}\n",
            i.fx, i.fy, i.cx, i.cy, i.width, i.height
        );
        if let Some(b) = self.baseline {
            s.push_str(&format!("baseline={b}\n"));
        }
        s.push_str(&format!(
            "sl_to_rgb={}\n",
            kv::format_transform(&self.sl_to_rgb)
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vga() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn transform_validation() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflect, Vector3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(skew, Vector3::zeros()).is_err());
    }

    #[test]
    fn disparity_conversion() {
        let intr = vga();
        let disp = DepthImage::new(3, 1, vec![0.0, 10.0, 5.0], DepthKind::Disparity).unwrap();
        let depth = disparity_to_depth(&disp, &intr, 0.1).unwrap();
        assert_eq!(depth.kind(), DepthKind::MetricDepth);
        assert_eq!(depth.values()[0], 0.0);
        assert_abs_diff_eq!(depth.values()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(depth.values()[2], 2.0, epsilon = 1e-12);

        assert!(matches!(
            disparity_to_depth(&depth, &intr, 0.1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(disparity_to_depth(&disp, &intr, 0.0).is_err());
    }

    #[test]
    fn negative_depth_rejected() {
        assert!(DepthImage::new(1, 1, vec![-1.0], DepthKind::MetricDepth).is_err());
        assert!(DepthImage::new(2, 1, vec![1.0], DepthKind::MetricDepth).is_err());
    }

    #[test]
    fn back_projection_examples() {
        let intr = vga();
        let mut values = vec![0.0; 640 * 480];
        values[240 * 640 + 320] = 2.0;
        values[240 * 640 + 420] = 2.0;
        let depth = DepthImage::new(640, 480, values, DepthKind::MetricDepth).unwrap();
        let cloud = depth_to_cloud(&depth, &intr).unwrap();
        assert_eq!(cloud.frame(), Frame::StereoLeft);
        assert_eq!(
            cloud.points(),
            &[Point3::new(0.0, 0.0, 2.0), Point3::new(2.0, 0.0, 2.0)]
        );

        let blank =
            DepthImage::new(640, 480, vec![0.0; 640 * 480], DepthKind::MetricDepth).unwrap();
        assert!(depth_to_cloud(&blank, &intr).unwrap().is_empty());

        let small = DepthImage::new(2, 2, vec![1.0; 4], DepthKind::MetricDepth).unwrap();
        assert!(depth_to_cloud(&small, &intr).is_err());
    }

    #[test]
    fn projection_examples() {
        let intr = vga();
        let id = RigidTransform::identity();
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, 2.0), &intr, &id),
            Some(Pixel { u: 320.0, v: 240.0 })
        );
        assert_eq!(
            project_point(&Point3::new(0.5, 0.0, 2.0), &intr, &id),
            Some(Pixel { u: 345.0, v: 240.0 })
        );
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, -1.0), &intr, &id),
            None
        );
        assert_eq!(project_point(&Point3::new(0.0, 0.0, 0.0), &intr, &id), None);
        // u = 320 + 100 * 7 / 2 lands past the right edge
        assert_eq!(project_point(&Point3::new(7.0, 0.0, 2.0), &intr, &id), None);
    }

    #[test]
    fn rounding_clamps_to_image() {
        let intr = vga();
        assert_eq!(Pixel { u: 639.7, v: 0.2 }.rounded(&intr), (639, 0));
        assert_eq!(Pixel { u: 10.5, v: 479.9 }.rounded(&intr), (11, 479));
    }

    #[test]
    fn transform_examples() {
        let cloud = PointCloud::new(Frame::StereoLeft, vec![Point3::new(0.0, 1.0, 0.0)]).unwrap();
        let same = transform_cloud(&cloud, &RigidTransform::identity(), Frame::World);
        assert_eq!(same.frame(), Frame::World);
        assert_eq!(same.points(), cloud.points());

        let origin = PointCloud::new(Frame::World, vec![Point3::origin()]).unwrap();
        let moved = transform_cloud(
            &origin,
            &RigidTransform::from_translation([1.0, 0.0, 0.0]),
            Frame::World,
        );
        assert_eq!(moved.points()[0], Point3::new(1.0, 0.0, 0.0));

        let rx =
            RigidTransform::from_axis_angle([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2, [0.0; 3]);
        let rotated = transform_cloud(&cloud, &rx, Frame::World);
        assert_abs_diff_eq!(
            rotated.points()[0],
            Point3::new(0.0, 0.0, 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn non_finite_cloud_rejected() {
        assert!(PointCloud::new(Frame::World, vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn camera_config_text_round_trip() {
        let cfg = CameraConfig {
            intrinsics: vga(),
            baseline: Some(0.05),
            sl_to_rgb: RigidTransform::from_axis_angle([0.0, 0.0, 1.0], 0.01, [0.03, 0.0, 0.0]),
        };
        let kv = KvFile::parse("intrinsics.txt", &cfg.to_text()).unwrap();
        assert_eq!(CameraConfig::from_kv(&kv).unwrap(), cfg);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.0f64..3.0,
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter("axis must be non-zero", |(a, _, _)| {
                a.iter().map(|v| v * v).sum::<f64>() > 1e-3
            })
            .prop_map(|(a, ang, t)| RigidTransform::from_axis_angle(a, ang, t))
    }

    proptest! {
        #[test]
        fn back_projection_round_trip(u in 0u32..640, v in 0u32..480, z in 0.05f64..50.0) {
            let intr = vga();
            let mut values = vec![0.0; 640 * 480];
            values[(v * 640 + u) as usize] = z;
            let depth = DepthImage::new(640, 480, values, DepthKind::MetricDepth).unwrap();
            let cloud = depth_to_cloud(&depth, &intr).unwrap();
            let px = project_point(&cloud.points()[0], &intr, &RigidTransform::identity()).unwrap();
            prop_assert!((px.u - u as f64).abs() < 1e-6);
            prop_assert!((px.v - v as f64).abs() < 1e-6);
        }

        #[test]
        fn inverse_restores_cloud(xf in arb_transform(), pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..20)) {
            let cloud = PointCloud::new(Frame::StereoLeft, pts.iter().map(|p| Point3::from(*p)).collect()).unwrap();
            let there = transform_cloud(&cloud, &xf, Frame::World);
            let back = transform_cloud(&there, &xf.inverse(), Frame::StereoLeft);
            for (a, b) in cloud.points().iter().zip(back.points()) {
                prop_assert!((a - b).norm() < 1e-9);
            }
        }

        #[test]
        fn projection_scale_covariant(x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.5f64..5.0, s in 0.1f64..10.0) {
            let intr = vga();
            let id = RigidTransform::identity();
            let a = project_point(&Point3::new(x, y, z), &intr, &id);
            let b = project_point(&Point3::new(s * x, s * y, s * z), &intr, &id);
            match (a, b) {
                (Some(a), Some(b)) => {
                    prop_assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
                }
                (None, None) => {}
                // the image boundary is half-open; rounding may flip a point sitting on it
                (a, b) => {
                    let p = a.or(b).unwrap();
                    prop_assert!(p.u < 1e-6 || p.v < 1e-6 || p.u > 640.0 - 1e-6 || p.v > 480.0 - 1e-6);
                }
            }
        }
    }
}
