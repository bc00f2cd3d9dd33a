//! Semantic label images and the label gate applied to 3D points.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{project_point, CameraIntrinsics, PointCloud, RigidTransform, SafetySplit};
use crate::io::{KvFile, Pgm};

pub type ClassId = u8;

pub const CLASS_COUNT: usize = 11;

pub const SAFE_LANDING_SITE: ClassId = 0;
pub const PEOPLE_ANIMALS: ClassId = 1;
pub const MAN_MADE_OBSTACLES: ClassId = 2;
pub const NATURE_OBSTACLES: ClassId = 3;
pub const WATER: ClassId = 4;
pub const SKY: ClassId = 5;
pub const TREES: ClassId = 6;
pub const LIGHT: ClassId = 7;
pub const VEHICLES: ClassId = 8;
pub const BACKGROUND: ClassId = 9;
pub const BUILDINGS: ClassId = 10;

const DEFAULT_NAMES: [&str; CLASS_COUNT] = [
    "safe landing site",
    "people/animals",
    "man-made obstacles",
    "nature obstacles",
    "water",
    "sky",
    "trees",
    "light",
    "vehicles",
    "background",
    "buildings",
];

fn check_id(c: ClassId) -> Result<()> {
    if (c as usize) < CLASS_COUNT {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "class id {c} outside [0, {}]",
            CLASS_COUNT - 1
        )))
    }
}

/// Names of the 11 clustered classes and which of them are landable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    names: BTreeMap<ClassId, String>,
    safe: BTreeSet<ClassId>,
}

impl Default for ClassTable {
    fn default() -> Self {
        Self {
            names: DEFAULT_NAMES
                .iter()
                .enumerate()
                .map(|(i, n)| (i as ClassId, n.to_string()))
                .collect(),
            safe: BTreeSet::from([SAFE_LANDING_SITE]),
        }
    }
}

impl ClassTable {
    pub fn new(names: BTreeMap<ClassId, String>, safe: BTreeSet<ClassId>) -> Result<Self> {
        if names.len() != CLASS_COUNT || names.keys().any(|&c| check_id(c).is_err()) {
            return Err(Error::invalid(format!(
                "class table needs exactly ids 0..={}",
                CLASS_COUNT - 1
            )));
        }
        if safe.is_empty() {
            return Err(Error::invalid("safe set is empty"));
        }
        if let Some(c) = safe.iter().find(|c| !names.contains_key(c)) {
            return Err(Error::invalid(format!("safe id {c} has no class entry")));
        }
        Ok(Self { names, safe })
    }

    /// Default names with a custom safe set.
    pub fn with_safe_set(safe: impl IntoIterator<Item = ClassId>) -> Result<Self> {
        Self::new(Self::default().names, safe.into_iter().collect())
    }

    pub fn name(&self, c: ClassId) -> Option<&str> {
        self.names.get(&c).map(String::as_str)
    }

    pub fn safe_set(&self) -> &BTreeSet<ClassId> {
        &self.safe
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut names = BTreeMap::new();
        let mut safe = None;
        for e in kv.entries() {
            if e.key == "safe" {
                let ids = e
                    .value
                    .split_whitespace()
                    .map(|s| s.trim_end_matches(',').parse::<ClassId>())
                    .collect::<std::result::Result<BTreeSet<_>, _>>()
                    .map_err(|_| Error::parse(kv.path(), e.line, "bad safe id list"))?;
                safe = Some(ids);
            } else {
                let id: ClassId = e.key.parse().map_err(|_| {
                    Error::parse(kv.path(), e.line, format!("bad class id `{}`", e.key))
                })?;
                names.insert(id, e.value.clone());
            }
        }
        let safe = safe.ok_or_else(|| Error::parse(kv.path(), 0, "missing `safe=` line"))?;
        Self::new(names, safe).map_err(|err| Error::parse(kv.path(), 0, err.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s: String = self
            .names
            .iter()
            .map(|(id, n)| format!("{id}={n}\n"))
            .collect();
        let ids: Vec<String> = self.safe.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("safe={}\n", ids.join(" ")));
        s
    }
}

pub fn is_safe_class(c: ClassId, table: &ClassTable) -> Result<bool> {
    check_id(c)?;
    Ok(table.safe.contains(&c))
}

/// Per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: u32,
    height: u32,
    labels: Vec<ClassId>,
}

impl LabelImage {
    pub fn new(width: u32, height: u32, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "label buffer has {} values for a {width}x{height} image",
                labels.len()
            )));
        }
        if let Some(&c) = labels.iter().find(|&&c| check_id(c).is_err()) {
            return Err(Error::invalid(format!(
                "label value {c} outside [0, {}]",
                CLASS_COUNT - 1
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn uniform(width: u32, height: u32, c: ClassId) -> Result<Self> {
        Self::new(width, height, vec![c; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn get(&self, u: u32, v: u32) -> ClassId {
        self.labels[v as usize * self.width as usize + u as usize]
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = Pgm::read(path)?;
        let (w, h) = (img.width as u32, img.height as u32);
        let data = img.into_gray8(path)?;
        Self::new(w, h, data).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn to_pgm(&self) -> Pgm {
        Pgm::gray8(
            self.width as usize,
            self.height as usize,
            self.labels.clone(),
        )
    }
}

/// Projects every point into the label image; points on safe-class pixels go
/// to `safe`, points on other classes to `hazard`, and points falling outside
/// the image are dropped.
pub fn filter_cloud_by_semantics(
    cloud: &PointCloud,
    labels: &LabelImage,
    intr: &CameraIntrinsics,
    sl_to_rgb: &RigidTransform,
    table: &ClassTable,
) -> Result<SafetySplit> {
    if labels.width != intr.width || labels.height != intr.height {
        return Err(Error::invalid(format!(
            "label image is {}x{} but intrinsics are {}x{}",
            labels.width, labels.height, intr.width, intr.height
        )));
    }
    let mut lut = [false; CLASS_COUNT];
    for &c in &table.safe {
        lut[c as usize] = true;
    }
    let mut safe = Vec::new();
    let mut hazard = Vec::new();
    for p in cloud.points() {
        let Some(px) = project_point(p, intr, sl_to_rgb) else {
            continue;
        };
        let (u, v) = px.rounded(intr);
        if lut[labels.get(u, v) as usize] {
            safe.push(*p);
        } else {
            hazard.push(*p);
        }
    }
    Ok(SafetySplit {
        safe: PointCloud::from_finite(cloud.frame(), safe),
        hazard: PointCloud::from_finite(cloud.frame(), hazard),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, Point3};
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap()
    }

    fn cloud_in_frustum() -> PointCloud {
        let mut pts = Vec::new();
        for i in -10..=10 {
            for j in -8..=8 {
                pts.push(Point3::new(i as f64 * 0.0437, j as f64 * 0.0437, 2.0));
            }
        }
        PointCloud::new(Frame::StereoLeft, pts).unwrap()
    }

    #[test]
    fn safe_class_lookup() {
        let t = ClassTable::default();
        assert!(is_safe_class(0, &t).unwrap());
        assert!(!is_safe_class(1, &t).unwrap());
        assert!(matches!(
            is_safe_class(11, &t),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn table_validation() {
        assert!(ClassTable::with_safe_set([]).is_err());
        assert!(ClassTable::with_safe_set([12]).is_err());
        let mut names = ClassTable::default().names;
        names.remove(&10);
        assert!(ClassTable::new(names, BTreeSet::from([0])).is_err());
    }

    #[test]
    fn table_text_round_trip() {
        let t = ClassTable::with_safe_set([0, 4]).unwrap();
        let kv = KvFile::parse("classes.txt", &t.to_text()).unwrap();
        assert_eq!(ClassTable::from_kv(&kv).unwrap(), t);
    }

    #[test]
    fn label_range_checked() {
        assert!(LabelImage::new(1, 1, vec![11]).is_err());
        assert!(LabelImage::new(2, 1, vec![0]).is_err());
    }

    #[test]
    fn uniform_labels() {
        let cloud = cloud_in_frustum();
        let t = ClassTable::default();
        let safe = LabelImage::uniform(64, 48, SAFE_LANDING_SITE).unwrap();
        let split =
            filter_cloud_by_semantics(&cloud, &safe, &intr(), &RigidTransform::identity(), &t)
                .unwrap();
        assert_eq!(split.safe, cloud);
        assert!(split.hazard.is_empty());

        let obstacle = LabelImage::uniform(64, 48, MAN_MADE_OBSTACLES).unwrap();
        let split =
            filter_cloud_by_semantics(&cloud, &obstacle, &intr(), &RigidTransform::identity(), &t)
                .unwrap();
        assert!(split.safe.is_empty());
        assert_eq!(split.hazard, cloud);
    }

    #[test]
    fn half_and_half_matches_per_point_oracle() {
        let cloud = cloud_in_frustum();
        let intr = intr();
        let labels: Vec<ClassId> = (0..48)
            .flat_map(|_| {
                (0..64).map(|u| {
                    if u < 32 {
                        SAFE_LANDING_SITE
                    } else {
                        MAN_MADE_OBSTACLES
                    }
                })
            })
            .collect();
        let labels = LabelImage::new(64, 48, labels).unwrap();
        let split = filter_cloud_by_semantics(
            &cloud,
            &labels,
            &intr,
            &RigidTransform::identity(),
            &ClassTable::default(),
        )
        .unwrap();
        // oracle: u = cx + fx x / z, nearest pixel column decides the side
        let (mut safe, mut hazard) = (Vec::new(), Vec::new());
        for p in cloud.points() {
            let u = 32.0 + 100.0 * p.x / p.z;
            if u.round() < 32.0 {
                safe.push(*p);
            } else {
                hazard.push(*p);
            }
        }
        assert_eq!(split.safe.points(), &safe[..]);
        assert_eq!(split.hazard.points(), &hazard[..]);
        assert!(!safe.is_empty() && !hazard.is_empty());
    }

    #[test]
    fn points_behind_camera_dropped() {
        let cloud = PointCloud::new(
            Frame::StereoLeft,
            vec![
                Point3::new(0.0, 0.0, -1.0),
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(50.0, 0.0, 1.0),
            ],
        )
        .unwrap();
        let labels = LabelImage::uniform(64, 48, SAFE_LANDING_SITE).unwrap();
        let split = filter_cloud_by_semantics(
            &cloud,
            &labels,
            &intr(),
            &RigidTransform::identity(),
            &ClassTable::default(),
        )
        .unwrap();
        assert_eq!(split.safe.points(), &[Point3::new(0.0, 0.0, 1.0)]);
        assert!(split.hazard.is_empty());
    }

    #[test]
    fn extrinsic_offset_shifts_lookup() {
        // a 0.5 m shift along x moves the optical-axis point 25 px right at 2 m
        let cloud = PointCloud::new(Frame::StereoLeft, vec![Point3::new(0.0, 0.0, 2.0)]).unwrap();
        let labels: Vec<ClassId> = (0..48)
            .flat_map(|_| (0..64).map(|u| if u < 50 { SAFE_LANDING_SITE } else { WATER }))
            .collect();
        let labels = LabelImage::new(64, 48, labels).unwrap();
        let t = ClassTable::default();
        let shift = RigidTransform::from_translation([0.5, 0.0, 0.0]);
        let split = filter_cloud_by_semantics(&cloud, &labels, &intr(), &shift, &t).unwrap();
        assert!(split.safe.is_empty() && split.hazard.len() == 1);
    }

    #[test]
    fn dimension_mismatch() {
        let labels = LabelImage::uniform(10, 10, 0).unwrap();
        let r = filter_cloud_by_semantics(
            &cloud_in_frustum(),
            &labels,
            &intr(),
            &RigidTransform::identity(),
            &ClassTable::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn partition_and_monotone(
            seed_labels in prop::collection::vec(0u8..11, 64 * 48),
            pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -1.0f64..4.0), 0..60),
            base in prop::collection::btree_set(0u8..11, 1..4),
            extra in prop::collection::btree_set(0u8..11, 0..4),
        ) {
            let labels = LabelImage::new(64, 48, seed_labels).unwrap();
            let cloud = PointCloud::new(Frame::StereoLeft, pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()).unwrap();
            let small = ClassTable::with_safe_set(base.iter().copied()).unwrap();
            let big = ClassTable::with_safe_set(base.union(&extra).copied()).unwrap();
            let id = RigidTransform::identity();
            let a = filter_cloud_by_semantics(&cloud, &labels, &intr(), &id, &small).unwrap();
            let b = filter_cloud_by_semantics(&cloud, &labels, &intr(), &id, &big).unwrap();
            prop_assert!(a.safe.len() + a.hazard.len() <= cloud.len());
            prop_assert_eq!(a.safe.len() + a.hazard.len(), b.safe.len() + b.hazard.len());
            prop_assert!(b.safe.len() >= a.safe.len());
            for p in a.safe.points() {
                prop_assert!(!a.hazard.points().contains(p) || cloud.points().iter().filter(|q| *q == p).count() > 1);
            }
            for p in a.safe.points().iter().chain(a.hazard.points()) {
                prop_assert!(p.z > 0.0);
            }
        }
    }
}
