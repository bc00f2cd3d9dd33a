//! Box-and-ramp worlds standing on a flat floor at z = 0.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{CellClass, ClassMap};
use crate::io::KvFile;
use crate::semantics::{ClassId, ClassTable, CLASS_COUNT, MAN_MADE_OBSTACLES};

/// Axis-aligned box resting on the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub center: [f64; 2],
    /// Footprint x, footprint y, height.
    pub size: [f64; 3],
    pub class: ClassId,
}

/// Solid wedge over a rectangular footprint. Its top rises along +x from
/// the floor at the low edge with the given tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSpec {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub tilt_deg: f64,
    pub class: ClassId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomBoxes {
    pub count: usize,
    pub height: [f64; 2],
    pub width: [f64; 2],
    /// Minimum free space between footprints, and between footprints and
    /// the scene border.
    pub gap: f64,
    pub class: ClassId,
}

impl Default for RandomBoxes {
    fn default() -> Self {
        Self {
            count: 0,
            height: [0.3, 1.0],
            width: [0.5, 1.0],
            gap: 1.0,
            class: MAN_MADE_OBSTACLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// xmin, ymin, xmax, ymax.
    pub extent: [f64; 4],
    pub floor_class: ClassId,
    pub obstacles: Vec<BoxSpec>,
    pub ramps: Vec<RampSpec>,
    pub random_boxes: RandomBoxes,
    pub rng_seed: u64,
    pub truth_resolution: f64,
    /// Ground-truth inflation of box footprints.
    pub truth_margin: f64,
    /// Ramps steeper than this are unsafe in the ground truth.
    pub slope_max_deg: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            extent: [0.0, 0.0, 10.0, 10.0],
            floor_class: 0,
            obstacles: Vec::new(),
            ramps: Vec::new(),
            random_boxes: RandomBoxes::default(),
            rng_seed: 0,
            truth_resolution: 0.1,
            // half of the spare room between a 0.5 m patch and a 0.27 m drone
            truth_margin: 0.115,
            slope_max_deg: 15.0,
        }
    }
}

const SCENE_KEYS: &[&str] = &[
    "extent",
    "floor_class",
    "box",
    "ramp",
    "random_boxes",
    "random_box_height",
    "random_box_width",
    "random_box_gap",
    "random_box_class",
    "rng_seed",
    "truth_resolution",
    "truth_margin",
    "slope_max_deg",
];

fn class_from(kv: &KvFile, line: usize, v: f64) -> Result<ClassId> {
    if v.fract() != 0.0 || !(0.0..CLASS_COUNT as f64).contains(&v) {
        return Err(Error::parse(
            kv.path(),
            line,
            format!("class id {v} out of range"),
        ));
    }
    Ok(v as ClassId)
}

fn range_pair(kv: &KvFile, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
    match kv.entry(key) {
        None => Ok(default),
        Some(e) => {
            let v = kv.parse_numbers(e, 2)?;
            Ok([v[0], v[1]])
        }
    }
}

impl SceneSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    /// Keys: `extent`, `floor_class`, repeated `box = cx cy sx sy h class`,
    /// repeated `ramp = cx cy sx sy tilt_deg class`, `random_boxes`,
    /// `random_box_{height,width}` (min max), `random_box_gap`,
    /// `random_box_class`, `rng_seed`, `truth_resolution`, `truth_margin`,
    /// `slope_max_deg`.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.reject_unknown(SCENE_KEYS)?;
        let d = Self::default();
        let extent = match kv.entry("extent") {
            None => d.extent,
            Some(e) => {
                let v = kv.parse_numbers(e, 4)?;
                [v[0], v[1], v[2], v[3]]
            }
        };
        let mut obstacles = Vec::new();
        for e in kv.all("box") {
            let v = kv.parse_numbers(e, 6)?;
            obstacles.push(BoxSpec {
                center: [v[0], v[1]],
                size: [v[2], v[3], v[4]],
                class: class_from(kv, e.line, v[5])?,
            });
        }
        let mut ramps = Vec::new();
        for e in kv.all("ramp") {
            let v = kv.parse_numbers(e, 6)?;
            ramps.push(RampSpec {
                center: [v[0], v[1]],
                size: [v[2], v[3]],
                tilt_deg: v[4],
                class: class_from(kv, e.line, v[5])?,
            });
        }
        let rd = RandomBoxes::default();
        let random_boxes = RandomBoxes {
            count: kv.get_or("random_boxes", rd.count)?,
            height: range_pair(kv, "random_box_height", rd.height)?,
            width: range_pair(kv, "random_box_width", rd.width)?,
            gap: kv.get_or("random_box_gap", rd.gap)?,
            class: kv.get_or("random_box_class", rd.class)?,
        };
        let spec = Self {
            extent,
            floor_class: kv.get_or("floor_class", d.floor_class)?,
            obstacles,
            ramps,
            random_boxes,
            rng_seed: kv.get_or("rng_seed", d.rng_seed)?,
            truth_resolution: kv.get_or("truth_resolution", d.truth_resolution)?,
            truth_margin: kv.get_or("truth_margin", d.truth_margin)?,
            slope_max_deg: kv.get_or("slope_max_deg", d.slope_max_deg)?,
        };
        spec.validate()
            .map_err(|e| Error::parse(kv.path(), 0, e.to_string()))?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [a, b, c, d] = self.extent;
        let _ = writeln!(s, "extent={a} {b} {c} {d}");
        let _ = writeln!(s, "floor_class={}", self.floor_class);
        for o in &self.obstacles {
            let _ = writeln!(
                s,
                "box={} {} {} {} {} {}",
                o.center[0], o.center[1], o.size[0], o.size[1], o.size[2], o.class
            );
        }
        for r in &self.ramps {
            let _ = writeln!(
                s,
                "ramp={} {} {} {} {} {}",
                r.center[0], r.center[1], r.size[0], r.size[1], r.tilt_deg, r.class
            );
        }
        let rb = &self.random_boxes;
        let _ = writeln!(s, "random_boxes={}", rb.count);
        let _ = writeln!(s, "random_box_height={} {}", rb.height[0], rb.height[1]);
        let _ = writeln!(s, "random_box_width={} {}", rb.width[0], rb.width[1]);
        let _ = writeln!(s, "random_box_gap={}", rb.gap);
        let _ = writeln!(s, "random_box_class={}", rb.class);
        let _ = writeln!(s, "rng_seed={}", self.rng_seed);
        let _ = writeln!(s, "truth_resolution={}", self.truth_resolution);
        let _ = writeln!(s, "truth_margin={}", self.truth_margin);
        let _ = writeln!(s, "slope_max_deg={}", self.slope_max_deg);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.extent;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::invalid(
                "extent must have xmin < xmax and ymin < ymax",
            ));
        }
        if self.floor_class as usize >= CLASS_COUNT {
            return Err(Error::invalid(format!(
                "floor class {} out of range",
                self.floor_class
            )));
        }
        if !(self.truth_resolution > 0.0 && self.truth_margin >= 0.0) {
            return Err(Error::invalid(
                "truth_resolution must be positive and truth_margin non-negative",
            ));
        }
        for o in &self.obstacles {
            if !o.size.iter().all(|&v| v > 0.0) {
                return Err(Error::invalid(format!(
                    "box at {:?} needs a positive size",
                    o.center
                )));
            }
        }
        for r in &self.ramps {
            if !(r.size[0] > 0.0 && r.size[1] > 0.0) {
                return Err(Error::invalid(format!(
                    "ramp at {:?} needs a positive size",
                    r.center
                )));
            }
            if !(0.0..=89.0).contains(&r.tilt_deg) {
                return Err(Error::invalid(format!(
                    "ramp tilt {} outside [0, 89] degrees",
                    r.tilt_deg
                )));
            }
        }
        let rb = &self.random_boxes;
        if rb.count > 0 {
            if !(0.0 < rb.height[0]
                && rb.height[0] <= rb.height[1]
                && 0.0 < rb.width[0]
                && rb.width[0] <= rb.width[1])
            {
                return Err(Error::invalid(
                    "random box ranges must be positive and ordered",
                ));
            }
            if !(rb.gap >= 0.0) || rb.class as usize >= CLASS_COUNT {
                return Err(Error::invalid(
                    "random box gap must be non-negative and class in range",
                ));
            }
        }
        Ok(())
    }
}

/// Axis-aligned rectangle xmin, ymin, xmax, ymax.
type Rect = [f64; 4];

fn overlaps(a: &Rect, b: &Rect, pad: f64) -> bool {
    a[0] < b[2] + pad && b[0] < a[2] + pad && a[1] < b[3] + pad && b[1] < a[3] + pad
}

fn inside(inner: &Rect, outer: &Rect) -> bool {
    inner[0] >= outer[0] && inner[1] >= outer[1] && inner[2] <= outer[2] && inner[3] <= outer[3]
}

/// Convex solid as an intersection of half-spaces `n . p <= d`.
#[derive(Debug, Clone, PartialEq)]
struct Solid {
    faces: Vec<(Vector3<f64>, f64)>,
    footprint: Rect,
    class: ClassId,
    top: Top,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Top {
    Flat(f64),
    /// z = (x - x0) * slope
    Incline {
        x0: f64,
        slope: f64,
    },
}

impl Solid {
    fn cuboid(footprint: Rect, height: f64, class: ClassId) -> Self {
        let faces = vec![
            (Vector3::new(-1.0, 0.0, 0.0), -footprint[0]),
            (Vector3::new(1.0, 0.0, 0.0), footprint[2]),
            (Vector3::new(0.0, -1.0, 0.0), -footprint[1]),
            (Vector3::new(0.0, 1.0, 0.0), footprint[3]),
            (Vector3::new(0.0, 0.0, -1.0), 0.0),
            (Vector3::new(0.0, 0.0, 1.0), height),
        ];
        Self {
            faces,
            footprint,
            class,
            top: Top::Flat(height),
        }
    }

    fn wedge(footprint: Rect, tilt_deg: f64, class: ClassId) -> Self {
        let slope = tilt_deg.to_radians().tan();
        let mut s = Self::cuboid(footprint, f64::INFINITY, class);
        s.faces.pop();
        s.faces
            .push((Vector3::new(-slope, 0.0, 1.0), -slope * footprint[0]));
        s.top = Top::Incline {
            x0: footprint[0],
            slope,
        };
        s
    }

    /// Entry distance of the ray, if it enters in front of the origin.
    fn intersect(&self, o: &Point3, dir: &Vector3<f64>) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for (n, d) in &self.faces {
            let denom = n.dot(dir);
            let dist = d - n.dot(&o.coords);
            if denom == 0.0 {
                if dist < 0.0 {
                    return None;
                }
            } else {
                let t = dist / denom;
                if denom < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }

    fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        let f = &self.footprint;
        if !(x >= f[0] && x <= f[2] && y >= f[1] && y <= f[3]) {
            return None;
        }
        Some(match self.top {
            Top::Flat(h) => h,
            Top::Incline { x0, slope } => (x - x0) * slope,
        })
    }

    fn max_height(&self) -> f64 {
        match self.top {
            Top::Flat(h) => h,
            Top::Incline { x0, slope } => (self.footprint[2] - x0) * slope,
        }
    }
}

/// Immutable world built from a [`SceneSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    extent: Rect,
    floor_class: ClassId,
    solids: Vec<Solid>,
    boxes: Vec<BoxSpec>,
}

impl Scene {
    pub fn extent(&self) -> [f64; 4] {
        self.extent
    }

    /// Every box in the scene, including the randomly placed ones.
    pub fn boxes(&self) -> &[BoxSpec] {
        &self.boxes
    }

    pub fn max_height(&self) -> f64 {
        self.solids
            .iter()
            .map(Solid::max_height)
            .fold(0.0, f64::max)
    }

    /// Top surface height and class at a world x-y, or `None` off the floor.
    pub fn surface_at(&self, x: f64, y: f64) -> Option<(f64, ClassId)> {
        let e = &self.extent;
        let mut best =
            (x >= e[0] && x <= e[2] && y >= e[1] && y <= e[3]).then_some((0.0, self.floor_class));
        for s in &self.solids {
            if let Some(h) = s.height_at(x, y) {
                if best.is_none_or(|(bh, _)| h >= bh) {
                    best = Some((h, s.class));
                }
            }
        }
        best
    }

    /// First surface hit along a ray: distance in units of `dir` and class.
    pub fn cast(&self, o: &Point3, dir: &Vector3<f64>) -> Option<(f64, ClassId)> {
        let mut best = None;
        if dir.z < 0.0 && o.z > 0.0 {
            let t = -o.z / dir.z;
            let (x, y) = (o.x + t * dir.x, o.y + t * dir.y);
            let e = &self.extent;
            if x >= e[0] && x <= e[2] && y >= e[1] && y <= e[3] {
                best = Some((t, self.floor_class));
            }
        }
        for s in &self.solids {
            if let Some(t) = s.intersect(o, dir) {
                // objects win ties with the floor they stand on
                if best.is_none_or(|(bt, _)| t <= bt) {
                    best = Some((t, s.class));
                }
            }
        }
        best
    }
}

fn footprint(center: [f64; 2], sx: f64, sy: f64) -> Rect {
    [
        center[0] - sx / 2.0,
        center[1] - sy / 2.0,
        center[0] + sx / 2.0,
        center[1] + sy / 2.0,
    ]
}

/// Per-cell Safe/Unsafe truth on the map lattice, covering the extent.
pub type GroundTruthMap = ClassMap;

pub fn build_scene(spec: &SceneSpec, table: &ClassTable) -> Result<(Scene, GroundTruthMap)> {
    spec.validate()?;
    let extent = spec.extent;
    let mut boxes = spec.obstacles.clone();
    let mut rects: Vec<Rect> = Vec::new();
    for o in &spec.obstacles {
        let r = footprint(o.center, o.size[0], o.size[1]);
        if !inside(&r, &extent) {
            return Err(Error::invalid(format!(
                "box at {:?} leaves the scene extent",
                o.center
            )));
        }
        rects.push(r);
    }
    for r in &spec.ramps {
        let f = footprint(r.center, r.size[0], r.size[1]);
        if !inside(&f, &extent) {
            return Err(Error::invalid(format!(
                "ramp at {:?} leaves the scene extent",
                r.center
            )));
        }
        rects.push(f);
    }
    for i in 0..rects.len() {
        for j in 0..i {
            if overlaps(&rects[i], &rects[j], 0.0) {
                return Err(Error::invalid(format!("obstacles {j} and {i} overlap")));
            }
        }
    }

    let rb = &spec.random_boxes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut placed = 0;
    let mut attempts = 0;
    while placed < rb.count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::invalid(format!(
                "could not place {} random boxes without overlap",
                rb.count
            )));
        }
        let sx = rng.random_range(rb.width[0]..=rb.width[1]);
        let sy = rng.random_range(rb.width[0]..=rb.width[1]);
        let h = rng.random_range(rb.height[0]..=rb.height[1]);
        let (lo_x, hi_x) = (extent[0] + rb.gap + sx / 2.0, extent[2] - rb.gap - sx / 2.0);
        let (lo_y, hi_y) = (extent[1] + rb.gap + sy / 2.0, extent[3] - rb.gap - sy / 2.0);
        if !(lo_x <= hi_x && lo_y <= hi_y) {
            return Err(Error::invalid(
                "scene extent too small for the random boxes",
            ));
        }
        let center = [rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y)];
        let r = footprint(center, sx, sy);
        if rects.iter().any(|o| overlaps(o, &r, rb.gap)) {
            continue;
        }
        rects.push(r);
        boxes.push(BoxSpec {
            center,
            size: [sx, sy, h],
            class: rb.class,
        });
        placed += 1;
    }

    let mut solids: Vec<Solid> = boxes
        .iter()
        .map(|b| {
            Solid::cuboid(
                footprint(b.center, b.size[0], b.size[1]),
                b.size[2],
                b.class,
            )
        })
        .collect();
    solids.extend(spec.ramps.iter().map(|r| {
        Solid::wedge(
            footprint(r.center, r.size[0], r.size[1]),
            r.tilt_deg,
            r.class,
        )
    }));
    let scene = Scene {
        extent,
        floor_class: spec.floor_class,
        solids,
        boxes,
    };
    let truth = ground_truth(spec, &scene, table)?;
    Ok((scene, truth))
}

fn ground_truth(spec: &SceneSpec, scene: &Scene, table: &ClassTable) -> Result<GroundTruthMap> {
    let res = spec.truth_resolution;
    let e = spec.extent;
    let c0 = (e[0] / res + 1e-9).floor() as i64;
    let r0 = (e[1] / res + 1e-9).floor() as i64;
    let c1 = (e[2] / res - 1e-9).ceil() as i64;
    let r1 = (e[3] / res - 1e-9).ceil() as i64;
    let (w, h) = ((c1 - c0).max(0) as usize, (r1 - r0).max(0) as usize);
    let floor_safe = table.safe_set().contains(&spec.floor_class);
    let mut hazards: Vec<Rect> = scene
        .boxes
        .iter()
        .map(|b| {
            footprint(
                b.center,
                b.size[0] + 2.0 * spec.truth_margin,
                b.size[1] + 2.0 * spec.truth_margin,
            )
        })
        .collect();
    for r in &spec.ramps {
        if r.tilt_deg > spec.slope_max_deg || !table.safe_set().contains(&r.class) {
            hazards.push(footprint(r.center, r.size[0], r.size[1]));
        }
    }
    // shrink by a hair so that rectangles touching along an edge do not count
    let eps = 1e-9;
    let mut classes = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let x = (c0 + c as i64) as f64 * res;
            let y = (r0 + r as i64) as f64 * res;
            let cell = [x + eps, y + eps, x + res - eps, y + res - eps];
            let unsafe_cell = !floor_safe || hazards.iter().any(|hz| overlaps(hz, &cell, 0.0));
            classes.push(if unsafe_cell {
                CellClass::Unsafe
            } else {
                CellClass::Safe
            });
        }
    }
    Ok(ClassMap {
        width: w,
        height: h,
        origin: [c0 as f64 * res, r0 as f64 * res],
        resolution: res,
        classes,
        observed: vec![true; w * h],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table() -> ClassTable {
        ClassTable::default()
    }

    fn down() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -1.0)
    }

    #[test]
    fn empty_floor_is_all_safe() {
        let (_, truth) = build_scene(&SceneSpec::default(), &table()).unwrap();
        assert_eq!((truth.width, truth.height), (100, 100));
        assert!(truth.classes.iter().all(|&c| c == CellClass::Safe));
    }

    #[test]
    fn box_footprint_is_unsafe() {
        let spec = SceneSpec {
            obstacles: vec![BoxSpec {
                center: [5.0, 5.0],
                size: [1.0, 1.0, 0.5],
                class: 2,
            }],
            ..Default::default()
        };
        let (scene, truth) = build_scene(&spec, &table()).unwrap();
        for r in 45..55 {
            for c in 45..55 {
                assert_eq!(truth.class(c, r), CellClass::Unsafe);
            }
        }
        // a 0.115 m margin reaches two cells out, not three
        assert_eq!(truth.class(43, 50), CellClass::Unsafe);
        assert_eq!(truth.class(42, 50), CellClass::Safe);
        assert_eq!(truth.class(56, 50), CellClass::Unsafe);
        assert_eq!(truth.class(57, 50), CellClass::Safe);
        let unsafe_n = truth
            .classes
            .iter()
            .filter(|&&c| c == CellClass::Unsafe)
            .count();
        assert_eq!(unsafe_n, 14 * 14);
        assert_eq!(scene.surface_at(5.0, 5.0), Some((0.5, 2)));
        assert_eq!(scene.surface_at(1.0, 1.0), Some((0.0, 0)));
        assert_eq!(scene.surface_at(-1.0, 1.0), None);
    }

    #[test]
    fn ramps_follow_the_slope_limit() {
        let ramp = |tilt| SceneSpec {
            ramps: vec![RampSpec {
                center: [5.0, 5.0],
                size: [2.0, 2.0],
                tilt_deg: tilt,
                class: 0,
            }],
            ..Default::default()
        };
        let (scene, steep) = build_scene(&ramp(20.0), &table()).unwrap();
        assert_eq!(steep.class(50, 50), CellClass::Unsafe);
        assert_eq!(steep.class(41, 50), CellClass::Unsafe);
        assert_eq!(steep.class(39, 50), CellClass::Safe);
        assert_abs_diff_eq!(
            scene.surface_at(5.0, 5.0).unwrap().0,
            20f64.to_radians().tan(),
            epsilon = 1e-12
        );
        let (_, gentle) = build_scene(&ramp(10.0), &table()).unwrap();
        assert!(gentle.classes.iter().all(|&c| c == CellClass::Safe));
        let unsafe_class = SceneSpec {
            ramps: vec![RampSpec {
                center: [5.0, 5.0],
                size: [2.0, 2.0],
                tilt_deg: 5.0,
                class: 4,
            }],
            ..Default::default()
        };
        assert_eq!(
            build_scene(&unsafe_class, &table())
                .unwrap()
                .1
                .class(50, 50),
            CellClass::Unsafe
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let overlapping = SceneSpec {
            obstacles: vec![
                BoxSpec {
                    center: [5.0, 5.0],
                    size: [1.0, 1.0, 0.5],
                    class: 2,
                },
                BoxSpec {
                    center: [5.5, 5.0],
                    size: [1.0, 1.0, 0.8],
                    class: 2,
                },
            ],
            ..Default::default()
        };
        assert!(matches!(
            build_scene(&overlapping, &table()),
            Err(Error::InvalidArgument(_))
        ));
        let outside = SceneSpec {
            obstacles: vec![BoxSpec {
                center: [9.9, 5.0],
                size: [1.0, 1.0, 0.5],
                class: 2,
            }],
            ..Default::default()
        };
        assert!(build_scene(&outside, &table()).is_err());
        let steep = SceneSpec {
            ramps: vec![RampSpec {
                center: [5.0, 5.0],
                size: [1.0, 1.0],
                tilt_deg: 90.0,
                class: 0,
            }],
            ..Default::default()
        };
        assert!(build_scene(&steep, &table()).is_err());
        let crowded = SceneSpec {
            extent: [0.0, 0.0, 3.0, 3.0],
            random_boxes: RandomBoxes {
                count: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(build_scene(&crowded, &table()).is_err());
    }

    #[test]
    fn random_boxes_are_deterministic_and_separated() {
        let spec = SceneSpec {
            random_boxes: RandomBoxes {
                count: 6,
                ..Default::default()
            },
            rng_seed: 3,
            ..Default::default()
        };
        let (a, ta) = build_scene(&spec, &table()).unwrap();
        let (b, tb) = build_scene(&spec, &table()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.boxes().len(), 6);
        let rects: Vec<Rect> = a
            .boxes()
            .iter()
            .map(|b| footprint(b.center, b.size[0], b.size[1]))
            .collect();
        for i in 0..rects.len() {
            assert!(inside(&rects[i], &[1.0, 1.0, 9.0, 9.0]));
            for j in 0..i {
                assert!(!overlaps(&rects[i], &rects[j], 1.0));
            }
            let h = a.boxes()[i].size[2];
            assert!((0.3..=1.0).contains(&h));
        }
        let other = SceneSpec {
            rng_seed: 4,
            ..spec
        };
        assert_ne!(build_scene(&other, &table()).unwrap().0, a);
    }

    #[test]
    fn ray_casting() {
        let spec = SceneSpec {
            obstacles: vec![BoxSpec {
                center: [5.0, 5.0],
                size: [1.0, 1.0, 0.5],
                class: 2,
            }],
            ramps: vec![RampSpec {
                center: [2.0, 2.0],
                size: [2.0, 2.0],
                tilt_deg: 45.0,
                class: 0,
            }],
            ..Default::default()
        };
        let (scene, _) = build_scene(&spec, &table()).unwrap();
        assert_eq!(
            scene.cast(&Point3::new(5.0, 5.0, 3.0), &down()),
            Some((2.5, 2))
        );
        assert_eq!(
            scene.cast(&Point3::new(8.0, 8.0, 3.0), &down()),
            Some((3.0, 0))
        );
        let (t, c) = scene.cast(&Point3::new(2.5, 2.0, 3.0), &down()).unwrap();
        assert_abs_diff_eq!(t, 1.5, epsilon = 1e-12);
        assert_eq!(c, 0);
        // grazing the box side from outside the footprint hits the floor
        assert_eq!(
            scene.cast(&Point3::new(4.0, 5.0, 3.0), &down()),
            Some((3.0, 0))
        );
        // slanted ray hitting the box wall
        let dir = Vector3::new(1.0, 0.0, -1.0);
        let (t, c) = scene.cast(&Point3::new(4.0, 5.0, 0.7), &dir).unwrap();
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-12);
        assert_eq!(c, 2);
        assert_eq!(scene.cast(&Point3::new(-5.0, -5.0, 3.0), &down()), None);
        assert_eq!(
            scene.cast(&Point3::new(5.0, 5.0, 3.0), &Vector3::new(0.0, 0.0, 1.0)),
            None
        );
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = SceneSpec {
            extent: [-5.0, -5.0, 5.0, 5.0],
            obstacles: vec![BoxSpec {
                center: [1.0, 1.0],
                size: [0.5, 0.6, 0.7],
                class: 2,
            }],
            ramps: vec![RampSpec {
                center: [-2.0, -2.0],
                size: [1.0, 1.0],
                tilt_deg: 20.0,
                class: 0,
            }],
            random_boxes: RandomBoxes {
                count: 2,
                ..Default::default()
            },
            rng_seed: 9,
            ..Default::default()
        };
        let kv = KvFile::parse("scene.txt", &spec.to_text()).unwrap();
        assert_eq!(SceneSpec::from_kv(&kv).unwrap(), spec);
    }

    #[test]
    fn spec_parse_errors_name_the_line() {
        let kv = KvFile::parse("scene.txt", "extent=0 0 10 10\nbox=1 2 3\n").unwrap();
        let err = SceneSpec::from_kv(&kv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let kv = KvFile::parse("scene.txt", "# c\nwalls=3\n").unwrap();
        assert!(matches!(
            SceneSpec::from_kv(&kv).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }
}
