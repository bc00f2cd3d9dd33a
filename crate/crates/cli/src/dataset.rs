//! On-disk dataset layout shared by `simulate` and `process`.
//!
//! ```text
//! <dataset>/intrinsics.txt      camera model (key=value)
//! <dataset>/classes.txt         class names and the safe set
//! <dataset>/truth.pgm, .hdr     ground truth, when simulated
//! <dataset>/000000/depth.pgm    16-bit millimeters (or disparity.pgm, 1/16 px)
//! <dataset>/000000/labels.pgm   8-bit class ids
//! <dataset>/000000/pose.txt     timestamp= and world_from_camera= (12 numbers)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use safeland_core::geometry::{disparity_to_depth, CameraConfig, DepthImage, RigidTransform};
use safeland_core::io::{kv::format_transform, KvFile};
use safeland_core::semantics::{ClassTable, LabelImage};
use safeland_core::sim::FrameBundle;
use safeland_core::{Error, Result};

pub const INTRINSICS: &str = "intrinsics.txt";
pub const CLASSES: &str = "classes.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub dir: PathBuf,
    pub timestamp: f64,
    pub world_from_camera: RigidTransform,
}

pub fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn frame_dir(dataset: &Path, index: usize) -> PathBuf {
    dataset.join(format!("{index:06}"))
}

pub fn write_frame(
    dir: &Path,
    bundle: &FrameBundle,
    timestamp: f64,
    world_from_camera: &RigidTransform,
) -> Result<()> {
    create_dir(dir)?;
    bundle
        .depth
        .to_millimeter_pgm()
        .write(dir.join("depth.pgm"))?;
    bundle.labels.to_pgm().write(dir.join("labels.pgm"))?;
    write_text(
        &dir.join("pose.txt"),
        &format!(
            "timestamp={timestamp:.6}\nworld_from_camera={}\n",
            format_transform(world_from_camera)
        ),
    )
}

fn read_pose(dir: &Path) -> Result<FrameRecord> {
    let path = dir.join("pose.txt");
    let kv = KvFile::load(&path)?;
    kv.reject_unknown(&["timestamp", "world_from_camera"])?;
    let timestamp: f64 = kv.require("timestamp")?;
    let world_from_camera = kv
        .transform("world_from_camera")?
        .ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: 0,
            msg: "missing `world_from_camera`".into(),
        })?;
    Ok(FrameRecord {
        dir: dir.to_path_buf(),
        timestamp,
        world_from_camera,
    })
}

/// Frame directories (six-digit names) ordered by timestamp, then name.
pub fn list_frames(dataset: &Path) -> Result<Vec<FrameRecord>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dataset)
        .map_err(|e| io_err(dataset, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.len() == 6 && n.bytes().all(|b| b.is_ascii_digit()))
        })
        .collect();
    dirs.sort();
    let mut frames = dirs
        .iter()
        .map(|d| read_pose(d))
        .collect::<Result<Vec<_>>>()?;
    frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(frames)
}

pub fn load_camera(dataset: &Path) -> Result<CameraConfig> {
    CameraConfig::load(dataset.join(INTRINSICS))
}

/// `classes.txt` when present, the default table otherwise.
pub fn load_classes(dataset: &Path) -> Result<ClassTable> {
    let path = dataset.join(CLASSES);
    if path.exists() {
        ClassTable::load(path)
    } else {
        Ok(ClassTable::default())
    }
}

/// Metric depth of a frame, converting disparity when that is what is stored.
pub fn load_depth(frame: &FrameRecord, camera: &CameraConfig) -> Result<DepthImage> {
    let disparity = frame.dir.join("disparity.pgm");
    if disparity.exists() {
        let baseline = camera.baseline.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{} needs a baseline in {INTRINSICS}",
                disparity.display()
            ))
        })?;
        disparity_to_depth(
            &DepthImage::load_disparity_pgm(&disparity)?,
            &camera.intrinsics,
            baseline,
        )
    } else {
        DepthImage::load_millimeter_pgm(frame.dir.join("depth.pgm"))
    }
}

pub fn load_labels(frame: &FrameRecord) -> Result<LabelImage> {
    LabelImage::load_pgm(frame.dir.join("labels.pgm"))
}
