//! Downward-looking camera paths over a scene.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::io::KvFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    FigureEight,
    Lawnmower,
    Hover,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::FigureEight => "figure-eight",
            Pattern::Lawnmower => "lawnmower",
            Pattern::Hover => "hover",
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "figure-eight" => Ok(Pattern::FigureEight),
            "lawnmower" => Ok(Pattern::Lawnmower),
            "hover" => Ok(Pattern::Hover),
            _ => Err(Error::invalid(format!("unknown pattern `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub pattern: Pattern,
    pub altitude: f64,
    /// Mean ground speed, m/s.
    pub speed: f64,
    pub frame_rate: f64,
    pub duration: f64,
    /// Fraction of the half-extent swept by the pattern, about the centre.
    pub coverage: f64,
    /// Lawnmower row spacing, m.
    pub row_spacing: f64,
    pub yaw: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            pattern: Pattern::FigureEight,
            altitude: 3.0,
            speed: 1.0,
            frame_rate: 2.0,
            duration: 30.0,
            coverage: 0.6,
            row_spacing: 1.0,
            yaw: 0.0,
        }
    }
}

const TRAJECTORY_KEYS: &[&str] = &[
    "pattern",
    "altitude",
    "speed",
    "frame_rate",
    "duration",
    "coverage",
    "row_spacing",
    "yaw",
];

impl TrajectorySpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.reject_unknown(TRAJECTORY_KEYS)?;
        let d = Self::default();
        let pattern = match kv.entry("pattern") {
            None => d.pattern,
            Some(e) => e
                .value
                .parse()
                .map_err(|err: Error| Error::parse(kv.path(), e.line, err.to_string()))?,
        };
        let spec = Self {
            pattern,
            altitude: kv.get_or("altitude", d.altitude)?,
            speed: kv.get_or("speed", d.speed)?,
            frame_rate: kv.get_or("frame_rate", d.frame_rate)?,
            duration: kv.get_or("duration", d.duration)?,
            coverage: kv.get_or("coverage", d.coverage)?,
            row_spacing: kv.get_or("row_spacing", d.row_spacing)?,
            yaw: kv.get_or("yaw", d.yaw)?,
        };
        spec.validate()
            .map_err(|e| Error::parse(kv.path(), 0, e.to_string()))?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pattern={}", self.pattern.name());
        let _ = writeln!(s, "altitude={}", self.altitude);
        let _ = writeln!(s, "speed={}", self.speed);
        let _ = writeln!(s, "frame_rate={}", self.frame_rate);
        let _ = writeln!(s, "duration={}", self.duration);
        let _ = writeln!(s, "coverage={}", self.coverage);
        let _ = writeln!(s, "row_spacing={}", self.row_spacing);
        let _ = writeln!(s, "yaw={}", self.yaw);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.altitude > 0.0 && self.altitude.is_finite()) {
            return Err(Error::invalid("altitude must be positive"));
        }
        if !(self.frame_rate > 0.0
            && self.speed > 0.0
            && self.duration >= 0.0
            && self.row_spacing > 0.0)
        {
            return Err(Error::invalid(
                "frame_rate, speed and row_spacing must be positive, duration non-negative",
            ));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::invalid("coverage must lie in (0, 1]"));
        }
        if !self.yaw.is_finite() {
            return Err(Error::invalid("yaw must be finite"));
        }
        Ok(())
    }

    pub fn pose_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub timestamp: f64,
    /// Maps camera coordinates into the world.
    pub world_from_camera: RigidTransform,
}

/// Camera looking straight down: camera z to world -z, camera x along the
/// heading.
pub fn downward_pose(x: f64, y: f64, z: f64, yaw: f64) -> RigidTransform {
    let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).into_inner() * flip;
    RigidTransform::new(r, Vector3::new(x, y, z)).expect("rotation is orthonormal")
}

/// Ground track of a pattern as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct Path2 {
    kind: PathKind,
    speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum PathKind {
    Still([f64; 2]),
    Lissajous {
        center: [f64; 2],
        amp: [f64; 2],
        length: f64,
    },
    Polyline {
        vertices: Vec<[f64; 2]>,
    },
}

fn lissajous(center: [f64; 2], amp: [f64; 2], th: f64) -> [f64; 2] {
    [
        center[0] + amp[0] * th.sin(),
        center[1] + amp[1] * (2.0 * th).sin(),
    ]
}

impl Path2 {
    pub fn new(spec: &TrajectorySpec, extent: [f64; 4]) -> Self {
        let center = [(extent[0] + extent[2]) / 2.0, (extent[1] + extent[3]) / 2.0];
        let half = [
            spec.coverage * (extent[2] - extent[0]) / 2.0,
            spec.coverage * (extent[3] - extent[1]) / 2.0,
        ];
        let kind = match spec.pattern {
            Pattern::Hover => PathKind::Still(center),
            Pattern::FigureEight => {
                // x = sin t, y = sin t cos t = sin(2t) / 2, scaled to fill both half-extents
                let n = 4096;
                let mut length = 0.0;
                let mut prev = lissajous(center, half, 0.0);
                for i in 1..=n {
                    let p = lissajous(center, half, TAU * i as f64 / n as f64);
                    length += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
                    prev = p;
                }
                PathKind::Lissajous {
                    center,
                    amp: half,
                    length,
                }
            }
            Pattern::Lawnmower => {
                let (x0, x1) = (center[0] - half[0], center[0] + half[0]);
                let y0 = center[1] - half[1];
                let rows = (2.0 * half[1] / spec.row_spacing + 1e-9).floor() as usize + 1;
                let mut vertices = Vec::with_capacity(2 * rows);
                for k in 0..rows {
                    let y = y0 + k as f64 * spec.row_spacing;
                    if k % 2 == 0 {
                        vertices.extend([[x0, y], [x1, y]]);
                    } else {
                        vertices.extend([[x1, y], [x0, y]]);
                    }
                }
                PathKind::Polyline { vertices }
            }
        };
        Self {
            kind,
            speed: spec.speed,
        }
    }

    /// Time for one full pass of the pattern; zero for hover.
    pub fn period(&self) -> f64 {
        match &self.kind {
            PathKind::Still(_) => 0.0,
            PathKind::Lissajous { length, .. } => length / self.speed,
            PathKind::Polyline { vertices } => {
                vertices.windows(2).map(|w| dist(w[0], w[1])).sum::<f64>() / self.speed
            }
        }
    }

    /// Position at time `t`. The figure-eight repeats; the lawnmower stops
    /// at its last vertex.
    pub fn at(&self, t: f64) -> [f64; 2] {
        match &self.kind {
            PathKind::Still(c) => *c,
            PathKind::Lissajous {
                center,
                amp,
                length,
            } => lissajous(*center, *amp, TAU * t * self.speed / length),
            PathKind::Polyline { vertices } => {
                let mut s = t * self.speed;
                for w in vertices.windows(2) {
                    let l = dist(w[0], w[1]);
                    if s <= l && l > 0.0 {
                        let f = s / l;
                        return [
                            w[0][0] + f * (w[1][0] - w[0][0]),
                            w[0][1] + f * (w[1][1] - w[0][1]),
                        ];
                    }
                    s -= l;
                }
                *vertices.last().expect("at least one row")
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Poses sampled at `frame_rate` from t = 0.
pub fn generate_trajectory(spec: &TrajectorySpec, extent: [f64; 4]) -> Result<Vec<Pose>> {
    spec.validate()?;
    let path = Path2::new(spec, extent);
    Ok((0..spec.pose_count())
        .map(|i| {
            let t = i as f64 / spec.frame_rate;
            let [x, y] = path.at(t);
            Pose {
                timestamp: t,
                world_from_camera: downward_pose(x, y, spec.altitude, spec.yaw),
            }
        })
        .collect())
}
