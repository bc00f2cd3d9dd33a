//! Fully resolved run parameters: defaults, then a key=value file, then flags.

use std::fmt::Write as _;
use std::path::Path;

use safeland_core::cloud::PipelineParams;
use safeland_core::geometry::{CameraConfig, CameraIntrinsics, RigidTransform};
use safeland_core::grid::GridParams;
use safeland_core::io::KvFile;
use safeland_core::selector::SelectorConfig;
use safeland_core::{Error, Result};

/// Camera used when rendering simulated datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimCamera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    /// Label camera position along the depth camera's +x axis, m.
    pub rgb_offset: f64,
}

impl Default for SimCamera {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fx: 380.0,
            fy: 380.0,
            rgb_offset: 0.03,
        }
    }
}

impl SimCamera {
    pub fn config(&self) -> Result<CameraConfig> {
        Ok(CameraConfig {
            intrinsics: CameraIntrinsics::new(
                self.fx,
                self.fy,
                (self.width as f64 - 1.0) / 2.0,
                (self.height as f64 - 1.0) / 2.0,
                self.width,
                self.height,
            )?,
            baseline: None,
            sl_to_rgb: RigidTransform::from_translation([-self.rgb_offset, 0.0, 0.0]),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineParams,
    pub grid: GridParams,
    /// Map cell size, m.
    pub resolution: f64,
    pub selector: SelectorConfig,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub label_corruption: f64,
    pub noise_sigma: f64,
    pub camera: SimCamera,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineParams::default(),
            grid: GridParams::default(),
            resolution: 0.1,
            selector: SelectorConfig::default(),
            seed: 0,
            threads: 0,
            label_corruption: 0.0,
            noise_sigma: 0.01,
            camera: SimCamera::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "leaf_size",
    "sor_neighbors",
    "sor_std_mult",
    "mls_radius",
    "ransac_dist",
    "ransac_iters",
    "slope_max_deg",
    "rough_max",
    "min_plane_points",
    "l_hit",
    "l_miss",
    "l_min",
    "l_max",
    "p_safe",
    "p_unsafe",
    "resolution",
    "alpha",
    "beta",
    "drone_diameter",
    "patch_scale",
    "clearance_cap",
    "seed",
    "threads",
    "label_corruption",
    "noise_sigma",
    "camera_width",
    "camera_height",
    "camera_fx",
    "camera_fy",
    "camera_rgb_offset",
];

/// Command-line overrides; `None` leaves the value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub resolution: Option<f64>,
    /// Patch side in meters.
    pub patch_size: Option<f64>,
    pub slope_max_deg: Option<f64>,
    pub rough_max: Option<f64>,
    pub leaf: Option<f64>,
    pub p_safe: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub label_corruption: Option<f64>,
}

/// Sets both weights when only one is given.
fn set_weights(sel: &mut SelectorConfig, alpha: Option<f64>, beta: Option<f64>) {
    match (alpha, beta) {
        (Some(a), Some(b)) => (sel.alpha, sel.beta) = (a, b),
        (Some(a), None) => (sel.alpha, sel.beta) = (a, 1.0 - a),
        (None, Some(b)) => (sel.alpha, sel.beta) = (1.0 - b, b),
        (None, None) => {}
    }
}

impl RunConfig {
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.reject_unknown(CONFIG_KEYS)?;
        let d = Self::default();
        let (p, g, s, c) = (d.pipeline, d.grid, d.selector, d.camera);
        let mut cfg = Self {
            pipeline: PipelineParams {
                leaf_size: kv.get_or("leaf_size", p.leaf_size)?,
                sor_neighbors: kv.get_or("sor_neighbors", p.sor_neighbors)?,
                sor_std_mult: kv.get_or("sor_std_mult", p.sor_std_mult)?,
                mls_radius: kv.get_or("mls_radius", p.mls_radius)?,
                ransac_dist: kv.get_or("ransac_dist", p.ransac_dist)?,
                ransac_iters: kv.get_or("ransac_iters", p.ransac_iters)?,
                slope_max_deg: kv.get_or("slope_max_deg", p.slope_max_deg)?,
                rough_max: kv.get_or("rough_max", p.rough_max)?,
                min_plane_points: kv.get_or("min_plane_points", p.min_plane_points)?,
            },
            grid: GridParams {
                l_hit: kv.get_or("l_hit", g.l_hit)?,
                l_miss: kv.get_or("l_miss", g.l_miss)?,
                l_min: kv.get_or("l_min", g.l_min)?,
                l_max: kv.get_or("l_max", g.l_max)?,
                p_safe: kv.get_or("p_safe", g.p_safe)?,
                p_unsafe: kv.get_or("p_unsafe", g.p_unsafe)?,
            },
            resolution: kv.get_or("resolution", d.resolution)?,
            selector: SelectorConfig {
                drone_diameter: kv.get_or("drone_diameter", s.drone_diameter)?,
                patch_scale: kv.get_or("patch_scale", s.patch_scale)?,
                clearance_cap: kv.get_or("clearance_cap", s.clearance_cap)?,
                ..s
            },
            seed: kv.get_or("seed", d.seed)?,
            threads: kv.get_or("threads", d.threads)?,
            label_corruption: kv.get_or("label_corruption", d.label_corruption)?,
            noise_sigma: kv.get_or("noise_sigma", d.noise_sigma)?,
            camera: SimCamera {
                width: kv.get_or("camera_width", c.width)?,
                height: kv.get_or("camera_height", c.height)?,
                fx: kv.get_or("camera_fx", c.fx)?,
                fy: kv.get_or("camera_fy", c.fy)?,
                rgb_offset: kv.get_or("camera_rgb_offset", c.rgb_offset)?,
            },
        };
        set_weights(&mut cfg.selector, kv.get("alpha")?, kv.get("beta")?);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvFile::load(path)?)
    }

    /// Defaults, then the optional file, then flags; validated.
    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        set_weights(&mut self.selector, o.alpha, o.beta);
        if let Some(v) = o.resolution {
            self.resolution = v;
        }
        if let Some(v) = o.patch_size {
            self.selector.patch_scale = v / self.selector.drone_diameter;
        }
        if let Some(v) = o.slope_max_deg {
            self.pipeline.slope_max_deg = v;
        }
        if let Some(v) = o.rough_max {
            self.pipeline.rough_max = v;
        }
        if let Some(v) = o.leaf {
            self.pipeline.leaf_size = v;
        }
        if let Some(v) = o.p_safe {
            self.grid.p_safe = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.label_corruption {
            self.label_corruption = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.grid.validate()?;
        self.selector.validate()?;
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(0.0..=1.0).contains(&self.label_corruption) {
            return Err(Error::InvalidArgument(
                "label_corruption must lie in [0, 1]".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise_sigma must be non-negative".into(),
            ));
        }
        self.camera.config()?;
        Ok(())
    }

    /// Every key with its resolved value; loading it back gives `self`.
    pub fn to_text(&self) -> String {
        let (p, g, s, c) = (&self.pipeline, &self.grid, &self.selector, &self.camera);
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("leaf_size", &p.leaf_size);
        put("sor_neighbors", &p.sor_neighbors);
        put("sor_std_mult", &p.sor_std_mult);
        put("mls_radius", &p.mls_radius);
        put("ransac_dist", &p.ransac_dist);
        put("ransac_iters", &p.ransac_iters);
        put("slope_max_deg", &p.slope_max_deg);
        put("rough_max", &p.rough_max);
        put("min_plane_points", &p.min_plane_points);
        put("l_hit", &g.l_hit);
        put("l_miss", &g.l_miss);
        put("l_min", &g.l_min);
        put("l_max", &g.l_max);
        put("p_safe", &g.p_safe);
        put("p_unsafe", &g.p_unsafe);
        put("resolution", &self.resolution);
        put("alpha", &s.alpha);
        put("beta", &s.beta);
        put("drone_diameter", &s.drone_diameter);
        put("patch_scale", &s.patch_scale);
        put("clearance_cap", &s.clearance_cap);
        put("seed", &self.seed);
        put("threads", &self.threads);
        put("label_corruption", &self.label_corruption);
        put("noise_sigma", &self.noise_sigma);
        put("camera_width", &c.width);
        put("camera_height", &c.height);
        put("camera_fx", &c.fx);
        put("camera_fy", &c.fy);
        put("camera_rgb_offset", &c.rgb_offset);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            alpha: Some(0.8),
            patch_size: Some(0.6),
            seed: Some(42),
            ..Default::default()
        });
        let back =
            RunConfig::from_kv(&KvFile::parse("config.txt", &cfg.to_text()).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!((cfg.selector.beta - 0.2).abs() < 1e-12);
        assert_eq!(cfg.selector.patch_side(cfg.resolution), 6);
    }

    #[test]
    fn defaults_match_the_reference_setup() {
        let cfg = RunConfig::default();
        assert_eq!((cfg.selector.alpha, cfg.selector.beta), (0.65, 0.35));
        assert_eq!(cfg.selector.patch_side(cfg.resolution), 5);
        assert_eq!(cfg.pipeline.slope_max_deg, 15.0);
        assert_eq!(cfg.pipeline.rough_max, 0.05);
        assert_eq!(cfg.pipeline.leaf_size, 0.1);
        assert_eq!(cfg.resolution, 0.1);
    }

    #[test]
    fn unknown_keys_and_bad_weights_are_rejected() {
        let kv = KvFile::parse("c.txt", "alpha=0.5\ngamma=1\n").unwrap();
        assert!(matches!(
            RunConfig::from_kv(&kv),
            Err(Error::Parse { line: 2, .. })
        ));
        let o = Overrides {
            alpha: Some(0.5),
            beta: Some(0.6),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &o).is_err());
        let only_beta = RunConfig::resolve(
            None,
            &Overrides {
                beta: Some(0.25),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(only_beta.selector.alpha, 0.75);
    }
}
