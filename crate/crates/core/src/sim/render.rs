//! Pinhole depth and label rendering by ray casting.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{
    CameraConfig, CameraIntrinsics, DepthImage, DepthKind, Point3, RigidTransform,
};
use crate::semantics::{ClassId, LabelImage, BACKGROUND, CLASS_COUNT};
use crate::sim::scene::Scene;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    /// Metric depth along the optical axis of the depth camera; 0 = no return.
    pub depth: DepthImage,
    /// Classes as seen by the label camera.
    pub labels: LabelImage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Standard deviation of additive depth noise, m.
    pub noise_sigma: f64,
    /// Fraction of label pixels replaced by a random other class.
    pub label_corruption: f64,
    pub seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.01,
            label_corruption: 0.0,
            seed: 0,
        }
    }
}

fn cast_image<T>(
    scene: &Scene,
    world_from_cam: &RigidTransform,
    intr: &CameraIntrinsics,
    mut f: impl FnMut(Option<(f64, ClassId)>) -> T,
) -> Vec<T> {
    let r = world_from_cam.rotation();
    let o = Point3::from(*world_from_cam.translation());
    let mut out = Vec::with_capacity(intr.pixel_count());
    for v in 0..intr.height {
        for u in 0..intr.width {
            let ray = Vector3::new(
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            );
            // the ray has unit camera-z, so the hit distance is the depth
            out.push(f(scene.cast(&o, &(r * ray))));
        }
    }
    out
}

/// Renders one frame seen from the depth camera at `world_from_sl`. Labels
/// come from the label camera, which sits at `camera.sl_to_rgb` relative to
/// it and shares its intrinsics.
///
/// Depth noise and label corruption draw from separate streams of the same
/// seed, so changing the corruption rate leaves the depth image untouched.
pub fn render_frame(
    scene: &Scene,
    world_from_sl: &RigidTransform,
    camera: &CameraConfig,
    opts: &RenderOptions,
) -> Result<FrameBundle> {
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma must be non-negative"));
    }
    if !(0.0..=1.0).contains(&opts.label_corruption) {
        return Err(Error::invalid("label_corruption must lie in [0, 1]"));
    }
    let intr = &camera.intrinsics;
    let noise = Normal::new(0.0, opts.noise_sigma).expect("sigma checked above");
    let mut depth_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let depth = cast_image(scene, world_from_sl, intr, |hit| match hit {
        None => 0.0,
        Some((t, _)) => {
            let d = if opts.noise_sigma > 0.0 {
                t + noise.sample(&mut depth_rng)
            } else {
                t
            };
            d.max(0.0)
        }
    });

    let world_from_rgb = world_from_sl.compose(&camera.sl_to_rgb.inverse());
    let mut labels = cast_image(scene, &world_from_rgb, intr, |hit| {
        hit.map_or(BACKGROUND, |(_, c)| c)
    });
    if opts.label_corruption > 0.0 {
        let mut label_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        label_rng.set_stream(1);
        // every pixel consumes the same draws whatever the rate, so the pixels
        // flipped at a lower rate are a subset of those flipped at a higher one
        for c in &mut labels {
            let u: f64 = label_rng.random();
            let shift = label_rng.random_range(1..CLASS_COUNT as u8);
            if u < opts.label_corruption {
                *c = (*c + shift) % CLASS_COUNT as u8;
            }
        }
    }
    Ok(FrameBundle {
        depth: DepthImage::new(intr.width, intr.height, depth, DepthKind::MetricDepth)?,
        labels: LabelImage::new(intr.width, intr.height, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{depth_to_cloud, transform_cloud, Frame};
    use crate::semantics::ClassTable;
    use crate::sim::scene::{build_scene, BoxSpec, SceneSpec};
    use crate::sim::trajectory::downward_pose;
    use approx::assert_abs_diff_eq;

    fn camera() -> CameraConfig {
        CameraConfig {
            intrinsics: CameraIntrinsics::new(80.0, 80.0, 32.0, 24.0, 65, 49).unwrap(),
            baseline: None,
            sl_to_rgb: RigidTransform::identity(),
        }
    }

    fn scene(spec: SceneSpec) -> Scene {
        build_scene(&spec, &ClassTable::default()).unwrap().0
    }

    fn exact() -> RenderOptions {
        RenderOptions {
            noise_sigma: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn flat_floor_is_constant_depth() {
        let s = scene(SceneSpec::default());
        let f = render_frame(&s, &downward_pose(5.0, 5.0, 3.0, 0.0), &camera(), &exact()).unwrap();
        assert!(f.depth.values().iter().all(|&d| (d - 3.0).abs() < 1e-12));
        assert!(f.labels.labels().iter().all(|&c| c == 0));
    }

    #[test]
    fn box_under_centre() {
        let s = scene(SceneSpec {
            obstacles: vec![BoxSpec {
                center: [5.0, 5.0],
                size: [1.0, 1.0, 0.5],
                class: 2,
            }],
            ..Default::default()
        });
        let f = render_frame(&s, &downward_pose(5.0, 5.0, 3.0, 0.0), &camera(), &exact()).unwrap();
        assert_abs_diff_eq!(f.depth.get(32, 24), 2.5, epsilon = 1e-12);
        assert_eq!(f.labels.get(32, 24), 2);
        assert_abs_diff_eq!(f.depth.get(0, 0), 3.0, epsilon = 1e-12);
        assert_eq!(f.labels.get(0, 0), 0);
    }

    #[test]
    fn void_gives_no_returns() {
        let s = scene(SceneSpec::default());
        let f = render_frame(
            &s,
            &downward_pose(-50.0, -50.0, 3.0, 0.0),
            &camera(),
            &RenderOptions::default(),
        )
        .unwrap();
        assert!(f.depth.values().iter().all(|&d| d == 0.0));
        assert!(f.labels.labels().iter().all(|&c| c == BACKGROUND));
    }

    #[test]
    fn noisy_floor_back_projects_onto_the_floor() {
        let s = scene(SceneSpec::default());
        let pose = downward_pose(5.0, 5.0, 3.0, 0.4);
        let opts = RenderOptions {
            noise_sigma: 0.01,
            seed: 11,
            ..Default::default()
        };
        let f = render_frame(&s, &pose, &camera(), &opts).unwrap();
        let cloud = depth_to_cloud(&f.depth, &camera().intrinsics).unwrap();
        let world = transform_cloud(&cloud, &pose, Frame::World);
        let near = world.points().iter().filter(|p| p.z.abs() <= 0.03).count();
        assert!(
            near as f64 >= 0.99 * world.len() as f64,
            "{near} of {}",
            world.len()
        );
        let mean_z = world.points().iter().map(|p| p.z).sum::<f64>() / world.len() as f64;
        assert!(mean_z.abs() < 0.003);
    }

    #[test]
    fn seeded_rendering_is_reproducible() {
        let s = scene(SceneSpec::default());
        let pose = downward_pose(5.0, 5.0, 3.0, 0.0);
        let opts = RenderOptions {
            noise_sigma: 0.01,
            label_corruption: 0.1,
            seed: 5,
        };
        let a = render_frame(&s, &pose, &camera(), &opts).unwrap();
        let b = render_frame(&s, &pose, &camera(), &opts).unwrap();
        assert_eq!(a, b);
        let c = render_frame(&s, &pose, &camera(), &RenderOptions { seed: 6, ..opts }).unwrap();
        assert_ne!(a.depth, c.depth);
    }

    #[test]
    fn corruption_flips_the_requested_fraction() {
        let s = scene(SceneSpec::default());
        let pose = downward_pose(5.0, 5.0, 3.0, 0.0);
        let clean = render_frame(
            &s,
            &pose,
            &camera(),
            &RenderOptions {
                seed: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let opts = RenderOptions {
            label_corruption: 0.1,
            seed: 2,
            ..Default::default()
        };
        let dirty = render_frame(&s, &pose, &camera(), &opts).unwrap();
        assert_eq!(clean.depth, dirty.depth);
        let n = clean.labels.labels().len() as f64;
        let flipped = clean
            .labels
            .labels()
            .iter()
            .zip(dirty.labels.labels())
            .filter(|(a, b)| a != b)
            .count() as f64;
        // 3185 pixels: binomial sd is about 17, so allow five of them
        assert!(
            (flipped - 0.1 * n).abs() < 5.0 * (n * 0.09).sqrt(),
            "{flipped}"
        );
    }

    #[test]
    fn corruption_is_nested_across_rates() {
        let s = scene(SceneSpec::default());
        let pose = downward_pose(5.0, 5.0, 3.0, 0.0);
        let at = |rate| {
            render_frame(
                &s,
                &pose,
                &camera(),
                &RenderOptions {
                    label_corruption: rate,
                    seed: 8,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        let (lo, hi) = (at(0.05), at(0.1));
        for (a, b) in lo.labels.labels().iter().zip(hi.labels.labels()) {
            if *a != 0 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn label_camera_offset_shifts_labels() {
        let s = scene(SceneSpec {
            obstacles: vec![BoxSpec {
                center: [5.0, 5.0],
                size: [1.0, 1.0, 0.1],
                class: 2,
            }],
            ..Default::default()
        });
        let mut cam = camera();
        // label camera 1 m along the depth camera's +x, which is world +x here
        cam.sl_to_rgb = RigidTransform::from_translation([-1.0, 0.0, 0.0]);
        let f = render_frame(&s, &downward_pose(5.0, 5.0, 3.0, 0.0), &cam, &exact()).unwrap();
        assert!(f.depth.get(32, 24) < 3.0);
        assert_eq!(f.labels.get(32, 24), 0);
        // the box sits 1 m to the label camera's -x: u = 32 - 80 * 1 / 2.9
        assert_eq!(f.labels.get(5, 24), 2);
    }

    #[test]
    fn bad_options() {
        let s = scene(SceneSpec::default());
        let pose = downward_pose(5.0, 5.0, 3.0, 0.0);
        assert!(render_frame(
            &s,
            &pose,
            &camera(),
            &RenderOptions {
                label_corruption: 1.5,
                ..Default::default()
            }
        )
        .is_err());
        assert!(render_frame(
            &s,
            &pose,
            &camera(),
            &RenderOptions {
                noise_sigma: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
