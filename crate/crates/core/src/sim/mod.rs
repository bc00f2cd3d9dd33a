//! Synthetic scenes, flights and ground truth for end-to-end runs.

pub mod eval;
pub mod render;
pub mod scene;
pub mod trajectory;

pub use eval::{evaluate_class_map, evaluate_map, EvalReport};
pub use render::{render_frame, FrameBundle, RenderOptions};
pub use scene::{build_scene, BoxSpec, GroundTruthMap, RampSpec, RandomBoxes, Scene, SceneSpec};
pub use trajectory::{downward_pose, generate_trajectory, Pattern, Pose, TrajectorySpec};
