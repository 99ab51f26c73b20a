//! Synthetic dynamic scenes: procedural object templates, scripted planar
//! motion, an orbiting camera, depth rendering and ground truth.

mod render;
mod scenes;
mod script;
mod templates;

pub use render::{
    canonical_center, ground_truth_noc, render_depth, render_sequence, visible_mask, GroundTruthFrame,
    GroundTruthObject, PosedNoc, RenderedFrame, Scene,
};
pub use scenes::{generate_scene, look_at, MotionProfile, SceneParams};
pub use script::{floor_placement, posed_box, PlanarMotion, SceneScript, ScriptObject, SCRIPT_VERSION};
pub use templates::{library, template, template_by_name, ObjectTemplate, CLASS_NAMES, NUM_CLASSES};
