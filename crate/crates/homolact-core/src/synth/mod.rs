//! Synthetic multi-view data: cameras, random rigs and procedural 3D actions.

mod action;
mod camera;

pub use action::{bounding_radius, centroid, procedural_action, ActionKind, SubjectParams, MIN_FLEX};
pub use camera::{project, random_rig, CameraKind, CameraModel, RigSpec};
