//! Deterministic household grid world.
//!
//! The agent acts through [`AtomicAction`]s; [`step`] is a pure function of
//! `(state, action)` given the scene's [`PresearchMap`], and failed actions
//! leave the state untouched.

mod builder;
pub mod catalog;
mod generate;
mod geom;
mod observe;
mod presearch;
mod scene;
mod step;

pub use builder::SceneBuilder;
pub use generate::{generate_scene, ClassCount, GenerateError, Partition, SceneConfig, Style, CONFIG_VERSION};
pub use geom::{BBox, Cell, HeightBand, Horizon, Rotation, ScenePose, CELL_SIZE};
pub use observe::{detect_from, distance_to, observe, observe_from, view_geometry, Detection, Observation, INTERACT_RANGE, VIEW_RANGE};
pub use presearch::{presearch_map, ObjectRecord, PresearchMap, MIN_STAND_DIST};
pub use scene::{Grid, Location, ObjectAttrs, ObjectInstance, SceneInvariantError, SceneState, Temperature, SCENE_VERSION};
pub use step::{
    atomic_arity, canonical_atomic_name, class_affords, navigation_pose, step, ActionError, AtomicAction, WorldEvent,
    ATOMIC_NAMES,
};

#[cfg(test)]
mod tests;
