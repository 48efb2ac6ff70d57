//! One-off scan of a scene that records the best interaction pose for every
//! immovable object and where each movable object can be reached from.

use super::geom::{Horizon, Rotation, ScenePose};
use super::observe::{detect_from, INTERACT_RANGE};
use super::scene::{Location, SceneState};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PRESEARCH_VERSION: &str = "scene/1";

/// Poses closer than this (in cells) are rejected.
pub const MIN_STAND_DIST: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    /// Containing receptacle at scan time, if any.
    pub receptacle: Option<String>,
    pub pose: ScenePose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresearchMap {
    pub version: String,
    /// Receptacles and fixtures → best interaction pose.
    pub receptacles: BTreeMap<String, ScenePose>,
    /// Movable objects → containing receptacle and pose.
    pub objects: BTreeMap<String, ObjectRecord>,
    /// Objects for which no pose satisfied the interaction constraints.
    pub unreachable: Vec<String>,
}

impl PresearchMap {
    pub fn pose_of(&self, id: &str) -> Option<&ScenePose> {
        self.receptacles.get(id).or_else(|| self.objects.get(id).map(|r| &r.pose))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.receptacles.contains_key(id) || self.objects.contains_key(id)
    }
}

/// Best pose for seeing `id` in `view`, among reachable poses within
/// interaction range and at least [`MIN_STAND_DIST`] away.
fn best_pose(view: &SceneState, id: &str) -> Option<ScenePose> {
    let (target, _) = view.placement(id)?;
    let mut best: Option<(f64, ScenePose)> = None;
    for &cell in &view.grid.reachable {
        let d = cell.dist(target);
        if !(MIN_STAND_DIST..=INTERACT_RANGE).contains(&d) {
            continue;
        }
        for rotation in Rotation::ALL {
            for horizon in Horizon::ALL {
                let pose = ScenePose { cell, rotation, horizon };
                let Some(det) = detect_from(view, &pose, id) else {
                    continue;
                };
                let area = det.bbox.area();
                // strict > keeps the first pose in (cell, rotation, horizon) order on ties
                if best.as_ref().is_none_or(|(a, _)| area > *a) {
                    best = Some((area, pose));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

pub fn presearch_map(state: &SceneState) -> PresearchMap {
    // Scan with every openable receptacle opened so contents are visible.
    let mut view = state.clone();
    for obj in view.objects.values_mut() {
        if obj.attrs.is_receptacle && obj.attrs.openable {
            obj.attrs.is_open = true;
        }
    }
    let mut map = PresearchMap {
        version: PRESEARCH_VERSION.to_string(),
        receptacles: BTreeMap::new(),
        objects: BTreeMap::new(),
        unreachable: Vec::new(),
    };
    for obj in state.objects.values() {
        if obj.attrs.pickupable {
            continue;
        }
        match best_pose(&view, &obj.id) {
            Some(p) => {
                map.receptacles.insert(obj.id.clone(), p);
            }
            None => map.unreachable.push(obj.id.clone()),
        }
    }
    for obj in state.objects.values().filter(|o| o.attrs.pickupable) {
        let receptacle = match &obj.location {
            Location::Held => continue,
            Location::Floor { .. } => None,
            Location::In { receptacle } => Some(receptacle.clone()),
        };
        match best_pose(&view, &obj.id) {
            Some(pose) => {
                map.objects.insert(obj.id.clone(), ObjectRecord { receptacle, pose });
            }
            None => map.unreachable.push(obj.id.clone()),
        }
    }
    map.unreachable.sort();
    map
}
