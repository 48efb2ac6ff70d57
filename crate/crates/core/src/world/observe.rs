//! Egocentric perception: visibility rule and bounding-box projection.
//!
//! An object is visible when it is within [`VIEW_RANGE`] cells, inside the
//! 90° frustum around the agent's heading, not behind a wall, in the height
//! band selected by the camera horizon, and not inside a closed receptacle.
//! Box width and height shrink linearly with distance from a per-class base
//! size; contents are laid out inside their container's box.

use super::catalog;
use super::geom::{BBox, Cell, ScenePose};
use super::scene::{Location, SceneState};
use serde::{Deserialize, Serialize};

pub const VIEW_RANGE: f64 = 6.0;
/// Maximum distance (cells) for open/close/pickup/put/toggle/slice.
pub const INTERACT_RANGE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: String,
    pub class_name: String,
    pub bbox: BBox,
    /// Visible open/closed state for openable objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: ScenePose,
    pub detections: Vec<Detection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_class: Option<String>,
}

impl Observation {
    pub fn find(&self, id: &str) -> Option<&Detection> {
        self.detections.iter().find(|d| d.id == id)
    }
}

/// Forward distance, lateral offset and Euclidean distance of `target`
/// relative to the pose, or `None` when outside range, frustum or sight line.
pub fn view_geometry(state: &SceneState, pose: &ScenePose, target: Cell) -> Option<(f64, f64, f64)> {
    let dx = target.0 - pose.cell.0;
    let dy = target.1 - pose.cell.1;
    let (fx, fy) = pose.rotation.forward();
    let fwd = dx * fx + dy * fy;
    // lateral: positive to the agent's right
    let lat = dx * fy - dy * fx;
    if fwd <= 0 || lat.abs() > fwd {
        return None;
    }
    let dist = pose.cell.dist(target);
    if dist > VIEW_RANGE {
        return None;
    }
    if pose.cell.line_to(target).into_iter().any(|c| state.grid.is_wall(c)) {
        return None;
    }
    Some((fwd as f64, lat as f64, dist))
}

fn shrink(dist: f64) -> f64 {
    (VIEW_RANGE + 1.0 - dist) / VIEW_RANGE
}

fn standing_bbox(class_name: &str, fwd: f64, lat: f64, dist: f64) -> BBox {
    let (bw, bh) = catalog::lookup(class_name).map(|c| c.size).unwrap_or((0.1, 0.1));
    let s = shrink(dist);
    BBox::centered(0.5 + 0.5 * lat / fwd, 0.5, bw * s, bh * s).clamp_unit()
}

/// Box for a floor-standing object seen from `pose`, if visible.
fn floor_bbox(state: &SceneState, pose: &ScenePose, id: &str) -> Option<BBox> {
    let obj = state.object(id)?;
    let Location::Floor { cell, band } = obj.location else {
        return None;
    };
    if pose.horizon.band() != band {
        return None;
    }
    let (fwd, lat, dist) = view_geometry(state, pose, cell)?;
    Some(standing_bbox(&obj.class_name, fwd, lat, dist))
}

fn content_bbox(state: &SceneState, container_box: &BBox, container: &str, id: &str, dist: f64) -> BBox {
    let class_name = state.class_of(id).unwrap_or("");
    let (bw, bh) = catalog::lookup(class_name).map(|c| c.size).unwrap_or((0.1, 0.1));
    let s = shrink(dist);
    let cw = container_box.x1 - container_box.x0;
    let ch = container_box.y1 - container_box.y0;
    let w = (bw * s).min(cw * 0.3);
    let h = (bh * s).min(ch * 0.45);
    let k = state.contents(container).position(|o| o.id == id).unwrap_or(0);
    let tx = ((k % 3) as f64 + 0.5) / 3.0;
    let ty = (((k / 3) % 2) as f64 + 0.5) / 2.0;
    let x0 = container_box.x0 + tx * (cw - w);
    let y0 = container_box.y0 + ty * (ch - h);
    BBox::new(x0, y0, x0 + w, y0 + h)
}

/// Detection of a single object from `pose`, applying the full visibility rule.
pub fn detect_from(state: &SceneState, pose: &ScenePose, id: &str) -> Option<Detection> {
    let obj = state.object(id)?;
    let bbox = match &obj.location {
        Location::Held => return None,
        Location::Floor { .. } => floor_bbox(state, pose, id)?,
        Location::In { receptacle } => {
            let recep = state.object(receptacle)?;
            if recep.attrs.openable && !recep.attrs.is_open {
                return None;
            }
            let recep_box = floor_bbox(state, pose, receptacle)?;
            let (cell, _) = state.placement(receptacle)?;
            content_bbox(state, &recep_box, receptacle, id, pose.cell.dist(cell))
        }
    };
    Some(Detection {
        id: obj.id.clone(),
        class_name: obj.class_name.clone(),
        bbox,
        open: obj.attrs.openable.then_some(obj.attrs.is_open),
    })
}

/// Ground-truth observation from the agent's current pose.
pub fn observe(state: &SceneState) -> Observation {
    observe_from(state, &state.agent)
}

pub fn observe_from(state: &SceneState, pose: &ScenePose) -> Observation {
    let detections = state.objects.keys().filter_map(|id| detect_from(state, pose, id)).collect();
    Observation {
        pose: *pose,
        detections,
        held_class: state.inventory.as_deref().and_then(|id| state.class_of(id)).map(str::to_string),
    }
}

/// Distance in cells from the agent to an object's placement.
pub fn distance_to(state: &SceneState, pose: &ScenePose, id: &str) -> Option<f64> {
    state.placement(id).map(|(cell, _)| pose.cell.dist(cell))
}
