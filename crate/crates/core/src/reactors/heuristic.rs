use super::*;
use crate::world::{catalog, distance_to, BBox};

/// Minimum fraction of the object's box that must lie inside the receptacle's.
pub const OVERLAP_THRESHOLD: f64 = 0.70;

/// OBJ_IN_RECEP iff area(obj ∩ recep) / area(obj) exceeds the threshold.
pub fn rel_checker_heuristic(obj: &BBox, recep: &BBox) -> Result<bool, ReactorError> {
    let area = obj.area();
    if area <= 0.0 || recep.area() <= 0.0 {
        return Err(ReactorError::ZeroAreaBox);
    }
    Ok(obj.intersection(recep) / area > OVERLAP_THRESHOLD)
}

/// Box-overlap RelChecker over the (possibly noisy) current observation.
pub struct HeuristicRelChecker;

/// Max depth gap (cells) between an object and the receptacle it is said to be in.
pub const DEPTH_TOLERANCE: f64 = 0.5;

impl Reactor for HeuristicRelChecker {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let obj = obj_arg(CHECK_OBJ_RECEP_REL, args, 0)?.cloned();
        let recep = obj_arg(CHECK_OBJ_RECEP_REL, args, 1)?.and_then(|r| ep.resolve(r));
        let (Some(obj), Some(recep)) = (obj, recep) else { return Ok(rel_value(false)) };
        let obs = ep.perceive();
        let Some(rbox) = obs.find(&recep).map(|d| d.bbox) else { return Ok(rel_value(false)) };
        // depth cue: an overlapping box much nearer or farther is a line-of-sight overlap
        let rdepth = distance_to(&ep.scene, &obs.pose, &recep);
        let same_depth = |id: &str| match (rdepth, distance_to(&ep.scene, &obs.pose, id)) {
            (Some(a), Some(b)) => (a - b).abs() <= DEPTH_TOLERANCE,
            _ => true,
        };
        for d in &obs.detections {
            let matches = match &obj.id {
                Some(id) => &d.id == id,
                None => ep.voted_class(&d.id).unwrap_or(&d.class_name) == obj.class,
            };
            if matches && d.id != recep && same_depth(&d.id) && rel_checker_heuristic(&d.bbox, &rbox).unwrap_or(false) {
                return Ok(rel_value(true));
            }
        }
        Ok(rel_value(false))
    }

    fn describe(&self) -> String {
        "heuristic".into()
    }
}

/// AttrChecker from the detected class and the visible open cue, overridden
/// by the agent's own open/close actions.
pub struct HeuristicAttrChecker;

impl Reactor for HeuristicAttrChecker {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let Some(id) = obj_arg(CHECK_OBJ_ATTR, args, 0)?.and_then(|o| ep.resolve(o)) else {
            return Ok(attr_record(false, false));
        };
        let obs = ep.perceive();
        let det = obs.find(&id);
        let class = ep.voted_class(&id).map(str::to_string).or_else(|| det.map(|d| d.class_name.clone())).or_else(|| ep.scene.class_of(&id).map(str::to_string));
        let openable = class.as_deref().is_some_and(catalog::is_openable);
        let open = opened_by_agent(ep, &id).unwrap_or_else(|| det.and_then(|d| d.open).unwrap_or(false));
        Ok(attr_record(openable, open))
    }

    fn describe(&self) -> String {
        "heuristic".into()
    }
}
