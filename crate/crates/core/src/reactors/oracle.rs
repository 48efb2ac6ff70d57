use std::sync::Arc;

use super::*;
use crate::world::catalog::{self, ClassKind};
use crate::world::{distance_to, Observation, INTERACT_RANGE};

pub struct OracleAttr;
pub struct OracleRel;
pub struct OracleReFinder;
pub struct OracleFindAll;
pub struct OracleDetectRecep;
pub struct OracleMask;

pub fn oracle_reactor(name: &str) -> Option<Arc<dyn Reactor>> {
    Some(match name {
        CHECK_OBJ_ATTR => Arc::new(OracleAttr),
        CHECK_OBJ_RECEP_REL => Arc::new(OracleRel),
        FIND_OBJ_RECEP | FIND_RECEP => Arc::new(OracleReFinder),
        FIND_ALL_OBJ => Arc::new(OracleFindAll),
        DETECT_RECEP => Arc::new(OracleDetectRecep),
        MASK_GENERATOR => Arc::new(OracleMask),
        _ => return None,
    })
}

impl Reactor for OracleAttr {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let id = obj_arg(CHECK_OBJ_ATTR, args, 0)?.and_then(|o| ep.resolve(o));
        Ok(match id.and_then(|id| ep.scene.object(&id)) {
            Some(o) => attr_record(o.attrs.openable, o.attrs.is_open),
            None => attr_record(false, false),
        })
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

impl Reactor for OracleRel {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let obj = obj_arg(CHECK_OBJ_RECEP_REL, args, 0)?;
        let recep = obj_arg(CHECK_OBJ_RECEP_REL, args, 1)?.and_then(|r| ep.resolve(r));
        let (Some(obj), Some(recep)) = (obj, recep) else { return Ok(rel_value(false)) };
        let inside = ep.scene.contents(&recep).any(|o| match &obj.id {
            Some(id) => &o.id == id,
            None => o.class_name == obj.class,
        });
        Ok(rel_value(inside))
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

impl Reactor for OracleReFinder {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let id = obj_arg(FIND_RECEP, args, 0)?.and_then(|o| ep.resolve(o));
        let recep = id.and_then(|id| ep.scene.container_of(&id).map(str::to_string));
        Ok(match recep.and_then(|r| ep.scene.class_of(&r).map(str::to_string)) {
            Some(class) => Value::obj(&class),
            None => Value::None,
        })
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

impl Reactor for OracleFindAll {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let id = obj_arg(FIND_ALL_OBJ, args, 0)?.and_then(|o| ep.resolve(o));
        let items = match id {
            Some(r) => ep.scene.contents(&r).map(|o| Value::Obj(ObjRef::instance(&o.class_name, &o.id))).collect(),
            None => vec![],
        };
        Ok(Value::List(items))
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

/// Receptacle detections in an observation, as pinned object references.
pub(crate) fn receptacles_in(obs: &Observation) -> Value {
    Value::List(
        obs.detections
            .iter()
            .filter(|d| catalog::lookup(&d.class_name).is_some_and(|s| s.kind == ClassKind::Receptacle))
            .map(|d| Value::Obj(ObjRef::instance(&d.class_name, &d.id)))
            .collect(),
    )
}

impl Reactor for OracleDetectRecep {
    fn answer(&self, ep: &mut Episode, _args: &[Value]) -> Result<Value, ReactorError> {
        Ok(receptacles_in(&ep.observe()))
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}

/// Pick the instance an interaction on `obj` refers to given detections:
/// the held instance, else the focused instance if interactable, else the
/// nearest interactable detection (ties by id).
pub(crate) fn ground_in(ep: &Episode, obs: &Observation, obj: &ObjRef) -> Value {
    if obj.id.is_some() {
        return Value::Obj(obj.clone());
    }
    if let Some(held) = ep.scene.inventory.as_deref() {
        if ep.scene.class_of(held) == Some(obj.class.as_str()) {
            return Value::Obj(ObjRef::instance(&obj.class, held));
        }
    }
    let mut cands: Vec<(f64, &str)> = obs
        .detections
        .iter()
        .filter(|d| d.class_name == obj.class)
        .filter_map(|d| {
            let dist = distance_to(&ep.scene, &ep.scene.agent, &d.id)?;
            (dist <= INTERACT_RANGE).then_some((dist, d.id.as_str()))
        })
        .collect();
    if let Some(f) = ep.focus_of(&obj.class) {
        if cands.iter().any(|(_, id)| *id == f) {
            return Value::Obj(ObjRef::instance(&obj.class, f));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    match cands.first() {
        Some((_, id)) => Value::Obj(ObjRef::instance(&obj.class, id)),
        None => Value::None,
    }
}

impl Reactor for OracleMask {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let Some(obj) = obj_arg(MASK_GENERATOR, args, 0)? else { return Ok(Value::None) };
        let obs = ep.observe();
        Ok(ground_in(ep, &obs, obj))
    }

    fn describe(&self) -> String {
        "oracle".into()
    }
}
