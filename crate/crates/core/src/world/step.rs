//! Atomic actions and the deterministic transition function.

use super::catalog::{self, KNIFE};
use super::geom::{Cell, Horizon, Rotation, ScenePose};
use super::observe::{detect_from, distance_to, INTERACT_RANGE};
use super::presearch::PresearchMap;
use super::scene::{Location, SceneState, Temperature};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AtomicAction {
    Navigate { dest: String },
    NavigatePos { cell: Cell },
    RotateTo { rotation: Rotation },
    LookTo { horizon: Horizon },
    Open { obj: String },
    Close { obj: String },
    Pickup { obj: String },
    Put { obj: String, recep: String },
    ToggleOn { obj: String },
    ToggleOff { obj: String },
    Slice { obj: String },
    Stop,
}

/// Surface names of atomic actions, as used in procedure code and traces.
pub const ATOMIC_NAMES: &[(&str, usize)] = &[
    ("navigate", 1),
    ("navigate_pos", 1),
    ("rotate", 1),
    ("look", 1),
    ("open_object", 1),
    ("close_object", 1),
    ("pickup_object", 1),
    ("put_object", 2),
    ("toggleon_object", 1),
    ("toggleoff_object", 1),
    ("slice_object", 1),
    ("stop", 0),
];

/// Arity of an atomic action name, accepting the `pick_object` alias.
pub fn atomic_arity(name: &str) -> Option<usize> {
    let name = canonical_atomic_name(name);
    ATOMIC_NAMES.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

pub fn canonical_atomic_name(name: &str) -> &str {
    match name {
        "pick_object" => "pickup_object",
        other => other,
    }
}

impl AtomicAction {
    pub fn name(&self) -> &'static str {
        match self {
            AtomicAction::Navigate { .. } => "navigate",
            AtomicAction::NavigatePos { .. } => "navigate_pos",
            AtomicAction::RotateTo { .. } => "rotate",
            AtomicAction::LookTo { .. } => "look",
            AtomicAction::Open { .. } => "open_object",
            AtomicAction::Close { .. } => "close_object",
            AtomicAction::Pickup { .. } => "pickup_object",
            AtomicAction::Put { .. } => "put_object",
            AtomicAction::ToggleOn { .. } => "toggleon_object",
            AtomicAction::ToggleOff { .. } => "toggleoff_object",
            AtomicAction::Slice { .. } => "slice_object",
            AtomicAction::Stop => "stop",
        }
    }

    /// Object ids referenced by the action, in argument order.
    pub fn object_args(&self) -> Vec<&str> {
        match self {
            AtomicAction::Navigate { dest } => vec![dest],
            AtomicAction::Open { obj }
            | AtomicAction::Close { obj }
            | AtomicAction::Pickup { obj }
            | AtomicAction::ToggleOn { obj }
            | AtomicAction::ToggleOff { obj }
            | AtomicAction::Slice { obj } => vec![obj],
            AtomicAction::Put { obj, recep } => vec![obj, recep],
            _ => vec![],
        }
    }
}

impl fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicAction::NavigatePos { cell } => write!(f, "navigate_pos({cell})"),
            AtomicAction::RotateTo { rotation } => write!(f, "rotate({})", rotation.degrees()),
            AtomicAction::LookTo { horizon } => write!(f, "look({})", horizon.degrees()),
            AtomicAction::Stop => write!(f, "stop()"),
            other => write!(f, "{}({})", other.name(), other.object_args().join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Moved { pose: ScenePose },
    Opened { id: String },
    Closed { id: String },
    PickedUp { id: String },
    Placed { id: String, receptacle: String },
    ToggledOn { id: String },
    ToggledOff { id: String },
    Sliced { id: String },
    Heated { id: String },
    Cooled { id: String },
    Cleaned { id: String },
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum ActionError {
    #[error("{0} is not visible")]
    NotVisible(String),
    #[error("{0} cannot be interacted with: {1}")]
    NotInteractable(String, String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("unknown id {0}")]
    UnknownId(String),
}

fn require_visible(state: &SceneState, id: &str) -> Result<(), ActionError> {
    if detect_from(state, &state.agent, id).is_none() {
        return Err(ActionError::NotVisible(id.to_string()));
    }
    let d = distance_to(state, &state.agent, id).unwrap_or(f64::INFINITY);
    if d > INTERACT_RANGE {
        return Err(ActionError::NotInteractable(id.to_string(), format!("too far ({d:.2} cells)")));
    }
    Ok(())
}

fn require_known(state: &SceneState, action: &AtomicAction) -> Result<(), ActionError> {
    for id in action.object_args() {
        if !state.objects.contains_key(id) {
            return Err(ActionError::UnknownId(id.to_string()));
        }
    }
    Ok(())
}

/// Pose the agent is teleported to by `Navigate(dest)`.
pub fn navigation_pose(state: &SceneState, map: &PresearchMap, dest: &str) -> Result<Option<ScenePose>, ActionError> {
    let obj = state.object(dest).ok_or_else(|| ActionError::UnknownId(dest.to_string()))?;
    let pose = match &obj.location {
        Location::Held => return Ok(None),
        Location::Floor { .. } => map.pose_of(dest),
        Location::In { receptacle } => match map.objects.get(dest) {
            Some(rec) if rec.receptacle.as_deref() == Some(receptacle.as_str()) => Some(&rec.pose),
            _ => map.receptacles.get(receptacle),
        },
    };
    pose.copied()
        .map(Some)
        .ok_or_else(|| ActionError::PreconditionFailed(format!("no pre-searched pose for {dest}")))
}

/// Apply one atomic action. Failed actions return an error and never
/// produce a successor state.
pub fn step(
    state: &SceneState,
    map: &PresearchMap,
    action: &AtomicAction,
) -> Result<(SceneState, Vec<WorldEvent>), ActionError> {
    require_known(state, action)?;
    let mut next = state.clone();
    let mut events = Vec::new();
    match action {
        AtomicAction::Navigate { dest } => {
            if let Some(pose) = navigation_pose(state, map, dest)? {
                next.agent = pose;
                events.push(WorldEvent::Moved { pose });
            }
        }
        AtomicAction::NavigatePos { cell } => {
            if !state.grid.reachable.contains(cell) {
                return Err(ActionError::PreconditionFailed(format!("cell {cell} is not reachable")));
            }
            next.agent.cell = *cell;
            events.push(WorldEvent::Moved { pose: next.agent });
        }
        AtomicAction::RotateTo { rotation } => {
            next.agent.rotation = *rotation;
            events.push(WorldEvent::Moved { pose: next.agent });
        }
        AtomicAction::LookTo { horizon } => {
            next.agent.horizon = *horizon;
            events.push(WorldEvent::Moved { pose: next.agent });
        }
        AtomicAction::Open { obj } | AtomicAction::Close { obj } => {
            let opening = matches!(action, AtomicAction::Open { .. });
            let attrs = state.objects[obj].attrs;
            if !attrs.openable {
                return Err(ActionError::NotInteractable(obj.clone(), "not openable".into()));
            }
            if attrs.pickupable && state.inventory.as_deref() == Some(obj.as_str()) {
                return Err(ActionError::PreconditionFailed(format!("{obj} is held")));
            }
            require_visible(state, obj)?;
            if attrs.is_open == opening {
                let s = if opening { "open" } else { "closed" };
                return Err(ActionError::PreconditionFailed(format!("{obj} is already {s}")));
            }
            next.objects.get_mut(obj).unwrap().attrs.is_open = opening;
            events.push(if opening {
                WorldEvent::Opened { id: obj.clone() }
            } else {
                WorldEvent::Closed { id: obj.clone() }
            });
        }
        AtomicAction::Pickup { obj } => {
            let o = &state.objects[obj];
            if !o.attrs.pickupable {
                return Err(ActionError::NotInteractable(obj.clone(), "not pickupable".into()));
            }
            if let Some(h) = &state.inventory {
                return Err(ActionError::PreconditionFailed(format!("already holding {h}")));
            }
            require_visible(state, obj)?;
            if o.attrs.openable && o.attrs.is_open {
                return Err(ActionError::PreconditionFailed(format!("{obj} must be closed before pickup")));
            }
            next.objects.get_mut(obj).unwrap().location = Location::Held;
            next.inventory = Some(obj.clone());
            events.push(WorldEvent::PickedUp { id: obj.clone() });
        }
        AtomicAction::Put { obj, recep } => {
            if state.inventory.as_deref() != Some(obj.as_str()) {
                return Err(ActionError::PreconditionFailed(format!("{obj} is not held")));
            }
            let r = &state.objects[recep];
            if !r.attrs.is_receptacle {
                return Err(ActionError::NotInteractable(recep.clone(), "not a receptacle".into()));
            }
            require_visible(state, recep)?;
            if r.attrs.openable && !r.attrs.is_open {
                return Err(ActionError::PreconditionFailed(format!("{recep} is closed")));
            }
            next.inventory = None;
            next.objects.get_mut(obj).unwrap().location = Location::In { receptacle: recep.clone() };
            events.push(WorldEvent::Placed { id: obj.clone(), receptacle: recep.clone() });
            apply_container_effects(&mut next, recep, &mut events);
        }
        AtomicAction::ToggleOn { obj } | AtomicAction::ToggleOff { obj } => {
            let on = matches!(action, AtomicAction::ToggleOn { .. });
            let attrs = state.objects[obj].attrs;
            if !attrs.toggleable {
                return Err(ActionError::NotInteractable(obj.clone(), "not toggleable".into()));
            }
            require_visible(state, obj)?;
            if attrs.is_on == on {
                let s = if on { "on" } else { "off" };
                return Err(ActionError::PreconditionFailed(format!("{obj} is already {s}")));
            }
            next.objects.get_mut(obj).unwrap().attrs.is_on = on;
            events.push(if on {
                WorldEvent::ToggledOn { id: obj.clone() }
            } else {
                WorldEvent::ToggledOff { id: obj.clone() }
            });
            if on {
                apply_toggle_effects(&mut next, obj, &mut events);
            }
        }
        AtomicAction::Slice { obj } => {
            let attrs = state.objects[obj].attrs;
            if !attrs.sliceable {
                return Err(ActionError::NotInteractable(obj.clone(), "not sliceable".into()));
            }
            let holding_knife = state.inventory.as_deref().and_then(|h| state.class_of(h)) == Some(KNIFE);
            if !holding_knife {
                return Err(ActionError::PreconditionFailed("slicing requires a knife in hand".into()));
            }
            require_visible(state, obj)?;
            if attrs.is_sliced {
                return Err(ActionError::PreconditionFailed(format!("{obj} is already sliced")));
            }
            next.objects.get_mut(obj).unwrap().attrs.is_sliced = true;
            events.push(WorldEvent::Sliced { id: obj.clone() });
        }
        AtomicAction::Stop => events.push(WorldEvent::Stopped),
    }
    Ok((next, events))
}

fn contents_ids(state: &SceneState, recep: &str) -> Vec<String> {
    state.contents(recep).map(|o| o.id.clone()).collect()
}

fn set_temperature(state: &mut SceneState, id: &str, t: Temperature, events: &mut Vec<WorldEvent>) {
    let o = state.objects.get_mut(id).unwrap();
    o.attrs.temperature = t;
    events.push(match t {
        Temperature::Hot => WorldEvent::Heated { id: id.to_string() },
        _ => WorldEvent::Cooled { id: id.to_string() },
    });
}

fn clean(state: &mut SceneState, id: &str, events: &mut Vec<WorldEvent>) {
    state.objects.get_mut(id).unwrap().attrs.is_clean = true;
    events.push(WorldEvent::Cleaned { id: id.to_string() });
}

/// Faucets attached to a sink share its cell.
fn faucet_running_at(state: &SceneState, sink: &str) -> bool {
    let Some((cell, _)) = state.placement(sink) else {
        return false;
    };
    state
        .instances_of("faucet")
        .any(|f| f.attrs.is_on && matches!(f.location, Location::Floor { cell: c, .. } if c == cell))
}

fn apply_container_effects(state: &mut SceneState, recep: &str, events: &mut Vec<WorldEvent>) {
    let class = state.objects[recep].class_name.clone();
    let is_on = state.objects[recep].attrs.is_on;
    let placed: Vec<String> = state.contents(recep).filter(|o| o.attrs.pickupable).map(|o| o.id.clone()).collect();
    match class.as_str() {
        "fridge" => placed.iter().for_each(|id| set_temperature(state, id, Temperature::Cold, events)),
        "microwave" if is_on => placed.iter().for_each(|id| set_temperature(state, id, Temperature::Hot, events)),
        "sink" if faucet_running_at(state, recep) => placed.iter().for_each(|id| clean(state, id, events)),
        _ => {}
    }
}

fn apply_toggle_effects(state: &mut SceneState, obj: &str, events: &mut Vec<WorldEvent>) {
    match state.objects[obj].class_name.as_str() {
        // one heating cycle, then the microwave switches itself off
        "microwave" => {
            for id in contents_ids(state, obj) {
                set_temperature(state, &id, Temperature::Hot, events);
            }
            state.objects.get_mut(obj).unwrap().attrs.is_on = false;
            events.push(WorldEvent::ToggledOff { id: obj.to_string() });
        }
        "faucet" => {
            let Some((cell, _)) = state.placement(obj) else { return };
            let sinks: Vec<String> = state
                .instances_of("sink")
                .filter(|s| matches!(s.location, Location::Floor { cell: c, .. } if c == cell))
                .map(|s| s.id.clone())
                .collect();
            for sink in sinks {
                for id in contents_ids(state, &sink) {
                    clean(state, &id, events);
                }
            }
        }
        _ => {}
    }
}

/// Whether the class can be the target of the given atomic action at all.
pub fn class_affords(class_name: &str, action: &str) -> bool {
    let Some(spec) = catalog::lookup(class_name) else { return false };
    let attrs = super::scene::ObjectAttrs::for_class(class_name).unwrap();
    match canonical_atomic_name(action) {
        "navigate" => true,
        "open_object" | "close_object" => spec.openable,
        "pickup_object" => attrs.pickupable,
        "toggleon_object" | "toggleoff_object" => spec.toggleable,
        "slice_object" => spec.sliceable,
        "put_object" => true,
        _ => false,
    }
}
