//! Scene state: grid, objects, agent pose and inventory.

use super::catalog::{self, ClassKind};
use super::geom::{Cell, HeightBand, ScenePose};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const SCENE_VERSION: &str = "scene/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temperature {
    Room,
    Hot,
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectAttrs {
    pub is_receptacle: bool,
    pub openable: bool,
    pub is_open: bool,
    pub toggleable: bool,
    pub is_on: bool,
    pub pickupable: bool,
    pub sliceable: bool,
    pub is_sliced: bool,
    pub temperature: Temperature,
    pub is_clean: bool,
}

impl ObjectAttrs {
    pub fn for_class(class_name: &str) -> Option<ObjectAttrs> {
        let spec = catalog::lookup(class_name)?;
        Some(ObjectAttrs {
            is_receptacle: spec.kind == ClassKind::Receptacle,
            openable: spec.openable,
            is_open: false,
            toggleable: spec.toggleable,
            is_on: false,
            pickupable: spec.kind == ClassKind::Item,
            sliceable: spec.sliceable,
            is_sliced: false,
            temperature: Temperature::Room,
            is_clean: spec.kind != ClassKind::Item,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    Floor { cell: Cell, band: HeightBand },
    In { receptacle: String },
    Held,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub class_name: String,
    pub attrs: ObjectAttrs,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: i32,
    pub height: i32,
    /// Walls block movement and line of sight.
    pub walls: BTreeSet<Cell>,
    /// Cells the agent can stand on.
    pub reachable: BTreeSet<Cell>,
}

impl Grid {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 >= 0 && c.1 >= 0 && c.0 < self.width && c.1 < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.walls.contains(&c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub version: String,
    pub style_id: u32,
    pub grid: Grid,
    pub objects: BTreeMap<String, ObjectInstance>,
    pub agent: ScenePose,
    pub inventory: Option<String>,
    pub rng_seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneInvariantError {
    #[error("agent stands on unreachable cell {0}")]
    AgentOffGrid(Cell),
    #[error("object {0} is contained in unknown receptacle {1}")]
    DanglingContainer(String, String),
    #[error("object {0} is contained in {1}, which is not a floor-standing receptacle")]
    NestedContainment(String, String),
    #[error("inventory/held mismatch: {0}")]
    Inventory(String),
    #[error("attribute invariant violated on {0}: {1}")]
    Attrs(String, &'static str),
    #[error("object {0} has unknown class {1}")]
    UnknownClass(String, String),
}

impl SceneState {
    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.get(id)
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.objects.get(id).map(|o| o.class_name.as_str())
    }

    pub fn instances_of<'a>(&'a self, class_name: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.values().filter(move |o| o.class_name == class_name)
    }

    pub fn contents<'a>(&'a self, receptacle: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.values().filter(move |o| matches!(&o.location, Location::In { receptacle: r } if r == receptacle))
    }

    pub fn container_of(&self, id: &str) -> Option<&str> {
        match &self.objects.get(id)?.location {
            Location::In { receptacle } => Some(receptacle.as_str()),
            _ => None,
        }
    }

    /// Cell and band an object occupies, following containment. `None` when held.
    pub fn placement(&self, id: &str) -> Option<(Cell, HeightBand)> {
        let obj = self.objects.get(id)?;
        match &obj.location {
            Location::Floor { cell, band } => Some((*cell, *band)),
            Location::In { receptacle } => match &self.objects.get(receptacle)?.location {
                Location::Floor { cell, band } => Some((*cell, *band)),
                _ => None,
            },
            Location::Held => None,
        }
    }

    /// Serialized form used for byte-level state comparison.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }

    pub fn check_invariants(&self) -> Result<(), SceneInvariantError> {
        if !self.grid.reachable.contains(&self.agent.cell) {
            return Err(SceneInvariantError::AgentOffGrid(self.agent.cell));
        }
        let mut held = Vec::new();
        for obj in self.objects.values() {
            if catalog::lookup(&obj.class_name).is_none() {
                return Err(SceneInvariantError::UnknownClass(obj.id.clone(), obj.class_name.clone()));
            }
            let a = &obj.attrs;
            if a.is_open && !a.openable {
                return Err(SceneInvariantError::Attrs(obj.id.clone(), "is_open without openable"));
            }
            if a.is_on && !a.toggleable {
                return Err(SceneInvariantError::Attrs(obj.id.clone(), "is_on without toggleable"));
            }
            if a.is_sliced && !a.sliceable {
                return Err(SceneInvariantError::Attrs(obj.id.clone(), "is_sliced without sliceable"));
            }
            if a.pickupable && a.is_receptacle {
                return Err(SceneInvariantError::Attrs(obj.id.clone(), "pickupable receptacle"));
            }
            match &obj.location {
                Location::In { receptacle } => {
                    let Some(r) = self.objects.get(receptacle) else {
                        return Err(SceneInvariantError::DanglingContainer(obj.id.clone(), receptacle.clone()));
                    };
                    if !r.attrs.is_receptacle || !matches!(r.location, Location::Floor { .. }) {
                        return Err(SceneInvariantError::NestedContainment(obj.id.clone(), receptacle.clone()));
                    }
                }
                Location::Held => held.push(obj.id.clone()),
                Location::Floor { .. } => {}
            }
        }
        match (held.as_slice(), &self.inventory) {
            ([], None) => Ok(()),
            ([h], Some(inv)) if h == inv => Ok(()),
            _ => Err(SceneInvariantError::Inventory(format!("held={held:?} inventory={:?}", self.inventory))),
        }
    }
}
