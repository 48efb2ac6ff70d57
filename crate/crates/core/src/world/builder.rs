//! Hand-built scenes for fixtures and tests.

use super::catalog::{self, ClassKind};
use super::geom::{Cell, Horizon, Rotation, ScenePose};
use super::scene::{Grid, Location, ObjectAttrs, ObjectInstance, SceneState, SCENE_VERSION};
use std::collections::{BTreeMap, BTreeSet};

pub struct SceneBuilder {
    width: i32,
    height: i32,
    walls: BTreeSet<Cell>,
    objects: BTreeMap<String, ObjectInstance>,
    counters: BTreeMap<String, u32>,
    agent: ScenePose,
    style_id: u32,
}

impl SceneBuilder {
    pub fn new(width: i32, height: i32) -> SceneBuilder {
        SceneBuilder {
            width,
            height,
            walls: BTreeSet::new(),
            objects: BTreeMap::new(),
            counters: BTreeMap::new(),
            agent: ScenePose { cell: Cell(0, 0), rotation: Rotation::R0, horizon: Horizon::Level },
            style_id: 0,
        }
    }

    pub fn style(mut self, style_id: u32) -> Self {
        self.style_id = style_id;
        self
    }

    pub fn wall(mut self, cell: Cell) -> Self {
        self.walls.insert(cell);
        self
    }

    pub fn agent(mut self, cell: Cell, rotation: Rotation, horizon: Horizon) -> Self {
        self.agent = ScenePose { cell, rotation, horizon };
        self
    }

    fn fresh_id(&mut self, class: &str) -> String {
        let n = self.counters.entry(class.to_string()).or_insert(0);
        *n += 1;
        format!("{class}_{n}")
    }

    /// Adds a receptacle or fixture standing on `cell`; returns its id.
    /// Sinks also get a faucet on the same cell.
    pub fn furniture(&mut self, class: &str, cell: Cell) -> String {
        let spec = catalog::lookup(class).unwrap_or_else(|| panic!("unknown class {class}"));
        assert!(spec.kind != ClassKind::Item, "{class} is not furniture");
        let id = self.fresh_id(class);
        self.objects.insert(
            id.clone(),
            ObjectInstance {
                id: id.clone(),
                class_name: class.to_string(),
                attrs: ObjectAttrs::for_class(class).unwrap(),
                location: Location::Floor { cell, band: spec.band },
            },
        );
        if class == "sink" {
            let fid = self.fresh_id("faucet");
            self.objects.insert(
                fid.clone(),
                ObjectInstance {
                    id: fid,
                    class_name: "faucet".into(),
                    attrs: ObjectAttrs::for_class("faucet").unwrap(),
                    location: Location::Floor { cell, band: catalog::lookup("faucet").unwrap().band },
                },
            );
        }
        id
    }

    /// Adds an item inside `receptacle`; returns its id.
    pub fn item_in(&mut self, class: &str, receptacle: &str) -> String {
        let id = self.fresh_id(class);
        self.objects.insert(
            id.clone(),
            ObjectInstance {
                id: id.clone(),
                class_name: class.to_string(),
                attrs: ObjectAttrs::for_class(class).unwrap_or_else(|| panic!("unknown class {class}")),
                location: Location::In { receptacle: receptacle.to_string() },
            },
        );
        id
    }

    pub fn set_open(&mut self, id: &str, open: bool) {
        self.objects.get_mut(id).unwrap().attrs.is_open = open;
    }

    pub fn build(self) -> SceneState {
        let blocked: BTreeSet<Cell> = self
            .objects
            .values()
            .filter_map(|o| match o.location {
                Location::Floor { cell, .. } => Some(cell),
                _ => None,
            })
            .chain(self.walls.iter().copied())
            .collect();
        // reachable = free cells connected to the agent
        let mut reachable = BTreeSet::new();
        let mut stack = vec![self.agent.cell];
        while let Some(c) = stack.pop() {
            let inside = c.0 >= 0 && c.1 >= 0 && c.0 < self.width && c.1 < self.height;
            if !inside || blocked.contains(&c) || !reachable.insert(c) {
                continue;
            }
            stack.extend(c.neighbours4());
        }
        SceneState {
            version: SCENE_VERSION.to_string(),
            style_id: self.style_id,
            grid: Grid { width: self.width, height: self.height, walls: self.walls, reachable },
            objects: self.objects,
            agent: self.agent,
            inventory: None,
            rng_seed: 0,
        }
    }
}
