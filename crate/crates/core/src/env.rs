//! Episode environment: a scene plus the bookkeeping the interpreter and
//! reactors share (pre-search map, focus, step log, perception noise).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::procir::{ObjRef, Value};
use crate::world::{
    self, catalog, observe, presearch_map, ActionError, AtomicAction, Cell, Location, Observation, PresearchMap,
    SceneState, WorldEvent,
};

/// Detector corruption applied by `Episode::perceive`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptionNoise {
    /// Probability a detection's class is replaced by another class of the same kind.
    pub class_flip: f64,
    /// Probability a detection is dropped.
    pub miss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: AtomicAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ActionError>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<WorldEvent>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub scene: SceneState,
    pub map: PresearchMap,
    /// Most recently interacted (or navigated-to) instance per class.
    focus: BTreeMap<String, String>,
    /// Items the agent has put into a non-appliance receptacle.
    delivered: BTreeSet<String>,
    pub log: Vec<StepRecord>,
    /// Lower-cased instruction tokens, for learned reactors.
    pub instruction: Vec<String>,
    noise: PerceptionNoise,
    rng: ChaCha8Rng,
    /// Perceived class counts per instance over the episode (a simple tracker).
    sightings: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Episode {
    pub fn new(scene: SceneState) -> Episode {
        let seed = scene.rng_seed;
        Episode::with_noise(scene, PerceptionNoise::default(), seed)
    }

    pub fn with_noise(scene: SceneState, noise: PerceptionNoise, seed: u64) -> Episode {
        let map = presearch_map(&scene);
        Episode {
            scene,
            map,
            focus: BTreeMap::new(),
            delivered: BTreeSet::new(),
            log: Vec::new(),
            instruction: Vec::new(),
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sightings: BTreeMap::new(),
        }
    }

    pub fn noise(&self) -> PerceptionNoise {
        self.noise
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Ground-truth observation from the agent's pose.
    pub fn observe(&self) -> Observation {
        observe(&self.scene)
    }

    /// Observation passed through the perception noise model.
    pub fn perceive(&mut self) -> Observation {
        let mut obs = self.observe();
        if self.noise.class_flip <= 0.0 && self.noise.miss_rate <= 0.0 {
            self.record(&obs);
            return obs;
        }
        let mut kept = Vec::with_capacity(obs.detections.len());
        for mut d in obs.detections {
            if self.rng.gen::<f64>() < self.noise.miss_rate {
                continue;
            }
            if self.rng.gen::<f64>() < self.noise.class_flip {
                let kind = catalog::lookup(&d.class_name).map(|s| s.kind);
                let others: Vec<&str> = catalog::CLASSES
                    .iter()
                    .filter(|s| Some(s.kind) == kind && s.name != d.class_name)
                    .map(|s| s.name)
                    .collect();
                if !others.is_empty() {
                    d.class_name = others[self.rng.gen_range(0..others.len())].to_string();
                }
            }
            kept.push(d);
        }
        obs.detections = kept;
        self.record(&obs);
        obs
    }

    fn record(&mut self, obs: &Observation) {
        for d in &obs.detections {
            *self.sightings.entry(d.id.clone()).or_default().entry(d.class_name.clone()).or_default() += 1;
        }
    }

    /// Majority class over everything perceived of `id` so far (ties: lexicographic first).
    pub fn voted_class(&self, id: &str) -> Option<&str> {
        let votes = self.sightings.get(id)?;
        let best = votes.values().copied().max()?;
        votes.iter().find(|(_, &n)| n == best).map(|(c, _)| c.as_str())
    }

    pub fn focus_of(&self, class: &str) -> Option<&str> {
        self.focus.get(class).map(String::as_str)
    }

    pub fn is_delivered(&self, id: &str) -> bool {
        self.delivered.contains(id)
    }

    fn map_distance(&self, id: &str) -> f64 {
        let pose = world::navigation_pose(&self.scene, &self.map, id).ok().flatten();
        pose.map_or(f64::INFINITY, |p| p.cell.dist(self.scene.agent.cell))
    }

    /// Instance a class-level `navigate` goes to: the held instance, else the
    /// focused one, else the nearest — never an already delivered item while
    /// another candidate exists.
    pub fn ground_navigate(&self, obj: &ObjRef) -> Option<String> {
        if let Some(id) = &obj.id {
            return self.scene.objects.contains_key(id).then(|| id.clone());
        }
        let all: Vec<&str> = self.scene.instances_of(&obj.class).map(|o| o.id.as_str()).collect();
        if let Some(held) = all.iter().find(|id| self.scene.inventory.as_deref() == Some(**id)) {
            return Some(held.to_string());
        }
        let fresh: Vec<&str> = all.iter().copied().filter(|id| !self.delivered.contains(*id)).collect();
        let cands = if fresh.is_empty() { all } else { fresh };
        if let Some(f) = self.focus_of(&obj.class).filter(|f| cands.contains(f)) {
            return Some(f.to_string());
        }
        cands
            .into_iter()
            .map(|id| (self.map_distance(id), id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
            .map(|(_, id)| id.to_string())
    }

    /// Instance an object reference denotes right now (same rule as navigation).
    pub fn resolve(&self, obj: &ObjRef) -> Option<String> {
        self.ground_navigate(obj)
    }

    /// Apply an atomic action, logging it whether or not it succeeds.
    pub fn step(&mut self, action: &AtomicAction) -> Result<Vec<WorldEvent>, ActionError> {
        match world::step(&self.scene, &self.map, action) {
            Ok((next, events)) => {
                self.scene = next;
                self.after_success(action);
                self.log.push(StepRecord { action: action.clone(), error: None, events: events.clone() });
                Ok(events)
            }
            Err(e) => {
                self.log.push(StepRecord { action: action.clone(), error: Some(e.clone()), events: vec![] });
                Err(e)
            }
        }
    }

    /// Log an attempt that failed before reaching the world (e.g. nothing to ground).
    pub fn record_failure(&mut self, action: &AtomicAction, error: ActionError) {
        self.log.push(StepRecord { action: action.clone(), error: Some(error), events: vec![] });
    }

    fn set_focus(&mut self, id: &str) {
        if let Some(class) = self.scene.class_of(id) {
            self.focus.insert(class.to_string(), id.to_string());
        }
    }

    fn after_success(&mut self, action: &AtomicAction) {
        for id in action.object_args() {
            self.set_focus(id);
        }
        match action {
            AtomicAction::Navigate { dest } => {
                if let Some(Location::In { receptacle }) = self.scene.object(dest).map(|o| o.location.clone()) {
                    self.set_focus(&receptacle);
                }
            }
            AtomicAction::Put { obj, recep } => {
                let class = self.scene.class_of(recep).unwrap_or_default();
                if !catalog::APPLIANCES.contains(&class) {
                    self.delivered.insert(obj.clone());
                }
            }
            AtomicAction::Pickup { obj } => {
                self.delivered.remove(obj);
            }
            _ => {}
        }
    }

    /// Successfully executed actions, in order.
    pub fn executed(&self) -> Vec<AtomicAction> {
        self.log.iter().filter(|r| r.error.is_none()).map(|r| r.action.clone()).collect()
    }

    /// Reachable cells ordered by distance from the agent, ties by cell.
    pub fn reachable_by_distance(&self) -> Vec<Cell> {
        let me = self.scene.agent.cell;
        let mut cells: Vec<Cell> = self.scene.grid.reachable.iter().copied().collect();
        cells.sort_by(|a, b| a.dist(me).total_cmp(&b.dist(me)).then_with(|| a.cmp(b)));
        cells
    }

    /// Scene global lookup: class names present in the scene and `reachable_pos`.
    pub fn global(&self, name: &str) -> Option<Value> {
        if name == "reachable_pos" {
            return Some(Value::List(self.reachable_by_distance().into_iter().map(Value::Pos).collect()));
        }
        self.scene.instances_of(name).next().map(|_| Value::obj(name))
    }

    /// Interpret a textual call argument: integer, instance id, class name,
    /// `(x,y)` cell, or plain string.
    pub fn arg_value(&self, s: &str) -> Value {
        if let Ok(v) = s.parse::<i64>() {
            return Value::Int(v);
        }
        if let Some(o) = self.scene.object(s) {
            return Value::Obj(ObjRef::instance(&o.class_name, s));
        }
        if catalog::is_class(s) {
            return Value::obj(s);
        }
        if let Some(c) = parse_cell(s) {
            return Value::Pos(c);
        }
        Value::Str(s.to_string())
    }
}

fn parse_cell(s: &str) -> Option<Cell> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some(Cell(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Horizon, Rotation, SceneBuilder};

    fn two_cds() -> Episode {
        let mut b = SceneBuilder::new(6, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
        let table = b.furniture("table", Cell(1, 3));
        let counter = b.furniture("countertop", Cell(4, 3));
        b.furniture("safe", Cell(2, 3));
        b.item_in("cd", &table);
        b.item_in("cd", &counter);
        Episode::new(b.build())
    }

    #[test]
    fn navigate_grounding_skips_delivered_items() {
        let mut ep = two_cds();
        let cd = ObjRef::class("cd");
        let first = ep.ground_navigate(&cd).unwrap();
        ep.step(&AtomicAction::Navigate { dest: first.clone() }).unwrap();
        ep.step(&AtomicAction::Pickup { obj: first.clone() }).unwrap();
        assert_eq!(ep.ground_navigate(&cd).as_deref(), Some(first.as_str()), "held instance wins");
        ep.step(&AtomicAction::Navigate { dest: "safe_1".into() }).unwrap();
        ep.step(&AtomicAction::Open { obj: "safe_1".into() }).unwrap();
        ep.step(&AtomicAction::Put { obj: first.clone(), recep: "safe_1".into() }).unwrap();
        let second = ep.ground_navigate(&cd).unwrap();
        assert_ne!(second, first);
    }

    #[test]
    fn nearest_instance_breaks_ties_by_id() {
        let ep = two_cds();
        // both cds are 2 cells from their poses' origin; the table one is nearer
        let d1 = ep.map_distance("cd_1");
        let d2 = ep.map_distance("cd_2");
        let expect = if d1 <= d2 { "cd_1" } else { "cd_2" };
        assert_eq!(ep.ground_navigate(&ObjRef::class("cd")).as_deref(), Some(expect));
    }

    #[test]
    fn failed_steps_are_logged_without_state_change() {
        let mut ep = two_cds();
        let before = ep.scene.clone();
        assert!(ep.step(&AtomicAction::Open { obj: "table_1".into() }).is_err());
        assert_eq!(ep.scene, before);
        assert_eq!(ep.log.len(), 1);
        assert!(ep.executed().is_empty());
    }

    #[test]
    fn noisy_perception_is_seeded() {
        let scene = two_cds().scene;
        let noise = PerceptionNoise { class_flip: 0.5, miss_rate: 0.3 };
        let mut a = Episode::with_noise(scene.clone(), noise, 9);
        let mut b = Episode::with_noise(scene, noise, 9);
        for _ in 0..5 {
            assert_eq!(a.perceive(), b.perceive());
        }
    }

    #[test]
    fn argument_values() {
        let ep = two_cds();
        assert_eq!(ep.arg_value("cd_2"), Value::Obj(ObjRef::instance("cd", "cd_2")));
        assert_eq!(ep.arg_value("fridge"), Value::obj("fridge"));
        assert_eq!(ep.arg_value("-30"), Value::Int(-30));
        assert_eq!(ep.arg_value("(1,2)"), Value::Pos(Cell(1, 2)));
        assert!(ep.global("fridge").is_none());
        assert!(matches!(ep.global("reachable_pos"), Some(Value::List(v)) if !v.is_empty()));
    }
}
