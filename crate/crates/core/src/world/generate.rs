//! Seeded procedural scene generator.
//!
//! A layout style fixes the wall pattern, where furniture may stand and how
//! strongly each item class prefers each receptacle class. Seen and unseen
//! evaluation splits use disjoint style ids.

use super::catalog::{self, ClassKind};
use super::geom::{Cell, HeightBand, Horizon, Rotation, ScenePose};
use super::scene::{Grid, Location, ObjectAttrs, ObjectInstance, SceneState, SCENE_VERSION};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub const CONFIG_VERSION: &str = "config/1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: String,
    pub min: u32,
    pub max: u32,
}

impl ClassCount {
    pub fn new(class: &str, min: u32, max: u32) -> ClassCount {
        ClassCount { class: class.to_string(), min, max }
    }

    pub fn exactly(class: &str, n: u32) -> ClassCount {
        ClassCount::new(class, n, n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneConfig {
    pub version: String,
    pub style_id: u32,
    pub width: i32,
    pub height: i32,
    /// Furniture and fixtures. A sink always gets a faucet on its cell.
    pub receptacles: Vec<ClassCount>,
    pub objects: Vec<ClassCount>,
    /// At most one instance of each item class per receptacle.
    #[serde(default)]
    pub unique_class_per_receptacle: bool,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<SceneConfig, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("infeasible scene config: {0}")]
    InfeasibleConfig(String),
}

/// Per-style layout and placement parameters.
#[derive(Debug, Clone)]
pub struct Style {
    pub partition: Partition,
    pub islands: bool,
    /// item class → receptacle class → weight.
    pub priors: BTreeMap<&'static str, BTreeMap<&'static str, f64>>,
    pub laptop_open_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Partition {
    None,
    Vertical,
    Horizontal,
}

fn base_prior(item: &str, recep: &str) -> f64 {
    let food = ["apple", "potato", "tomato", "bread", "lettuce", "egg"];
    let dish = ["mug", "cup", "bowl", "plate"];
    let small = ["cd", "pen", "keychain", "book"];
    let utensil = ["knife", "spoon"];
    let table: &[(&str, f64)] = if food.contains(&item) {
        &[("fridge", 3.0), ("countertop", 3.0), ("table", 1.0), ("microwave", 0.5), ("cabinet", 0.5), ("sink", 0.5), ("shelf", 0.5)]
    } else if dish.contains(&item) {
        &[("cabinet", 3.0), ("countertop", 2.0), ("sink", 1.5), ("table", 1.0), ("shelf", 1.0), ("drawer", 0.5), ("microwave", 0.5)]
    } else if small.contains(&item) {
        &[("drawer", 3.0), ("shelf", 2.0), ("table", 2.0), ("safe", 1.5), ("cabinet", 1.0), ("countertop", 0.5)]
    } else if utensil.contains(&item) {
        &[("drawer", 3.0), ("countertop", 2.0), ("sink", 1.0), ("table", 0.5)]
    } else if item == "laptop" {
        &[("table", 3.0), ("countertop", 1.0), ("shelf", 1.0)]
    } else {
        &[("countertop", 1.0), ("table", 1.0)]
    };
    table.iter().find(|(r, _)| *r == recep).map(|(_, w)| *w).unwrap_or(0.0)
}

impl Style {
    pub fn for_id(style_id: u32) -> Style {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + style_id as u64);
        let partition = match style_id % 3 {
            0 => Partition::None,
            1 => Partition::Vertical,
            _ => Partition::Horizontal,
        };
        let islands = style_id % 2 == 1;
        let mut priors = BTreeMap::new();
        for item in catalog::item_names() {
            let mut row = BTreeMap::new();
            for recep in catalog::receptacle_names() {
                let w = base_prior(item, recep);
                if w > 0.0 {
                    // log-normal perturbation, sigma 0.6
                    let z: f64 = (0..4).map(|_| rng.gen::<f64>()).sum::<f64>() - 2.0;
                    row.insert(recep, w * (z * 0.6 * 1.73).exp());
                }
            }
            priors.insert(item, row);
        }
        Style { partition, islands, priors, laptop_open_p: 0.25 + 0.5 * rng.gen::<f64>() }
    }
}

fn draw_count(rng: &mut ChaCha8Rng, c: &ClassCount) -> u32 {
    if c.max <= c.min {
        c.min
    } else {
        rng.gen_range(c.min..=c.max)
    }
}

fn walls_for(style: &Style, w: i32, h: i32, rng: &mut ChaCha8Rng) -> BTreeSet<Cell> {
    let mut walls = BTreeSet::new();
    match style.partition {
        Partition::None => {}
        Partition::Vertical if w >= 7 => {
            let x = w / 2;
            let gap = rng.gen_range(1..h - 2);
            for y in 0..h {
                if y != gap && y != gap + 1 {
                    walls.insert(Cell(x, y));
                }
            }
        }
        Partition::Horizontal if h >= 7 => {
            let y = h / 2;
            let gap = rng.gen_range(1..w - 2);
            for x in 0..w {
                if x != gap && x != gap + 1 {
                    walls.insert(Cell(x, y));
                }
            }
        }
        _ => {}
    }
    walls
}

fn largest_component(free: &BTreeSet<Cell>) -> BTreeSet<Cell> {
    let mut seen = BTreeSet::new();
    let mut best = BTreeSet::new();
    for &start in free {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(c) = queue.pop_front() {
            comp.insert(c);
            for n in c.neighbours4() {
                if free.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

fn furniture_candidates(style: &Style, w: i32, h: i32, walls: &BTreeSet<Cell>) -> Vec<Cell> {
    let mut out = Vec::new();
    for x in 0..w {
        for y in 0..h {
            let c = Cell(x, y);
            if walls.contains(&c) {
                continue;
            }
            let perimeter = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let by_wall = c.neighbours4().iter().any(|n| walls.contains(n));
            let island = style.islands && x >= 2 && y >= 2 && x <= w - 3 && y <= h - 3 && (x + y) % 3 == 0;
            if perimeter || by_wall || island {
                out.push(c);
            }
        }
    }
    out
}

struct Layout {
    walls: BTreeSet<Cell>,
    reachable: BTreeSet<Cell>,
    furniture: Vec<(&'static str, Cell)>,
}

fn try_layout(config: &SceneConfig, style: &Style, rng: &mut ChaCha8Rng) -> Option<Layout> {
    let (w, h) = (config.width, config.height);
    let walls = walls_for(style, w, h, rng);
    let mut cands = furniture_candidates(style, w, h, &walls);
    cands.shuffle(rng);
    let mut furniture = Vec::new();
    for rc in &config.receptacles {
        let spec = catalog::lookup(&rc.class)?;
        for _ in 0..draw_count(rng, rc) {
            let cell = cands.pop()?;
            furniture.push((spec.name, cell));
        }
    }
    let blocked: BTreeSet<Cell> = furniture.iter().map(|(_, c)| *c).chain(walls.iter().copied()).collect();
    let free: BTreeSet<Cell> =
        (0..w).flat_map(|x| (0..h).map(move |y| Cell(x, y))).filter(|c| !blocked.contains(c)).collect();
    let reachable = largest_component(&free);
    let all_reachable = furniture
        .iter()
        .all(|(_, c)| c.neighbours4().iter().any(|n| reachable.contains(n)));
    (all_reachable && !reachable.is_empty()).then_some(Layout { walls, reachable, furniture })
}

pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<SceneState, GenerateError> {
    if config.width < 3 || config.height < 3 {
        return Err(GenerateError::InfeasibleConfig("grid smaller than 3x3".into()));
    }
    for c in config.receptacles.iter().chain(&config.objects) {
        let Some(spec) = catalog::lookup(&c.class) else {
            return Err(GenerateError::InfeasibleConfig(format!("unknown class {}", c.class)));
        };
        let is_item = spec.kind == ClassKind::Item;
        let in_objects = config.objects.contains(c);
        if is_item != in_objects {
            return Err(GenerateError::InfeasibleConfig(format!("class {} listed in the wrong section", c.class)));
        }
        if c.min > c.max {
            return Err(GenerateError::InfeasibleConfig(format!("min > max for {}", c.class)));
        }
    }
    let style = Style::for_id(config.style_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ config.style_id as u64);
    let layout = (0..64)
        .find_map(|_| try_layout(config, &style, &mut rng))
        .ok_or_else(|| GenerateError::InfeasibleConfig("could not place furniture with reachable access".into()))?;

    let mut objects = BTreeMap::new();
    let mut counters: BTreeMap<&str, u32> = BTreeMap::new();
    let mut next_id = |class: &'static str| {
        let n = counters.entry(class).or_insert(0);
        *n += 1;
        format!("{class}_{n}")
    };
    let mut receptacle_ids: Vec<(String, &'static str)> = Vec::new();
    for (class, cell) in &layout.furniture {
        let spec = catalog::lookup(class).unwrap();
        let id = next_id(spec.name);
        let attrs = ObjectAttrs::for_class(class).unwrap();
        objects.insert(
            id.clone(),
            ObjectInstance { id: id.clone(), class_name: class.to_string(), attrs, location: Location::Floor { cell: *cell, band: spec.band } },
        );
        if spec.kind == ClassKind::Receptacle {
            receptacle_ids.push((id, spec.name));
        }
        if spec.name == "sink" {
            let fid = next_id("faucet");
            objects.insert(
                fid.clone(),
                ObjectInstance {
                    id: fid,
                    class_name: "faucet".into(),
                    attrs: ObjectAttrs::for_class("faucet").unwrap(),
                    location: Location::Floor { cell: *cell, band: HeightBand::Mid },
                },
            );
        }
    }

    let mut occupancy: BTreeMap<(String, String), u32> = BTreeMap::new();
    for oc in &config.objects {
        let spec = catalog::lookup(&oc.class).unwrap();
        for _ in 0..draw_count(&mut rng, oc) {
            let prior = &style.priors[spec.name];
            let options: Vec<(&String, f64)> = receptacle_ids
                .iter()
                .filter(|(rid, _)| {
                    !config.unique_class_per_receptacle
                        || !occupancy.contains_key(&(rid.clone(), spec.name.to_string()))
                })
                .map(|(rid, rclass)| (rid, prior.get(rclass).copied().unwrap_or(0.0)))
                .filter(|(_, w)| *w > 0.0)
                .collect();
            let total: f64 = options.iter().map(|(_, w)| w).sum();
            if options.is_empty() || total <= 0.0 {
                return Err(GenerateError::InfeasibleConfig(format!("no receptacle can hold {}", spec.name)));
            }
            let mut pick = rng.gen::<f64>() * total;
            let mut chosen = options[options.len() - 1].0;
            for (rid, w) in &options {
                if pick < *w {
                    chosen = rid;
                    break;
                }
                pick -= w;
            }
            let chosen = chosen.clone();
            *occupancy.entry((chosen.clone(), spec.name.to_string())).or_insert(0) += 1;
            let mut attrs = ObjectAttrs::for_class(spec.name).unwrap();
            if spec.openable {
                attrs.is_open = rng.gen::<f64>() < style.laptop_open_p;
            }
            let id = next_id(spec.name);
            objects.insert(
                id.clone(),
                ObjectInstance { id, class_name: spec.name.to_string(), attrs, location: Location::In { receptacle: chosen } },
            );
        }
    }

    let cells: Vec<Cell> = layout.reachable.iter().copied().collect();
    let start = cells[rng.gen_range(0..cells.len())];
    let rotation = Rotation::ALL[rng.gen_range(0..4)];
    let state = SceneState {
        version: SCENE_VERSION.to_string(),
        style_id: config.style_id,
        grid: Grid { width: config.width, height: config.height, walls: layout.walls, reachable: layout.reachable },
        objects,
        agent: ScenePose { cell: start, rotation, horizon: Horizon::Level },
        inventory: None,
        rng_seed: seed,
    };
    debug_assert!(state.check_invariants().is_ok());
    Ok(state)
}
