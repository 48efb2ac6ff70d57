//! Task suites: household (HH) manipulation tasks and question-answering
//! (IQA) tasks over generated scenes, with gold checkers.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{iqa_gold_trace, ReactiveEpisode};
use crate::env::Episode;
use crate::library::load_builtin;
use crate::planner::{induce_planner_labels, rule_plan, Instruction, Subgoal, SubgoalKind};
use crate::procir::{canonicalize, interpret, ExecutableProcedure, Library, Value};
use crate::reactors::Registry;
use crate::world::{
    generate_scene, observe_from, ClassCount, Location, ObjectAttrs, ObjectInstance, SceneConfig, ScenePose,
    SceneState, Temperature, CONFIG_VERSION,
};
use crate::world::{Horizon, Rotation};

pub const SUITE_VERSION: &str = "suite/1";
/// Atomic-attempt budget for household tasks (both agents).
pub const HH_BUDGET: usize = 150;
/// Atomic-attempt budget for question answering; grid scans are long.
pub const IQA_BUDGET: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Seen,
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Existence,
    Count,
    Contain,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 3] = [QuestionKind::Existence, QuestionKind::Count, QuestionKind::Contain];

    pub fn name(self) -> &'static str {
        match self {
            QuestionKind::Existence => "existence",
            QuestionKind::Count => "count",
            QuestionKind::Contain => "contain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HhKind {
    PickPlace,
    PickTwoPlace,
    CleanPlace,
    HeatPlace,
    CoolPlace,
    SlicePlace,
    ExamineLight,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum TaskKind {
    Iqa { question: QuestionKind },
    Hh { kind: HhKind, recipe: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Props {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clean: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hot: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cold: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sliced: bool,
}

impl Props {
    fn holds(&self, a: &ObjectAttrs) -> bool {
        (!self.clean || a.is_clean)
            && (!self.hot || a.temperature == Temperature::Hot)
            && (!self.cold || a.temperature == Temperature::Cold)
            && (!self.sliced || a.is_sliced)
    }
}

/// Declarative state predicate; a task's goal is a list of these.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "cond", rename_all = "snake_case")]
pub enum GoalCond {
    /// Some instance of `obj` left its initial location.
    Moved { obj: String },
    /// Some instance of `obj` has the properties.
    Has { obj: String, props: Props },
    /// At least `min` instances of `obj` with the properties lie in
    /// receptacles of class `recep`.
    In { obj: String, recep: String, min: usize, props: Props },
    Held { obj: String, props: Props },
    On { obj: String },
}

impl GoalCond {
    pub fn satisfied(&self, initial: &SceneState, s: &SceneState) -> bool {
        match self {
            GoalCond::Moved { obj } => s
                .instances_of(obj)
                .any(|o| initial.object(&o.id).is_none_or(|i| i.location != o.location)),
            GoalCond::Has { obj, props } => s.instances_of(obj).any(|o| props.holds(&o.attrs)),
            GoalCond::In { obj, recep, min, props } => {
                s.instances_of(obj)
                    .filter(|o| props.holds(&o.attrs))
                    .filter(|o| matches!(&o.location, Location::In { receptacle } if s.class_of(receptacle) == Some(recep)))
                    .count()
                    >= *min
            }
            GoalCond::Held { obj, props } => s
                .inventory
                .as_deref()
                .and_then(|id| s.object(id))
                .is_some_and(|o| o.class_name == *obj && props.holds(&o.attrs)),
            GoalCond::On { obj } => s.instances_of(obj).any(|o| o.attrs.is_on),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gold {
    Answer(String),
    Goals(Vec<GoalCond>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub instruction: Instruction,
    pub config: SceneConfig,
    pub scene_seed: u64,
    pub gold: Gold,
    pub gold_ae: ExecutableProcedure,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subgoals: Vec<Subgoal>,
    /// Role-level procedure sequence (arguments abstracted).
    pub signature: String,
    /// Length of the canonical atomic rollout of the gold procedure.
    pub gold_len: usize,
    /// Some receptacle is invisible from every view at the start cell.
    #[serde(default)]
    pub hidden_receptacle: bool,
}

impl TaskSpec {
    /// The task's initial scene; household scenes get the knife placed on
    /// the first countertop.
    pub fn scene(&self) -> SceneState {
        let mut s = generate_scene(&self.config, self.scene_seed).expect("suite configs are feasible");
        if matches!(self.kind, TaskKind::Hh { .. }) {
            place_knife(&mut s);
        }
        s
    }

    pub fn is_iqa(&self) -> bool {
        matches!(self.kind, TaskKind::Iqa { .. })
    }

    pub fn kind_name(&self) -> String {
        match &self.kind {
            TaskKind::Iqa { question } => question.name().to_string(),
            TaskKind::Hh { recipe, .. } => recipe.clone(),
        }
    }

    /// Number of goal conditions (1 for questions).
    pub fn n_conditions(&self) -> usize {
        match &self.gold {
            Gold::Answer(_) => 1,
            Gold::Goals(g) => g.len(),
        }
    }

    /// Satisfied goal conditions in `final_state`.
    pub fn conditions_met(&self, initial: &SceneState, final_state: &SceneState) -> usize {
        match &self.gold {
            Gold::Answer(_) => 0,
            Gold::Goals(g) => g.iter().filter(|c| c.satisfied(initial, final_state)).count(),
        }
    }

    /// The supervised episode the reactive baseline trains on.
    pub fn reactive_episode(&self, lib: &Library) -> Option<ReactiveEpisode> {
        let scene = self.scene();
        match (&self.kind, &self.gold) {
            (TaskKind::Iqa { question }, Gold::Answer(_)) => {
                let args = &self.gold_ae.calls.first()?.args;
                let recep = if *question == QuestionKind::Contain { args.get(1).map(String::as_str) } else { None };
                let kind = if *question == QuestionKind::Count { "count" } else { "yesno" };
                let (trace, answer) = iqa_gold_trace(&scene, kind, &args[0], recep);
                Some(ReactiveEpisode { instruction: self.instruction.clone(), scene, trace, answer: Some(answer) })
            }
            _ => {
                let trace = canonicalize(&self.gold_ae, lib, &scene, &Registry::oracle(), HH_BUDGET).ok()?;
                Some(ReactiveEpisode { instruction: self.instruction.clone(), scene, trace, answer: None })
            }
        }
    }
}

fn place_knife(s: &mut SceneState) {
    let Some(counter) = s.instances_of("countertop").map(|o| o.id.clone()).next() else { return };
    let n = s.instances_of("knife").count() + 1;
    let id = format!("knife_{n}");
    s.objects.insert(
        id.clone(),
        ObjectInstance {
            id,
            class_name: "knife".into(),
            attrs: ObjectAttrs::for_class("knife").expect("catalog class"),
            location: Location::In { receptacle: counter },
        },
    );
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("infeasible task: {0}")]
    InfeasibleTask(String),
    #[error("invalid design: {0}")]
    Design(String),
}

// ---------------------------------------------------------------------------
// Household recipes

const PICK_POOL: &[&str] = &[
    "apple", "potato", "tomato", "bread", "lettuce", "egg", "mug", "cup", "bowl", "plate", "spoon", "cd", "pen", "book",
    "keychain", "laptop",
];
const CLEAN_POOL: &[&str] = &["mug", "cup", "bowl", "plate", "spoon", "apple", "tomato", "lettuce", "potato"];
const HEAT_POOL: &[&str] = &["apple", "potato", "tomato", "bread", "egg", "mug", "cup", "bowl", "plate"];
const COOL_POOL: &[&str] = &["apple", "potato", "tomato", "bread", "lettuce", "egg", "mug", "cup", "bowl", "plate"];
const SLICE_POOL: &[&str] = &["apple", "potato", "tomato", "bread", "lettuce"];
const EXAMINE_POOL: &[&str] = &["book", "cd", "pen", "keychain", "mug", "bowl", "cup", "plate", "spoon", "laptop"];
const DEST_POOL: &[&str] = &["cabinet", "drawer", "countertop", "table", "shelf", "safe"];
const DEST_POOL_SINK: &[&str] = &["cabinet", "drawer", "countertop", "table", "shelf", "safe", "sink"];

/// Role placeholders in recipe subgoals.
const O: &str = "O";
const R: &str = "R";
const O2: &str = "O2";
const R2: &str = "R2";

pub struct Recipe {
    pub name: &'static str,
    pub kind: HhKind,
    obj_pool: &'static [&'static str],
    dest_pool: &'static [&'static str],
    /// Instances of O needed.
    pub needs_two: bool,
    /// Uses a second object (and possibly a second receptacle).
    pub second_obj: bool,
    pub second_dest: bool,
    subgoals: &'static [(SubgoalKind, &'static str)],
    goals: fn(&str, &str, &str, &str) -> Vec<GoalCond>,
    templates: &'static [&'static str],
    rare: &'static [&'static str],
}

fn p(clean: bool, hot: bool, cold: bool, sliced: bool) -> Props {
    Props { clean, hot, cold, sliced }
}
fn g_in(o: &str, r: &str, min: usize, props: Props) -> GoalCond {
    GoalCond::In { obj: o.into(), recep: r.into(), min, props }
}
fn g_has(o: &str, props: Props) -> GoalCond {
    GoalCond::Has { obj: o.into(), props }
}
fn g_held(o: &str, props: Props) -> GoalCond {
    GoalCond::Held { obj: o.into(), props }
}
fn g_lamp() -> GoalCond {
    GoalCond::On { obj: "lamp".into() }
}

use SubgoalKind::{Clean, Cool, Goto, Heat, Pick, Put, Slice, Toggle};

const NONE: Props = Props { clean: false, hot: false, cold: false, sliced: false };

pub static RECIPES: &[Recipe] = &[
    Recipe {
        name: "pick_place",
        kind: HhKind::PickPlace,
        obj_pool: PICK_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![GoalCond::Moved { obj: o.into() }, g_in(o, r, 1, NONE)],
        templates: &["put a {o} in the {r}", "place a {o} on the {r}", "move the {o} to the {r}"],
        rare: &["stash a {o} in the {r}", "deposit the {o} on the {r}"],
    },
    Recipe {
        name: "pick_two_place",
        kind: HhKind::PickTwoPlace,
        obj_pool: PICK_POOL,
        dest_pool: DEST_POOL,
        needs_two: true,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Put, R), (Goto, ""), (Pick, O), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![g_in(o, r, 1, NONE), g_in(o, r, 2, NONE)],
        templates: &["put two {os} in the {r}", "place two {os} on the {r}", "move both {os} to the {r}"],
        rare: &["stash two {os} in the {r}", "deposit a pair of {os} on the {r}"],
    },
    Recipe {
        name: "pick_two_diff",
        kind: HhKind::PickTwoPlace,
        obj_pool: PICK_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: true,
        second_dest: true,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Put, R), (Goto, ""), (Pick, O2), (Goto, ""), (Put, R2)],
        goals: |o, r, o2, r2| vec![g_in(o, r, 1, NONE), g_in(o2, r2, 1, NONE)],
        templates: &["put a {o} in the {r} and a {o2} in the {r2}", "place the {o} on the {r}, then the {o2} in the {r2}"],
        rare: &["stash a {o} in the {r} and deposit a {o2} on the {r2}"],
    },
    Recipe {
        name: "clean_place",
        kind: HhKind::CleanPlace,
        obj_pool: CLEAN_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Clean, ""), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![g_has(o, p(true, false, false, false)), g_in(o, r, 1, p(true, false, false, false))],
        templates: &["put a clean {o} in the {r}", "wash a {o} and put it on the {r}", "rinse the {o} then place it in the {r}"],
        rare: &["soak a {o} and put it in the {r}", "scrub the {o} and leave it on the {r}"],
    },
    Recipe {
        name: "clean_two_place",
        kind: HhKind::CleanPlace,
        obj_pool: CLEAN_POOL,
        dest_pool: DEST_POOL,
        needs_two: true,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Clean, ""),
            (Goto, ""),
            (Put, R),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Clean, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| vec![g_in(o, r, 1, p(true, false, false, false)), g_in(o, r, 2, p(true, false, false, false))],
        templates: &["put two clean {os} in the {r}", "wash two {os} and put them on the {r}"],
        rare: &["soak two {os} and put them in the {r}"],
    },
    Recipe {
        name: "heat_place",
        kind: HhKind::HeatPlace,
        obj_pool: HEAT_POOL,
        dest_pool: DEST_POOL_SINK,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Heat, ""), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![g_has(o, p(false, true, false, false)), g_in(o, r, 1, p(false, true, false, false))],
        templates: &["put a hot {o} in the {r}", "heat a {o} and place it on the {r}", "warm up a {o} then put it in the {r}"],
        rare: &["nuke a {o} and put it in the {r}", "toast the {o} and leave it on the {r}"],
    },
    Recipe {
        name: "heat_two_place",
        kind: HhKind::HeatPlace,
        obj_pool: HEAT_POOL,
        dest_pool: DEST_POOL,
        needs_two: true,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Heat, ""),
            (Goto, ""),
            (Put, R),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Heat, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| vec![g_in(o, r, 1, p(false, true, false, false)), g_in(o, r, 2, p(false, true, false, false))],
        templates: &["put two hot {os} in the {r}", "heat two {os} and put them on the {r}"],
        rare: &["nuke two {os} and put them in the {r}"],
    },
    Recipe {
        name: "heat_and_other",
        kind: HhKind::HeatPlace,
        obj_pool: HEAT_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: true,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Heat, ""), (Goto, ""), (Put, R), (Goto, ""), (Pick, O2), (Goto, ""), (Put, R)],
        goals: |o, r, o2, _| vec![g_in(o, r, 1, p(false, true, false, false)), g_in(o2, r, 1, NONE)],
        templates: &["put a hot {o} and a {o2} in the {r}", "heat a {o} and put it on the {r} along with a {o2}"],
        rare: &["nuke a {o} and stash it with a {o2} in the {r}"],
    },
    Recipe {
        name: "cool_place",
        kind: HhKind::CoolPlace,
        obj_pool: COOL_POOL,
        dest_pool: DEST_POOL_SINK,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Cool, ""), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![g_has(o, p(false, false, true, false)), g_in(o, r, 1, p(false, false, true, false))],
        templates: &["put a chilled {o} in the {r}", "cool a {o} and put it on the {r}", "put a cold {o} in the {r}"],
        rare: &["refrigerate a {o} and put it in the {r}", "ice the {o} and leave it on the {r}"],
    },
    Recipe {
        name: "cool_two_place",
        kind: HhKind::CoolPlace,
        obj_pool: COOL_POOL,
        dest_pool: DEST_POOL,
        needs_two: true,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Cool, ""),
            (Goto, ""),
            (Put, R),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Cool, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| vec![g_in(o, r, 1, p(false, false, true, false)), g_in(o, r, 2, p(false, false, true, false))],
        templates: &["put two chilled {os} in the {r}", "cool two {os} and put them on the {r}"],
        rare: &["refrigerate two {os} and put them in the {r}"],
    },
    Recipe {
        name: "slice_place",
        kind: HhKind::SlicePlace,
        obj_pool: SLICE_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, "knife"), (Goto, ""), (Slice, O), (Goto, ""), (Put, "countertop"), (Goto, ""), (Pick, O), (Goto, ""), (Put, R)],
        goals: |o, r, _, _| vec![g_has(o, p(false, false, false, true)), g_in(o, r, 1, p(false, false, false, true))],
        templates: &["put a {o} slice in the {r}", "slice a {o} and put it on the {r}", "cut a {o} and place it in the {r}"],
        rare: &["dice a {o} and put it in the {r}", "carve the {o} and leave it on the {r}"],
    },
    Recipe {
        name: "slice_heat_place",
        kind: HhKind::HeatPlace,
        obj_pool: SLICE_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, "knife"),
            (Goto, ""),
            (Slice, O),
            (Goto, ""),
            (Put, "countertop"),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Heat, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| {
            vec![g_has(o, p(false, false, false, true)), g_has(o, p(false, true, false, false)), g_in(o, r, 1, p(false, true, false, true))]
        },
        templates: &["place a cooked {o} slice in the {r}", "slice a {o}, heat it and put it on the {r}"],
        rare: &["dice a {o}, nuke it and put it in the {r}"],
    },
    Recipe {
        name: "slice_cool_place",
        kind: HhKind::CoolPlace,
        obj_pool: SLICE_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, "knife"),
            (Goto, ""),
            (Slice, O),
            (Goto, ""),
            (Put, "countertop"),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Cool, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| {
            vec![g_has(o, p(false, false, false, true)), g_has(o, p(false, false, true, false)), g_in(o, r, 1, p(false, false, true, true))]
        },
        templates: &["place a chilled {o} slice in the {r}", "slice a {o}, cool it and put it on the {r}"],
        rare: &["dice a {o}, refrigerate it and put it in the {r}"],
    },
    Recipe {
        name: "slice_clean_place",
        kind: HhKind::CleanPlace,
        obj_pool: SLICE_POOL,
        dest_pool: DEST_POOL,
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[
            (Goto, ""),
            (Pick, "knife"),
            (Goto, ""),
            (Slice, O),
            (Goto, ""),
            (Put, "countertop"),
            (Goto, ""),
            (Pick, O),
            (Goto, ""),
            (Clean, ""),
            (Goto, ""),
            (Put, R),
        ],
        goals: |o, r, _, _| {
            vec![g_has(o, p(false, false, false, true)), g_has(o, p(true, false, false, false)), g_in(o, r, 1, p(true, false, false, true))]
        },
        templates: &["place a clean {o} slice in the {r}", "slice a {o}, wash it and put it on the {r}"],
        rare: &["dice a {o}, soak it and put it in the {r}"],
    },
    Recipe {
        name: "examine_light",
        kind: HhKind::ExamineLight,
        obj_pool: EXAMINE_POOL,
        dest_pool: &[],
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Toggle, "lamp")],
        goals: |o, _, _, _| vec![g_held(o, NONE), g_lamp()],
        templates: &["examine a {o} under the lamp", "look at the {o} in the light of the lamp", "pick up the {o} and turn on the lamp"],
        rare: &["scrutinize a {o} under the lamp", "inspect the {o} by the lamp"],
    },
    Recipe {
        name: "examine_clean",
        kind: HhKind::ExamineLight,
        obj_pool: CLEAN_POOL,
        dest_pool: &[],
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Clean, ""), (Goto, ""), (Toggle, "lamp")],
        goals: |o, _, _, _| vec![g_has(o, p(true, false, false, false)), g_held(o, p(true, false, false, false)), g_lamp()],
        templates: &["examine a clean {o} under the lamp", "wash a {o} and look at it under the lamp"],
        rare: &["soak a {o} and scrutinize it under the lamp"],
    },
    Recipe {
        name: "examine_heat",
        kind: HhKind::ExamineLight,
        obj_pool: HEAT_POOL,
        dest_pool: &[],
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Heat, ""), (Goto, ""), (Toggle, "lamp")],
        goals: |o, _, _, _| vec![g_has(o, p(false, true, false, false)), g_held(o, p(false, true, false, false)), g_lamp()],
        templates: &["examine a hot {o} under the lamp", "heat a {o} and look at it under the lamp"],
        rare: &["nuke a {o} and scrutinize it under the lamp"],
    },
    Recipe {
        name: "examine_cool",
        kind: HhKind::ExamineLight,
        obj_pool: COOL_POOL,
        dest_pool: &[],
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, O), (Goto, ""), (Cool, ""), (Goto, ""), (Toggle, "lamp")],
        goals: |o, _, _, _| vec![g_has(o, p(false, false, true, false)), g_held(o, p(false, false, true, false)), g_lamp()],
        templates: &["examine a cold {o} under the lamp", "cool a {o} and look at it under the lamp"],
        rare: &["refrigerate a {o} and scrutinize it under the lamp"],
    },
    Recipe {
        name: "examine_slice",
        kind: HhKind::ExamineLight,
        obj_pool: SLICE_POOL,
        dest_pool: &[],
        needs_two: false,
        second_obj: false,
        second_dest: false,
        subgoals: &[(Goto, ""), (Pick, "knife"), (Goto, ""), (Slice, O), (Goto, ""), (Put, "countertop"), (Goto, ""), (Pick, O), (Goto, ""), (Toggle, "lamp")],
        goals: |o, _, _, _| vec![g_has(o, p(false, false, false, true)), g_held(o, p(false, false, false, true)), g_lamp()],
        templates: &["examine a sliced {o} under the lamp", "slice a {o} and look at it under the lamp"],
        rare: &["dice a {o} and scrutinize it under the lamp"],
    },
];

pub fn recipe(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

fn subgoals_for(r: &Recipe, bind: &dyn Fn(&str) -> String) -> Vec<Subgoal> {
    r.subgoals
        .iter()
        .map(|(k, a)| Subgoal { kind: *k, arg: (!a.is_empty()).then(|| bind(a)) })
        .collect()
}

impl Recipe {
    /// Gold procedure with role names as arguments.
    pub fn signature(&self) -> String {
        let sg = subgoals_for(self, &|a| a.to_string());
        induce_planner_labels(&sg).map(|p| p.to_string()).unwrap_or_default()
    }
}

pub fn plural(w: &str) -> String {
    if w.ends_with('o') {
        format!("{w}es")
    } else if let Some(s) = w.strip_suffix("fe") {
        format!("{s}ves")
    } else {
        format!("{w}s")
    }
}

#[cfg(test)]
pub(crate) fn render_for_test(template: &str, o: &str, r: &str) -> String {
    render(template, o, r, "", "")
}

fn render(template: &str, o: &str, r: &str, o2: &str, r2: &str) -> String {
    let s = template
        .replace("{os}", &plural(o))
        .replace("{o}", o)
        .replace("{o2}", o2)
        .replace("{r2}", r2)
        .replace("{r}", r);
    // a → an before a vowel
    let words: Vec<&str> = s.split(' ').collect();
    let mut out = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let next_vowel = words.get(i + 1).and_then(|n| n.chars().next()).is_some_and(|c| "aeiou".contains(c));
        out.push(if *w == "a" && next_vowel { "an" } else { w });
    }
    out.join(" ")
}

// ---------------------------------------------------------------------------
// Suite configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub version: String,
    pub seen_styles: Vec<u32>,
    pub unseen_styles: Vec<u32>,
    /// Probability an unseen-split instruction uses a rare-verb paraphrase.
    pub rare_rate: f64,
    /// Only these recipes (all when empty).
    #[serde(default)]
    pub recipes: Vec<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            version: SUITE_VERSION.into(),
            seen_styles: vec![1, 2, 3, 4],
            unseen_styles: vec![7, 8],
            rare_rate: 0.3,
            recipes: vec![],
        }
    }
}

pub fn hh_scene_config(style_id: u32) -> SceneConfig {
    let r = |c: &str, lo, hi| ClassCount::new(c, lo, hi);
    SceneConfig {
        version: CONFIG_VERSION.into(),
        style_id,
        width: 8,
        height: 7,
        receptacles: vec![
            r("fridge", 1, 1),
            r("microwave", 1, 1),
            r("sink", 1, 1),
            r("countertop", 1, 2),
            r("cabinet", 1, 2),
            r("drawer", 1, 2),
            r("table", 1, 1),
            r("shelf", 0, 1),
            r("safe", 0, 1),
            r("lamp", 1, 1),
        ],
        objects: PICK_POOL.iter().map(|c| r(c, 0, 2)).collect(),
        unique_class_per_receptacle: false,
    }
}

pub const IQA_OBJECTS: &[&str] =
    &["apple", "potato", "tomato", "bread", "egg", "mug", "cup", "bowl", "plate", "spoon", "cd", "pen", "book", "keychain"];

pub fn iqa_scene_config(style_id: u32) -> SceneConfig {
    let r = |c: &str, lo, hi| ClassCount::new(c, lo, hi);
    SceneConfig {
        version: CONFIG_VERSION.into(),
        style_id,
        width: 8,
        height: 7,
        receptacles: vec![
            r("fridge", 1, 1),
            r("microwave", 0, 1),
            r("cabinet", 1, 3),
            r("drawer", 1, 2),
            r("countertop", 1, 2),
            r("sink", 0, 1),
            r("table", 1, 1),
            r("shelf", 0, 1),
            r("safe", 0, 1),
        ],
        objects: IQA_OBJECTS.iter().map(|c| r(c, 0, 2)).collect(),
        unique_class_per_receptacle: true,
    }
}

/// Whether some receptacle cannot be seen from any view at the start cell.
pub fn has_hidden_receptacle(s: &SceneState) -> bool {
    let mut seen = BTreeSet::new();
    for rot in Rotation::ALL {
        for hor in Horizon::ALL {
            let pose = ScenePose { cell: s.agent.cell, rotation: rot, horizon: hor };
            seen.extend(observe_from(s, &pose).detections.into_iter().map(|d| d.id));
        }
    }
    s.objects.values().any(|o| o.attrs.is_receptacle && !seen.contains(&o.id))
}

/// alfred/v1 ∪ iqa/v1.
pub fn combined_library() -> Library {
    let mut lib = load_builtin("alfred/v1").expect("built-in").library;
    lib.procs.extend(load_builtin("iqa/v1").expect("built-in").library.procs);
    lib
}

fn styles(cfg: &SuiteConfig, split: Split) -> &[u32] {
    match split {
        Split::Unseen => &cfg.unseen_styles,
        _ => &cfg.seen_styles,
    }
}

fn classes_in(s: &SceneState, c: &str) -> usize {
    s.instances_of(c).count()
}

fn in_count(s: &SceneState, obj: &str, recep: &str) -> usize {
    s.instances_of(obj)
        .filter(|o| matches!(&o.location, Location::In { receptacle } if s.class_of(receptacle) == Some(recep)))
        .count()
}

/// One household task for `recipe` on a scene drawn from `seed`.
pub fn generate_hh_task(
    recipe: &Recipe,
    cfg: &SuiteConfig,
    split: Split,
    seed: u64,
    lib: &Library,
) -> Result<TaskSpec, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style_list = styles(cfg, split);
    let style = style_list[rng.gen_range(0..style_list.len())];
    hh_task_in(recipe, hh_scene_config(style), cfg, split, &mut rng, lib)
}

/// Household task on a scene drawn from `config`.
pub fn hh_task_in(
    recipe: &Recipe,
    config: SceneConfig,
    cfg: &SuiteConfig,
    split: Split,
    rng: &mut ChaCha8Rng,
    lib: &Library,
) -> Result<TaskSpec, BenchError> {
    let scene_seed: u64 = rng.gen();
    let mut scene = generate_scene(&config, scene_seed).map_err(|e| BenchError::InfeasibleTask(e.to_string()))?;
    place_knife(&mut scene);
    let present = |c: &str| classes_in(&scene, c) > 0;
    let objs: Vec<&str> = recipe
        .obj_pool
        .iter()
        .filter(|c| classes_in(&scene, c) >= if recipe.needs_two { 2 } else { 1 })
        .copied()
        .collect();
    let dests: Vec<&str> = recipe.dest_pool.iter().filter(|c| present(c)).copied().collect();
    let o = *objs.choose(rng).ok_or_else(|| BenchError::InfeasibleTask(format!("{}: no target object", recipe.name)))?;
    let r = if recipe.dest_pool.is_empty() {
        ""
    } else {
        *dests
            .iter()
            .filter(|d| in_count(&scene, o, d) == 0)
            .copied()
            .collect::<Vec<_>>()
            .choose(rng)
            .ok_or_else(|| BenchError::InfeasibleTask(format!("{}: no destination", recipe.name)))?
    };
    let (o2, r2) = if recipe.second_obj {
        let o2 = *objs
            .iter()
            .chain(PICK_POOL.iter().filter(|c| present(c)))
            .filter(|c| **c != o && (recipe.second_dest || in_count(&scene, c, r) == 0))
            .copied()
            .collect::<Vec<_>>()
            .choose(rng)
            .ok_or_else(|| BenchError::InfeasibleTask(format!("{}: no second object", recipe.name)))?;
        let r2 = if recipe.second_dest {
            *dests
                .iter()
                .filter(|d| **d != r && in_count(&scene, o2, d) == 0)
                .copied()
                .collect::<Vec<_>>()
                .choose(rng)
                .ok_or_else(|| BenchError::InfeasibleTask(format!("{}: no second destination", recipe.name)))?
        } else {
            r
        };
        (o2, r2)
    } else {
        ("", "")
    };
    let needs = |c: &str| classes_in(&scene, c) > 0;
    let uses = |k: SubgoalKind| recipe.subgoals.iter().any(|(x, _)| *x == k);
    if (uses(Heat) && !needs("microwave"))
        || (uses(Cool) && !needs("fridge"))
        || (uses(Clean) && !(needs("sink") && needs("faucet")))
        || (uses(Slice) && !(needs("knife") && needs("countertop")))
        || (uses(Toggle) && !needs("lamp"))
    {
        return Err(BenchError::InfeasibleTask(format!("{}: missing appliance", recipe.name)));
    }
    let bind = |a: &str| match a {
        O => o.to_string(),
        R => r.to_string(),
        O2 => o2.to_string(),
        R2 => r2.to_string(),
        other => other.to_string(),
    };
    let subgoals = subgoals_for(recipe, &bind);
    let gold_ae = induce_planner_labels(&subgoals).map_err(|e| BenchError::InfeasibleTask(e.to_string()))?;
    let rare = split == Split::Unseen && !recipe.rare.is_empty() && rng.gen::<f64>() < cfg.rare_rate;
    let pool = if rare { recipe.rare } else { recipe.templates };
    let text = render(pool.choose(rng).expect("templates"), o, r, o2, r2);
    let gold_len = canonicalize(&gold_ae, lib, &scene, &Registry::oracle(), HH_BUDGET).map_or(0, |t| t.len());
    Ok(TaskSpec {
        id: String::new(),
        kind: TaskKind::Hh { kind: recipe.kind, recipe: recipe.name.into() },
        instruction: Instruction::with_template(&text, recipe.name),
        config,
        scene_seed,
        gold: Gold::Goals((recipe.goals)(o, r, o2, r2)),
        gold_ae,
        split,
        subgoals,
        signature: recipe.signature(),
        gold_len,
        hidden_receptacle: has_hidden_receptacle(&scene),
    })
}

const IQA_TEMPLATES: &[(QuestionKind, &str, bool)] = &[
    (QuestionKind::Existence, "is there a {o}?", false),
    (QuestionKind::Existence, "is there a {o} in the room?", false),
    (QuestionKind::Existence, "are there any {os}?", true),
    (QuestionKind::Existence, "does the room have a {o}?", true),
    (QuestionKind::Count, "how many {os} are there?", false),
    (QuestionKind::Count, "how many {os} are in the room?", false),
    (QuestionKind::Count, "count the {os}", true),
    (QuestionKind::Count, "what is the number of {os}?", true),
    (QuestionKind::Contain, "is there a {o} in the {r}?", false),
    (QuestionKind::Contain, "are there any {os} in the {r}?", false),
    (QuestionKind::Contain, "does the {r} contain a {o}?", true),
    (QuestionKind::Contain, "does the {r} have any {os}?", true),
];

pub fn generate_iqa_task(
    question: QuestionKind,
    cfg: &SuiteConfig,
    split: Split,
    seed: u64,
    lib: &Library,
) -> Result<TaskSpec, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style_list = styles(cfg, split);
    let style = style_list[rng.gen_range(0..style_list.len())];
    let config = iqa_scene_config(style);
    let scene_seed: u64 = rng.gen();
    let scene = generate_scene(&config, scene_seed).map_err(|e| BenchError::InfeasibleTask(e.to_string()))?;
    let present: Vec<&str> = IQA_OBJECTS.iter().filter(|c| classes_in(&scene, c) > 0).copied().collect();
    let absent: Vec<&str> = IQA_OBJECTS.iter().filter(|c| classes_in(&scene, c) == 0).copied().collect();
    let infeasible = || BenchError::InfeasibleTask(format!("{}: no suitable object", question.name()));
    let positive = rng.gen::<f64>() < 0.5;
    let (o, r, answer) = match question {
        QuestionKind::Existence => {
            let o = *(if positive { &present } else { &absent }).choose(&mut rng).ok_or_else(infeasible)?;
            (o, "", if positive { "yes" } else { "no" }.to_string())
        }
        QuestionKind::Count => {
            let pool = if rng.gen::<f64>() < 0.85 && !present.is_empty() { &present } else { &absent };
            let o = *pool.choose(&mut rng).ok_or_else(infeasible)?;
            let n = scene
                .instances_of(o)
                .filter_map(|x| match &x.location {
                    Location::In { receptacle } => Some(receptacle.as_str()),
                    _ => None,
                })
                .collect::<BTreeSet<_>>()
                .len();
            (o, "", n.to_string())
        }
        QuestionKind::Contain => {
            let receps: Vec<&str> = crate::world::catalog::receptacle_names().filter(|c| classes_in(&scene, c) > 0).collect();
            let r = *receps.choose(&mut rng).ok_or_else(infeasible)?;
            let inside: Vec<&str> = IQA_OBJECTS.iter().filter(|c| in_count(&scene, c, r) > 0).copied().collect();
            let outside: Vec<&str> = IQA_OBJECTS.iter().filter(|c| in_count(&scene, c, r) == 0).copied().collect();
            let positive = positive && !inside.is_empty();
            let o = *(if positive { &inside } else { &outside }).choose(&mut rng).ok_or_else(infeasible)?;
            (o, r, if positive { "yes" } else { "no" }.to_string())
        }
    };
    let allow_rare = split == Split::Unseen;
    let templates: Vec<&str> = IQA_TEMPLATES
        .iter()
        .filter(|(k, _, rare)| *k == question && (allow_rare || !rare))
        .map(|(_, t, _)| *t)
        .collect();
    let text = render(templates.choose(&mut rng).expect("templates"), o, r, "", "");
    let instruction = Instruction::with_template(&text, question.name());
    let gold_ae = rule_plan(&instruction).map_err(|e| BenchError::InfeasibleTask(e.to_string()))?;
    let hidden = has_hidden_receptacle(&scene);
    let gold_len = {
        let mut ep = Episode::new(scene.clone());
        interpret(&gold_ae, lib, &mut ep, &Registry::oracle(), IQA_BUDGET).atomic_actions().len()
    };
    Ok(TaskSpec {
        id: String::new(),
        kind: TaskKind::Iqa { question },
        instruction,
        config,
        scene_seed,
        gold: Gold::Answer(answer),
        signature: gold_ae.calls.first().map(|c| c.name.clone()).unwrap_or_default(),
        gold_ae,
        split,
        subgoals: vec![],
        gold_len,
        hidden_receptacle: hidden,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Hh,
    Iqa,
}

/// `n` tasks cycling through the suite's kinds; deterministic per seed.
/// Infeasible draws are retried with the next derived seed.
pub fn generate_suite(kind: SuiteKind, cfg: &SuiteConfig, split: Split, n: usize, seed: u64) -> Result<Vec<TaskSpec>, BenchError> {
    let lib = combined_library();
    let recipes: Vec<&Recipe> = if cfg.recipes.is_empty() {
        RECIPES.iter().collect()
    } else {
        cfg.recipes.iter().map(|n| recipe(n).ok_or_else(|| BenchError::Design(format!("unknown recipe {n}")))).collect::<Result<_, _>>()?
    };
    let tag = match split {
        Split::Train => 0u64,
        Split::Seen => 1,
        Split::Unseen => 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (tag << 40) ^ 0x7A5C);
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while out.len() < n {
        let mut attempt = 0;
        let task = loop {
            let s: u64 = rng.gen();
            let r = match kind {
                SuiteKind::Hh => generate_hh_task(recipes[i % recipes.len()], cfg, split, s, &lib),
                SuiteKind::Iqa => generate_iqa_task(QuestionKind::ALL[i % 3], cfg, split, s, &lib),
            };
            match r {
                Ok(t) => break t,
                Err(e) if attempt >= 50 => return Err(e),
                Err(_) => attempt += 1,
            }
        };
        let mut task = task;
        task.id = format!("{}-{:?}-{}", task.kind_name(), split, out.len()).to_lowercase();
        out.push(task);
        i += 1;
    }
    Ok(out)
}

/// Train / seen / unseen suites with split hygiene: seen and unseen use
/// disjoint styles, and household evaluation instructions never repeat a
/// training instruction verbatim. (Questions come from a closed grammar
/// and necessarily repeat; their splits differ by scene.)
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suites {
    pub train: Vec<TaskSpec>,
    pub seen: Vec<TaskSpec>,
    pub unseen: Vec<TaskSpec>,
}

pub fn generate_suites(kind: SuiteKind, cfg: &SuiteConfig, n_train: usize, n_eval: usize, seed: u64) -> Result<Suites, BenchError> {
    if cfg.seen_styles.iter().any(|s| cfg.unseen_styles.contains(s)) {
        return Err(BenchError::Design("seen and unseen styles overlap".into()));
    }
    let train = generate_suite(kind, cfg, Split::Train, n_train, seed)?;
    let texts: BTreeSet<&str> =
        if kind == SuiteKind::Hh { train.iter().map(|t| t.instruction.text.as_str()).collect() } else { BTreeSet::new() };
    let eval = |split: Split| -> Result<Vec<TaskSpec>, BenchError> {
        let mut extra = 0;
        for _ in 0..8 {
            let batch = generate_suite(kind, cfg, split, n_eval + extra, seed)?;
            let kept: Vec<TaskSpec> =
                batch.into_iter().filter(|t| !texts.contains(t.instruction.text.as_str())).take(n_eval).collect();
            if kept.len() == n_eval {
                return Ok(kept);
            }
            extra = 2 * extra + n_eval - kept.len();
        }
        Err(BenchError::Design("cannot draw enough evaluation instructions unseen in training".into()))
    };
    let seen = eval(Split::Seen)?;
    let unseen = eval(Split::Unseen)?;
    Ok(Suites { train, seen, unseen })
}

pub fn to_jsonl(tasks: &[TaskSpec]) -> String {
    tasks.iter().map(|t| serde_json::to_string(t).expect("serializable") + "\n").collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<TaskSpec>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// Answer token for an interpreter result.
pub fn answer_of(v: &Value) -> Option<String> {
    match v {
        Value::Bool(true) => Some("yes".into()),
        Value::Bool(false) => Some("no".into()),
        Value::Int(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Interpret the gold procedure with oracle reactors and check the gold.
pub fn check_soundness(task: &TaskSpec, lib: &Library) -> Result<(), String> {
    let initial = task.scene();
    let mut ep = Episode::new(initial.clone());
    let budget = if task.is_iqa() { IQA_BUDGET } else { HH_BUDGET };
    let trace = interpret(&task.gold_ae, lib, &mut ep, &Registry::oracle(), budget);
    if !trace.outcome.is_completed() {
        return Err(format!("{}: {:?} ({})", task.id, trace.outcome, task.gold_ae));
    }
    match &task.gold {
        Gold::Answer(a) => match answer_of(&trace.result) {
            Some(got) if got == *a => Ok(()),
            got => Err(format!("{}: answered {got:?}, gold {a}", task.id)),
        },
        Gold::Goals(goals) => {
            let unmet: Vec<&GoalCond> = goals.iter().filter(|g| !g.satisfied(&initial, &ep.scene)).collect();
            if unmet.is_empty() {
                Ok(())
            } else {
                Err(format!("{}: unmet {unmet:?} ({})", task.id, task.gold_ae))
            }
        }
    }
}
