//! Hand-built single-episode fixtures for demos and end-to-end checks.

use crate::planner::Instruction;
use crate::procir::ExecutableProcedure;
use crate::world::{Cell, Horizon, Rotation, SceneBuilder, SceneState};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub instruction: Instruction,
    pub scene: SceneState,
    pub plan: ExecutableProcedure,
    /// Library bundle the plan is written against.
    pub library: &'static str,
}

pub const FIXTURES: &[&str] = &["mug-in-fridge", "mug-on-counter"];

/// Picking up a mug with the conditional open/close around it.
pub fn fixture(name: &str) -> Option<Fixture> {
    let in_fridge = match name {
        "mug-in-fridge" => true,
        "mug-on-counter" => false,
        _ => return None,
    };
    let mut b = SceneBuilder::new(6, 4).agent(Cell(4, 0), Rotation::R270, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(1, 3));
    let counter = b.furniture("countertop", Cell(3, 3));
    b.item_in("mug", if in_fridge { &fridge } else { &counter });
    Some(Fixture {
        name: FIXTURES.iter().copied().find(|f| *f == name)?,
        instruction: Instruction::new("pick up the mug"),
        scene: b.build(),
        plan: ExecutableProcedure::parse("udp_pick_object(mug)").expect("fixture plan parses"),
        library: "alfred/v1",
    })
}
