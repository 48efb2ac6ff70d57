use super::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn kitchen() -> (SceneState, String, String, String) {
    // 6x4 room; fridge, countertop and microwave along the top wall.
    let mut b = SceneBuilder::new(6, 4).agent(Cell(1, 1), Rotation::R0, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(1, 3));
    let counter = b.furniture("countertop", Cell(2, 3));
    let micro = b.furniture("microwave", Cell(3, 3));
    b.item_in("mug", &fridge);
    b.item_in("egg", &counter);
    b.item_in("knife", &counter);
    (b.build(), fridge, counter, micro)
}

fn run(state: &SceneState, map: &PresearchMap, actions: &[AtomicAction]) -> SceneState {
    actions.iter().fold(state.clone(), |s, a| step(&s, map, a).unwrap_or_else(|e| panic!("{a}: {e}")).0)
}

fn nav(id: &str) -> AtomicAction {
    AtomicAction::Navigate { dest: id.into() }
}

#[test]
fn open_visible_closed_fridge() {
    let (s, fridge, _, _) = kitchen();
    let map = presearch_map(&s);
    let s = run(&s, &map, &[nav(&fridge), AtomicAction::Open { obj: fridge.clone() }]);
    assert!(s.objects[&fridge].attrs.is_open);
}

#[test]
fn pickup_with_full_hand_fails_without_mutation() {
    let (s, _, counter, _) = kitchen();
    let map = presearch_map(&s);
    let s = run(&s, &map, &[nav(&counter), AtomicAction::Pickup { obj: "knife_1".into() }]);
    let before = s.to_json();
    let err = step(&s, &map, &AtomicAction::Pickup { obj: "egg_1".into() }).unwrap_err();
    assert!(matches!(err, ActionError::PreconditionFailed(_)), "{err}");
    assert_eq!(s.to_json(), before);
}

#[test]
fn microwave_heats_contents() {
    let (s, _, counter, micro) = kitchen();
    let map = presearch_map(&s);
    let s = run(
        &s,
        &map,
        &[
            nav(&counter),
            AtomicAction::Pickup { obj: "egg_1".into() },
            nav(&micro),
            AtomicAction::Open { obj: micro.clone() },
            AtomicAction::Put { obj: "egg_1".into(), recep: micro.clone() },
            AtomicAction::Close { obj: micro.clone() },
            AtomicAction::ToggleOn { obj: micro.clone() },
            AtomicAction::ToggleOn { obj: micro.clone() },
        ],
    );
    assert_eq!(s.objects["egg_1"].attrs.temperature, Temperature::Hot);
    // the cycle ends on its own, so it can be started again
    assert!(!s.objects[&micro].attrs.is_on);
}

#[test]
fn fridge_cools_and_faucet_cleans() {
    let mut b = SceneBuilder::new(5, 3).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(1, 2));
    let sink = b.furniture("sink", Cell(3, 2));
    let counter = b.furniture("countertop", Cell(2, 2));
    b.item_in("apple", &counter);
    let s = b.build();
    let map = presearch_map(&s);
    let s = run(
        &s,
        &map,
        &[
            nav("apple_1"),
            AtomicAction::Pickup { obj: "apple_1".into() },
            nav(&fridge),
            AtomicAction::Open { obj: fridge.clone() },
            AtomicAction::Put { obj: "apple_1".into(), recep: fridge.clone() },
        ],
    );
    assert_eq!(s.objects["apple_1"].attrs.temperature, Temperature::Cold);
    assert!(!s.objects["apple_1"].attrs.is_clean);
    let s = run(
        &s,
        &map,
        &[
            AtomicAction::Pickup { obj: "apple_1".into() },
            nav(&sink),
            AtomicAction::Put { obj: "apple_1".into(), recep: sink.clone() },
            AtomicAction::ToggleOn { obj: "faucet_1".into() },
        ],
    );
    assert!(s.objects["apple_1"].attrs.is_clean);
}

#[test]
fn slice_requires_knife() {
    let mut b = SceneBuilder::new(4, 3).agent(Cell(1, 1), Rotation::R0, Horizon::Level);
    let counter = b.furniture("countertop", Cell(1, 2));
    b.item_in("potato", &counter);
    b.item_in("knife", &counter);
    let s = b.build();
    let map = presearch_map(&s);
    let s = run(&s, &map, &[nav(&counter)]);
    let err = step(&s, &map, &AtomicAction::Slice { obj: "potato_1".into() }).unwrap_err();
    assert!(matches!(err, ActionError::PreconditionFailed(_)));
    let s = run(&s, &map, &[AtomicAction::Pickup { obj: "knife_1".into() }, AtomicAction::Slice { obj: "potato_1".into() }]);
    assert!(s.objects["potato_1"].attrs.is_sliced);
}

#[test]
fn put_into_closed_receptacle_fails() {
    let (s, fridge, counter, _) = kitchen();
    let map = presearch_map(&s);
    let s = run(&s, &map, &[nav(&counter), AtomicAction::Pickup { obj: "egg_1".into() }, nav(&fridge)]);
    let err = step(&s, &map, &AtomicAction::Put { obj: "egg_1".into(), recep: fridge }).unwrap_err();
    assert!(matches!(err, ActionError::PreconditionFailed(_)));
}

#[test]
fn error_kinds() {
    let (s, fridge, counter, _) = kitchen();
    let map = presearch_map(&s);
    assert!(matches!(
        step(&s, &map, &AtomicAction::Open { obj: "nope_9".into() }),
        Err(ActionError::UnknownId(_))
    ));
    let at_counter = run(&s, &map, &[nav(&counter)]);
    assert!(matches!(
        step(&at_counter, &map, &AtomicAction::Open { obj: counter.clone() }),
        Err(ActionError::NotInteractable(..))
    ));
    // the mug sits in the closed fridge
    assert!(matches!(
        step(&at_counter, &map, &AtomicAction::Pickup { obj: "mug_1".into() }),
        Err(ActionError::NotVisible(_))
    ));
    let _ = fridge;
}

#[test]
fn closed_receptacle_hides_contents() {
    let (s, fridge, _, _) = kitchen();
    let map = presearch_map(&s);
    let s = run(&s, &map, &[nav(&fridge)]);
    let obs = observe(&s);
    assert!(obs.find(&fridge).is_some());
    assert!(obs.find("mug_1").is_none());
    let s = run(&s, &map, &[AtomicAction::Open { obj: fridge.clone() }]);
    assert!(observe(&s).find("mug_1").is_some());
}

#[test]
fn facing_away_sees_nothing() {
    let (mut s, ..) = kitchen();
    s.agent.rotation = Rotation::R180;
    for h in Horizon::ALL {
        s.agent.horizon = h;
        assert!(observe(&s).detections.is_empty());
    }
}

#[test]
fn walls_block_sight() {
    let mut b = SceneBuilder::new(5, 5).agent(Cell(2, 0), Rotation::R0, Horizon::Level).wall(Cell(2, 2));
    b.furniture("table", Cell(2, 4));
    let s = b.build();
    assert!(observe(&s).detections.is_empty());
}

/// Box area at 2 cells vs 5 cells. With linear shrink factor
/// (R + 1 - d) / R and R = 6, width and height scale by 5/6 and 2/6, so the
/// area ratio is (5/2)^2 = 6.25.
#[test]
fn bbox_area_shrinks_with_distance() {
    let area_at = |d: i32| {
        let mut b = SceneBuilder::new(3, 8).agent(Cell(1, 0), Rotation::R0, Horizon::Level);
        let counter = b.furniture("countertop", Cell(1, d));
        b.item_in("mug", &counter);
        let s = b.build();
        observe(&s).find("mug_1").expect("mug visible").bbox.area()
    };
    let (a2, a5) = (area_at(2), area_at(5));
    assert!(a2 > a5);
    assert!((a2 / a5 - 6.25).abs() < 1e-9, "ratio {}", a2 / a5);
}

#[test]
fn detections_inside_unit_square() {
    let cfg = SceneConfig {
        version: CONFIG_VERSION.into(),
        style_id: 1,
        width: 9,
        height: 8,
        receptacles: ["fridge", "cabinet", "countertop", "table", "sink", "microwave"]
            .iter()
            .map(|c| ClassCount::new(c, 1, 2))
            .collect(),
        objects: ["mug", "apple", "cd"].iter().map(|c| ClassCount::new(c, 1, 3)).collect(),
        unique_class_per_receptacle: false,
    };
    for seed in 0..20 {
        let mut s = generate_scene(&cfg, seed).unwrap();
        for o in s.objects.values_mut() {
            o.attrs.is_open = o.attrs.openable;
        }
        for cell in s.grid.reachable.clone() {
            for rotation in Rotation::ALL {
                for horizon in Horizon::ALL {
                    let obs = observe_from(&s, &ScenePose { cell, rotation, horizon });
                    assert!(obs.detections.iter().all(|d| d.bbox.within_unit()));
                }
            }
        }
    }
}

#[test]
fn presearch_single_candidate() {
    let mut b = SceneBuilder::new(2, 1).agent(Cell(1, 0), Rotation::R90, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(0, 0));
    let s = b.build();
    let map = presearch_map(&s);
    assert_eq!(map.receptacles.len(), 1);
    assert_eq!(
        map.receptacles[&fridge],
        ScenePose { cell: Cell(1, 0), rotation: Rotation::R270, horizon: Horizon::Level }
    );
}

#[test]
fn presearch_records_container_of_hidden_object() {
    let mut b = SceneBuilder::new(4, 3).agent(Cell(1, 0), Rotation::R0, Horizon::Level);
    let cabinet = b.furniture("cabinet", Cell(1, 2));
    let mug = b.item_in("mug", &cabinet);
    let s = b.build();
    let map = presearch_map(&s);
    let rec = &map.objects[&mug];
    assert_eq!(rec.receptacle.as_deref(), Some(cabinet.as_str()));
    assert_eq!(rec.pose.horizon, Horizon::Up);
    assert!(map.unreachable.is_empty());
}

#[test]
fn presearch_lists_walled_off_receptacle() {
    // the wall column at x = 4 seals off the table at (6,1)
    let mut b = SceneBuilder::new(7, 3)
        .agent(Cell(0, 1), Rotation::R0, Horizon::Level)
        .wall(Cell(4, 0))
        .wall(Cell(4, 1))
        .wall(Cell(4, 2));
    let table = b.furniture("table", Cell(6, 1));
    let fridge = b.furniture("fridge", Cell(0, 2));
    let s = b.build();
    let map = presearch_map(&s);
    assert_eq!(map.unreachable, vec![table]);
    assert!(map.receptacles.contains_key(&fridge));
}

#[test]
fn presearch_ignores_agent_pose() {
    let (s, ..) = kitchen();
    let base = presearch_map(&s);
    for cell in s.grid.reachable.clone() {
        let mut moved = s.clone();
        moved.agent = ScenePose { cell, rotation: Rotation::R90, horizon: Horizon::Down };
        assert_eq!(presearch_map(&moved), base);
    }
}

fn basic_config(style_id: u32, objects: Vec<ClassCount>) -> SceneConfig {
    SceneConfig {
        version: CONFIG_VERSION.into(),
        style_id,
        width: 8,
        height: 7,
        receptacles: ["fridge", "microwave", "cabinet", "drawer", "countertop", "sink", "safe", "table", "lamp"]
            .iter()
            .map(|c| ClassCount::exactly(c, 1))
            .collect(),
        objects,
        unique_class_per_receptacle: false,
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = basic_config(2, vec![ClassCount::new("mug", 1, 3), ClassCount::new("apple", 0, 2)]);
    let a = generate_scene(&cfg, 42).unwrap();
    let b = generate_scene(&cfg, 42).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), generate_scene(&cfg, 43).unwrap().to_json());
}

#[test]
fn generation_without_objects() {
    let s = generate_scene(&basic_config(0, vec![]), 7).unwrap();
    assert!(s.objects.values().all(|o| !o.attrs.pickupable));
    assert_eq!(s.instances_of("faucet").count(), 1);
}

#[test]
fn generation_honours_minimum_counts() {
    let cfg = basic_config(4, vec![ClassCount::new("mug", 1, 2), ClassCount::new("cd", 0, 3)]);
    for seed in 0..100 {
        let s = generate_scene(&cfg, seed).unwrap();
        s.check_invariants().unwrap();
        assert!(s.instances_of("mug").count() >= 1, "seed {seed}");
        let map = presearch_map(&s);
        assert!(map.unreachable.is_empty(), "seed {seed}: {:?}", map.unreachable);
    }
}

#[test]
fn infeasible_config() {
    let mut cfg = basic_config(0, vec![]);
    cfg.width = 3;
    cfg.height = 3;
    cfg.receptacles.push(ClassCount::exactly("table", 12));
    assert!(matches!(generate_scene(&cfg, 1), Err(GenerateError::InfeasibleConfig(_))));
    let cfg = SceneConfig { objects: vec![ClassCount::exactly("fridge", 1)], ..basic_config(0, vec![]) };
    assert!(generate_scene(&cfg, 1).is_err());
}

#[test]
fn scene_json_round_trip() {
    let cfg = basic_config(3, vec![ClassCount::new("laptop", 1, 1), ClassCount::new("egg", 2, 2)]);
    let s = generate_scene(&cfg, 5).unwrap();
    let back: SceneState = serde_json::from_str(&s.to_json()).unwrap();
    assert_eq!(back, s);
    assert!(s.to_json().starts_with(r#"{"version":"scene/1""#));
    let cfg_back = SceneConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn navigate_then_observe_sees_destination() {
    let cfg = basic_config(1, vec![ClassCount::new("mug", 2, 3), ClassCount::new("apple", 2, 3)]);
    for seed in 0..30 {
        let mut s = generate_scene(&cfg, seed).unwrap();
        for o in s.objects.values_mut() {
            o.attrs.is_open = o.attrs.openable && o.attrs.is_receptacle;
        }
        let map = presearch_map(&s);
        for id in map.receptacles.keys().chain(map.objects.keys()) {
            let (next, _) = step(&s, &map, &nav(id)).unwrap();
            assert!(observe(&next).find(id).is_some(), "seed {seed}: {id}");
        }
    }
}

fn arb_action(ids: Vec<String>, cells: Vec<Cell>) -> impl Strategy<Value = AtomicAction> {
    let id = proptest::sample::select(ids);
    let cell = proptest::sample::select(cells);
    prop_oneof![
        id.clone().prop_map(|dest| AtomicAction::Navigate { dest }),
        cell.prop_map(|cell| AtomicAction::NavigatePos { cell }),
        (0usize..4).prop_map(|r| AtomicAction::RotateTo { rotation: Rotation::ALL[r] }),
        (0usize..3).prop_map(|h| AtomicAction::LookTo { horizon: Horizon::ALL[h] }),
        id.clone().prop_map(|obj| AtomicAction::Open { obj }),
        id.clone().prop_map(|obj| AtomicAction::Close { obj }),
        id.clone().prop_map(|obj| AtomicAction::Pickup { obj }),
        (id.clone(), id.clone()).prop_map(|(obj, recep)| AtomicAction::Put { obj, recep }),
        id.clone().prop_map(|obj| AtomicAction::ToggleOn { obj }),
        id.clone().prop_map(|obj| AtomicAction::ToggleOff { obj }),
        id.prop_map(|obj| AtomicAction::Slice { obj }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Random action sequences keep invariants; failures never mutate state;
    /// replay is deterministic.
    #[test]
    fn random_walks_preserve_invariants(seed in 0u64..1000, actions in proptest::collection::vec(0usize..10_000, 1..60)) {
        let cfg = basic_config((seed % 6) as u32, vec![ClassCount::new("mug", 1, 2), ClassCount::new("knife", 1, 1), ClassCount::new("potato", 1, 2), ClassCount::new("laptop", 0, 1)]);
        let s0 = generate_scene(&cfg, seed).unwrap();
        let map = presearch_map(&s0);
        let mut ids: Vec<String> = s0.objects.keys().cloned().collect();
        ids.push("ghost_1".into());
        let cells: Vec<Cell> = s0.grid.reachable.iter().copied().chain([Cell(-1, -1)]).collect();
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        let strat = arb_action(ids, cells);
        let acts: Vec<AtomicAction> = actions.iter().map(|_| strat.new_tree(&mut runner).unwrap().current()).collect();
        let mut s = s0.clone();
        for a in &acts {
            let before = s.to_json();
            match step(&s, &map, a) {
                Ok((next, _)) => { next.check_invariants().unwrap(); s = next; }
                Err(_) => prop_assert_eq!(s.to_json(), before),
            }
        }
        let mut replay = s0.clone();
        for a in &acts {
            if let Ok((next, _)) = step(&replay, &map, a) { replay = next; }
        }
        prop_assert_eq!(replay.to_json(), s.to_json());
    }
}
