use proptest::prelude::*;

use super::*;
use crate::world::{AtomicAction, BBox, Cell, Horizon, Rotation, SceneBuilder};

fn fridge_episode(open: bool) -> Episode {
    let mut b = SceneBuilder::new(5, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(2, 3));
    b.item_in("egg", &fridge);
    b.furniture("table", Cell(4, 3));
    if open {
        b.set_open(&fridge, true);
    }
    let mut ep = Episode::new(b.build());
    ep.step(&AtomicAction::Navigate { dest: fridge }).unwrap();
    ep
}

#[test]
fn oracle_attr_on_closed_fridge() {
    let mut ep = fridge_episode(false);
    let v = Registry::oracle().query(CHECK_OBJ_ATTR, &mut ep, &[Value::obj("fridge")]).unwrap();
    assert_eq!(attr_flags(&v), Some((true, false)));
    let Value::Record(m) = v else { panic!() };
    assert_eq!(m["is_closed"], Value::Bool(true));
    assert_eq!(m["close"], Value::Bool(true));
    assert_eq!(m["openable"], Value::Bool(true));
}

#[test]
fn unbound_name() {
    let mut ep = fridge_episode(false);
    let err = Registry::new().query(CHECK_OBJ_ATTR, &mut ep, &[]).unwrap_err();
    assert_eq!(err, ReactorError::UnknownReactor(CHECK_OBJ_ATTR.into()));
}

#[test]
fn oracle_answers() {
    let reg = Registry::oracle();
    let mut ep = fridge_episode(false);
    let q = |ep: &mut Episode, n: &str, a: &[Value]| reg.query(n, ep, a).unwrap();
    assert_eq!(q(&mut ep, FIND_RECEP, &[Value::obj("egg")]), Value::obj("fridge"));
    assert_eq!(q(&mut ep, CHECK_OBJ_RECEP_REL, &[Value::obj("egg"), Value::obj("fridge")]), rel_value(true));
    assert_eq!(q(&mut ep, CHECK_OBJ_RECEP_REL, &[Value::obj("egg"), Value::obj("table")]), rel_value(false));
    assert_eq!(
        q(&mut ep, FIND_ALL_OBJ, &[Value::obj("fridge")]),
        Value::List(vec![Value::Obj(ObjRef::instance("egg", "egg_1"))])
    );
    // closed fridge hides the egg from the mask generator
    assert_eq!(q(&mut ep, MASK_GENERATOR, &[Value::obj("egg")]), Value::None);
    assert_eq!(q(&mut ep, MASK_GENERATOR, &[Value::obj("fridge")]), Value::Obj(ObjRef::instance("fridge", "fridge_1")));
    let Value::List(seen) = q(&mut ep, DETECT_RECEP, &[]) else { panic!() };
    assert!(seen.contains(&Value::Obj(ObjRef::instance("fridge", "fridge_1"))));
}

#[test]
fn noisy_flag_flip_rate() {
    let reg = Registry::noisy(0.1);
    let clean = Registry::oracle();
    let mut ep = fridge_episode(false);
    let arg = [Value::obj("fridge")];
    let truth = clean.query(CHECK_OBJ_ATTR, &mut ep, &arg).unwrap();
    let n = 10_000;
    let flips = (0..n).filter(|_| reg.query(CHECK_OBJ_ATTR, &mut ep, &arg).unwrap() != truth).count();
    let rate = flips as f64 / n as f64;
    assert!((0.08..=0.12).contains(&rate), "flip rate {rate}");
}

#[test]
fn zero_noise_equals_oracle() {
    let noisy = Registry::noisy(0.0);
    let clean = Registry::oracle();
    let mut a = fridge_episode(true);
    let mut b = fridge_episode(true);
    for name in REACTOR_NAMES {
        for arg in [vec![Value::obj("egg")], vec![Value::obj("fridge")], vec![Value::obj("egg"), Value::obj("fridge")]] {
            assert_eq!(noisy.query(name, &mut a, &arg), clean.query(name, &mut b, &arg), "{name}");
        }
    }
}

#[test]
fn attr_memo_after_own_open() {
    let reg = Registry::noisy(1.0);
    let mut ep = fridge_episode(false);
    ep.step(&AtomicAction::Open { obj: "fridge_1".into() }).unwrap();
    for _ in 0..20 {
        let v = reg.query(CHECK_OBJ_ATTR, &mut ep, &[Value::obj("fridge")]).unwrap();
        assert_eq!(attr_flags(&v), Some((true, true)));
    }
    let v = HeuristicAttrChecker.answer(&mut ep, &[Value::obj("fridge")]).unwrap();
    assert_eq!(attr_flags(&v), Some((true, true)));
}

#[test]
fn heuristic_boxes() {
    let recep = BBox::new(0.0, 0.0, 1.0, 1.0);
    // 71% of the object's box lies inside the receptacle
    let obj = BBox::new(0.29, 0.0, 1.29, 1.0);
    assert!(rel_checker_heuristic(&obj, &recep).unwrap());
    assert!(rel_checker_heuristic(&recep, &recep).unwrap());
    assert!(!rel_checker_heuristic(&BBox::new(2.0, 2.0, 3.0, 3.0), &recep).unwrap());
    assert!(!rel_checker_heuristic(&BBox::new(0.31, 0.0, 1.31, 1.0), &recep).unwrap());
    assert_eq!(rel_checker_heuristic(&BBox::new(0.2, 0.2, 0.2, 0.5), &recep), Err(ReactorError::ZeroAreaBox));
}

#[test]
fn heuristic_rel_checker_in_scene() {
    let mut ep = fridge_episode(true);
    let args = [Value::obj("egg"), Value::obj("fridge")];
    assert_eq!(HeuristicRelChecker.answer(&mut ep, &args).unwrap(), rel_value(true));
    let mut ep = fridge_episode(false);
    assert_eq!(HeuristicRelChecker.answer(&mut ep, &args).unwrap(), rel_value(false));
    let mut ep = fridge_episode(true);
    let args = [Value::obj("egg"), Value::obj("table")];
    assert_eq!(HeuristicRelChecker.answer(&mut ep, &args).unwrap(), rel_value(false));
}

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn heuristic_is_scale_invariant(a in bbox(), b in bbox(), s in 0.01..100.0f64) {
        let ratio = a.intersection(&b) / a.area();
        // stay away from the threshold where rounding could decide
        prop_assume!((ratio - OVERLAP_THRESHOLD).abs() > 1e-9);
        prop_assert_eq!(rel_checker_heuristic(&a, &b).unwrap(), rel_checker_heuristic(&a.scaled(s), &b.scaled(s)).unwrap());
    }

    #[test]
    fn noisy_attr_answers_keep_open_xor_closed(seed in 0u64..500, open in any::<bool>()) {
        let mut ep = fridge_episode(open);
        let _ = ep.rng();
        let reg = Registry::noisy(0.5);
        for _ in 0..(seed % 7 + 1) {
            let v = reg.query(CHECK_OBJ_ATTR, &mut ep, &[Value::obj("fridge")]).unwrap();
            let Value::Record(m) = v else { panic!() };
            let b = |k: &str| m[k] == Value::Bool(true);
            if b("is_openable") {
                prop_assert!(b("is_open") ^ b("is_closed"));
            }
        }
    }
}

fn nav(id: &str) -> AtomicAction {
    AtomicAction::Navigate { dest: id.into() }
}
fn open(id: &str) -> AtomicAction {
    AtomicAction::Open { obj: id.into() }
}
fn close(id: &str) -> AtomicAction {
    AtomicAction::Close { obj: id.into() }
}
fn pickup(id: &str) -> AtomicAction {
    AtomicAction::Pickup { obj: id.into() }
}
fn put(o: &str, r: &str) -> AtomicAction {
    AtomicAction::Put { obj: o.into(), recep: r.into() }
}

fn kitchen() -> crate::world::SceneState {
    let mut b = SceneBuilder::new(6, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(1, 3));
    let counter = b.furniture("countertop", Cell(4, 3));
    b.item_in("egg", &fridge);
    b.item_in("mug", &counter);
    b.build()
}

#[test]
fn open_before_pickup_labels() {
    let scene = kitchen();
    let trace = [nav("egg_1"), open("fridge_1"), pickup("egg_1"), close("fridge_1")];
    let labels = induce_reactor_labels(&trace, &scene, &[]).unwrap();
    assert_eq!(labels.attr.len(), 1);
    assert_eq!((labels.attr[0].target.as_str(), labels.attr[0].label.as_str()), ("fridge_1", ATTR_CLOSED));
    assert_eq!(labels.refinder.len(), 1);
    assert_eq!((labels.refinder[0].target.as_str(), labels.refinder[0].label.as_str()), ("egg_1", "fridge"));
    assert!(labels.rel.iter().any(|e| e.target == "fridge_1" && e.label == OBJ_IN_RECEP));
}

#[test]
fn no_open_labels_without_open() {
    let labels = induce_reactor_labels(&[nav("mug_1"), pickup("mug_1")], &kitchen(), &[]).unwrap();
    assert!(labels.attr.iter().all(|e| e.label == ATTR_NOT_OPENABLE));
    assert_eq!(labels.refinder[0].label, "countertop");
}

#[test]
fn unreplayable_trace() {
    let err = induce_reactor_labels(&[pickup("egg_1")], &kitchen(), &[]).unwrap_err();
    assert!(matches!(err, InduceError::NonReplayableTrace { index: 0, .. }));
}

#[test]
fn label_counts_match_recount() {
    let scene = kitchen();
    let trace = [
        nav("egg_1"),
        open("fridge_1"),
        pickup("egg_1"),
        close("fridge_1"),
        nav("countertop_1"),
        put("egg_1", "countertop_1"),
        nav("mug_1"),
        pickup("mug_1"),
        nav("fridge_1"),
        open("fridge_1"),
        put("mug_1", "fridge_1"),
        close("fridge_1"),
    ];
    let labels = induce_reactor_labels(&trace, &scene, &[]).unwrap();
    // Second pass: one attr label per Pickup/Put, one ReFinder label per
    // Pickup from a receptacle, opens directly before an interaction.
    let interactions = trace.iter().filter(|a| matches!(a, AtomicAction::Pickup { .. } | AtomicAction::Put { .. })).count();
    let pickups = trace.iter().filter(|a| matches!(a, AtomicAction::Pickup { .. })).count();
    let opens_before = trace
        .windows(2)
        .filter(|w| matches!((&w[0], &w[1]), (AtomicAction::Open { .. }, AtomicAction::Pickup { .. } | AtomicAction::Put { .. })))
        .count();
    assert_eq!(labels.attr.len(), interactions);
    assert_eq!(labels.refinder.len(), pickups);
    assert_eq!(labels.attr.iter().filter(|e| e.label == ATTR_CLOSED).count(), opens_before);
    let text = labels.to_jsonl();
    assert_eq!(text.lines().count(), labels.len());
}

#[test]
fn refinder_learns_fixed_priors() {
    use crate::learn::TrainConfig;
    let layouts = [
        (Cell(1, 3), Cell(4, 3), Cell(3, 3)),
        (Cell(4, 3), Cell(1, 3), Cell(2, 3)),
        (Cell(2, 3), Cell(0, 3), Cell(5, 3)),
        (Cell(0, 3), Cell(3, 3), Cell(5, 3)),
    ];
    let build = |(f, c, t): (Cell, Cell, Cell), mug_on_table: bool| {
        let mut b = SceneBuilder::new(6, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
        let fridge = b.furniture("fridge", f);
        let counter = b.furniture("countertop", c);
        let table = b.furniture("table", t);
        b.item_in("egg", &fridge);
        b.item_in("mug", if mug_on_table { &table } else { &counter });
        b.build()
    };
    let mut labels = ReactorLabels::default();
    for (i, l) in layouts.iter().enumerate().take(3) {
        for on_table in [false, true] {
            let scene = build(*l, on_table);
            let trace = [nav("egg_1"), open("fridge_1"), pickup("egg_1"), close("fridge_1")];
            labels.extend(induce_reactor_labels(&trace, &scene, &[]).unwrap());
            let trace = [nav("mug_1"), pickup("mug_1")];
            labels.extend(induce_reactor_labels(&trace, &scene, &[format!("t{i}")]).unwrap());
        }
    }
    let models = ReactorModels::train(&labels, &TrainConfig::default());
    let reg = models.registry(Registry::oracle());
    let mut held_out = Episode::new(build(layouts[3], true));
    let v = reg.query(FIND_OBJ_RECEP, &mut held_out, &[Value::obj("egg")]).unwrap();
    assert_eq!(v, Value::obj("fridge"));
    // Deterministic and serializable.
    let back = ReactorModels::from_json(&models.to_json()).unwrap().registry(Registry::oracle());
    assert_eq!(back.query(FIND_OBJ_RECEP, &mut held_out, &[Value::obj("egg")]).unwrap(), v);
    let finder = LearnedReFinder(models.refinder.clone().unwrap());
    let top = finder.top_n(&mut held_out, "egg", 2);
    assert_eq!(top[0].0, "fridge");
    assert!(top.len() == 2 && top[0].1 >= top[1].1);
}

#[test]
fn learned_attr_respects_memo() {
    use crate::learn::{Softmax, TrainConfig};
    let data = vec![
        (vec!["arg0=fridge".to_string()], ATTR_CLOSED.to_string()),
        (vec!["arg0=countertop".to_string()], ATTR_NOT_OPENABLE.to_string()),
    ];
    let m = Arc::new(Softmax::train(&data, &TrainConfig::default()).unwrap());
    let reg = Registry::new().with(CHECK_OBJ_ATTR, Arc::new(LearnedAttr(m)));
    let mut ep = fridge_episode(false);
    let v = reg.query(CHECK_OBJ_ATTR, &mut ep, &[Value::obj("fridge")]).unwrap();
    assert_eq!(attr_flags(&v), Some((true, false)));
    ep.step(&open("fridge_1")).unwrap();
    let v = reg.query(CHECK_OBJ_ATTR, &mut ep, &[Value::obj("fridge")]).unwrap();
    assert_eq!(attr_flags(&v), Some((true, true)));
}
