use proptest::prelude::*;

use super::*;
use crate::env::Episode;
use crate::library::load_builtin;
use crate::reactors::Registry;
use crate::world::{self, AtomicAction, Cell, Horizon, Rotation, SceneBuilder, SceneState};

const CASES: &str = r#"
proc atomic_toggle_on(obj) {
    atomic toggleon_object(obj);
}

proc udp_pick_and_put_object(obj, dst) {
    udp_pickup_object(obj);
    udp_put_object(obj, dst);
}

proc udp_empty_recep(recep, dst) {
    let reactor = get_reactor("find_all_obj");
    let obj_list = reactor(recep);
    for obj in obj_list {
        udp_pick_and_put_object(obj, dst);
    }
}

proc udp_pickup_object(obj) {
    atomic navigate(obj);
    let reactor1 = get_reactor("find_recep");
    let reactor2 = get_reactor("check_obj_attr");
    let recep = reactor1(obj);
    let attr = reactor2(recep);
    if attr.openable and attr.close {
        atomic open_object(recep);
        atomic pickup_object(obj);
        atomic close_object(recep);
    } else {
        atomic pickup_object(obj);
    }
}

proc udp_put_object(obj, dst) {
    atomic navigate(dst);
    atomic put_object(obj, dst);
}
"#;

fn cases() -> Library {
    let lib = parse(CASES).unwrap();
    validate(&lib).unwrap();
    lib
}

fn run(lib: &Library, scene: SceneState, ae: &str) -> (ExecutionTrace, Episode) {
    let mut ep = Episode::new(scene);
    let t = interpret(&ExecutableProcedure::parse(ae).unwrap(), lib, &mut ep, &Registry::oracle(), DEFAULT_BUDGET);
    (t, ep)
}

fn names(t: &ExecutionTrace) -> Vec<&'static str> {
    t.atomic_actions().iter().map(AtomicAction::name).collect()
}

fn errs(src: &str) -> Vec<Violation> {
    let lib = parse(src).unwrap();
    validate(&lib).unwrap_err().0.into_iter().map(|e| e.violation).collect()
}

#[test]
fn empty_source() {
    assert!(parse("").unwrap().is_empty());
    assert!(parse("  # nothing\n// here\n").unwrap().is_empty());
}

#[test]
fn unclosed_block_reports_its_line() {
    let err = parse("proc f(x) {\n    if x {\n        atomic stop();\n").unwrap_err();
    assert_eq!(err.position(), (2, 10), "{err}");
}

#[test]
fn syntax_error_positions() {
    let err = parse("proc f() {\n  atomic stop()\n}").unwrap_err();
    assert_eq!(err.position(), (3, 1));
    let err = parse("proc f() { let x = 1 == 2 == 3; }").unwrap_err();
    assert!(err.to_string().contains("chain"));
    assert!(parse("proc f() { let s = \"abc; }").is_err());
    assert!(parse("proc f() { g(h(1)); }").is_err());
}

#[test]
fn duplicate_definition() {
    let err = parse("proc f() {}\nproc f() {}").unwrap_err();
    assert!(matches!(err, ParseError::DuplicateDefinition { ref name, line: 2, .. } if name == "f"));
}

#[test]
fn reactor_forms() {
    let lib = parse(
        r#"proc f(o) {
            let r = get_reactor("find_recep");
            let a = r(o);
            let b = reactor "check_obj_attr"(a);
            let reactor = get_reactor("find_all_obj");
            let c = reactor(a);
            let d = g(o);
        }
        proc g(x) { return x; }"#,
    )
    .unwrap();
    let body = &lib.get("f").unwrap().body;
    assert!(matches!(&body[1], Stmt::ReactorCall { target: ReactorTarget::Var(v), .. } if v == "r"));
    assert!(matches!(&body[2], Stmt::ReactorCall { target: ReactorTarget::Named(n), .. } if n == "check_obj_attr"));
    assert!(matches!(&body[4], Stmt::ReactorCall { target: ReactorTarget::Var(v), .. } if v == "reactor"));
    assert!(matches!(&body[5], Stmt::ProcCall { bind: Some(_), .. }));
    validate(&lib).unwrap();
}

#[test]
fn builtin_libraries_validate_and_round_trip() {
    for id in crate::library::BUILTIN {
        let lib = load_builtin(id).unwrap().library;
        validate(&lib).unwrap();
        assert_eq!(parse(&pretty_print(&lib)).unwrap(), lib, "{id}");
    }
    assert_eq!(load_builtin("iqa/v1").unwrap().library.len(), 6);
    assert_eq!(load_builtin("alfred/v1").unwrap().library.len(), 10);
}

#[test]
fn validation_errors() {
    assert!(matches!(errs("proc f() { f(); }")[..], [Violation::CyclicCallGraph { .. }]));
    assert!(matches!(errs("proc f() { g(); }\nproc g() { f(); }")[..], [Violation::CyclicCallGraph { .. }]));
    assert!(matches!(
        errs("proc f(a, b) { atomic open_object(a, b); }")[..],
        [Violation::ArityMismatch { expected: 1, got: 2, .. }]
    ));
    assert!(matches!(errs("proc f() { g(1); }\nproc g() {}")[..], [Violation::ArityMismatch { .. }]));
    assert!(matches!(errs("proc f() { h(); }")[..], [Violation::UndefinedProc { .. }]));
    assert!(matches!(errs("proc f() { atomic fly(); }")[..], [Violation::UnknownAtomic { .. }]));
    assert!(matches!(
        errs("proc f() { let r = get_reactor(\"oracle_of_delphi\"); }")[..],
        [Violation::UnknownReactor { .. }]
    ));
    assert!(matches!(errs("proc f() { atomic navigate(zebra); }")[..], [Violation::UndefinedIdentifier { .. }]));
    assert!(matches!(errs("proc f(x) { if [x] == [] { return; } }")[..], [Violation::ConditionConstraint { .. }]));
    assert!(matches!(errs("proc f(x) { while x + 1 { return; } }")[..], [Violation::ConditionConstraint { .. }]));
    assert!(matches!(errs("proc f(x) { if 3 { return; } }")[..], [Violation::ConditionConstraint { .. }]));
    assert!(matches!(errs("proc f() { let y = \"s\".is_open; }")[..], [Violation::AttrOnNonObject { .. }]));
    assert!(matches!(errs("proc f(a, a) {}")[..], [Violation::DuplicateParam { .. }]));
    // atomic wrappers may be called like procedures; globals resolve
    validate(&parse("proc f() { atomic_navigate(fridge); atomic_look(-30); }").unwrap()).unwrap();
}

#[test]
fn validation_reports_statement_ids() {
    let lib = parse("proc f(x) {\n  if x { atomic stop(); } else { atomic open_object(); }\n}").unwrap();
    let e = validate(&lib).unwrap_err().0;
    assert_eq!(e[0].stmt, Some(2));
}

fn fridge_scene(mug_in_fridge: bool) -> SceneState {
    let mut b = SceneBuilder::new(6, 4).agent(Cell(4, 0), Rotation::R270, Horizon::Level);
    let fridge = b.furniture("fridge", Cell(1, 3));
    let counter = b.furniture("countertop", Cell(3, 3));
    b.item_in("mug", if mug_in_fridge { &fridge } else { &counter });
    b.build()
}

#[test]
fn pickup_opens_closed_container() {
    let (t, ep) = run(&cases(), fridge_scene(true), "udp_pickup_object(mug)");
    assert_eq!(t.outcome, Outcome::Completed);
    assert_eq!(names(&t), ["navigate", "pickup_object", "close_object"].iter().fold(vec!["navigate"], |v, _| v).into_iter().chain(["open_object", "pickup_object", "close_object"]).collect::<Vec<_>>());
    assert_eq!(ep.scene.inventory.as_deref(), Some("mug_1"));
    assert!(!ep.scene.objects["fridge_1"].attrs.is_open);
}

#[test]
fn pickup_from_open_surface() {
    let (t, _) = run(&cases(), fridge_scene(false), "udp_pickup_object(mug)");
    assert_eq!(names(&t), vec!["navigate", "pickup_object"]);
    assert_eq!(t.outcome, Outcome::Completed);
}

#[test]
fn empty_recep_loops_over_contents() {
    let mut b = SceneBuilder::new(6, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
    let table = b.furniture("table", Cell(1, 3));
    b.furniture("sink", Cell(4, 3));
    for c in ["apple", "cup", "bowl"] {
        b.item_in(c, &table);
    }
    let (t, ep) = run(&cases(), b.build(), "udp_empty_recep(table, sink)");
    assert_eq!(t.outcome, Outcome::Completed, "{:?}", t.outcome);
    let subs = t
        .events
        .iter()
        .filter(|e| matches!(e, TraceEvent::ProcEnter { name, .. } if name == "udp_pick_and_put_object"))
        .count();
    assert_eq!(subs, 3);
    assert_eq!(ep.scene.contents("table_1").count(), 0);
    assert_eq!(ep.scene.contents("sink_1").count(), 3);
}

#[test]
fn unknown_reactor_aborts_before_acting() {
    let mut ep = Episode::new(fridge_scene(true));
    let mut reg = Registry::oracle();
    reg = {
        let mut r = Registry::new();
        for n in reg.names().filter(|n| *n != "find_recep") {
            r.bind(n, crate::reactors::oracle_reactor(n).unwrap());
        }
        r
    };
    let ae = ExecutableProcedure::parse("udp_pickup_object(mug)").unwrap();
    let t = interpret(&ae, &cases(), &mut ep, &reg, DEFAULT_BUDGET);
    assert!(matches!(&t.outcome, Outcome::Failed { error } if error.contains("find_recep")));
    assert!(t.events.is_empty() && ep.log.is_empty());
}

#[test]
fn failed_action_aborts_and_keeps_post_failure_state() {
    let lib = parse("proc f() { atomic navigate(mug); atomic pickup_object(mug); atomic open_object(countertop); atomic stop(); }").unwrap();
    let (t, ep) = run(&lib, fridge_scene(false), "f(); atomic_stop()");
    assert!(matches!(t.outcome, Outcome::Failed { .. }));
    assert_eq!(ep.scene.inventory.as_deref(), Some("mug_1"));
    assert_eq!(t.atomic_attempts().len(), 3);
    assert_eq!(t.nesting_depth(), Ok(1));
    // one trace event per environment step
    let logged: Vec<&AtomicAction> = ep.log.iter().map(|r| &r.action).collect();
    assert_eq!(t.atomic_attempts(), logged);
}

#[test]
fn while_loops_are_budgeted() {
    let lib = parse("proc spin() { while true { atomic stop(); } }\nproc idle() { let n = 0; while true { let n = n + 1; } }").unwrap();
    for (ae, budget) in [("spin()", 25), ("idle()", 10)] {
        let (t, _) = run(&lib, fridge_scene(false), ae);
        let _ = budget;
        assert_eq!(t.outcome, Outcome::BudgetExceeded);
    }
    let mut ep = Episode::new(fridge_scene(false));
    let t = interpret(&ExecutableProcedure::parse("spin()").unwrap(), &lib, &mut ep, &Registry::oracle(), 25);
    assert_eq!(t.atomic_attempts().len(), 25);
    assert!(t.events.len() <= 2 * 25 + 4);
}

#[test]
fn interpretation_is_deterministic() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let ae = "udp_heat_object(mug); udp_pick_and_put_object(mug, countertop)";
    let mut b = SceneBuilder::new(6, 4).agent(Cell(2, 1), Rotation::R0, Horizon::Level);
    b.furniture("microwave", Cell(1, 3));
    let c = b.furniture("countertop", Cell(4, 3));
    b.item_in("mug", &c);
    let scene = b.build();
    let (a, ea) = run(&lib, scene.clone(), ae);
    let (b2, eb) = run(&lib, scene, ae);
    assert_eq!(a, b2);
    assert_eq!(ea.scene, eb.scene);
    assert_eq!(a.outcome, Outcome::Completed, "{:?}", a.outcome);
    assert_eq!(ea.scene.objects["mug_1"].attrs.temperature, world::Temperature::Hot);
}

#[test]
fn trace_jsonl_round_trip() {
    let (t, _) = run(&cases(), fridge_scene(true), "udp_pickup_object(mug)");
    let text = t.to_jsonl();
    assert!(text.lines().all(|l| l.starts_with(r#"{"version":"trace/1""#)));
    assert_eq!(ExecutionTrace::from_jsonl(&text).unwrap(), t);
    assert!(ExecutionTrace::from_jsonl("").is_err());
}

fn four_receptacles() -> SceneState {
    let mut b = SceneBuilder::new(7, 5).agent(Cell(3, 2), Rotation::R0, Horizon::Level);
    // scan order from the start cell: table (ahead), cabinet (behind),
    // then shelf and countertop (left)
    b.furniture("table", Cell(3, 4));
    let cabinet = b.furniture("cabinet", Cell(3, 0));
    b.furniture("countertop", Cell(0, 2));
    b.furniture("shelf", Cell(0, 0));
    b.item_in("mug", &cabinet);
    b.build()
}

#[test]
fn canonicalized_existence_check_stops_at_the_container() {
    let lib = load_builtin("iqa/v1").unwrap().library;
    let scene = four_receptacles();
    let ae = ExecutableProcedure::parse("udp_check_obj_exist(mug)").unwrap();
    let seq = canonicalize(&ae, &lib, &scene, &Registry::oracle(), DEFAULT_BUDGET).unwrap();
    let visits: Vec<&str> = seq
        .iter()
        .filter_map(|a| match a {
            AtomicAction::Navigate { dest } => Some(dest.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(visits, vec!["table_1", "cabinet_1"]);
    let tail: Vec<&str> = seq.iter().rev().take(2).map(AtomicAction::name).collect();
    assert_eq!(tail, vec!["close_object", "open_object"]);
    let (t, _) = run(&lib, scene.clone(), "udp_check_obj_exist(mug)");
    assert_eq!(t.result, Value::Bool(true));
    let (t, _) = run(&lib, scene, "udp_count_obj(apple)");
    assert_eq!(t.result, Value::Int(0));
}

#[test]
fn canonicalize_empty() {
    let lib = cases();
    let seq = canonicalize(&ExecutableProcedure::default(), &lib, &fridge_scene(true), &Registry::oracle(), 10).unwrap();
    assert!(seq.is_empty());
}

#[test]
fn canonical_replay_matches_interpretation() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let cfg = crate::world::SceneConfig {
        version: crate::world::CONFIG_VERSION.into(),
        style_id: 0,
        width: 8,
        height: 7,
        receptacles: ["fridge", "microwave", "cabinet", "countertop", "sink", "table", "lamp"]
            .iter()
            .map(|c| crate::world::ClassCount::exactly(c, 1))
            .collect(),
        objects: ["apple", "mug", "knife", "potato"].iter().map(|c| crate::world::ClassCount::exactly(c, 1)).collect(),
        unique_class_per_receptacle: false,
    };
    let plans = [
        "udp_heat_object(apple); udp_pick_and_put_object(apple, table)",
        "udp_clean_object(mug); udp_put_object(mug, cabinet)",
        "udp_slice_object(potato, countertop); udp_cool_object(potato)",
    ];
    for seed in 0..20 {
        let scene = crate::world::generate_scene(&cfg, seed).unwrap();
        for p in plans {
            let ae = ExecutableProcedure::parse(p).unwrap();
            let (t, ep) = run(&lib, scene.clone(), p);
            match canonicalize(&ae, &lib, &scene, &Registry::oracle(), DEFAULT_BUDGET) {
                Ok(seq) => {
                    assert_eq!(seq, t.atomic_actions());
                    let map = world::presearch_map(&scene);
                    let fin = seq.iter().fold(scene.clone(), |s, a| world::step(&s, &map, a).unwrap().0);
                    assert_eq!(fin, ep.scene);
                }
                Err(_) => assert!(!t.outcome.is_completed()),
            }
        }
    }
}

#[test]
fn cool_object_tree_depth() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let t = proc_tree(lib.get("udp_cool_object").unwrap());
    assert_eq!(t.depth(), 2);
}

/// Recount nodes without the exporter: one root per procedure, plus every
/// statement and every expression node.
fn recount(p: &ProcDef) -> usize {
    let mut n = 1;
    walk_stmts(&p.body, &mut |_, s| {
        n += 1 + s.exprs().iter().map(|e| e.size()).sum::<usize>();
    });
    n
}

#[test]
fn export_node_counts() {
    for id in crate::library::BUILTIN {
        let lib = load_builtin(id).unwrap().library;
        let doc = export_ast(&lib);
        assert_eq!(doc.trees.len(), lib.len());
        for (t, p) in doc.trees.iter().zip(&lib.procs) {
            assert_eq!(t.nodes.len(), recount(p), "{}", p.name);
            let ids: std::collections::BTreeSet<_> = t.nodes.iter().map(|n| &n.id).collect();
            assert_eq!(ids.len(), t.nodes.len());
        }
        let dot = doc.to_dot();
        assert!(dot.starts_with("digraph ast {"));
        let back: AstDocument = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }
    let empty = export_ast(&Library::default());
    assert!(empty.trees.is_empty());
    assert_eq!(empty.to_dot(), "digraph ast {\n}\n");
}

#[test]
fn call_nodes_name_their_callee() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let t = proc_tree(lib.get("udp_pick_and_put_object").unwrap());
    let callees: Vec<_> = t.nodes.iter().filter_map(|n| n.callee.as_deref()).collect();
    assert_eq!(callees, vec!["udp_pick_object", "udp_put_object"]);
}

#[test]
fn executable_procedure_text() {
    let ae = ExecutableProcedure::parse("udp_slice_object(apple, countertop); atomic_stop()").unwrap();
    assert_eq!(ae.calls[0], Call::new("udp_slice_object", &["apple", "countertop"]));
    assert_eq!(ExecutableProcedure::parse(&ae.to_string()).unwrap(), ae);
    let lib = load_builtin("alfred/v1").unwrap().library;
    ae.check(&lib).unwrap();
    assert!(ExecutableProcedure::parse("udp_x(").is_err());
    assert!(ExecutableProcedure::parse("udp_nope(a)").unwrap().check(&lib).is_err());
    assert!(ExecutableProcedure::parse("udp_cool_object(a, b)").unwrap().check(&lib).is_err());
}

#[test]
fn nesting_stays_within_static_depth() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let mut b = SceneBuilder::new(7, 4).agent(Cell(3, 1), Rotation::R0, Horizon::Level);
    b.furniture("sink", Cell(1, 3));
    let c = b.furniture("countertop", Cell(3, 3));
    b.furniture("cabinet", Cell(5, 3));
    b.item_in("plate", &c);
    let (t, _) = run(&lib, b.build(), "udp_clean_object(plate); udp_put_object(plate, cabinet)");
    assert!(t.outcome.is_completed(), "{:?}", t.outcome);
    let depth = t.nesting_depth().unwrap();
    assert!(depth <= static_depth(&lib, "udp_clean_object").max(static_depth(&lib, "udp_put_object")));
}

// ---- random well-formed programs -------------------------------------------

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "obj", "recep", "dst", "tot", "attr", "a1", "item_list"]).prop_map(String::from)
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Expr::Bool),
        (-50i64..50).prop_map(Expr::Int),
        "[a-z \"\\\\]{0,6}".prop_map(Expr::Str),
        prop::sample::select(vec!["OBJ_IN_RECEP", "NOT_IN", "STOP"]).prop_map(|s| Expr::Enum(s.into())),
        ident().prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["is_open", "desc", "openable"]))
                .prop_map(|(e, a)| Expr::Attr(Box::new(e), a.into())),
            (inner.clone(), inner.clone(), any::<bool>()).prop_map(|(a, b, eq)| Expr::Cmp(
                if eq { CmpOp::Eq } else { CmpOp::Ne },
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Not(Box::new(a))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Expr::List),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::In(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
        ]
    })
}

fn args() -> impl Strategy<Value = Vec<Expr>> {
    prop::collection::vec(expr(), 0..3)
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let simple = prop_oneof![
        (prop::sample::select(vec!["navigate", "open_object", "stop"]), args())
            .prop_map(|(a, args)| Stmt::AtomicCall { action: a.into(), args }),
        (prop::option::of(ident()), prop::sample::select(vec!["udp_a", "udp_b"]), args())
            .prop_map(|(bind, n, args)| Stmt::ProcCall { bind, name: n.into(), args }),
        (prop::sample::select(vec!["rv", "reactor"]), prop::sample::select(vec!["find_recep", "x y"]))
            .prop_map(|(v, r)| Stmt::ReactorBind { var: v.into(), reactor: r.into() }),
        (ident(), prop::sample::select(vec!["detect_recep", "find_all_obj"]), args()).prop_map(|(v, r, args)| {
            Stmt::ReactorCall { var: v, target: ReactorTarget::Named(r.into()), args }
        }),
        (ident(), expr()).prop_map(|(var, expr)| Stmt::Assign { var, expr }),
        prop::option::of(expr()).prop_map(|expr| Stmt::Return { expr }),
    ];
    simple.prop_recursive(3, 24, 4, |inner| {
        let body = prop::collection::vec(inner, 0..4);
        prop_oneof![
            (expr(), body.clone(), prop::option::of(body.clone()))
                .prop_map(|(cond, then_body, else_body)| Stmt::If { cond, then_body, else_body }),
            (ident(), expr(), body.clone()).prop_map(|(var, iter, body)| Stmt::For { var, iter, body }),
            (expr(), body).prop_map(|(cond, body)| Stmt::While { cond, body }),
        ]
    })
}

fn library() -> impl Strategy<Value = Library> {
    prop::collection::vec((prop::collection::vec(ident(), 0..3), prop::collection::vec(stmt(), 0..5)), 0..4).prop_map(
        |procs| Library {
            procs: procs
                .into_iter()
                .enumerate()
                .map(|(i, (params, body))| ProcDef { name: format!("udp_p{i}"), params, body })
                .collect(),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_inverts_pretty_print(lib in library()) {
        let text = pretty_print(&lib);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, lib);
    }

    #[test]
    fn expressions_round_trip(e in expr()) {
        let lib = Library { procs: vec![ProcDef { name: "f".into(), params: vec![], body: vec![Stmt::Return { expr: Some(e) }] }] };
        prop_assert_eq!(parse(&pretty_print(&lib)).unwrap(), lib);
    }
}
