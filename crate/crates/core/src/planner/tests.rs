use proptest::prelude::*;

use super::*;
use crate::library::load_builtin;
use SubgoalKind::*;

fn ep(text: &str) -> ExecutableProcedure {
    ExecutableProcedure::parse(text).unwrap()
}

#[test]
fn question_templates() {
    assert_eq!(rule_plan(&Instruction::new("Is there a mug?")).unwrap(), ep("udp_check_obj_exist(mug)"));
    assert_eq!(rule_plan(&Instruction::new("How many mugs are there?")).unwrap(), ep("udp_count_obj(mug)"));
    assert_eq!(rule_plan(&Instruction::new("Is there a mug in the fridge?")).unwrap(), ep("udp_check_contain(mug, fridge)"));
    assert_eq!(rule_plan(&Instruction::new("Does the fridge contain an egg?")).unwrap(), ep("udp_check_contain(egg, fridge)"));
    assert_eq!(rule_plan(&Instruction::new("How many tomatoes are in the room?")).unwrap(), ep("udp_count_obj(tomato)"));
    assert!(matches!(rule_plan(&Instruction::new("Bring me a mug")), Err(PlannerError::UnmatchedTemplate(_))));
    assert!(matches!(rule_plan(&Instruction::new("Is there a unicorn?")), Err(PlannerError::UnmatchedTemplate(_))));
}

#[test]
fn plurals() {
    assert_eq!(token_class("knives"), Some("knife"));
    assert_eq!(token_class("cds"), Some("cd"));
    assert_eq!(token_class("potatoes"), Some("potato"));
    assert_eq!(token_class("the"), None);
}

#[test]
fn subgoal_annotation() {
    let a = induce_planner_labels(&[
        Subgoal::bare(Goto),
        Subgoal::new(Pick, Some("mug")),
        Subgoal::bare(Clean),
        Subgoal::bare(Goto),
        Subgoal::new(Put, Some("table")),
    ])
    .unwrap();
    assert_eq!(a, ep("udp_clean_object(mug); udp_put_object(mug, table)"));
    let b = induce_planner_labels(&[
        Subgoal::bare(Goto),
        Subgoal::new(Pickup, Some("mug")),
        Subgoal::bare(Goto),
        Subgoal::bare(Clean),
        Subgoal::new(Put, Some("table")),
    ])
    .unwrap();
    assert_eq!(a, b);
    assert!(matches!(induce_planner_labels(&[]), Err(PlannerError::UnmappedSequence(_))));
    assert!(matches!(induce_planner_labels(&[Subgoal::bare(Toggle)]), Err(PlannerError::UnmappedSequence(_))));
    let slice = induce_planner_labels(&[
        Subgoal::new(Pick, Some("knife")),
        Subgoal::new(Slice, Some("potato")),
        Subgoal::new(Put, Some("countertop")),
        Subgoal::new(Pick, Some("potato")),
        Subgoal::bare(Heat),
        Subgoal::new(Put, Some("fridge")),
    ])
    .unwrap();
    assert_eq!(
        slice,
        ep("udp_slice_object(potato, countertop); udp_heat_object(potato); udp_pick_and_put_object(potato, fridge)")
    );
}

fn corpus() -> Vec<(Instruction, ExecutableProcedure)> {
    let rows = [
        ("put a chilled egg in the sink", "udp_cool_object(egg); udp_pick_and_put_object(egg, sink)"),
        ("put a chilled apple on the table", "udp_cool_object(apple); udp_pick_and_put_object(apple, table)"),
        ("put two cds in a safe", "udp_pick_and_put_object(cd, safe); udp_pick_and_put_object(cd, safe)"),
        ("put two pens in a drawer", "udp_pick_and_put_object(pen, drawer); udp_pick_and_put_object(pen, drawer)"),
        ("put a cd in a safe", "udp_pick_and_put_object(cd, safe)"),
        ("put a mug on the shelf", "udp_pick_and_put_object(mug, shelf)"),
        (
            "place a cooked potato slice in the fridge",
            "udp_slice_object(potato, countertop); udp_heat_object(potato); udp_pick_and_put_object(potato, fridge)",
        ),
        (
            "place a cooked apple slice on the table",
            "udp_slice_object(apple, countertop); udp_heat_object(apple); udp_pick_and_put_object(apple, table)",
        ),
        ("put a clean plate on the countertop", "udp_clean_object(plate); udp_put_object(plate, countertop)"),
        ("put a clean mug in the cabinet", "udp_clean_object(mug); udp_put_object(mug, cabinet)"),
        ("put a hot egg on the table", "udp_heat_object(egg); udp_pick_and_put_object(egg, table)"),
    ];
    rows.iter().map(|(t, a)| (Instruction::new(t), ep(a))).collect()
}

fn trained() -> PlannerModel {
    let lib = load_builtin("alfred/v1").unwrap().library;
    train_planner(&corpus(), &lib, &TrainConfig::default()).unwrap()
}

#[test]
fn memorizes_training_pairs() {
    let m = trained();
    for (q, gold) in corpus() {
        assert_eq!(m.plan(&q), gold, "{}", q.text);
    }
    assert!(m.func.loss_history.windows(2).all(|w| w[1] <= w[0]));
    let back = PlannerModel::from_json(&m.to_json()).unwrap();
    for (q, _) in corpus() {
        assert_eq!(back.plan(&q), m.plan(&q));
    }
}

#[test]
fn generalizes_arguments() {
    let m = trained();
    assert_eq!(m.plan(&Instruction::new("put a chilled tomato in the sink")), ep("udp_cool_object(tomato); udp_pick_and_put_object(tomato, sink)"));
    assert_eq!(m.plan(&Instruction::new("put a book on the shelf")), ep("udp_pick_and_put_object(book, shelf)"));
}

#[test]
fn oov_gold() {
    let lib = load_builtin("alfred/v1").unwrap().library;
    let pairs = vec![(Instruction::new("fly"), ep("udp_fly(mug)"))];
    assert_eq!(train_planner(&pairs, &lib, &TrainConfig::default()).unwrap_err(), PlannerError::OOVGoldToken("udp_fly".into()));
    let pairs = vec![(Instruction::new("x"), ep("udp_cool_object(unicorn)"))];
    assert_eq!(train_planner(&pairs, &lib, &TrainConfig::default()).unwrap_err(), PlannerError::OOVGoldToken("unicorn".into()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn decode_stays_in_vocabulary(words in proptest::collection::vec("[a-z]{1,8}|egg|two|sink|chilled|put|cd|safe", 0..12)) {
        thread_local!(static M: PlannerModel = trained());
        let lib = load_builtin("alfred/v1").unwrap().library;
        let q = Instruction::new(&words.join(" "));
        let (out, max_len) = M.with(|m| (m.plan(&q), m.max_len));
        prop_assert!(out.calls.len() <= max_len);
        prop_assert!(out.check(&lib).is_ok());
        for c in &out.calls {
            for a in &c.args {
                prop_assert!(catalog::is_class(a));
            }
        }
    }
}
