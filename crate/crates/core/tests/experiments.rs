use pap_core::bench::*;

fn small() -> ExperimentConfig {
    ExperimentConfig { hh_train: 120, iqa_train_per_type: 40, n_eval: 24, resamples: 200, few_shot_splits: 2, ..Default::default() }
}

#[test]
fn designs_validate_their_parameters() {
    let bad = [
        Design::DataEfficiency { fractions: vec![] },
        Design::DataEfficiency { fractions: vec![0.0, 1.0] },
        Design::DataEfficiency { fractions: vec![1.5] },
        Design::FewShot { strategy: FewShotStrategy::LongestN, n: 4, shots: 21 },
        Design::FewShot { strategy: FewShotStrategy::RandomN, n: 0, shots: 5 },
        Design::PerceptionSweep { eps: vec![-0.1] },
        Design::LibraryAb { a: "iqa/v1".into(), b: "iqa/v1".into() },
    ];
    for d in bad {
        assert!(matches!(d.validate(), Err(ExperimentError::Design(_))), "{d:?}");
        assert!(run_experiment(&d, &small()).is_err());
    }
    for name in ["head_to_head", "head_to_head_iqa", "data_efficiency", "few_shot", "few_shot_random", "library_ab", "length_buckets", "perception_sweep"] {
        Design::by_name(name).unwrap().validate().unwrap();
    }
    assert!(Design::by_name("nope").is_none());
}

#[test]
fn unknown_bundle_is_a_library_error() {
    let d = Design::LibraryAb { a: "iqa/v1".into(), b: "iqa/v9".into() };
    assert!(matches!(run_experiment(&d, &small()), Err(ExperimentError::Library(_))));
}

#[test]
fn library_ab_has_two_arms_on_one_suite_and_a_single_diff() {
    let r = run_experiment(&Design::by_name("library_ab").unwrap(), &small()).unwrap();
    assert_eq!(r.arms.len(), 2);
    let ids = |i: usize| r.arms[i].outcomes.iter().map(|o| o.task_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(0), ids(1));
    let diff = r.diff.as_ref().unwrap();
    assert_eq!(diff.added.len() + diff.removed.len() + diff.modified.len(), 1);
    assert_eq!(diff.modified, vec!["udp_grid_search_recep".to_string()]);
    assert!(r.summary.contains_key("diff.mean"));
}

#[test]
fn reports_embed_config_hash_and_are_reproducible() {
    let cfg = small();
    let d = Design::by_name("library_ab").unwrap();
    let a = run_experiment(&d, &cfg).unwrap();
    let b = run_experiment(&d, &cfg).unwrap();
    assert_eq!(a.config_hash, config_hash(&(&d, &cfg)));
    assert!(a.seeds.contains(&cfg.seed));
    assert_eq!(a.to_json(), b.to_json());
    let csv = a.to_csv();
    assert!(csv.starts_with("design,arm,agent,split,param,group,n,sr,ssr"));
    assert!(csv.lines().count() > 2);
}

#[test]
fn planner_train_accuracy_does_not_drop_with_more_data() {
    let d = Design::DataEfficiency { fractions: vec![0.1, 0.5, 1.0] };
    let r = run_experiment(&d, &small()).unwrap();
    let acc: Vec<f64> = ["0.1", "0.5", "1"].iter().map(|f| r.summary[&format!("planner_train_acc@{f}")]).collect();
    assert!(acc.windows(2).all(|w| w[1] + 1e-9 >= w[0]), "{acc:?}");
    for a in &r.arms {
        assert!(a.metrics.ssr + 1e-12 >= a.metrics.sr);
    }
}
