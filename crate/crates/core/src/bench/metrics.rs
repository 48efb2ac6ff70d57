//! Per-episode outcomes, aggregate metrics and paired bootstrap CIs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tasks::{Split, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Planner,
    Reactor,
    Grounding,
    Navigation,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub task_id: String,
    /// Recipe or question type.
    pub kind: String,
    pub split: Split,
    pub success: bool,
    pub conditions_met: usize,
    pub n_conditions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub steps: usize,
    /// Failed atomic attempts (and unformable actions, for the baseline).
    pub invalid: usize,
    pub gold_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<FailureCause>,
}

impl EpisodeOutcome {
    /// Outcome scaffold for `task`; success and conditions are filled in by
    /// `score`.
    pub fn for_task(task: &TaskSpec) -> EpisodeOutcome {
        EpisodeOutcome {
            task_id: task.id.clone(),
            kind: task.kind_name(),
            split: task.split,
            success: false,
            conditions_met: 0,
            n_conditions: task.n_conditions(),
            answer: None,
            steps: 0,
            invalid: 0,
            gold_len: task.gold_len,
            cause: None,
        }
    }

    pub fn ssr(&self) -> f64 {
        if self.n_conditions == 0 {
            0.0
        } else {
            self.conditions_met as f64 / self.n_conditions as f64
        }
    }
}

/// Fill success and condition counts from the final state / answer.
pub fn score(
    out: &mut EpisodeOutcome,
    task: &TaskSpec,
    initial: &crate::world::SceneState,
    final_state: &crate::world::SceneState,
) {
    match &task.gold {
        super::Gold::Answer(a) => {
            let ok = out.answer.as_deref() == Some(a.as_str());
            out.conditions_met = usize::from(ok);
            out.success = ok;
        }
        super::Gold::Goals(_) => {
            out.conditions_met = task.conditions_met(initial, final_state);
            out.success = out.conditions_met == out.n_conditions;
        }
    }
    if out.success {
        out.cause = None;
    }
}

pub const BUCKETS: [(&str, usize, usize); 3] = [("1-10", 1, 10), ("11-20", 11, 20), ("21+", 21, usize::MAX)];

pub fn bucket_of(gold_len: usize) -> Option<&'static str> {
    BUCKETS.iter().find(|(_, lo, hi)| (*lo..=*hi).contains(&gold_len)).map(|(n, _, _)| *n)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub n: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub sr: f64,
    pub ssr: f64,
    /// Success rate per recipe / question type (answer accuracy for questions).
    pub per_kind: BTreeMap<String, Rate>,
    pub per_bucket: BTreeMap<String, Rate>,
    pub causes: BTreeMap<String, usize>,
    pub mean_steps: f64,
    pub invalid_rate: f64,
}

pub fn aggregate(outcomes: &[EpisodeOutcome]) -> Metrics {
    let n = outcomes.len();
    if n == 0 {
        return Metrics::default();
    }
    let mean = |f: &dyn Fn(&EpisodeOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n as f64;
    let mut per_kind: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut per_bucket: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut causes = BTreeMap::new();
    for o in outcomes {
        let e = per_kind.entry(o.kind.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(o.success);
        if let Some(b) = bucket_of(o.gold_len) {
            let e = per_bucket.entry(b.to_string()).or_default();
            e.0 += 1;
            e.1 += usize::from(o.success);
        }
        if let Some(c) = o.cause {
            *causes.entry(serde_json::to_value(c).unwrap().as_str().unwrap().to_string()).or_insert(0) += 1;
        }
    }
    let rate = |m: BTreeMap<String, (usize, usize)>| {
        m.into_iter().map(|(k, (n, s))| (k, Rate { n, rate: s as f64 / n as f64 })).collect()
    };
    let steps: usize = outcomes.iter().map(|o| o.steps).sum();
    let invalid: usize = outcomes.iter().map(|o| o.invalid).sum();
    Metrics {
        n,
        sr: mean(&|o| f64::from(u8::from(o.success))),
        ssr: mean(&|o| o.ssr()),
        per_kind: rate(per_kind),
        per_bucket: rate(per_bucket),
        causes,
        mean_steps: steps as f64 / n as f64,
        invalid_rate: if steps == 0 { 0.0 } else { invalid as f64 / steps as f64 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Percentile bootstrap CI (95%) of mean(a - b) over paired episodes.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Interval {
    assert_eq!(a.len(), b.len(), "paired samples");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    if n == 0 {
        return Interval { mean: 0.0, lo: 0.0, hi: 0.0 };
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    if resamples == 0 {
        return Interval { mean, lo: mean, hi: mean };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Interval { mean, lo: q(0.025), hi: q(0.975) }
}

/// Hex SHA-256 of a value's canonical JSON.
pub fn config_hash<T: Serialize>(v: &T) -> String {
    let json = serde_json::to_string(v).expect("serializable");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcome(kind: &str, met: usize, of: usize, gold_len: usize) -> EpisodeOutcome {
        EpisodeOutcome {
            task_id: format!("{kind}-{met}-{of}-{gold_len}"),
            kind: kind.into(),
            split: Split::Seen,
            success: met == of,
            conditions_met: met,
            n_conditions: of,
            answer: None,
            steps: gold_len,
            invalid: 0,
            gold_len,
            cause: (met != of).then_some(FailureCause::Reactor),
        }
    }

    #[test]
    fn one_done_one_half_done() {
        let m = aggregate(&[outcome("pick_place", 1, 1, 5), outcome("pick_two_place", 1, 2, 12)]);
        assert_eq!(m.n, 2);
        assert!((m.sr - 0.5).abs() < 1e-12);
        assert!((m.ssr - 0.75).abs() < 1e-12);
        assert_eq!(m.causes.get("reactor"), Some(&1));
    }

    #[test]
    fn all_failures_score_zero() {
        let m = aggregate(&[outcome("a", 0, 2, 3), outcome("b", 1, 3, 30)]);
        assert_eq!(m.sr, 0.0);
        assert!(m.ssr >= 0.0);
    }

    #[test]
    fn empty_set_is_empty_metrics() {
        let m = aggregate(&[]);
        assert_eq!(m.n, 0);
        assert!(m.per_kind.is_empty());
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bucket_of(0), None);
        assert_eq!(bucket_of(1), Some("1-10"));
        assert_eq!(bucket_of(10), Some("1-10"));
        assert_eq!(bucket_of(11), Some("11-20"));
        assert_eq!(bucket_of(20), Some("11-20"));
        assert_eq!(bucket_of(21), Some("21+"));
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let a: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i % 4 != 0))).collect();
        let b: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let ci = paired_bootstrap(&a, &b, 1000, 7);
        assert!((ci.mean - 0.25).abs() < 1e-12);
        assert!(ci.lo <= ci.mean && ci.mean <= ci.hi);
        assert!(ci.excludes_zero());
        assert_eq!(ci, paired_bootstrap(&a, &b, 1000, 7));
        let same = paired_bootstrap(&a, &a, 200, 1);
        assert!(!same.excludes_zero());
        assert_eq!(paired_bootstrap(&a, &b, 0, 1).lo, ci.mean);
    }

    #[test]
    fn config_hash_is_stable_hex() {
        let h = config_hash(&vec![1, 2, 3]);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&vec![1, 2, 3]));
        assert_ne!(h, config_hash(&vec![1, 2]));
    }

    fn arb_outcomes() -> impl Strategy<Value = Vec<EpisodeOutcome>> {
        prop::collection::vec((0usize..3, 1usize..4, 1usize..40), 0..40).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (k, of, len))| outcome(["x", "y", "z"][k], (i * 7) % (of + 1), of, len))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rates_bounded_and_ssr_dominates(outs in arb_outcomes()) {
            let m = aggregate(&outs);
            prop_assert!((0.0..=1.0).contains(&m.sr) && (0.0..=1.0).contains(&m.ssr));
            prop_assert!(m.ssr + 1e-12 >= m.sr);
            for r in m.per_kind.values().chain(m.per_bucket.values()) {
                prop_assert!((0.0..=1.0).contains(&r.rate));
            }
        }

        #[test]
        fn buckets_match_brute_recount(outs in arb_outcomes()) {
            let m = aggregate(&outs);
            for (name, lo, hi) in BUCKETS {
                let n = outs.iter().filter(|o| o.gold_len >= lo && o.gold_len <= hi).count();
                let s = outs.iter().filter(|o| o.gold_len >= lo && o.gold_len <= hi && o.success).count();
                match m.per_bucket.get(name) {
                    None => prop_assert_eq!(n, 0),
                    Some(r) => {
                        prop_assert_eq!(r.n, n);
                        prop_assert!((r.rate - s as f64 / n as f64).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn permutation_invariant(outs in arb_outcomes(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = outs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = (aggregate(&outs), aggregate(&shuffled));
            prop_assert!((a.sr - b.sr).abs() < 1e-12 && (a.ssr - b.ssr).abs() < 1e-12);
            prop_assert_eq!(a.per_kind.keys().collect::<Vec<_>>(), b.per_kind.keys().collect::<Vec<_>>());
            prop_assert_eq!(a.per_bucket, b.per_bucket);
            prop_assert_eq!(a.causes, b.causes);
        }
    }
}
