#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use rtsusp::analysis::{
    blocking_time, classify, rm_utilization_test, run_test, tda_naive_test, tda_oblivious_test,
    tda_suspension_test, TestKind,
};
use rtsusp::gen::{random_scenario, GenConfig, ReleaseStyle, SuspensionStyle};
use rtsusp::harness::trace_conserves;
use rtsusp::sim::{simulate, verify_trace, ViolationKind};
use rtsusp::task::{assign_rate_monotonic, validate_taskset, TaskSet, TaskSpec};
use rtsusp::time::TimeTicks;

/// Raw (C, S, T) triples with `1 <= C <= T`, `D = T`.
pub fn raw_tasks(max_n: usize, max_t: u64) -> impl Strategy<Value = Vec<(u64, u64, u64)>> {
    prop::collection::vec(
        (2..=max_t).prop_flat_map(move |t| (1..=(t / 3).max(1), 0..=t, Just(t))),
        1..=max_n,
    )
}

pub fn specs(raw: &[(u64, u64, u64)]) -> Vec<TaskSpec> {
    raw.iter()
        .enumerate()
        .map(|(i, &(c, s, t))| TaskSpec::new(format!("t{i}"), c, s, t))
        .collect()
}

/// Keeps the generated order as the priority order.
pub fn in_order(raw: &[(u64, u64, u64)]) -> TaskSet {
    validate_taskset(
        specs(raw)
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.with_priority(i as u32 + 1))
            .collect(),
    )
    .unwrap()
}

pub fn rm(raw: &[(u64, u64, u64)]) -> TaskSet {
    assign_rate_monotonic(specs(raw)).unwrap()
}

fn bound(ts: &TaskSet, k: usize) -> Option<u64> {
    tda_suspension_test(ts, k)
        .unwrap()
        .response_bound
        .map(TimeTicks::get)
}

/// `None` is an infinite bound.
fn le(a: Option<u64>, b: Option<u64>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

/// The blocking term against its definition and its natural bounds.
pub fn check_blocking(raw: &[(u64, u64, u64)]) -> Result<(), TestCaseError> {
    let ts = in_order(raw);
    for k in 1..=ts.len() {
        let b = blocking_time(&ts, k).unwrap();
        let own = raw[k - 1].1;
        let hp = &raw[..k - 1];
        let expected = own + hp.iter().map(|&(c, s, _)| c.min(s)).sum::<u64>();
        prop_assert_eq!(b.total.get(), expected);
        prop_assert_eq!(b.own_suspension.get(), own);
        prop_assert!(b.total.get() <= own + hp.iter().map(|x| x.0).sum::<u64>());
        prop_assert!(b.total.get() <= own + hp.iter().map(|x| x.1).sum::<u64>());
        let cls = classify(&ts, k).unwrap();
        prop_assert_eq!(cls.t1.len() + cls.t2.len(), k - 1);
        let split: u64 = hp
            .iter()
            .enumerate()
            .map(|(i, &(c, s, _))| {
                if cls.t1.contains(&format!("t{i}")) {
                    s
                } else {
                    c
                }
            })
            .sum();
        prop_assert_eq!(own + split, b.total.get());
    }
    Ok(())
}

/// The reported bound is the least `t` whose demand fits, found by scanning.
pub fn check_minimality(raw: &[(u64, u64, u64)]) -> Result<(), TestCaseError> {
    let ts = in_order(raw);
    for k in 1..=ts.len() {
        let (c, _, d) = raw[k - 1];
        let b = blocking_time(&ts, k).unwrap().total.get();
        let demand = |t: u64| {
            c + b
                + raw[..k - 1]
                    .iter()
                    .map(|&(ci, _, ti)| t.div_ceil(ti) * ci)
                    .sum::<u64>()
        };
        let scan = (1..=d).find(|&t| demand(t) <= t);
        prop_assert_eq!(bound(&ts, k), scan);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub enum Bump {
    Wcet,
    Suspension,
    ShorterPeriod,
}

/// Growing any C or S, or shrinking any period, never lowers a bound.
pub fn check_monotonicity(
    raw: &[(u64, u64, u64)],
    j: usize,
    bump: Bump,
    by: u64,
) -> Result<(), TestCaseError> {
    let j = j % raw.len();
    let mut grown = raw.to_vec();
    let (c, s, t) = grown[j];
    grown[j] = match bump {
        Bump::Wcet => (c + by, s, t),
        Bump::Suspension => (c, s + by, t),
        Bump::ShorterPeriod => (c, s, t.saturating_sub(by)),
    };
    if grown[j].0 > grown[j].2 {
        return Ok(());
    }
    let (before, after) = (in_order(raw), in_order(&grown));
    for k in 1..=raw.len() {
        prop_assert!(
            le(bound(&before, k), bound(&after, k)),
            "rank {} bound went from {:?} to {:?}",
            k,
            bound(&before, k),
            bound(&after, k)
        );
    }
    Ok(())
}

/// Without suspension all three time-demand variants coincide.
pub fn check_reduction(raw: &[(u64, u64, u64)]) -> Result<(), TestCaseError> {
    let flat: Vec<_> = raw.iter().map(|&(c, _, t)| (c, 0, t)).collect();
    let ts = in_order(&flat);
    for k in 1..=ts.len() {
        let s = tda_suspension_test(&ts, k).unwrap();
        let n = tda_naive_test(&ts, k).unwrap();
        let o = tda_oblivious_test(&ts, k).unwrap();
        prop_assert_eq!(s.response_bound, n.response_bound);
        prop_assert_eq!(s.response_bound, o.response_bound);
        prop_assert_eq!(s.outcome, n.outcome);
        prop_assert_eq!(s.outcome, o.outcome);
    }
    Ok(())
}

/// Per rank: oblivious accepts ⇒ suspension-aware accepts ⇒ naive accepts,
/// with bounds ordered the same way; the utilization test implies the
/// suspension-aware time-demand test.
pub fn check_dominance(raw: &[(u64, u64, u64)]) -> Result<(), TestCaseError> {
    let ts = rm(raw);
    for k in 1..=ts.len() {
        let r = |t| {
            run_test(&ts, k, t)
                .unwrap()
                .response_bound
                .map(TimeTicks::get)
        };
        let (o, s, n) = (
            r(TestKind::TdaOblivious),
            r(TestKind::TdaSuspension),
            r(TestKind::TdaNaive),
        );
        prop_assert!(le(n, s) || n.is_none() && s.is_none());
        prop_assert!(le(s, o) || s.is_none() && o.is_none());
        if o.is_some() {
            prop_assert!(s.is_some());
        }
        if s.is_some() {
            prop_assert!(n.is_some());
        }
        let u = rm_utilization_test(&ts, k).unwrap();
        if u.is_schedulable() {
            prop_assert!(
                s.is_some(),
                "utilization test accepted rank {} but TDA did not",
                k
            );
        }
    }
    Ok(())
}

/// Simulating a random legal scenario: the schedule obeys every invariant,
/// idle and executed time add up, and tasks accepted by the
/// suspension-aware test never miss.
pub fn check_simulation(raw: &[(u64, u64, u64)], seed: u64) -> Result<(), TestCaseError> {
    let ts = rm(raw);
    let horizon = ts.max_period().get() * 6;
    let cfg = GenConfig {
        seed,
        max_jobs_per_task: 200,
        release_style: ReleaseStyle::SporadicRandom,
        suspension_style: SuspensionStyle::RandomSplit,
        max_suspension_phases: 3,
        scale: 1,
        release_until: None,
    };
    let sc = random_scenario(&ts, horizon, &cfg).unwrap();
    let tr = simulate(&ts, &sc).unwrap();
    prop_assert!(trace_conserves(&tr).unwrap());
    let accepted: Vec<String> = (1..=ts.len())
        .take_while(|&k| tda_suspension_test(&ts, k).unwrap().is_schedulable())
        .map(|k| ts.tasks()[k - 1].id().to_string())
        .collect();
    for v in verify_trace(&tr, &ts).unwrap() {
        prop_assert_eq!(v.kind, ViolationKind::DeadlineMiss, "{:?}", v);
        let task = v.task.clone().unwrap();
        prop_assert!(!accepted.contains(&task), "accepted task missed: {:?}", v);
    }
    Ok(())
}

/// Scenario and trace generation are pure functions of the seed.
pub fn check_determinism(raw: &[(u64, u64, u64)], seed: u64) -> Result<(), TestCaseError> {
    let ts = rm(raw);
    let cfg = GenConfig {
        seed,
        ..GenConfig::default()
    };
    let horizon = ts.max_period().get() * 4;
    let a = random_scenario(&ts, horizon, &cfg).unwrap();
    let b = random_scenario(&ts, horizon, &cfg).unwrap();
    prop_assert_eq!(a.to_json(), b.to_json());
    let ta = simulate(&ts, &a).unwrap().to_jsonl();
    let tb = simulate(&ts, &b).unwrap().to_jsonl();
    prop_assert_eq!(ta, tb);
    Ok(())
}
