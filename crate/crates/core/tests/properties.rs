mod common;

use common::*;
use proptest::prelude::*;

use rtsusp::gen::{
    deferred_adversarial_scenario, generate_tasksets, synchronous_periodic_scenario, GenConfig,
    SuspensionStyle, TasksetParams,
};
use rtsusp::rational::Rational;
use rtsusp::sim::simulate;
use rtsusp::task::{assign_rate_monotonic, total_utilization, validate_taskset, TaskSet};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn blocking_matches_its_definition(raw in raw_tasks(6, 50)) {
        check_blocking(&raw)?;
    }

    #[test]
    fn bound_is_least_fitting_instant(raw in raw_tasks(5, 60)) {
        check_minimality(&raw)?;
    }

    #[test]
    fn bound_grows_with_wcet(raw in raw_tasks(5, 40), j in 0usize..5, by in 1u64..5) {
        check_monotonicity(&raw, j, Bump::Wcet, by)?;
    }

    #[test]
    fn bound_grows_with_suspension(raw in raw_tasks(5, 40), j in 0usize..5, by in 1u64..8) {
        check_monotonicity(&raw, j, Bump::Suspension, by)?;
    }

    #[test]
    fn bound_grows_as_periods_shrink(raw in raw_tasks(5, 40), j in 0usize..5, by in 1u64..8) {
        check_monotonicity(&raw, j, Bump::ShorterPeriod, by)?;
    }

    #[test]
    fn variants_agree_without_suspension(raw in raw_tasks(6, 60)) {
        check_reduction(&raw)?;
    }

    #[test]
    fn tests_are_ordered_by_strength(raw in raw_tasks(6, 60)) {
        check_dominance(&raw)?;
    }

    #[test]
    fn random_schedules_are_legal(raw in raw_tasks(4, 30), seed in any::<u64>()) {
        check_simulation(&raw, seed)?;
    }

    #[test]
    fn generation_is_deterministic(raw in raw_tasks(4, 30), seed in any::<u64>()) {
        check_determinism(&raw, seed)?;
    }

    #[test]
    fn validation_is_idempotent(raw in raw_tasks(6, 100)) {
        let ts = rm(&raw);
        let again = validate_taskset(ts.to_specs()).unwrap();
        prop_assert_eq!(&again, &ts);
        prop_assert_eq!(TaskSet::from_json(&ts.to_json()).unwrap(), ts);
    }

    #[test]
    fn rate_monotonic_ignores_input_order(raw in raw_tasks(6, 100), rot in 0usize..6) {
        let specs = specs(&raw);
        let mut rotated = specs.clone();
        rotated.rotate_left(rot % specs.len());
        rotated.reverse();
        prop_assert_eq!(assign_rate_monotonic(specs).unwrap(), assign_rate_monotonic(rotated).unwrap());
    }

    #[test]
    fn utilization_is_additive(raw in raw_tasks(6, 100)) {
        let ts = rm(&raw);
        for k in 1..ts.len() {
            let head = total_utilization(&ts, k).unwrap();
            let tail: Rational = ts.tasks()[k..].iter().map(|t| t.utilization()).sum();
            prop_assert_eq!(head + tail, total_utilization(&ts, ts.len()).unwrap());
        }
    }

    #[test]
    fn deferred_scenarios_are_legal(raw in raw_tasks(4, 30), k in 1usize..5, scale in 1u64..4) {
        let ts = rm(&raw);
        let k = (k - 1) % ts.len() + 1;
        let cfg = GenConfig { scale, ..GenConfig::default() };
        let horizon = scale * ts.max_period().get() * 4;
        let sc = deferred_adversarial_scenario(&ts, k, horizon, &cfg).unwrap();
        sc.validate(&ts).unwrap();
        let victim = ts.tasks()[k - 1].id();
        prop_assert_eq!(sc.jobs_of(victim).count(), 1);
        for lower in &ts.tasks()[k..] {
            prop_assert_eq!(sc.jobs_of(lower.id()).count(), 0);
        }
        simulate(&ts, &sc).unwrap();
    }

    #[test]
    fn synchronous_scenarios_release_periodically(raw in raw_tasks(4, 30), horizon in 1u64..200) {
        let ts = rm(&raw);
        let cfg = GenConfig { suspension_style: SuspensionStyle::DeferredMax, ..GenConfig::default() };
        let sc = synchronous_periodic_scenario(&ts, horizon, &cfg).unwrap();
        for task in ts.iter() {
            let releases: Vec<u64> = sc.jobs_of(task.id()).map(|j| j.release.get()).collect();
            let expected: Vec<u64> = (0..horizon).step_by(task.period().get() as usize).collect();
            prop_assert_eq!(releases, expected);
        }
    }

    #[test]
    fn generated_sets_respect_parameters(
        n in 1usize..8,
        pct in 5u64..=100,
        beta_pct in 0u64..=100,
        seed in any::<u64>(),
    ) {
        let params = TasksetParams::new(n, Rational::new(pct, 100), 3, seed, Rational::new(beta_pct, 100));
        let sets = generate_tasksets(&params).unwrap();
        prop_assert_eq!(&sets, &generate_tasksets(&params).unwrap());
        for ts in &sets {
            prop_assert_eq!(ts.len(), n);
            prop_assert!(total_utilization(ts, n).unwrap() <= Rational::one());
            for t in ts.iter() {
                prop_assert!((1000..=100_000).contains(&t.period().get()));
                prop_assert_eq!(t.deadline(), t.period());
                prop_assert!(t.max_suspension().get() <= t.period().get() - t.wcet().get());
                if beta_pct == 0 {
                    prop_assert!(t.max_suspension().is_zero());
                }
            }
            prop_assert_eq!(&validate_taskset(ts.to_specs()).unwrap(), ts);
        }
    }
}
