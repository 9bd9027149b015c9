use rtsusp::gen::{
    deferred_adversarial_scenario, example_taskset, figure1_fixture, generate_tasksets,
    random_scenario, synchronous_periodic_scenario, GenConfig, GenError, ReleaseStyle,
    SuspensionStyle, TasksetParams,
};
use rtsusp::rational::Rational;
use rtsusp::sim::{idle_time, simulate, Segment};
use rtsusp::task::{assign_rate_monotonic, total_utilization, TaskSpec};
use rtsusp::time::TimeTicks;

fn plain() -> GenConfig {
    GenConfig {
        suspension_style: SuspensionStyle::None,
        release_style: ReleaseStyle::SynchronousPeriodic,
        ..GenConfig::default()
    }
}

#[test]
fn synchronous_releases() {
    let ts = assign_rate_monotonic(vec![
        TaskSpec::new("a", 1, 0, 4),
        TaskSpec::new("b", 2, 0, 10),
    ])
    .unwrap();
    let sc = synchronous_periodic_scenario(&ts, 20, &plain()).unwrap();
    let releases = |id| sc.jobs_of(id).map(|j| j.release.get()).collect::<Vec<_>>();
    assert_eq!(releases("a"), [0, 4, 8, 12, 16]);
    assert_eq!(releases("b"), [0, 10]);

    let ex = example_taskset();
    let sc = synchronous_periodic_scenario(&ex, 20, &plain()).unwrap();
    let counts: Vec<usize> = ex.iter().map(|t| sc.jobs_of(t.id()).count()).collect();
    assert_eq!(counts, [4, 2, 2, 1]);
}

#[test]
fn synchronous_deferred_segments() {
    let ts = assign_rate_monotonic(vec![TaskSpec::new("a", 2, 2, 8)]).unwrap();
    let cfg = GenConfig {
        suspension_style: SuspensionStyle::DeferredMax,
        ..plain()
    };
    let sc = synchronous_periodic_scenario(&ts, 16, &cfg).unwrap();
    for job in &sc.jobs {
        assert_eq!(
            job.segments(),
            &[Segment::exec(1), Segment::suspend(2), Segment::exec(1)]
        );
    }
    assert!(synchronous_periodic_scenario(&ts, 0, &cfg).is_err());
}

#[test]
fn deferred_scenario_on_canonical_pair() {
    let ts = assign_rate_monotonic(vec![
        TaskSpec::new("t1", 2, 2, 4),
        TaskSpec::new("t2", 2, 0, 5),
    ])
    .unwrap();
    let cfg = GenConfig {
        scale: 2,
        max_jobs_per_task: 2,
        ..GenConfig::default()
    };
    let sc = deferred_adversarial_scenario(&ts, 2, 40, &cfg).unwrap();
    let t1: Vec<_> = sc.jobs_of("t1").collect();
    assert_eq!(t1[0].release, TimeTicks::new(0));
    assert_eq!(
        t1[0].segments(),
        &[Segment::exec(1), Segment::suspend(4), Segment::exec(3)]
    );
    assert_eq!(t1[1].release, TimeTicks::new(8));
    assert_eq!(t1[1].segments(), &[Segment::exec(4)]);
    let t2: Vec<_> = sc.jobs_of("t2").collect();
    assert_eq!(t2.len(), 1);
    assert_eq!(t2[0].release, TimeTicks::new(4));

    let tr = simulate(&ts, &sc).unwrap();
    let victim = tr.job("t2", 0).unwrap();
    assert!(victim.missed);
    assert_eq!(victim.deadline, TimeTicks::new(14));
    // Seven ticks of t1 between t2's release and its deadline.
    let idle = idle_time(&tr, TimeTicks::new(4), TimeTicks::new(14)).unwrap();
    assert_eq!(idle, TimeTicks::ZERO);
    let t1_exec: u64 = 7;
    assert_eq!(
        tr.exec_time(4.into(), 14.into()).unwrap().get() - 3,
        t1_exec
    );
}

#[test]
fn deferred_scenario_degenerate_cases() {
    let flat = assign_rate_monotonic(vec![
        TaskSpec::new("a", 1, 0, 4),
        TaskSpec::new("b", 2, 0, 10),
        TaskSpec::new("c", 1, 0, 12),
    ])
    .unwrap();
    let sc = deferred_adversarial_scenario(&flat, 2, 20, &GenConfig::default()).unwrap();
    let releases = |id| sc.jobs_of(id).map(|j| j.release.get()).collect::<Vec<_>>();
    assert_eq!(releases("a"), [0, 4, 8, 12, 16]);
    assert_eq!(releases("b"), [0]);
    assert!(releases("c").is_empty());

    let ex = example_taskset();
    let only_top = deferred_adversarial_scenario(&ex, 1, 50, &GenConfig::default()).unwrap();
    assert!(only_top.jobs.iter().all(|j| j.task == "t1"));
    assert_eq!(only_top.jobs.len(), 1);
    assert!(deferred_adversarial_scenario(&ex, 5, 50, &GenConfig::default()).is_err());
    assert!(deferred_adversarial_scenario(&ex, 0, 50, &GenConfig::default()).is_err());
}

#[test]
fn random_scenarios() {
    let ex = example_taskset();
    let cfg = GenConfig {
        seed: 42,
        ..GenConfig::default()
    };
    let a = random_scenario(&ex, 200, &cfg).unwrap();
    a.validate(&ex).unwrap();
    assert_eq!(
        a.to_json(),
        random_scenario(&ex, 200, &cfg).unwrap().to_json()
    );
    let other = GenConfig {
        seed: 43,
        ..cfg.clone()
    };
    assert_ne!(a, random_scenario(&ex, 200, &other).unwrap());
    for job in a.jobs_of("t4") {
        assert_eq!(job.segments().len(), 1);
    }
    let bad = GenConfig {
        max_suspension_phases: 0,
        ..cfg
    };
    assert!(matches!(
        random_scenario(&ex, 200, &bad),
        Err(GenError::InvalidParameter { .. })
    ));
}

#[test]
fn figure1_fixture_properties() {
    let (ts, sc) = figure1_fixture();
    assert_eq!(ts, example_taskset());
    assert_eq!(sc.scale, 10);
    let tr = simulate(&ts, &sc).unwrap();
    let t4 = tr.job("t4", 0).unwrap();
    let f4 = t4.completion.unwrap().get();
    assert!(190 < f4 && f4 < 200);
    assert!(!t4.missed);
    let idle = idle_time(&tr, TimeTicks::new(41), TimeTicks::new(199)).unwrap();
    assert!(idle.get() <= 20);
    assert_eq!(sc.annotations["t_1"], 41);
    assert_eq!(sc.annotations["t_4"], 70);
}

#[test]
fn taskset_generator_examples() {
    let single = TasksetParams::new(1, Rational::new(1, 2), 5, 1, Rational::zero());
    for ts in generate_tasksets(&single).unwrap() {
        let t = &ts.tasks()[0];
        let c = t.wcet().get() as f64;
        let p = t.period().get() as f64;
        assert!((c / p - 0.5).abs() <= 0.5 / p + 1e-12);
        assert!(t.max_suspension().is_zero());
    }
    let params = TasksetParams::new(6, Rational::new(4, 5), 10, 77, Rational::new(1, 2));
    let sets = generate_tasksets(&params).unwrap();
    assert_eq!(sets, generate_tasksets(&params).unwrap());
    assert_eq!(sets.len(), 10);
    for ts in &sets {
        assert!(total_utilization(ts, ts.len()).unwrap() <= Rational::one());
        let ids: Vec<&str> = ts.iter().map(|t| t.id()).collect();
        assert_eq!(ids, ["t01", "t02", "t03", "t04", "t05", "t06"]);
    }
    let zero = TasksetParams::new(3, Rational::zero(), 1, 1, Rational::zero());
    assert!(generate_tasksets(&zero).is_err());
    let over = TasksetParams::new(3, Rational::new(11, 10), 1, 1, Rational::zero());
    assert!(generate_tasksets(&over).is_err());
    let beta = TasksetParams::new(3, Rational::new(1, 2), 1, 1, Rational::new(3, 2));
    assert!(generate_tasksets(&beta).is_err());
    let none = TasksetParams::new(0, Rational::new(1, 2), 1, 1, Rational::zero());
    assert!(generate_tasksets(&none).is_err());
}

#[test]
fn infeasible_generation_gives_up() {
    // 40 tasks with periods of 2 ticks: every C clamps to 1, so U = 20.
    let mut params = TasksetParams::new(40, Rational::new(1, 10), 1, 5, Rational::zero());
    params.period_range = (2, 2);
    assert!(matches!(
        generate_tasksets(&params),
        Err(GenError::Infeasible { .. })
    ));
}
