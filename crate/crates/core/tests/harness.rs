use rtsusp::analysis::{analyze_taskset, tda_naive_test, TestKind};
use rtsusp::gen::{generate_tasksets, TasksetParams};
use rtsusp::harness::{
    acceptance_ratio_sweep, canonical_pair, counterexample_search, exact_wcrt_bruteforce,
    soundness_fuzz, sweep_csv, FuzzConfig, HarnessError, SearchConfig, SweepConfig, UtilGrid,
};
use rtsusp::rational::Rational;
use rtsusp::sim::{Trace, ViolationKind};
use rtsusp::task::{assign_rate_monotonic, TaskSet, TaskSpec};
use rtsusp::time::TimeTicks;

fn example_set_without_suspension() -> TaskSet {
    assign_rate_monotonic(vec![
        TaskSpec::new("t1", 1, 0, 6),
        TaskSpec::new("t2", 1, 0, 10),
        TaskSpec::new("t3", 4, 0, 18),
        TaskSpec::new("t4", 5, 0, 20),
    ])
    .unwrap()
}

#[test]
fn bruteforce_examples() {
    let pair = assign_rate_monotonic(vec![
        TaskSpec::new("a", 1, 0, 4),
        TaskSpec::new("b", 2, 0, 10),
    ])
    .unwrap();
    assert_eq!(
        exact_wcrt_bruteforce(&pair, 2, None).unwrap(),
        TimeTicks::new(3)
    );
    assert_eq!(
        exact_wcrt_bruteforce(&pair, 1, None).unwrap(),
        TimeTicks::new(1)
    );

    let ts = example_set_without_suspension();
    let wcrt = exact_wcrt_bruteforce(&ts, 4, None).unwrap();
    assert_eq!(wcrt, TimeTicks::new(14));
    assert_eq!(tda_naive_test(&ts, 4).unwrap().response_bound, Some(wcrt));
}

#[test]
fn bruteforce_rejects_suspension_and_overload() {
    assert!(matches!(
        exact_wcrt_bruteforce(&canonical_pair(), 2, None),
        Err(HarnessError::SuspensionPresent { .. })
    ));
    let heavy = assign_rate_monotonic(vec![
        TaskSpec::new("a", 3, 0, 4),
        TaskSpec::new("b", 3, 0, 5),
    ])
    .unwrap();
    assert!(matches!(
        exact_wcrt_bruteforce(&heavy, 2, None),
        Err(HarnessError::Unfinished { .. })
    ));
}

#[test]
fn canonical_witness() {
    let w = counterexample_search(&SearchConfig::new(TestKind::TdaNaive, 0, 1))
        .unwrap()
        .expect("the canonical pair yields a witness");
    assert_eq!(w.origin, "canonical");
    assert_eq!(w.rank, 2);
    assert_eq!(w.claimed_bound, Some(4));
    assert_eq!(w.scenario.scale, 2);
    assert_eq!(w.violation.kind, ViolationKind::DeadlineMiss);
    assert_eq!(w.violation.task.as_deref(), Some("t2"));
    assert_eq!(w.violation.time, TimeTicks::new(14));
    let completion = w.trace.job("t2", 0).unwrap().completion.unwrap();
    assert_eq!(completion, TimeTicks::new(15));

    let dir = tempfile::tempdir().unwrap();
    w.write_bundle(dir.path()).unwrap();
    for name in [
        "taskset.json",
        "scenario.json",
        "trace.jsonl",
        "violation.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(Trace::from_jsonl(&trace).unwrap(), w.trace);
    let ts = TaskSet::load(&dir.path().join("taskset.json")).unwrap();
    assert_eq!(ts, canonical_pair());
}

#[test]
fn search_without_suspension_finds_nothing() {
    let mut cfg = SearchConfig::new(TestKind::TdaNaive, 40, 3);
    cfg.seed_corpus = false;
    cfg.beta = Rational::zero();
    assert!(counterexample_search(&cfg).unwrap().is_none());
    let mut empty = SearchConfig::new(TestKind::TdaNaive, 0, 3);
    empty.seed_corpus = false;
    assert!(counterexample_search(&empty).unwrap().is_none());
}

#[test]
fn generated_corpus_also_yields_witnesses() {
    let mut cfg = SearchConfig::new(TestKind::TdaNaive, 500, 11);
    cfg.seed_corpus = false;
    let w = counterexample_search(&cfg).unwrap().expect("witness");
    assert!(w.origin.starts_with("generated:"));
    let report = analyze_taskset(&w.taskset, TestKind::TdaNaive).unwrap();
    assert!(report.verdicts[w.rank - 1].is_schedulable());
}

#[test]
fn search_and_fuzz_reject_the_wrong_tests() {
    assert!(matches!(
        counterexample_search(&SearchConfig::new(TestKind::TdaSuspension, 1, 1)),
        Err(HarnessError::UnsupportedTest { .. })
    ));
    assert!(matches!(
        soundness_fuzz(&FuzzConfig::new(TestKind::TdaNaive, 1, 1, 1)),
        Err(HarnessError::UnsupportedTest { .. })
    ));
}

#[test]
fn empty_fuzz_passes() {
    let r = soundness_fuzz(&FuzzConfig::new(TestKind::TdaSuspension, 0, 20, 7)).unwrap();
    assert_eq!(r.tasksets_tested, 0);
    assert_eq!(r.simulations, 0);
    assert!(r.passed());
}

#[test]
fn small_fuzz_is_clean_and_deterministic() {
    let cfg = FuzzConfig::new(TestKind::TdaSuspension, 12, 4, 5);
    let a = soundness_fuzz(&cfg).unwrap();
    let b = soundness_fuzz(&cfg).unwrap();
    assert!(a.passed(), "{}", a.to_json());
    assert!(a.accepted_count > 0);
    assert!(a.simulations >= 12);
    assert_eq!(a.to_json(), b.to_json());
    assert!(!a.to_json().contains("elapsed"));
}

#[test]
fn grid_parsing() {
    let g: UtilGrid = "0.1:0.3:0.1".parse().unwrap();
    assert_eq!(
        g.points(),
        vec![
            Rational::new(1, 10),
            Rational::new(1, 5),
            Rational::new(3, 10)
        ]
    );
    let empty: UtilGrid = "0.5:0.4:0.1".parse().unwrap();
    assert!(empty.points().is_empty());
    for bad in ["0.1:0.3", "0:0.5:0.1", "0.1:1.5:0.1", "0.1:0.5:0", "a:b:c"] {
        assert!(bad.parse::<UtilGrid>().is_err(), "{bad}");
    }
}

fn sweep(tests: Vec<TestKind>, beta: Rational, grid: &str) -> SweepConfig {
    SweepConfig {
        tests,
        grid: grid.parse().unwrap(),
        n_sets: 40,
        n_tasks: 4,
        beta,
        seed: 9,
        period_range: (1000, 100_000),
    }
}

#[test]
fn sweep_dominance_and_reduction() {
    let rows = acceptance_ratio_sweep(&sweep(
        vec![
            TestKind::TdaOblivious,
            TestKind::TdaSuspension,
            TestKind::TdaNaive,
        ],
        Rational::new(3, 10),
        "0.1:0.9:0.2",
    ))
    .unwrap();
    assert_eq!(rows.len(), 15);
    for bin in rows.chunks(3) {
        assert!(bin[0].accepted <= bin[1].accepted, "{bin:?}");
        assert!(bin[1].accepted <= bin[2].accepted, "{bin:?}");
        assert!(bin.iter().all(|r| r.samples == 40));
    }

    let rows = acceptance_ratio_sweep(&sweep(
        vec![TestKind::TdaSuspension, TestKind::TdaNaive],
        Rational::zero(),
        "0.5:1:0.25",
    ))
    .unwrap();
    for bin in rows.chunks(2) {
        assert_eq!(bin[0].accepted, bin[1].accepted, "{bin:?}");
    }
}

#[test]
fn sweep_csv_format() {
    let cfg = sweep(
        vec![TestKind::TdaSuspension, TestKind::UtilRm],
        Rational::new(1, 5),
        "0.25:0.5:0.25",
    );
    let rows = acceptance_ratio_sweep(&cfg).unwrap();
    let csv = sweep_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "util_bin,test,accept_ratio,samples");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.25,tda-suspension,"));
    assert!(lines[4].starts_with("0.5,util-rm,"));
    assert_eq!(csv, sweep_csv(&acceptance_ratio_sweep(&cfg).unwrap()));
    let empty = sweep(
        vec![TestKind::TdaSuspension],
        Rational::zero(),
        "0.9:0.8:0.1",
    );
    assert!(acceptance_ratio_sweep(&empty).unwrap().is_empty());
}

#[test]
fn bruteforce_matches_tda_on_generated_sets() {
    let params = TasksetParams::new(3, Rational::new(7, 10), 60, 21, Rational::zero());
    let mut compared = 0;
    for ts in generate_tasksets(&params).unwrap() {
        for k in 1..=ts.len() {
            let Some(bound) = tda_naive_test(&ts, k).unwrap().response_bound else {
                break;
            };
            assert_eq!(exact_wcrt_bruteforce(&ts, k, None).unwrap(), bound);
            compared += 1;
        }
    }
    assert!(compared > 60);
}
