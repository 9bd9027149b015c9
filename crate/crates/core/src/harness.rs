//! Experiments: soundness fuzzing, counterexample search against unsound
//! baselines, a brute-force response-time oracle and acceptance-ratio
//! sweeps.
//!
//! Parallel work is mapped with rayon and merged in input order, so every
//! report is a deterministic function of its configuration. The
//! `RTSUSP_THREADS` environment variable caps the worker count.

use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_taskset, AnalysisError, TestKind};
use crate::gen::{
    deferred_adversarial_scenario, derive_seed, generate_tasksets, random_scenario,
    synchronous_periodic_scenario, GenConfig, GenError, ReleaseStyle, SuspensionStyle,
    TasksetParams,
};
use crate::rational::{ParseRationalError, Rational};
use crate::sim::{
    idle_time, simulate, verify_trace, Scenario, SimError, Trace, Violation, ViolationKind,
};
use crate::task::{assign_rate_monotonic, ModelError, TaskSet, TaskSetFile, TaskSpec};
use crate::time::TimeTicks;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{op} does not accept test {test}")]
    UnsupportedTest { op: &'static str, test: TestKind },
    #[error("task {id} suspends; the brute-force oracle needs S = 0 for every analyzed task")]
    SuspensionPresent { id: String },
    #[error("task {id}: first job unfinished at horizon {horizon}")]
    Unfinished { id: String, horizon: u64 },
    #[error("invalid utilization grid {input:?}: {reason}")]
    InvalidGrid { input: String, reason: String },
    #[error("RTSUSP_THREADS={0:?} is not a positive integer")]
    Threads(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Runs `f` on a pool capped by `RTSUSP_THREADS`, or on the global pool.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    match std::env::var("RTSUSP_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| HarnessError::Threads(raw.clone()))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// How the fuzzer draws task sets and scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub test: TestKind,
    pub n_sets: usize,
    pub scenarios_per_set: usize,
    pub seed: u64,
    /// Inclusive range of task counts.
    pub n_tasks: (usize, usize),
    /// Inclusive range of target utilizations, in percent.
    pub util_percent: (u64, u64),
    pub beta: Rational,
    pub period_range: (u64, u64),
    pub max_suspension_phases: u64,
    /// Releases stop after `horizon_factor · max T · n`; the horizon adds
    /// the same span again so every released job reaches its deadline.
    pub horizon_factor: u64,
    pub max_jobs_per_task: usize,
}

impl FuzzConfig {
    pub fn new(test: TestKind, n_sets: usize, scenarios_per_set: usize, seed: u64) -> Self {
        FuzzConfig {
            test,
            n_sets,
            scenarios_per_set,
            seed,
            n_tasks: (2, 6),
            util_percent: (20, 90),
            beta: Rational::new(3, 10),
            period_range: (1000, 100_000),
            max_suspension_phases: 3,
            horizon_factor: 2,
            max_jobs_per_task: 10_000,
        }
    }
}

/// A deadline miss or invariant breach found while fuzzing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzFinding {
    pub set_index: usize,
    pub taskset: TaskSetFile,
    /// `random:<seed>`, `synchronous` or `deferred:<rank>`.
    pub scenario: String,
    pub violation: Violation,
}

/// An accepted task whose observed response exceeded its analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub set_index: usize,
    pub taskset: TaskSetFile,
    pub scenario: String,
    pub task: String,
    pub job: usize,
    pub observed: u64,
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub test: TestKind,
    pub seed: u64,
    pub tasksets_tested: usize,
    pub scenarios_per_set: usize,
    /// Traces simulated, including adversarial and synchronous scenarios.
    pub simulations: usize,
    /// Accepted tasks, summed over task sets.
    pub accepted_count: usize,
    /// Task sets with every task accepted.
    pub fully_accepted_sets: usize,
    pub miss_count: usize,
    /// Deadline misses of accepted tasks.
    pub violations: Vec<FuzzFinding>,
    pub bound_violations: Vec<BoundViolation>,
    /// Schedule invariant breaches other than deadline misses.
    pub trace_errors: Vec<FuzzFinding>,
    /// Traces where idle plus executed time differed from the horizon.
    pub conservation_failures: usize,
    /// Largest observed response over bound among accepted tasks, as `num/den`.
    pub tightest_ratio: Option<Rational>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.miss_count == 0
            && self.bound_violations.is_empty()
            && self.trace_errors.is_empty()
            && self.conservation_failures == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

#[derive(Default)]
struct SetOutcome {
    simulations: usize,
    accepted: usize,
    fully_accepted: bool,
    misses: Vec<FuzzFinding>,
    bound_violations: Vec<BoundViolation>,
    trace_errors: Vec<FuzzFinding>,
    conservation_failures: usize,
    tightest: Option<Rational>,
}

fn fuzz_taskset(cfg: &FuzzConfig, index: usize) -> Result<TaskSet, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, index as u64]));
    let n = rng.random_range(cfg.n_tasks.0..=cfg.n_tasks.1);
    let pct = rng.random_range(cfg.util_percent.0..=cfg.util_percent.1);
    let mut params = TasksetParams::new(
        n,
        Rational::new(pct, 100),
        1,
        derive_seed(cfg.seed, &[1, index as u64]),
        cfg.beta.clone(),
    );
    params.period_range = cfg.period_range;
    Ok(generate_tasksets(&params)?.remove(0))
}

/// Trace conservation: idle plus per-job execution equals the horizon, and
/// execution derived from events equals the per-job summaries.
pub fn trace_conserves(tr: &Trace) -> Result<bool, SimError> {
    let idle = idle_time(tr, TimeTicks::ZERO, tr.horizon)?;
    let exec = tr.exec_time(TimeTicks::ZERO, tr.horizon)?;
    let summarized: u64 = tr.jobs.iter().map(|j| j.executed.get()).sum();
    Ok(idle.get() + exec.get() == tr.horizon.get() && exec.get() == summarized)
}

fn fuzz_one_set(cfg: &FuzzConfig, index: usize) -> Result<SetOutcome, HarnessError> {
    let ts = fuzz_taskset(cfg, index)?;
    let report = analyze_taskset(&ts, cfg.test)?;
    let accepted: Vec<usize> = report.accepted_ranks().collect();
    let mut out = SetOutcome {
        accepted: accepted.len(),
        fully_accepted: report.all_schedulable(),
        ..SetOutcome::default()
    };
    if accepted.is_empty() {
        return Ok(out);
    }
    let span = ts
        .max_period()
        .get()
        .saturating_mul(ts.len() as u64)
        .saturating_mul(cfg.horizon_factor)
        .max(1);
    let horizon = span.saturating_mul(2);
    let gen = |seed, release_style, suspension_style| GenConfig {
        seed,
        max_jobs_per_task: cfg.max_jobs_per_task,
        release_style,
        suspension_style,
        max_suspension_phases: cfg.max_suspension_phases,
        scale: 1,
        release_until: Some(span),
    };

    let mut scenarios: Vec<(String, Scenario)> = Vec::new();
    for j in 0..cfg.scenarios_per_set {
        let seed = derive_seed(cfg.seed, &[2, index as u64, j as u64]);
        let g = gen(
            seed,
            ReleaseStyle::SporadicRandom,
            SuspensionStyle::RandomSplit,
        );
        scenarios.push((format!("random:{seed}"), random_scenario(&ts, horizon, &g)?));
    }
    let sync = gen(
        0,
        ReleaseStyle::SynchronousPeriodic,
        SuspensionStyle::DeferredMax,
    );
    scenarios.push((
        "synchronous".into(),
        synchronous_periodic_scenario(&ts, horizon, &sync)?,
    ));
    for &k in &accepted {
        if k > 1 {
            scenarios.push((
                format!("deferred:{k}"),
                deferred_adversarial_scenario(&ts, k, horizon, &sync)?,
            ));
        }
    }

    let bounds: Vec<Option<u64>> = report
        .verdicts
        .iter()
        .map(|v| v.response_bound.map(TimeTicks::get))
        .collect();
    let file = ts.to_file();
    for (label, sc) in scenarios {
        let tr = simulate(&ts, &sc)?;
        out.simulations += 1;
        if !trace_conserves(&tr)? {
            out.conservation_failures += 1;
        }
        for v in verify_trace(&tr, &ts)? {
            let rank = v.task.as_deref().and_then(|id| ts.rank_of(id));
            let finding = || FuzzFinding {
                set_index: index,
                taskset: file.clone(),
                scenario: label.clone(),
                violation: v.clone(),
            };
            match (v.kind, rank) {
                (ViolationKind::DeadlineMiss, Some(r)) if accepted.contains(&r) => {
                    out.misses.push(finding())
                }
                (ViolationKind::DeadlineMiss, _) => {}
                _ => out.trace_errors.push(finding()),
            }
        }
        for &k in &accepted {
            let Some(bound) = bounds[k - 1] else { continue };
            let id = ts.tasks()[k - 1].id();
            for job in tr.jobs_of(id) {
                let Some(observed) = job.response_time().map(TimeTicks::get) else {
                    continue;
                };
                let ratio = Rational::new(observed, bound);
                if out.tightest.as_ref().is_none_or(|t| ratio > *t) {
                    out.tightest = Some(ratio);
                }
                if observed > bound {
                    out.bound_violations.push(BoundViolation {
                        set_index: index,
                        taskset: file.clone(),
                        scenario: label.clone(),
                        task: id.to_string(),
                        job: job.job,
                        observed,
                        bound,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Checks a sound test empirically: every task it accepts must meet all
/// deadlines, and stay within its response bound, in every simulated
/// scenario.
pub fn soundness_fuzz(cfg: &FuzzConfig) -> Result<FuzzReport, HarnessError> {
    if !cfg.test.is_sound() {
        return Err(HarnessError::UnsupportedTest {
            op: "soundness fuzzing",
            test: cfg.test,
        });
    }
    if cfg.n_tasks.0 == 0 || cfg.n_tasks.0 > cfg.n_tasks.1 {
        return Err(GenError::InvalidParameter {
            param: "n_tasks",
            reason: "needs 1 <= low <= high".into(),
        }
        .into());
    }
    if cfg.util_percent.0 == 0
        || cfg.util_percent.0 > cfg.util_percent.1
        || cfg.util_percent.1 > 100
    {
        return Err(GenError::InvalidParameter {
            param: "util_percent",
            reason: "needs 1 <= low <= high <= 100".into(),
        }
        .into());
    }
    let start = Instant::now();
    let outcomes: Vec<SetOutcome> = with_thread_limit(|| {
        (0..cfg.n_sets)
            .into_par_iter()
            .map(|i| fuzz_one_set(cfg, i))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let mut report = FuzzReport {
        test: cfg.test,
        seed: cfg.seed,
        tasksets_tested: cfg.n_sets,
        scenarios_per_set: cfg.scenarios_per_set,
        simulations: 0,
        accepted_count: 0,
        fully_accepted_sets: 0,
        miss_count: 0,
        violations: Vec::new(),
        bound_violations: Vec::new(),
        trace_errors: Vec::new(),
        conservation_failures: 0,
        tightest_ratio: None,
        elapsed: Duration::ZERO,
    };
    for o in outcomes {
        report.simulations += o.simulations;
        report.accepted_count += o.accepted;
        report.fully_accepted_sets += usize::from(o.fully_accepted);
        report.violations.extend(o.misses);
        report.bound_violations.extend(o.bound_violations);
        report.trace_errors.extend(o.trace_errors);
        report.conservation_failures += o.conservation_failures;
        if let Some(t) = o.tightest {
            if report.tightest_ratio.as_ref().is_none_or(|r| t > *r) {
                report.tightest_ratio = Some(t);
            }
        }
    }
    report.miss_count = report.violations.len();
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Two tasks on which the naive test accepts `t2` although a deferred
/// suspension pattern of `t1` makes `t2` miss its deadline.
pub fn canonical_pair() -> TaskSet {
    assign_rate_monotonic(vec![
        TaskSpec::new("t1", 2, 2, 4),
        TaskSpec::new("t2", 2, 0, 5),
    ])
    .expect("the canonical pair is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub baseline: TestKind,
    /// Generated task sets to try after the seed corpus.
    pub max_sets: usize,
    pub seed: u64,
    /// Whether to try [`canonical_pair`] first.
    pub seed_corpus: bool,
    pub n_tasks: (usize, usize),
    pub beta: Rational,
    pub period_range: (u64, u64),
    /// Time-base multipliers tried for each candidate.
    pub scales: Vec<u64>,
    pub random_scenarios: usize,
}

impl SearchConfig {
    pub fn new(baseline: TestKind, max_sets: usize, seed: u64) -> Self {
        SearchConfig {
            baseline,
            max_sets,
            seed,
            seed_corpus: true,
            n_tasks: (2, 4),
            beta: Rational::new(1, 2),
            period_range: (4, 60),
            scales: vec![1, 2, 4],
            random_scenarios: 4,
        }
    }
}

/// A task accepted by an unsound test together with a legal scenario in
/// which it misses a deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub baseline: TestKind,
    /// `canonical` or `generated:<index>`.
    pub origin: String,
    pub taskset: TaskSet,
    pub rank: usize,
    /// The baseline's response bound for the victim, in task-set ticks.
    pub claimed_bound: Option<u64>,
    pub scenario: Scenario,
    pub trace: Trace,
    pub violation: Violation,
}

#[derive(Serialize)]
struct ViolationDoc<'a> {
    baseline: TestKind,
    origin: &'a str,
    task: &'a str,
    rank: usize,
    claimed_bound: Option<u64>,
    scale: u64,
    violation: &'a Violation,
}

impl Witness {
    pub fn violation_json(&self) -> String {
        let doc = ViolationDoc {
            baseline: self.baseline,
            origin: &self.origin,
            task: self.taskset.tasks()[self.rank - 1].id(),
            rank: self.rank,
            claimed_bound: self.claimed_bound,
            scale: self.scenario.scale,
            violation: &self.violation,
        };
        serde_json::to_string_pretty(&doc).expect("violations always serialize")
    }

    /// Writes `taskset.json`, `scenario.json`, `trace.jsonl` and
    /// `violation.json` into `dir`, creating it if needed.
    pub fn write_bundle(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |path: &Path, e: std::io::Error| HarnessError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let files = [
            ("taskset.json", self.taskset.to_json()),
            ("scenario.json", self.scenario.to_json()),
            ("trace.jsonl", self.trace.to_jsonl()),
            ("violation.json", self.violation_json()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(
                &path,
                body + if name.ends_with(".jsonl") { "" } else { "\n" },
            )
            .map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

fn try_candidate(
    cfg: &SearchConfig,
    origin: &str,
    ts: &TaskSet,
    salt: u64,
) -> Result<Option<Witness>, HarnessError> {
    let report = analyze_taskset(ts, cfg.baseline)?;
    let max_t = ts.max_period().get();
    let max_s = ts
        .iter()
        .map(|t| t.max_suspension().get())
        .max()
        .unwrap_or(0);
    for k in report.accepted_ranks() {
        let victim = ts.tasks()[k - 1].id().to_string();
        for &scale in &cfg.scales {
            let horizon = scale
                .saturating_mul(2 * max_t * ts.len() as u64 + max_s + 2)
                .max(1);
            let mut candidates = Vec::new();
            let deferred = GenConfig {
                seed: 0,
                max_jobs_per_task: 10_000,
                release_style: ReleaseStyle::SynchronousPeriodic,
                suspension_style: SuspensionStyle::DeferredMax,
                max_suspension_phases: 1,
                scale,
                release_until: None,
            };
            candidates.push(deferred_adversarial_scenario(ts, k, horizon, &deferred)?);
            for j in 0..cfg.random_scenarios {
                let g = GenConfig {
                    seed: derive_seed(cfg.seed, &[3, salt, k as u64, scale, j as u64]),
                    release_style: ReleaseStyle::SporadicRandom,
                    suspension_style: SuspensionStyle::RandomSplit,
                    max_suspension_phases: 3,
                    ..deferred.clone()
                };
                candidates.push(random_scenario(ts, horizon, &g)?);
            }
            for sc in candidates {
                let tr = simulate(ts, &sc)?;
                let miss = verify_trace(&tr, ts)?.into_iter().find(|v| {
                    v.kind == ViolationKind::DeadlineMiss && v.task.as_deref() == Some(&victim)
                });
                if let Some(violation) = miss {
                    return Ok(Some(Witness {
                        baseline: cfg.baseline,
                        origin: origin.to_string(),
                        taskset: ts.clone(),
                        rank: k,
                        claimed_bound: report.verdicts[k - 1].response_bound.map(TimeTicks::get),
                        scenario: sc,
                        trace: tr,
                        violation,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Looks for a task that an unsound baseline accepts but that misses a
/// deadline in some legal scenario. Candidates are tried in order (the
/// canonical pair first, when enabled) and the first witness is returned.
pub fn counterexample_search(cfg: &SearchConfig) -> Result<Option<Witness>, HarnessError> {
    if cfg.baseline.is_sound() {
        return Err(HarnessError::UnsupportedTest {
            op: "counterexample search",
            test: cfg.baseline,
        });
    }
    if cfg.seed_corpus {
        if let Some(w) = try_candidate(cfg, "canonical", &canonical_pair(), u64::MAX)? {
            return Ok(Some(w));
        }
    }
    for i in 0..cfg.max_sets {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[4, i as u64]));
        let n = rng.random_range(cfg.n_tasks.0..=cfg.n_tasks.1);
        let pct = rng.random_range(40..=95u64);
        let mut params = TasksetParams::new(
            n,
            Rational::new(pct, 100),
            1,
            derive_seed(cfg.seed, &[5, i as u64]),
            cfg.beta.clone(),
        );
        params.period_range = cfg.period_range;
        let ts = generate_tasksets(&params)?.remove(0);
        if let Some(w) = try_candidate(cfg, &format!("generated:{i}"), &ts, i as u64)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Exact worst-case response time of rank `k` for suspension-free tasks:
/// the first job's response under synchronous periodic release of ranks
/// `1..=k`. The horizon defaults to `D_k`.
pub fn exact_wcrt_bruteforce(
    ts: &TaskSet,
    k: usize,
    horizon: Option<u64>,
) -> Result<TimeTicks, HarnessError> {
    let prefix = ts.prefix(k)?;
    if let Some(t) = prefix.iter().find(|t| !t.max_suspension().is_zero()) {
        return Err(HarnessError::SuspensionPresent {
            id: t.id().to_string(),
        });
    }
    let target = prefix.tasks()[k - 1].id().to_string();
    let horizon = horizon.unwrap_or(prefix.tasks()[k - 1].deadline().get());
    let cfg = GenConfig {
        suspension_style: SuspensionStyle::None,
        release_style: ReleaseStyle::SynchronousPeriodic,
        ..GenConfig::default()
    };
    let sc = synchronous_periodic_scenario(&prefix, horizon, &cfg)?;
    let tr = simulate(&prefix, &sc)?;
    tr.job(&target, 0)
        .and_then(|j| j.response_time())
        .ok_or(HarnessError::Unfinished {
            id: target,
            horizon,
        })
}

/// Utilization points `start, start + step, ...` up to and including `stop`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilGrid {
    pub start: Rational,
    pub stop: Rational,
    pub step: Rational,
}

impl UtilGrid {
    pub fn points(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        let mut u = self.start.clone();
        while u <= self.stop {
            out.push(u.clone());
            u = &u + &self.step;
        }
        out
    }
}

impl FromStr for UtilGrid {
    type Err = HarnessError;

    /// `a:b:step`, each part a decimal or `num/den`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| HarnessError::InvalidGrid {
            input: input.to_string(),
            reason,
        };
        let parts: Vec<&str> = input.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(err("expected start:stop:step".into()));
        };
        let parse = |s: &str| {
            s.parse::<Rational>()
                .map_err(|e: ParseRationalError| err(e.to_string()))
        };
        let grid = UtilGrid {
            start: parse(a)?,
            stop: parse(b)?,
            step: parse(step)?,
        };
        if !grid.step.is_positive() {
            return Err(err("step must be positive".into()));
        }
        let in_range = |r: &Rational| r.is_positive() && *r <= Rational::one();
        if !in_range(&grid.start) || !in_range(&grid.stop) {
            return Err(err("bounds must lie in (0, 1]".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub tests: Vec<TestKind>,
    pub grid: UtilGrid,
    pub n_sets: usize,
    pub n_tasks: usize,
    pub beta: Rational,
    pub seed: u64,
    pub period_range: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub util_bin: Rational,
    pub test: TestKind,
    pub accepted: usize,
    pub samples: usize,
}

impl SweepRow {
    pub fn accept_ratio(&self) -> Rational {
        if self.samples == 0 {
            Rational::zero()
        } else {
            Rational::new(self.accepted as u64, self.samples as u64)
        }
    }
}

/// Fraction of generated task sets fully accepted by each test, per
/// utilization point. All tests see the same task sets in a bin.
pub fn acceptance_ratio_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, HarnessError> {
    if cfg.n_sets == 0 {
        return Err(GenError::InvalidParameter {
            param: "n_sets",
            reason: "must be at least 1".into(),
        }
        .into());
    }
    let points = cfg.grid.points();
    let per_bin: Vec<Vec<SweepRow>> = with_thread_limit(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(b, u)| {
                let mut params = TasksetParams::new(
                    cfg.n_tasks,
                    u.clone(),
                    cfg.n_sets,
                    derive_seed(cfg.seed, &[6, b as u64]),
                    cfg.beta.clone(),
                );
                params.period_range = cfg.period_range;
                let sets = generate_tasksets(&params)?;
                let flags: Vec<Vec<bool>> = sets
                    .par_iter()
                    .map(|ts| {
                        cfg.tests
                            .iter()
                            .map(|&t| Ok(analyze_taskset(ts, t)?.all_schedulable()))
                            .collect::<Result<Vec<_>, HarnessError>>()
                    })
                    .collect::<Result<_, _>>()?;
                Ok(cfg
                    .tests
                    .iter()
                    .enumerate()
                    .map(|(i, &test)| SweepRow {
                        util_bin: u.clone(),
                        test,
                        accepted: flags.iter().filter(|f| f[i]).count(),
                        samples: sets.len(),
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })??;
    Ok(per_bin.into_iter().flatten().collect())
}

pub const SWEEP_CSV_HEADER: &str = "util_bin,test,accept_ratio,samples";

/// Renders rows as CSV with decimal utilization and ratio columns.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.util_bin.to_f64(),
            r.test,
            r.accept_ratio().to_f64(),
            r.samples
        ));
    }
    out
}
