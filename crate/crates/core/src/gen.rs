//! Scenario and task-set generators.
//!
//! Everything here is a pure function of its inputs and seed. Randomness
//! comes from ChaCha8 streams so output is identical across runs and
//! platforms; the one floating-point step (UUniFast and log-uniform
//! periods) rounds to integers before anything is compared.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::sim::{JobSpec, Scenario, ScenarioError, Segment, SimError};
use crate::task::{assign_rate_monotonic, total_utilization, ModelError, Task, TaskSet, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time overflow while generating {0}")]
    Overflow(&'static str),
    #[error("invalid generator parameter {param}: {reason}")]
    InvalidParameter { param: &'static str, reason: String },
    #[error("gave up after {attempts} draws: {reason}")]
    Infeasible {
        attempts: usize,
        reason: &'static str,
    },
}

impl From<ScenarioError> for GenError {
    fn from(e: ScenarioError) -> Self {
        GenError::Sim(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReleaseStyle {
    SynchronousPeriodic,
    SporadicRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuspensionStyle {
    /// No suspension; one execution segment per job.
    None,
    /// Random number of suspension phases, random amounts, random splits.
    RandomSplit,
    /// One tick of execution, the full suspension budget, then the rest.
    DeferredMax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub max_jobs_per_task: usize,
    pub release_style: ReleaseStyle,
    pub suspension_style: SuspensionStyle,
    pub max_suspension_phases: u64,
    /// Time-base multiplier applied to the task set (scenario ticks per task tick).
    pub scale: u64,
    /// No release at or after this instant (defaults to the horizon).
    pub release_until: Option<u64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_jobs_per_task: 10_000,
            release_style: ReleaseStyle::SporadicRandom,
            suspension_style: SuspensionStyle::RandomSplit,
            max_suspension_phases: 3,
            scale: 1,
            release_until: None,
        }
    }
}

impl GenConfig {
    fn check(&self, horizon: u64) -> Result<(), GenError> {
        if horizon == 0 {
            return Err(GenError::InvalidParameter {
                param: "horizon",
                reason: "must be at least 1".into(),
            });
        }
        if self.max_suspension_phases == 0 {
            return Err(GenError::InvalidParameter {
                param: "max_suspension_phases",
                reason: "must be at least 1".into(),
            });
        }
        if self.scale == 0 {
            return Err(ScenarioError::BadScale.into());
        }
        Ok(())
    }

    fn release_limit(&self, horizon: u64) -> u64 {
        self.release_until.map_or(horizon, |r| r.min(horizon))
    }
}

/// Mixes a seed with stream indices into an independent seed (splitmix64).
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut x = seed;
    for &s in stream {
        x = splitmix(x ^ splitmix(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Scaled {
    wcet: u64,
    susp: u64,
    period: u64,
}

fn scaled(task: &Task, scale: u64) -> Result<Scaled, GenError> {
    let m = |v: u64| {
        v.checked_mul(scale)
            .ok_or(GenError::Overflow("scaled task"))
    };
    Ok(Scaled {
        wcet: m(task.wcet().get())?,
        susp: m(task.max_suspension().get())?,
        period: m(task.period().get())?,
    })
}

/// The deferred pattern: execute one tick, suspend the full budget, then
/// execute the rest. Falls back to a single segment when the job cannot
/// suspend between two execution ticks.
pub fn deferred_segments(wcet: u64, susp: u64) -> Vec<Segment> {
    if susp > 0 && wcet >= 2 {
        vec![
            Segment::exec(1),
            Segment::suspend(susp),
            Segment::exec(wcet - 1),
        ]
    } else {
        vec![Segment::exec(wcet)]
    }
}

/// `total` split into `parts` positive summands, uniformly over compositions.
fn composition(rng: &mut ChaCha8Rng, total: u64, parts: u64) -> Vec<u64> {
    debug_assert!(parts >= 1 && parts <= total);
    if parts == 1 {
        return vec![total];
    }
    let mut cuts: Vec<u64> = sample(rng, (total - 1) as usize, (parts - 1) as usize)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts as usize);
    let mut prev = 0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

fn random_split_segments(
    rng: &mut ChaCha8Rng,
    wcet: u64,
    susp: u64,
    max_phases: u64,
) -> Vec<Segment> {
    let phases = rng.random_range(1..=max_phases);
    let total = if susp == 0 {
        0
    } else {
        rng.random_range(0..=susp)
    };
    let phases = phases.min(total).min(wcet.saturating_sub(1));
    if phases == 0 {
        return vec![Segment::exec(wcet)];
    }
    let susps = composition(rng, total, phases);
    let execs = composition(rng, wcet, phases + 1);
    let mut segments = Vec::with_capacity(2 * phases as usize + 1);
    for (i, e) in execs.into_iter().enumerate() {
        segments.push(Segment::exec(e));
        if let Some(&s) = susps.get(i) {
            segments.push(Segment::suspend(s));
        }
    }
    segments
}

fn segments_for(
    style: SuspensionStyle,
    rng: &mut ChaCha8Rng,
    wcet: u64,
    susp: u64,
    max_phases: u64,
) -> Vec<Segment> {
    match style {
        SuspensionStyle::None => vec![Segment::exec(wcet)],
        SuspensionStyle::DeferredMax => deferred_segments(wcet, susp),
        SuspensionStyle::RandomSplit => random_split_segments(rng, wcet, susp, max_phases),
    }
}

fn finish(
    ts: &TaskSet,
    horizon: u64,
    scale: u64,
    jobs: Vec<JobSpec>,
) -> Result<Scenario, GenError> {
    let sc = Scenario::new(horizon, scale, jobs);
    sc.validate(ts)?;
    Ok(sc)
}

/// Every task releases at `0, T, 2T, ...` (strictly before the horizon).
pub fn synchronous_periodic_scenario(
    ts: &TaskSet,
    horizon: u64,
    cfg: &GenConfig,
) -> Result<Scenario, GenError> {
    cfg.check(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let limit = cfg.release_limit(horizon);
    let mut jobs = Vec::new();
    for task in ts.iter() {
        let p = scaled(task, cfg.scale)?;
        let mut release = 0u64;
        let mut count = 0;
        while release < limit && count < cfg.max_jobs_per_task {
            let segments = segments_for(
                cfg.suspension_style,
                &mut rng,
                p.wcet,
                p.susp,
                cfg.max_suspension_phases,
            );
            jobs.push(JobSpec::new(task.id(), release, segments)?);
            count += 1;
            release = match release.checked_add(p.period) {
                Some(r) => r,
                None => break,
            };
        }
    }
    finish(ts, horizon, cfg.scale, jobs)
}

/// A release pattern aimed at the response time of the task at rank `k`.
///
/// Every higher-priority task's first job runs one tick, suspends for its
/// whole budget and then executes the remainder; the first releases are
/// staggered so that all remainders become ready at the same instant `A`.
/// Tasks that cannot suspend release at `A - 1`.
/// Later jobs follow at exact period separation and never suspend. The
/// victim releases a single job at `A - 1`, itself with the deferred
/// pattern. Lower-priority tasks release nothing.
pub fn deferred_adversarial_scenario(
    ts: &TaskSet,
    k: usize,
    horizon: u64,
    cfg: &GenConfig,
) -> Result<Scenario, GenError> {
    cfg.check(horizon)?;
    let victim = ts.task(k)?;
    let hp = ts.higher_priority(k)?;
    let limit = cfg.release_limit(horizon);
    let mut firsts = Vec::with_capacity(hp.len());
    for task in hp {
        let p = scaled(task, cfg.scale)?;
        let segments = deferred_segments(p.wcet, p.susp);
        let front = if segments.len() == 3 {
            1 + segments[1].len().get()
        } else {
            1
        };
        firsts.push((task, p, segments, front));
    }
    let apex = firsts.iter().map(|f| f.3).max().unwrap_or(1);
    let mut jobs = Vec::new();
    for (task, p, segments, front) in firsts {
        let first = apex - front;
        if first >= limit {
            continue;
        }
        jobs.push(JobSpec::new(task.id(), first, segments)?);
        let mut release = first;
        for _ in 1..cfg.max_jobs_per_task {
            release = match release.checked_add(p.period) {
                Some(r) if r < limit => r,
                _ => break,
            };
            jobs.push(JobSpec::plain(task.id(), release, p.wcet)?);
        }
    }
    let v = scaled(victim, cfg.scale)?;
    let at = apex - 1;
    if at < limit {
        jobs.push(JobSpec::new(
            victim.id(),
            at,
            deferred_segments(v.wcet, v.susp),
        )?);
    }
    finish(ts, horizon, cfg.scale, jobs)
}

/// Random legal behavior: sporadic or periodic releases and segment
/// patterns drawn according to `cfg`.
pub fn random_scenario(ts: &TaskSet, horizon: u64, cfg: &GenConfig) -> Result<Scenario, GenError> {
    cfg.check(horizon)?;
    if cfg.release_style == ReleaseStyle::SynchronousPeriodic {
        return synchronous_periodic_scenario(ts, horizon, cfg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let limit = cfg.release_limit(horizon);
    let mut jobs = Vec::new();
    for task in ts.iter() {
        let p = scaled(task, cfg.scale)?;
        let mut release = rng.random_range(0..p.period);
        let mut count = 0;
        while release < limit && count < cfg.max_jobs_per_task {
            let segments = segments_for(
                cfg.suspension_style,
                &mut rng,
                p.wcet,
                p.susp,
                cfg.max_suspension_phases,
            );
            jobs.push(JobSpec::new(task.id(), release, segments)?);
            count += 1;
            // Half the gaps are exact; the rest get a jitter whose range
            // doubles with each further coin flip.
            let flips = u64::from(rng.random::<u64>().trailing_ones()).min(16);
            let jitter = if flips == 0 {
                0
            } else {
                let span = p.period.saturating_mul(1 << (flips - 1)).max(1);
                rng.random_range(1..=span)
            };
            release = match release
                .checked_add(p.period)
                .and_then(|r| r.checked_add(jitter))
            {
                Some(r) => r,
                None => break,
            };
        }
    }
    finish(ts, horizon, cfg.scale, jobs)
}

/// Four-task example set, `D = T`.
pub fn example_taskset() -> TaskSet {
    assign_rate_monotonic(vec![
        TaskSpec::new("t1", 1, 1, 6),
        TaskSpec::new("t2", 1, 6, 10),
        TaskSpec::new("t3", 4, 1, 18),
        TaskSpec::new("t4", 5, 0, 20),
    ])
    .expect("the example set is valid")
}

/// The illustrative schedule of the example set, at ten ticks per time
/// unit with one-tick offsets.
///
/// Returns the unscaled task set and a scenario with `scale = 10`.
/// Landmarks are stored in the scenario annotations: `t_1 = 41`,
/// `t_2 = t_3 = 60`, `t_4 = 70` and `f_4 = 197`, the completion of `t4`'s
/// job in this scenario.
pub fn figure1_fixture() -> (TaskSet, Scenario) {
    let ts = example_taskset();
    let e = Segment::exec;
    let s = Segment::suspend;
    let job = |task: &str, release: u64, segments: Vec<Segment>| {
        JobSpec::new(task, release, segments).expect("fixture jobs are well formed")
    };
    let jobs = vec![
        job("t1", 41, vec![e(1), s(9), e(9)]),
        job("t1", 101, vec![e(10)]),
        job("t1", 161, vec![e(10)]),
        job("t1", 221, vec![e(10)]),
        job("t2", 0, vec![e(1), s(50), e(1), s(9), e(8)]),
        job("t2", 100, vec![e(10)]),
        job("t2", 200, vec![e(1), s(9), e(9)]),
        job("t3", 60, vec![e(1), s(9), e(39)]),
        job("t3", 240, vec![e(40)]),
        job("t4", 70, vec![e(50)]),
    ];
    let mut sc = Scenario::new(300, 10, jobs);
    for (name, t) in [
        ("t_1", 41),
        ("t_2", 60),
        ("t_3", 60),
        ("t_4", 70),
        ("f_4", 197),
    ] {
        sc.annotations.insert(name.to_string(), t);
    }
    sc.validate(&ts).expect("fixture matches its task set");
    (ts, sc)
}

/// Parameters of the synthetic task-set generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TasksetParams {
    pub n_tasks: usize,
    pub target_util: Rational,
    pub n_sets: usize,
    pub seed: u64,
    /// Suspension ratio in `[0, 1]`.
    pub beta: Rational,
    /// Inclusive bounds of the log-uniform period distribution.
    pub period_range: (u64, u64),
}

impl TasksetParams {
    pub fn new(
        n_tasks: usize,
        target_util: Rational,
        n_sets: usize,
        seed: u64,
        beta: Rational,
    ) -> Self {
        TasksetParams {
            n_tasks,
            target_util,
            n_sets,
            seed,
            beta,
            period_range: (1000, 100_000),
        }
    }
}

const MAX_DRAWS: usize = 1000;

/// UUniFast utilizations, log-uniform periods, rate-monotonic priorities.
///
/// `C = round(U·T)` clamped to at least 1, `S = round(β·(T − C)·u)` with
/// `u` uniform in `[0, 1]`, `D = T`. A draw whose exact total utilization
/// exceeds 1 is discarded. Ids are `t01, t02, ...` in priority order.
pub fn generate_tasksets(params: &TasksetParams) -> Result<Vec<TaskSet>, GenError> {
    let invalid = |param, reason: &str| {
        Err(GenError::InvalidParameter {
            param,
            reason: reason.to_string(),
        })
    };
    if params.n_tasks == 0 {
        return invalid("n_tasks", "must be at least 1");
    }
    if !params.target_util.is_positive() || params.target_util > Rational::one() {
        return invalid("target_util", "must lie in (0, 1]");
    }
    if params.beta.is_negative() || params.beta > Rational::one() {
        return invalid("beta", "must lie in [0, 1]");
    }
    let (lo, hi) = params.period_range;
    if lo == 0 || lo > hi {
        return invalid("period_range", "needs 1 <= low <= high");
    }
    let target = params.target_util.to_f64();
    let beta = params.beta.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(params.n_sets);
    for _ in 0..params.n_sets {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_DRAWS {
                return Err(GenError::Infeasible {
                    attempts: MAX_DRAWS,
                    reason: "every draw exceeded total utilization 1 after rounding",
                });
            }
            let ts = draw_taskset(&mut rng, params.n_tasks, target, beta, lo, hi)?;
            if total_utilization(&ts, ts.len())? <= Rational::one() {
                out.push(ts);
                break;
            }
        }
    }
    Ok(out)
}

fn uunifast(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Vec<f64> {
    let mut utils = Vec::with_capacity(n);
    let mut sum = total;
    for i in 1..n {
        let next = sum * rng.random::<f64>().powf(1.0 / (n - i) as f64);
        utils.push(sum - next);
        sum = next;
    }
    utils.push(sum);
    utils
}

fn draw_taskset(
    rng: &mut ChaCha8Rng,
    n: usize,
    target: f64,
    beta: f64,
    lo: u64,
    hi: u64,
) -> Result<TaskSet, GenError> {
    let utils = uunifast(rng, n, target);
    let (ln_lo, ln_hi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut draws: Vec<(u64, u64, u64)> = utils
        .into_iter()
        .map(|u| {
            let period = if lo == hi {
                lo
            } else {
                (rng.random_range(ln_lo..=ln_hi).exp().round() as u64).clamp(lo, hi)
            };
            let wcet = ((u * period as f64).round() as u64).clamp(1, period);
            let susp = (beta * (period - wcet) as f64 * rng.random::<f64>()).round() as u64;
            (period, wcet, susp)
        })
        .collect();
    draws.sort_by_key(|d| d.0);
    let width = n.to_string().len().max(2);
    let specs = draws
        .into_iter()
        .enumerate()
        .map(|(i, (period, wcet, susp))| {
            TaskSpec::new(format!("t{:0width$}", i + 1), wcet, susp, period)
        })
        .collect();
    Ok(assign_rate_monotonic(specs)?)
}
