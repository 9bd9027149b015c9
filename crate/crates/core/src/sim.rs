//! Event-driven preemptive fixed-priority simulation of self-suspending jobs.
//!
//! A [`Scenario`] fixes everything the task model leaves open: the release
//! time of every job and the exact alternation of execution and suspension
//! segments of each job. [`simulate`] produces the unique schedule in which
//! the highest-priority ready job always runs. A job is ready when it has
//! been released, is not inside a suspension segment, has work left, and
//! its task's previous job has completed. Suspensions elapse in wall-clock
//! time whether or not the processor is busy.
//!
//! Time jumps between events (releases, segment completions, suspension
//! expiries and deadlines); there is no per-tick loop.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::task::{ModelError, TaskSet};
use crate::time::TimeTicks;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("job of {task} released at {release}: {reason}")]
    Grammar {
        task: String,
        release: u64,
        reason: &'static str,
    },
    #[error("scenario references unknown task {task}")]
    UnknownTask { task: String },
    #[error("job {job} of {task}: executes {actual} ticks, task requires {expected}")]
    ExecutionMismatch {
        task: String,
        job: usize,
        expected: u64,
        actual: u64,
    },
    #[error("job {job} of {task}: suspends {actual} ticks, task allows at most {allowed}")]
    SuspensionExceeded {
        task: String,
        job: usize,
        allowed: u64,
        actual: u64,
    },
    #[error("job {job} of {task}: released {gap} ticks after its predecessor, period is {period}")]
    Separation {
        task: String,
        job: usize,
        gap: u64,
        period: u64,
    },
    #[error("job of {task} released at {release}, at or after the horizon {horizon}")]
    BeyondHorizon {
        task: String,
        release: u64,
        horizon: u64,
    },
    #[error("scale must be a positive integer")]
    BadScale,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time overflow: {0}")]
    Overflow(&'static str),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("interval [{from}, {to}) is outside the trace [0, {horizon})")]
    RangeOutOfBounds { from: u64, to: u64, horizon: u64 },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// One segment of a job: execute for some ticks, or suspend for some ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Exec(TimeTicks),
    Suspend(TimeTicks),
}

impl Segment {
    pub fn exec(ticks: u64) -> Self {
        Segment::Exec(ticks.into())
    }

    pub fn suspend(ticks: u64) -> Self {
        Segment::Suspend(ticks.into())
    }

    pub fn len(self) -> TimeTicks {
        match self {
            Segment::Exec(t) | Segment::Suspend(t) => t,
        }
    }

    pub fn is_exec(self) -> bool {
        matches!(self, Segment::Exec(_))
    }
}

impl Serialize for Segment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let kind = if self.is_exec() { "exec" } else { "susp" };
        (kind, self.len().get()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (kind, ticks) = <(String, u64)>::deserialize(deserializer)?;
        match kind.as_str() {
            "exec" => Ok(Segment::exec(ticks)),
            "susp" => Ok(Segment::suspend(ticks)),
            other => Err(D::Error::custom(format!(
                "unknown segment kind {other:?} (expected \"exec\" or \"susp\")"
            ))),
        }
    }
}

/// One job: its release and its segment pattern.
///
/// Segments alternate and both start and end with execution; zero-length
/// segments are dropped on construction and adjacent segments of the same
/// kind are merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawJobSpec")]
pub struct JobSpec {
    pub task: String,
    pub release: TimeTicks,
    segments: Vec<Segment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJobSpec {
    task: String,
    release: u64,
    segments: Vec<Segment>,
}

impl TryFrom<RawJobSpec> for JobSpec {
    type Error = ScenarioError;
    fn try_from(raw: RawJobSpec) -> Result<Self, Self::Error> {
        JobSpec::new(raw.task, raw.release, raw.segments)
    }
}

impl JobSpec {
    pub fn new(
        task: impl Into<String>,
        release: u64,
        segments: Vec<Segment>,
    ) -> Result<JobSpec, ScenarioError> {
        let task = task.into();
        let mut normalized: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments.into_iter().filter(|s| !s.len().is_zero()) {
            match (normalized.last_mut(), seg) {
                (Some(Segment::Exec(a)), Segment::Exec(b))
                | (Some(Segment::Suspend(a)), Segment::Suspend(b)) => {
                    *a = a.checked_add(b).map_err(|_| ScenarioError::Grammar {
                        task: task.clone(),
                        release,
                        reason: "segment length overflows",
                    })?;
                }
                _ => normalized.push(seg),
            }
        }
        let grammar = |reason| ScenarioError::Grammar {
            task: task.clone(),
            release,
            reason,
        };
        match (normalized.first(), normalized.last()) {
            (None, _) => return Err(grammar("a job needs at least one execution tick")),
            (Some(Segment::Suspend(_)), _) => {
                return Err(grammar("a job must begin with an execution segment"))
            }
            (_, Some(Segment::Suspend(_))) => {
                return Err(grammar("a job must end with an execution segment"))
            }
            _ => {}
        }
        Ok(JobSpec {
            task,
            release: release.into(),
            segments: normalized,
        })
    }

    /// A job with a single execution segment.
    pub fn plain(
        task: impl Into<String>,
        release: u64,
        wcet: u64,
    ) -> Result<JobSpec, ScenarioError> {
        JobSpec::new(task, release, vec![Segment::exec(wcet)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn exec_total(&self) -> u64 {
        self.segments
            .iter()
            .filter(|s| s.is_exec())
            .map(|s| s.len().get())
            .sum()
    }

    pub fn suspension_total(&self) -> u64 {
        self.segments
            .iter()
            .filter(|s| !s.is_exec())
            .map(|s| s.len().get())
            .sum()
    }
}

fn default_scale() -> u64 {
    1
}

fn is_one(v: &u64) -> bool {
    *v == 1
}

/// Concrete job releases and segment patterns, in units of `1/scale` of the
/// task set's time base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub horizon: TimeTicks,
    #[serde(default = "default_scale", skip_serializing_if = "is_one")]
    pub scale: u64,
    pub jobs: Vec<JobSpec>,
    /// Free-form named instants (landmarks of a hand-built schedule).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, u64>,
}

impl Scenario {
    pub fn new(horizon: u64, scale: u64, mut jobs: Vec<JobSpec>) -> Scenario {
        jobs.sort_by(|a, b| a.release.cmp(&b.release).then_with(|| a.task.cmp(&b.task)));
        Scenario {
            horizon: horizon.into(),
            scale,
            jobs,
            annotations: BTreeMap::new(),
        }
    }

    /// Jobs of one task in release order.
    pub fn jobs_of<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a JobSpec> + 'a {
        self.jobs.iter().filter(move |j| j.task == task)
    }

    /// Checks the scenario against the task set (times scaled by `self.scale`).
    pub fn validate(&self, ts: &TaskSet) -> Result<(), SimError> {
        if self.scale == 0 {
            return Err(ScenarioError::BadScale.into());
        }
        let scaled = ts.scaled(self.scale)?;
        let mut per_task: HashMap<&str, Vec<&JobSpec>> = HashMap::new();
        for job in &self.jobs {
            if scaled.by_id(&job.task).is_none() {
                return Err(ScenarioError::UnknownTask {
                    task: job.task.clone(),
                }
                .into());
            }
            if job.release >= self.horizon {
                return Err(ScenarioError::BeyondHorizon {
                    task: job.task.clone(),
                    release: job.release.get(),
                    horizon: self.horizon.get(),
                }
                .into());
            }
            per_task.entry(job.task.as_str()).or_default().push(job);
        }
        for task in scaled.iter() {
            let Some(jobs) = per_task.get_mut(task.id()) else {
                continue;
            };
            jobs.sort_by_key(|j| j.release);
            for (index, job) in jobs.iter().enumerate() {
                let exec = job.exec_total();
                if exec != task.wcet().get() {
                    return Err(ScenarioError::ExecutionMismatch {
                        task: task.id().to_string(),
                        job: index,
                        expected: task.wcet().get(),
                        actual: exec,
                    }
                    .into());
                }
                let susp = job.suspension_total();
                if susp > task.max_suspension().get() {
                    return Err(ScenarioError::SuspensionExceeded {
                        task: task.id().to_string(),
                        job: index,
                        allowed: task.max_suspension().get(),
                        actual: susp,
                    }
                    .into());
                }
                if index > 0 {
                    let gap = job.release.get() - jobs[index - 1].release.get();
                    if gap < task.period().get() {
                        return Err(ScenarioError::Separation {
                            task: task.id().to_string(),
                            job: index,
                            gap,
                            period: task.period().get(),
                        }
                        .into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    pub fn from_json(json: &str) -> Result<Scenario, SimError> {
        let mut sc: Scenario = serde_json::from_str(json).map_err(|e| SimError::Io {
            path: "<input>".into(),
            reason: e.to_string(),
        })?;
        let jobs = std::mem::take(&mut sc.jobs);
        let annotations = std::mem::take(&mut sc.annotations);
        let mut sorted = Scenario::new(sc.horizon.get(), sc.scale, jobs);
        sorted.annotations = annotations;
        Ok(sorted)
    }

    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Scenario::from_json(&text).map_err(|e| match e {
            SimError::Io { reason, .. } => SimError::Io {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Release,
    StartExec,
    Preempt,
    ResumeExec,
    SuspendBegin,
    SuspendEnd,
    Complete,
    DeadlineMiss,
    IdleBegin,
    IdleEnd,
}

impl EventKind {
    fn is_processor_event(self) -> bool {
        matches!(self, EventKind::IdleBegin | EventKind::IdleEnd)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub t: TimeTicks,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<usize>,
}

impl Event {
    pub fn job(t: u64, kind: EventKind, task: &str, job: usize) -> Event {
        Event {
            t: t.into(),
            kind,
            task: Some(task.to_string()),
            job: Some(job),
        }
    }

    pub fn processor(t: u64, kind: EventKind) -> Event {
        Event {
            t: t.into(),
            kind,
            task: None,
            job: None,
        }
    }
}

/// Per-job outcome of a simulation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSummary {
    pub task: String,
    pub job: usize,
    pub release: TimeTicks,
    pub deadline: TimeTicks,
    /// `None` if the job was unfinished at the horizon.
    pub completion: Option<TimeTicks>,
    pub executed: TimeTicks,
    pub suspended: TimeTicks,
    /// The job was unfinished at its absolute deadline.
    pub missed: bool,
}

impl JobSummary {
    pub fn response_time(&self) -> Option<TimeTicks> {
        self.completion.map(|c| c.saturating_sub(self.release))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace {
    pub horizon: TimeTicks,
    pub scale: u64,
    pub events: Vec<Event>,
    pub jobs: Vec<JobSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSummary {
    horizon: TimeTicks,
    scale: u64,
    jobs: Vec<JobSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryLine {
    summary: TraceSummary,
}

impl Trace {
    /// Summaries of one task's jobs in job-index order.
    pub fn jobs_of<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a JobSummary> + 'a {
        self.jobs.iter().filter(move |j| j.task == task)
    }

    pub fn job(&self, task: &str, index: usize) -> Option<&JobSummary> {
        self.jobs.iter().find(|j| j.task == task && j.job == index)
    }

    pub fn deadline_misses(&self) -> impl Iterator<Item = &JobSummary> {
        self.jobs.iter().filter(|j| j.missed)
    }

    /// Largest observed response time of a task's completed jobs.
    pub fn max_response(&self, task: &str) -> Option<TimeTicks> {
        self.jobs_of(task)
            .filter_map(JobSummary::response_time)
            .max()
    }

    /// One JSON object per event line, then one `{"summary": ...}` line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events always serialize"));
            out.push('\n');
        }
        let summary = SummaryLine {
            summary: TraceSummary {
                horizon: self.horizon,
                scale: self.scale,
                jobs: self.jobs.clone(),
            },
        };
        out.push_str(&serde_json::to_string(&summary).expect("summaries always serialize"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, SimError> {
        let mut events = Vec::new();
        let mut summary = None;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if summary.is_some() {
                return Err(SimError::MalformedTrace(format!(
                    "line {}: content after the summary line",
                    n + 1
                )));
            }
            if line.trim_start().starts_with("{\"summary\"") {
                let s: SummaryLine = serde_json::from_str(line)
                    .map_err(|e| SimError::MalformedTrace(format!("line {}: {e}", n + 1)))?;
                summary = Some(s.summary);
            } else {
                let e: Event = serde_json::from_str(line)
                    .map_err(|e| SimError::MalformedTrace(format!("line {}: {e}", n + 1)))?;
                events.push(e);
            }
        }
        let summary =
            summary.ok_or_else(|| SimError::MalformedTrace("missing summary line".into()))?;
        Ok(Trace {
            horizon: summary.horizon,
            scale: summary.scale,
            events,
            jobs: summary.jobs,
        })
    }

    /// Per-job maximal execution intervals `[start, end)`, in event order.
    pub fn execution_intervals(&self) -> Vec<(TimeTicks, TimeTicks)> {
        let mut open: HashMap<(&str, usize), TimeTicks> = HashMap::new();
        let mut intervals = Vec::new();
        for e in &self.events {
            let (Some(task), Some(job)) = (e.task.as_deref(), e.job) else {
                continue;
            };
            match e.kind {
                EventKind::StartExec | EventKind::ResumeExec => {
                    open.insert((task, job), e.t);
                }
                EventKind::Preempt | EventKind::SuspendBegin | EventKind::Complete => {
                    if let Some(start) = open.remove(&(task, job)) {
                        intervals.push((start, e.t));
                    }
                }
                _ => {}
            }
        }
        let mut rest: Vec<_> = open.into_values().map(|s| (s, self.horizon)).collect();
        rest.sort();
        intervals.extend(rest);
        intervals
    }

    fn check_range(&self, from: TimeTicks, to: TimeTicks) -> Result<(), SimError> {
        if from > to || to > self.horizon {
            return Err(SimError::RangeOutOfBounds {
                from: from.get(),
                to: to.get(),
                horizon: self.horizon.get(),
            });
        }
        Ok(())
    }

    /// Total execution within `[from, to)`, summed over jobs.
    pub fn exec_time(&self, from: TimeTicks, to: TimeTicks) -> Result<TimeTicks, SimError> {
        self.check_range(from, to)?;
        Ok(TimeTicks::new(
            self.execution_intervals()
                .iter()
                .map(|&(s, e)| overlap(s, e, from, to))
                .sum(),
        ))
    }
}

fn overlap(start: TimeTicks, end: TimeTicks, from: TimeTicks, to: TimeTicks) -> u64 {
    let lo = start.max(from);
    let hi = end.min(to);
    hi.saturating_sub(lo).get()
}

/// Ticks within `[from, to)` during which no job executes.
pub fn idle_time(tr: &Trace, from: TimeTicks, to: TimeTicks) -> Result<TimeTicks, SimError> {
    tr.check_range(from, to)?;
    let mut intervals = tr.execution_intervals();
    intervals.sort();
    let mut busy = 0;
    let mut cursor = from;
    for (s, e) in intervals {
        let s = s.max(cursor);
        let e = e.min(to);
        if e > s {
            busy += (e.get()) - s.get();
            cursor = e;
        }
    }
    Ok(TimeTicks::new(to.get() - from.get() - busy))
}

struct SimJob<'a> {
    task: usize,
    index: usize,
    release: u64,
    deadline: u64,
    segments: &'a [Segment],
    seg: usize,
    left: u64,
    susp_since: u64,
    susp_until: Option<u64>,
    released: bool,
    started: bool,
    done: bool,
    executed: u64,
    suspended: u64,
    completion: Option<u64>,
    missed: bool,
}

/// Simulates `sc` on `ts`. Task parameters are multiplied by `sc.scale`.
///
/// At equal instants, segment completions and suspension expiries are
/// processed first, then deadline checks, then releases, then the
/// scheduling decision; within each group events are ordered by task
/// priority and then job index. A job that misses its deadline keeps
/// running.
pub fn simulate(ts: &TaskSet, sc: &Scenario) -> Result<Trace, SimError> {
    sc.validate(ts)?;
    let scaled = ts.scaled(sc.scale)?;
    let horizon = sc.horizon.get();
    let n = scaled.len();
    let ids: Vec<&str> = scaled.iter().map(|t| t.id()).collect();

    let mut per_task: Vec<Vec<&JobSpec>> = vec![Vec::new(); n];
    for job in &sc.jobs {
        let rank = scaled.rank_of(&job.task).expect("validated");
        per_task[rank - 1].push(job);
    }
    let mut jobs: Vec<SimJob> = Vec::with_capacity(sc.jobs.len());
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (task, specs) in per_task.iter_mut().enumerate() {
        specs.sort_by_key(|j| j.release);
        let rel_deadline = scaled.tasks()[task].deadline().get();
        for (index, spec) in specs.iter().enumerate() {
            let release = spec.release.get();
            let deadline = release
                .checked_add(rel_deadline)
                .ok_or(SimError::Overflow("absolute deadline"))?;
            queues[task].push(jobs.len());
            jobs.push(SimJob {
                task,
                index,
                release,
                deadline,
                segments: spec.segments(),
                seg: 0,
                left: spec.segments()[0].len().get(),
                susp_since: 0,
                susp_until: None,
                released: false,
                started: false,
                done: false,
                executed: 0,
                suspended: 0,
                completion: None,
                missed: false,
            });
        }
    }
    let order = |a: &SimJob, b: &SimJob| (a.task, a.index).cmp(&(b.task, b.index));
    let mut by_release: Vec<usize> = (0..jobs.len()).collect();
    by_release.sort_by(|&a, &b| {
        jobs[a]
            .release
            .cmp(&jobs[b].release)
            .then_with(|| order(&jobs[a], &jobs[b]))
    });
    let mut by_deadline: Vec<usize> = (0..jobs.len()).collect();
    by_deadline.sort_by(|&a, &b| {
        jobs[a]
            .deadline
            .cmp(&jobs[b].deadline)
            .then_with(|| order(&jobs[a], &jobs[b]))
    });

    let mut head = vec![0usize; n];
    let mut events: Vec<Event> = Vec::new();
    let mut next_release = 0usize;
    let mut next_deadline = 0usize;
    let mut running: Option<usize> = None;
    let mut idle = false;
    let mut t = 0u64;

    let active = |head: &[usize], task: usize| queues[task].get(head[task]).copied();

    loop {
        // Segment completions and suspension expiries.
        let mut phase: Vec<(usize, usize, EventKind)> = Vec::new();
        if let Some(j) = running {
            let job = &mut jobs[j];
            if job.left == 0 {
                running = None;
                if job.seg + 1 == job.segments.len() {
                    job.done = true;
                    job.completion = Some(t);
                    head[job.task] += 1;
                    phase.push((job.task, job.index, EventKind::Complete));
                } else {
                    job.seg += 1;
                    let len = job.segments[job.seg].len().get();
                    job.susp_since = t;
                    job.susp_until = Some(t.saturating_add(len));
                    phase.push((job.task, job.index, EventKind::SuspendBegin));
                }
            }
        }
        for task in 0..n {
            let Some(j) = active(&head, task) else {
                continue;
            };
            let job = &mut jobs[j];
            if job.susp_until == Some(t) {
                job.susp_until = None;
                job.suspended += t - job.susp_since;
                job.seg += 1;
                job.left = job.segments[job.seg].len().get();
                phase.push((job.task, job.index, EventKind::SuspendEnd));
            }
        }
        phase.sort_by_key(|&(task, index, _)| (task, index));
        for (task, index, kind) in phase {
            events.push(Event::job(t, kind, ids[task], index));
        }

        while let Some(&j) = by_deadline.get(next_deadline) {
            if jobs[j].deadline > t {
                break;
            }
            next_deadline += 1;
            let job = &mut jobs[j];
            if !job.done && !job.missed {
                job.missed = true;
                events.push(Event::job(
                    t,
                    EventKind::DeadlineMiss,
                    ids[job.task],
                    job.index,
                ));
            }
        }

        if t >= horizon {
            break;
        }

        while let Some(&j) = by_release.get(next_release) {
            if jobs[j].release > t {
                break;
            }
            next_release += 1;
            jobs[j].released = true;
            events.push(Event::job(
                t,
                EventKind::Release,
                ids[jobs[j].task],
                jobs[j].index,
            ));
        }

        let pick = (0..n).find_map(|task| {
            let j = active(&head, task)?;
            let job = &jobs[j];
            (job.released && job.susp_until.is_none()).then_some(j)
        });
        if pick != running {
            if let Some(j) = running {
                events.push(Event::job(
                    t,
                    EventKind::Preempt,
                    ids[jobs[j].task],
                    jobs[j].index,
                ));
            }
            match pick {
                Some(j) => {
                    if idle {
                        idle = false;
                        events.push(Event::processor(t, EventKind::IdleEnd));
                    }
                    let job = &mut jobs[j];
                    let kind = if job.started {
                        EventKind::ResumeExec
                    } else {
                        EventKind::StartExec
                    };
                    job.started = true;
                    events.push(Event::job(t, kind, ids[job.task], job.index));
                }
                None => {
                    if !idle {
                        idle = true;
                        events.push(Event::processor(t, EventKind::IdleBegin));
                    }
                }
            }
            running = pick;
        } else if pick.is_none() && !idle {
            idle = true;
            events.push(Event::processor(t, EventKind::IdleBegin));
        }

        let mut next = horizon;
        if let Some(j) = running {
            next = next.min(t.saturating_add(jobs[j].left));
        }
        for task in 0..n {
            if let Some(until) = active(&head, task).and_then(|j| jobs[j].susp_until) {
                next = next.min(until);
            }
        }
        if let Some(&j) = by_release.get(next_release) {
            next = next.min(jobs[j].release);
        }
        if let Some(&j) = by_deadline.get(next_deadline) {
            next = next.min(jobs[j].deadline);
        }
        debug_assert!(next > t);
        if let Some(j) = running {
            let job = &mut jobs[j];
            job.left -= next - t;
            job.executed += next - t;
        }
        t = next;
    }

    if idle {
        events.push(Event::processor(horizon, EventKind::IdleEnd));
    }

    let mut summaries: Vec<JobSummary> = jobs
        .iter()
        .map(|job| {
            let pending_susp = match job.susp_until {
                Some(_) => horizon.saturating_sub(job.susp_since),
                None => 0,
            };
            JobSummary {
                task: ids[job.task].to_string(),
                job: job.index,
                release: job.release.into(),
                deadline: job.deadline.into(),
                completion: job.completion.map(TimeTicks::new),
                executed: job.executed.into(),
                suspended: (job.suspended + pending_susp).into(),
                missed: job.missed,
            }
        })
        .collect();
    summaries.sort_by(|a, b| {
        let ra = scaled.rank_of(&a.task);
        let rb = scaled.rank_of(&b.task);
        (ra, a.job).cmp(&(rb, b.job))
    });
    Ok(Trace {
        horizon: sc.horizon,
        scale: sc.scale,
        events,
        jobs: summaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DeadlineMiss,
    /// Two jobs in the executing state at once.
    MultipleExecuting,
    /// A lower-priority job executes while a higher-priority job is ready.
    PriorityInversion,
    /// The processor idles while a job is ready.
    NonWorkConserving,
    /// A completed job executed more or less than its task's WCET.
    ExecutionMismatch,
    /// A job suspended longer than its task allows.
    SuspensionOverrun,
    /// Events out of time order.
    TimeOrder,
    /// An event that is not a legal transition from the job's state.
    IllFormedTransition,
    /// The trailing summary disagrees with the event log.
    SummaryMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub time: TimeTicks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplayState {
    Waiting,
    Running,
    Preempted,
    Suspended,
    Resumable,
    Done,
}

struct ReplayJob {
    state: ReplayState,
    release: u64,
    since: u64,
    executed: u64,
    suspended: u64,
    completion: Option<u64>,
    miss_reported: bool,
}

/// Replays a trace and reports every deadline miss and every breach of the
/// schedule invariants: a single executing job, priority order, work
/// conservation, legal per-job transitions, exact execution accounting and
/// bounded suspension.
pub fn verify_trace(tr: &Trace, ts: &TaskSet) -> Result<Vec<Violation>, SimError> {
    if tr.scale == 0 {
        return Err(SimError::MalformedTrace("scale must be positive".into()));
    }
    let scaled = ts.scaled(tr.scale)?;
    let mut violations = Vec::new();
    let mut jobs: BTreeMap<(usize, usize), ReplayJob> = BTreeMap::new();
    let mut running: Vec<(usize, usize)> = Vec::new();
    let mut idle = false;
    let mut last_t = 0u64;
    let horizon = tr.horizon.get();

    let violation = |kind, time: u64, key: Option<(usize, usize)>, detail: String| Violation {
        kind,
        time: time.into(),
        task: key.map(|(r, _)| scaled.tasks()[r].id().to_string()),
        job: key.map(|(_, j)| j),
        detail,
    };

    let mut i = 0;
    while i < tr.events.len() {
        let t = tr.events[i].t.get();
        if t < last_t {
            violations.push(violation(
                ViolationKind::TimeOrder,
                t,
                None,
                format!("event at {t} follows an event at {last_t}"),
            ));
        }
        last_t = last_t.max(t);
        while i < tr.events.len() && tr.events[i].t.get() == t {
            let e = &tr.events[i];
            i += 1;
            if e.kind.is_processor_event() {
                match (e.kind, idle, running.is_empty()) {
                    (EventKind::IdleBegin, false, true) => idle = true,
                    (EventKind::IdleEnd, true, _) => idle = false,
                    _ => violations.push(violation(
                        ViolationKind::IllFormedTransition,
                        t,
                        None,
                        format!("{:?} while idle={idle}", e.kind),
                    )),
                }
                continue;
            }
            let (Some(task), Some(index)) = (e.task.as_deref(), e.job) else {
                return Err(SimError::MalformedTrace(format!(
                    "{:?} event at {t} lacks a task or job index",
                    e.kind
                )));
            };
            let rank = scaled.rank_of(task).ok_or_else(|| {
                SimError::MalformedTrace(format!("event at {t} names unknown task {task}"))
            })? - 1;
            let key = (rank, index);
            let spec = &scaled.tasks()[rank];

            if e.kind == EventKind::Release {
                match jobs.entry(key) {
                    Entry::Occupied(_) => violations.push(violation(
                        ViolationKind::IllFormedTransition,
                        t,
                        Some(key),
                        "released twice".into(),
                    )),
                    Entry::Vacant(slot) => {
                        slot.insert(ReplayJob {
                            state: ReplayState::Waiting,
                            release: t,
                            since: t,
                            executed: 0,
                            suspended: 0,
                            completion: None,
                            miss_reported: false,
                        });
                    }
                }
                continue;
            }
            let predecessor_done = index == 0
                || jobs
                    .get(&(rank, index - 1))
                    .is_some_and(|p| p.state == ReplayState::Done);
            let Some(job) = jobs.get_mut(&key) else {
                violations.push(violation(
                    ViolationKind::IllFormedTransition,
                    t,
                    Some(key),
                    format!("{:?} before release", e.kind),
                ));
                continue;
            };
            use ReplayState::*;
            let from = job.state;
            let to = match (e.kind, from) {
                (EventKind::StartExec, Waiting) if predecessor_done => Some(Running),
                (EventKind::ResumeExec, Preempted | Resumable) => Some(Running),
                (EventKind::Preempt, Running) => Some(Preempted),
                (EventKind::SuspendBegin, Running) => Some(Suspended),
                (EventKind::SuspendEnd, Suspended) => Some(Resumable),
                (EventKind::Complete, Running) => Some(Done),
                (EventKind::DeadlineMiss, s) if s != Done => Some(s),
                _ => None,
            };
            let Some(to) = to else {
                violations.push(violation(
                    ViolationKind::IllFormedTransition,
                    t,
                    Some(key),
                    format!("{:?} in state {from:?}", e.kind),
                ));
                continue;
            };
            match (from, to) {
                (Running, Running) => {}
                (Running, _) => {
                    job.executed += t - job.since;
                    running.retain(|k| *k != key);
                }
                (Suspended, Suspended) => {}
                (Suspended, _) => job.suspended += t - job.since,
                _ => {}
            }
            if to != from {
                job.since = t;
            }
            if to == Running && from != Running {
                if !running.is_empty() {
                    violations.push(violation(
                        ViolationKind::MultipleExecuting,
                        t,
                        Some(key),
                        format!("starts while {} job(s) execute", running.len()),
                    ));
                }
                if idle {
                    violations.push(violation(
                        ViolationKind::IllFormedTransition,
                        t,
                        Some(key),
                        "executes while the processor is marked idle".into(),
                    ));
                }
                running.push(key);
            }
            job.state = to;
            let deadline = job.release + spec.deadline().get();
            match e.kind {
                EventKind::DeadlineMiss => {
                    if !job.miss_reported {
                        job.miss_reported = true;
                        violations.push(violation(
                            ViolationKind::DeadlineMiss,
                            t,
                            Some(key),
                            format!("unfinished at deadline {deadline}"),
                        ));
                    }
                }
                EventKind::Complete => {
                    job.completion = Some(t);
                    if job.executed != spec.wcet().get() {
                        violations.push(violation(
                            ViolationKind::ExecutionMismatch,
                            t,
                            Some(key),
                            format!("executed {} of {}", job.executed, spec.wcet()),
                        ));
                    }
                    if t > deadline && !job.miss_reported {
                        job.miss_reported = true;
                        violations.push(violation(
                            ViolationKind::DeadlineMiss,
                            deadline,
                            Some(key),
                            format!("completed at {t}, after deadline {deadline}"),
                        ));
                    }
                }
                _ => {}
            }
            if job.suspended > spec.max_suspension().get() && e.kind == EventKind::SuspendEnd {
                violations.push(violation(
                    ViolationKind::SuspensionOverrun,
                    t,
                    Some(key),
                    format!(
                        "suspended {} of at most {}",
                        job.suspended,
                        spec.max_suspension()
                    ),
                ));
            }
        }

        let next_t = tr.events.get(i).map_or(horizon, |e| e.t.get());
        if next_t > t && t < horizon {
            let ready = jobs.iter().filter(|(&(rank, index), job)| match job.state {
                ReplayState::Preempted | ReplayState::Resumable => true,
                ReplayState::Waiting => {
                    index == 0
                        || jobs
                            .get(&(rank, index - 1))
                            .is_some_and(|p| p.state == ReplayState::Done)
                }
                _ => false,
            });
            let best_ready = ready.map(|(k, _)| *k).min();
            match (running.first(), best_ready) {
                (None, Some(k)) => violations.push(violation(
                    ViolationKind::NonWorkConserving,
                    t,
                    Some(k),
                    "ready job left waiting on an idle processor".into(),
                )),
                (Some(&run), Some(k)) if k.0 < run.0 => violations.push(violation(
                    ViolationKind::PriorityInversion,
                    t,
                    Some(run),
                    format!("executes while {} is ready", scaled.tasks()[k.0].id()),
                )),
                _ => {}
            }
        }
    }

    for (&key, job) in jobs.iter_mut() {
        let spec = &scaled.tasks()[key.0];
        match job.state {
            ReplayState::Running => job.executed += horizon.saturating_sub(job.since),
            ReplayState::Suspended => job.suspended += horizon.saturating_sub(job.since),
            _ => {}
        }
        let deadline = job.release + spec.deadline().get();
        if job.state != ReplayState::Done && deadline <= horizon && !job.miss_reported {
            job.miss_reported = true;
            violations.push(violation(
                ViolationKind::DeadlineMiss,
                deadline,
                Some(key),
                format!("unfinished at deadline {deadline}"),
            ));
        }
        if job.suspended > spec.max_suspension().get() && job.state == ReplayState::Suspended {
            violations.push(violation(
                ViolationKind::SuspensionOverrun,
                horizon,
                Some(key),
                format!(
                    "suspended {} of at most {}",
                    job.suspended,
                    spec.max_suspension()
                ),
            ));
        }
    }

    for summary in &tr.jobs {
        let Some(rank) = scaled.rank_of(&summary.task) else {
            return Err(SimError::MalformedTrace(format!(
                "summary names unknown task {}",
                summary.task
            )));
        };
        let key = (rank - 1, summary.job);
        let matches = jobs.get(&key).is_some_and(|job| {
            job.executed == summary.executed.get()
                && job.suspended == summary.suspended.get()
                && job.completion == summary.completion.map(TimeTicks::get)
                && job.release == summary.release.get()
                && job.miss_reported == summary.missed
        });
        if !matches {
            violations.push(violation(
                ViolationKind::SummaryMismatch,
                horizon,
                Some(key),
                "summary disagrees with the event log".into(),
            ));
        }
    }
    if tr.jobs.len() != jobs.len() {
        violations.push(violation(
            ViolationKind::SummaryMismatch,
            horizon,
            None,
            format!(
                "{} summaries for {} released jobs",
                tr.jobs.len(),
                jobs.len()
            ),
        ));
    }
    Ok(violations)
}
