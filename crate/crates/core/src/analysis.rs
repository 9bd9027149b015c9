//! Schedulability tests for self-suspending tasks.
//!
//! The suspension-aware tests charge the extra delay caused by
//! self-suspension to the analyzed task `k` as a blocking term
//!
//! ```text
//! B_k = S_k + sum_{i<k} min(C_i, S_i)
//! ```
//!
//! and then run either classic time-demand analysis with `C_k + B_k` as the
//! task's own demand, or the rate-monotonic utilization bound
//! `(C_k + B_k)/T_k + sum_{i<k} U_i <= k (2^(1/k) - 1)`.
//!
//! Two baselines are provided for comparison: a naive test that ignores
//! suspension altogether (unsound, used only as a counterexample target)
//! and a suspension-oblivious test that folds every task's suspension into
//! its execution time (sound, coarse).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::task::{total_utilization, ModelError, Task, TaskSet};
use crate::time::{Overflow, TimeTicks};

/// Margin below which a utilization comparison is flagged as borderline.
pub const BORDERLINE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("task {id}: overflow while evaluating {test}")]
    Overflow { id: String, test: TestKind },
    #[error("task {id}: the utilization test requires D = T")]
    DeadlineNotPeriod { id: String },
    #[error("task {id}: priority order is not rate-monotonic (period shorter than a higher-priority task)")]
    NotRateMonotonic { id: String },
    #[error("unknown test {0:?} (expected tda-suspension, util-rm, tda-naive or tda-oblivious)")]
    UnknownTest(String),
    #[error("malformed analysis report: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    TdaSuspension,
    UtilRm,
    TdaNaive,
    TdaOblivious,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::TdaSuspension,
        TestKind::UtilRm,
        TestKind::TdaNaive,
        TestKind::TdaOblivious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::TdaSuspension => "tda-suspension",
            TestKind::UtilRm => "util-rm",
            TestKind::TdaNaive => "tda-naive",
            TestKind::TdaOblivious => "tda-oblivious",
        }
    }

    /// Whether an acceptance by this test guarantees every deadline. The
    /// naive test ignores suspension and is not.
    pub fn is_sound(self) -> bool {
        !matches!(self, TestKind::TdaNaive)
    }

    /// Whether the test yields a response-time bound.
    pub fn has_response_bound(self) -> bool {
        !matches!(self, TestKind::UtilRm)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| AnalysisError::UnknownTest(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Schedulable,
    NotSchedulable,
    /// A higher-priority task failed, so the test's premise does not hold.
    NotVerified,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Schedulable => "schedulable",
            Outcome::NotSchedulable => "not-schedulable",
            Outcome::NotVerified => "not-verified",
        })
    }
}

/// The blocking time charged to one task and its per-task contributions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockingBreakdown {
    /// The analyzed task's own suspension `S_k`.
    pub own_suspension: TimeTicks,
    /// `(id, min(C_i, S_i))` for each higher-priority task, in rank order.
    pub terms: Vec<(String, TimeTicks)>,
    pub total: TimeTicks,
}

/// Higher-priority tasks split by whether execution dominates suspension.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskClassification {
    /// Tasks with `C_i >= S_i`.
    pub t1: BTreeSet<String>,
    /// Tasks with `C_i < S_i`.
    pub t2: BTreeSet<String>,
}

/// Details of a utilization-bound comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationCheck {
    /// `(C_k + B_k)/T_k + sum_{i<k} U_i`, exact.
    pub lhs: Rational,
    /// `k (2^(1/k) - 1)` in double precision.
    pub bound: f64,
    /// `|lhs - bound|`.
    pub margin: f64,
    /// `margin < BORDERLINE_MARGIN`: the verdict hinges on rounding.
    pub borderline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestVerdict {
    pub task_id: String,
    pub test: TestKind,
    pub outcome: Outcome,
    /// Least fixed point of the demand recurrence, when it is within `D_k`.
    pub response_bound: Option<TimeTicks>,
    pub blocking: Option<BlockingBreakdown>,
    pub utilization: Option<UtilizationCheck>,
    /// Iterates of the fixed-point search, starting at the task's own demand.
    pub iterates: Vec<TimeTicks>,
}

impl TestVerdict {
    pub fn is_schedulable(&self) -> bool {
        self.outcome == Outcome::Schedulable
    }

    fn not_verified(task: &Task, test: TestKind) -> Self {
        TestVerdict {
            task_id: task.id().to_string(),
            test,
            outcome: Outcome::NotVerified,
            response_bound: None,
            blocking: None,
            utilization: None,
            iterates: Vec::new(),
        }
    }
}

/// Per-task interference with period and per-job weight.
#[derive(Debug, Clone)]
pub struct DemandCurve {
    base: TimeTicks,
    interferers: Vec<(TimeTicks, TimeTicks)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointRun {
    pub iterates: Vec<TimeTicks>,
    /// `None` when the iteration exceeded its limit.
    pub fixed_point: Option<TimeTicks>,
}

impl DemandCurve {
    /// `base + sum_i ceil(t / period_i) * weight_i`.
    pub fn new(base: TimeTicks, interferers: Vec<(TimeTicks, TimeTicks)>) -> Self {
        DemandCurve { base, interferers }
    }

    pub fn at(&self, t: TimeTicks) -> Result<TimeTicks, Overflow> {
        self.interferers
            .iter()
            .try_fold(self.base, |acc, &(period, weight)| {
                acc.checked_add(weight.checked_mul(t.div_ceil(period))?)
            })
    }

    /// Least `t > 0` with `demand(t) <= t`, searching no further than `limit`.
    ///
    /// Starts at `t_0 = base` and iterates `t_{m+1} = demand(t_m)`. The
    /// iterates never decrease and stop either at a fixed point or as soon
    /// as one exceeds `limit`.
    pub fn least_fixed_point(&self, limit: TimeTicks) -> Result<FixedPointRun, Overflow> {
        let mut t = self.base;
        let mut iterates = vec![t];
        loop {
            if t > limit {
                return Ok(FixedPointRun {
                    iterates,
                    fixed_point: None,
                });
            }
            let next = self.at(t)?;
            iterates.push(next);
            if next <= t {
                return Ok(FixedPointRun {
                    iterates,
                    fixed_point: Some(t),
                });
            }
            t = next;
        }
    }
}

/// `min(C, S)`: the most a higher-priority task's suspension can add to the
/// interference it causes.
pub fn blocking_term(task: &Task) -> TimeTicks {
    task.wcet().min(task.max_suspension())
}

pub fn blocking_time(ts: &TaskSet, k: usize) -> Result<BlockingBreakdown, AnalysisError> {
    let task = ts.task(k)?;
    let terms: Vec<(String, TimeTicks)> = ts
        .higher_priority(k)?
        .iter()
        .map(|hp| (hp.id().to_string(), blocking_term(hp)))
        .collect();
    let total = terms
        .iter()
        .try_fold(task.max_suspension(), |acc, (_, b)| acc.checked_add(*b))
        .map_err(|_| AnalysisError::Overflow {
            id: task.id().to_string(),
            test: TestKind::TdaSuspension,
        })?;
    Ok(BlockingBreakdown {
        own_suspension: task.max_suspension(),
        terms,
        total,
    })
}

pub fn classify(ts: &TaskSet, k: usize) -> Result<TaskClassification, AnalysisError> {
    let mut classes = TaskClassification::default();
    for hp in ts.higher_priority(k)? {
        let id = hp.id().to_string();
        if hp.wcet() >= hp.max_suspension() {
            classes.t1.insert(id);
        } else {
            classes.t2.insert(id);
        }
    }
    Ok(classes)
}

fn tda_verdict(
    task: &Task,
    test: TestKind,
    curve: DemandCurve,
    blocking: Option<BlockingBreakdown>,
) -> Result<TestVerdict, AnalysisError> {
    let run = curve
        .least_fixed_point(task.deadline())
        .map_err(|_| AnalysisError::Overflow {
            id: task.id().to_string(),
            test,
        })?;
    Ok(TestVerdict {
        task_id: task.id().to_string(),
        test,
        outcome: if run.fixed_point.is_some() {
            Outcome::Schedulable
        } else {
            Outcome::NotSchedulable
        },
        response_bound: run.fixed_point,
        blocking,
        utilization: None,
        iterates: run.iterates,
    })
}

fn overflow(task: &Task, test: TestKind) -> impl Fn(Overflow) -> AnalysisError + '_ {
    move |_| AnalysisError::Overflow {
        id: task.id().to_string(),
        test,
    }
}

/// Time-demand analysis with suspension modeled as blocking:
/// least `t` with `C_k + B_k + sum_{i<k} ceil(t/T_i) C_i <= t`, accepted
/// when it does not exceed `D_k`.
pub fn tda_suspension_test(ts: &TaskSet, k: usize) -> Result<TestVerdict, AnalysisError> {
    let test = TestKind::TdaSuspension;
    let task = ts.task(k)?;
    let blocking = blocking_time(ts, k)?;
    let base = task
        .wcet()
        .checked_add(blocking.total)
        .map_err(overflow(task, test))?;
    let curve = DemandCurve::new(
        base,
        ts.higher_priority(k)?
            .iter()
            .map(|hp| (hp.period(), hp.wcet()))
            .collect(),
    );
    tda_verdict(task, test, curve, Some(blocking))
}

/// Classic time-demand analysis that ignores suspension entirely. Unsound
/// for self-suspending tasks.
pub fn tda_naive_test(ts: &TaskSet, k: usize) -> Result<TestVerdict, AnalysisError> {
    let task = ts.task(k)?;
    let curve = DemandCurve::new(
        task.wcet(),
        ts.higher_priority(k)?
            .iter()
            .map(|hp| (hp.period(), hp.wcet()))
            .collect(),
    );
    tda_verdict(task, TestKind::TdaNaive, curve, None)
}

/// Time-demand analysis with every task's suspension treated as execution.
pub fn tda_oblivious_test(ts: &TaskSet, k: usize) -> Result<TestVerdict, AnalysisError> {
    let test = TestKind::TdaOblivious;
    let task = ts.task(k)?;
    let inflate = |t: &Task| {
        t.wcet()
            .checked_add(t.max_suspension())
            .map_err(overflow(t, test))
    };
    let interferers = ts
        .higher_priority(k)?
        .iter()
        .map(|hp| Ok((hp.period(), inflate(hp)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let curve = DemandCurve::new(inflate(task)?, interferers);
    tda_verdict(task, test, curve, None)
}

/// `k (2^(1/k) - 1)`.
pub fn rm_bound(k: usize) -> f64 {
    let k = k as f64;
    k * (2f64.powf(1.0 / k) - 1.0)
}

/// Rate-monotonic utilization-bound test with suspension blocking. Requires
/// implicit deadlines and rate-monotonic order among ranks `1..=k`.
pub fn rm_utilization_test(ts: &TaskSet, k: usize) -> Result<TestVerdict, AnalysisError> {
    let task = ts.task(k)?;
    let considered = &ts.tasks()[..k];
    for t in considered {
        if t.deadline() != t.period() {
            return Err(AnalysisError::DeadlineNotPeriod {
                id: t.id().to_string(),
            });
        }
    }
    for pair in considered.windows(2) {
        if pair[1].period() < pair[0].period() {
            return Err(AnalysisError::NotRateMonotonic {
                id: pair[1].id().to_string(),
            });
        }
    }
    let blocking = blocking_time(ts, k)?;
    let own = task
        .wcet()
        .checked_add(blocking.total)
        .map_err(overflow(task, TestKind::UtilRm))?;
    let hp_util = if k > 1 {
        total_utilization(ts, k - 1)?
    } else {
        Rational::zero()
    };
    let lhs = Rational::new(own.get(), task.period().get()) + hp_util;
    let bound = rm_bound(k);
    let lhs_f = lhs.to_f64();
    let margin = (lhs_f - bound).abs();
    Ok(TestVerdict {
        task_id: task.id().to_string(),
        test: TestKind::UtilRm,
        outcome: if lhs_f <= bound {
            Outcome::Schedulable
        } else {
            Outcome::NotSchedulable
        },
        response_bound: None,
        blocking: Some(blocking),
        utilization: Some(UtilizationCheck {
            lhs,
            bound,
            margin,
            borderline: margin < BORDERLINE_MARGIN,
        }),
        iterates: Vec::new(),
    })
}

/// Runs one test on rank `k` alone, without the higher-priority premise.
pub fn run_test(ts: &TaskSet, k: usize, test: TestKind) -> Result<TestVerdict, AnalysisError> {
    match test {
        TestKind::TdaSuspension => tda_suspension_test(ts, k),
        TestKind::UtilRm => rm_utilization_test(ts, k),
        TestKind::TdaNaive => tda_naive_test(ts, k),
        TestKind::TdaOblivious => tda_oblivious_test(ts, k),
    }
}

/// Verdicts for every rank of a task set under one test.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub test: TestKind,
    pub verdicts: Vec<TestVerdict>,
}

/// Analyzes ranks in ascending order. Once a rank fails, every lower rank
/// is reported as not verified: each test assumes its higher-priority tasks
/// already meet their deadlines.
pub fn analyze_taskset(ts: &TaskSet, test: TestKind) -> Result<AnalysisReport, AnalysisError> {
    let mut verdicts = Vec::with_capacity(ts.len());
    let mut premise_holds = true;
    for (i, task) in ts.iter().enumerate() {
        let verdict = if premise_holds {
            run_test(ts, i + 1, test)?
        } else {
            TestVerdict::not_verified(task, test)
        };
        premise_holds &= verdict.is_schedulable();
        verdicts.push(verdict);
    }
    Ok(AnalysisReport { test, verdicts })
}

impl AnalysisReport {
    pub fn all_schedulable(&self) -> bool {
        self.verdicts.iter().all(TestVerdict::is_schedulable)
    }

    /// Ranks (1-based) whose verdict is schedulable.
    pub fn accepted_ranks(&self) -> impl Iterator<Item = usize> + '_ {
        self.verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_schedulable())
            .map(|(i, _)| i + 1)
    }

    pub fn to_records(&self) -> Vec<VerdictRecord> {
        self.verdicts.iter().map(VerdictRecord::from).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("reports always serialize")
    }

    pub fn from_json(json: &str) -> Result<AnalysisReport, AnalysisError> {
        let records: Vec<VerdictRecord> =
            serde_json::from_str(json).map_err(|e| AnalysisError::Malformed(e.to_string()))?;
        let test = records
            .first()
            .map(|r| r.test)
            .ok_or_else(|| AnalysisError::Malformed("empty report".into()))?;
        let verdicts = records
            .into_iter()
            .map(TestVerdict::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        if verdicts.iter().any(|v| v.test != test) {
            return Err(AnalysisError::Malformed("mixed tests in one report".into()));
        }
        Ok(AnalysisReport { test, verdicts })
    }
}

/// Wire form of a [`TestVerdict`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRecord {
    pub id: String,
    pub test: TestKind,
    pub outcome: Outcome,
    pub response_bound: Option<u64>,
    #[serde(rename = "B_k")]
    pub blocking_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub own_suspension: Option<u64>,
    #[serde(default)]
    pub terms: Vec<(String, u64)>,
    #[serde(default)]
    pub borderline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lhs: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default)]
    pub unsound: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<u64>,
}

impl From<&TestVerdict> for VerdictRecord {
    fn from(v: &TestVerdict) -> Self {
        VerdictRecord {
            id: v.task_id.clone(),
            test: v.test,
            outcome: v.outcome,
            response_bound: v.response_bound.map(TimeTicks::get),
            blocking_total: v.blocking.as_ref().map(|b| b.total.get()),
            own_suspension: v.blocking.as_ref().map(|b| b.own_suspension.get()),
            terms: v
                .blocking
                .as_ref()
                .map(|b| {
                    b.terms
                        .iter()
                        .map(|(id, t)| (id.clone(), t.get()))
                        .collect()
                })
                .unwrap_or_default(),
            borderline: v.utilization.as_ref().is_some_and(|u| u.borderline),
            lhs: v.utilization.as_ref().map(|u| u.lhs.clone()),
            bound: v.utilization.as_ref().map(|u| u.bound),
            margin: v.utilization.as_ref().map(|u| u.margin),
            unsound: !v.test.is_sound(),
            iterates: v.iterates.iter().map(|t| t.get()).collect(),
        }
    }
}

impl TryFrom<VerdictRecord> for TestVerdict {
    type Error = AnalysisError;

    fn try_from(r: VerdictRecord) -> Result<Self, Self::Error> {
        let blocking = match (r.blocking_total, r.own_suspension) {
            (Some(total), Some(own)) => Some(BlockingBreakdown {
                own_suspension: own.into(),
                terms: r.terms.into_iter().map(|(id, t)| (id, t.into())).collect(),
                total: total.into(),
            }),
            (None, None) => None,
            _ => {
                return Err(AnalysisError::Malformed(format!(
                    "task {}: B_k and own_suspension must appear together",
                    r.id
                )))
            }
        };
        let utilization = match (r.lhs, r.bound, r.margin) {
            (Some(lhs), Some(bound), Some(margin)) => Some(UtilizationCheck {
                lhs,
                bound,
                margin,
                borderline: r.borderline,
            }),
            (None, None, None) => None,
            _ => {
                return Err(AnalysisError::Malformed(format!(
                    "task {}: incomplete utilization fields",
                    r.id
                )))
            }
        };
        Ok(TestVerdict {
            task_id: r.id,
            test: r.test,
            outcome: r.outcome,
            response_bound: r.response_bound.map(TimeTicks::new),
            blocking,
            utilization,
            iterates: r.iterates.into_iter().map(TimeTicks::new).collect(),
        })
    }
}
