//! The sporadic self-suspending task model.
//!
//! A [`Task`] carries its worst-case execution time `C`, its maximum total
//! self-suspension `S` (summed over all suspension phases of one job), its
//! minimum inter-arrival time `T`, and a constrained relative deadline
//! `D <= T`. A [`TaskSet`] orders tasks by unique priority, rank 1 being
//! the highest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::time::TimeTicks;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("task set is empty")]
    Empty,
    #[error("task {id}: duplicate id")]
    DuplicateId { id: String },
    #[error("task {id}: priority {priority} already assigned to task {other}")]
    DuplicatePriority {
        id: String,
        other: String,
        priority: u32,
    },
    #[error("task {id}: missing priority (give every task a priority or none at all)")]
    MissingPriority { id: String },
    #[error("task {id}: field {field}: {reason}")]
    InvalidField {
        id: String,
        field: &'static str,
        reason: &'static str,
    },
    #[error("task {id}: overflow computing {what}")]
    Overflow { id: String, what: &'static str },
    #[error("priority rank {rank} out of range 1..={len}")]
    RankOutOfRange { rank: usize, len: usize },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Raw task parameters as read from a task-set file.
///
/// `D` defaults to `T`; `priority` is optional, and a file without any
/// priorities gets rate-monotonic assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    #[serde(rename = "C")]
    pub wcet: u64,
    #[serde(rename = "S", default)]
    pub max_suspension: u64,
    #[serde(rename = "T")]
    pub period: u64,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

impl TaskSpec {
    /// Implicit-deadline task without a priority.
    pub fn new(id: impl Into<String>, wcet: u64, max_suspension: u64, period: u64) -> Self {
        TaskSpec {
            id: id.into(),
            wcet,
            max_suspension,
            period,
            deadline: None,
            priority: None,
        }
    }

    pub fn with_deadline(mut self, deadline: u64) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.priority = Some(priority);
        self
    }
}

/// A validated task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Task {
    id: String,
    wcet: TimeTicks,
    max_suspension: TimeTicks,
    period: TimeTicks,
    deadline: TimeTicks,
    priority: u32,
}

impl Task {
    /// Checks the per-task invariants: `C >= 1`, `T >= 1`, `1 <= D <= T`, `C <= D`.
    pub fn new(
        id: impl Into<String>,
        wcet: u64,
        max_suspension: u64,
        period: u64,
        deadline: u64,
        priority: u32,
    ) -> Result<Task, ModelError> {
        let id = id.into();
        let invalid = |field, reason| ModelError::InvalidField {
            id: id.clone(),
            field,
            reason,
        };
        if id.is_empty() {
            return Err(invalid("id", "empty id"));
        }
        if priority == 0 {
            return Err(invalid("priority", "priority must be positive"));
        }
        if wcet == 0 {
            return Err(invalid("C", "execution time must be at least 1"));
        }
        if period == 0 {
            return Err(invalid("T", "period must be at least 1"));
        }
        if deadline == 0 {
            return Err(invalid("D", "deadline must be at least 1"));
        }
        if deadline > period {
            return Err(invalid("D", "deadline exceeds period"));
        }
        if wcet > deadline {
            return Err(invalid("C", "execution time exceeds deadline"));
        }
        Ok(Task {
            id,
            wcet: wcet.into(),
            max_suspension: max_suspension.into(),
            period: period.into(),
            deadline: deadline.into(),
            priority,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Worst-case execution time `C`.
    pub fn wcet(&self) -> TimeTicks {
        self.wcet
    }

    /// Maximum total self-suspension `S` of one job.
    pub fn max_suspension(&self) -> TimeTicks {
        self.max_suspension
    }

    /// Minimum inter-arrival time `T`.
    pub fn period(&self) -> TimeTicks {
        self.period
    }

    /// Relative deadline `D`.
    pub fn deadline(&self) -> TimeTicks {
        self.deadline
    }

    /// Priority rank, 1 being the highest.
    pub fn priority(&self) -> u32 {
        self.priority
    }

    /// `C / T` as an exact fraction.
    pub fn utilization(&self) -> Rational {
        Rational::new(self.wcet.get(), self.period.get())
    }

    pub fn to_spec(&self) -> TaskSpec {
        TaskSpec {
            id: self.id.clone(),
            wcet: self.wcet.get(),
            max_suspension: self.max_suspension.get(),
            period: self.period.get(),
            deadline: Some(self.deadline.get()),
            priority: Some(self.priority),
        }
    }

    fn scaled(&self, factor: u64) -> Result<Task, ModelError> {
        let overflow = || ModelError::Overflow {
            id: self.id.clone(),
            what: "scaled parameters",
        };
        let s = |t: TimeTicks| t.checked_mul(factor).map_err(|_| overflow());
        Ok(Task {
            id: self.id.clone(),
            wcet: s(self.wcet)?,
            max_suspension: s(self.max_suspension)?,
            period: s(self.period)?,
            deadline: s(self.deadline)?,
            priority: self.priority,
        })
    }
}

/// A validated, priority-ordered task set. Position `i` holds rank `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSet {
    tasks: Vec<Task>,
}

/// Serialized as a [`TaskSetFile`].
impl Serialize for TaskSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TaskSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = TaskSetFile::deserialize(deserializer)?;
        TaskSet::from_specs(file.tasks).map_err(serde::de::Error::custom)
    }
}

/// On-disk task-set document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSetFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub tasks: Vec<TaskSpec>,
}

/// Validates a task set whose tasks all carry explicit priorities.
///
/// Priorities must be unique; after validation they are renumbered to the
/// contiguous ranks `1..=n` preserving their relative order.
pub fn validate_taskset(raw: Vec<TaskSpec>) -> Result<TaskSet, ModelError> {
    if raw.is_empty() {
        return Err(ModelError::Empty);
    }
    check_unique_ids(&raw)?;
    let mut by_priority: BTreeMap<u32, &TaskSpec> = BTreeMap::new();
    for spec in &raw {
        let priority = spec.priority.ok_or_else(|| ModelError::MissingPriority {
            id: spec.id.clone(),
        })?;
        if let Some(other) = by_priority.insert(priority, spec) {
            return Err(ModelError::DuplicatePriority {
                id: spec.id.clone(),
                other: other.id.clone(),
                priority,
            });
        }
    }
    build(by_priority.into_values())
}

/// Assigns rate-monotonic priorities (shorter period first, ties by id) and
/// validates. Priorities present in the input are ignored.
pub fn assign_rate_monotonic(raw: Vec<TaskSpec>) -> Result<TaskSet, ModelError> {
    if raw.is_empty() {
        return Err(ModelError::Empty);
    }
    check_unique_ids(&raw)?;
    let mut order: Vec<&TaskSpec> = raw.iter().collect();
    order.sort_by(|a, b| a.period.cmp(&b.period).then_with(|| a.id.cmp(&b.id)));
    build(order)
}

/// Total utilization of the `upto_k` highest-priority tasks.
pub fn total_utilization(ts: &TaskSet, upto_k: usize) -> Result<Rational, ModelError> {
    ts.check_rank(upto_k)?;
    Ok(ts.tasks[..upto_k].iter().map(Task::utilization).sum())
}

fn check_unique_ids(raw: &[TaskSpec]) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for spec in raw {
        if !seen.insert(spec.id.as_str()) {
            return Err(ModelError::DuplicateId {
                id: spec.id.clone(),
            });
        }
    }
    Ok(())
}

fn build<'a>(ordered: impl IntoIterator<Item = &'a TaskSpec>) -> Result<TaskSet, ModelError> {
    let tasks = ordered
        .into_iter()
        .enumerate()
        .map(|(i, spec)| {
            let rank = u32::try_from(i + 1).map_err(|_| ModelError::Overflow {
                id: spec.id.clone(),
                what: "priority rank",
            })?;
            Task::new(
                spec.id.clone(),
                spec.wcet,
                spec.max_suspension,
                spec.period,
                spec.deadline.unwrap_or(spec.period),
                rank,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaskSet { tasks })
}

impl TaskSet {
    /// Validates raw specs, using explicit priorities when every task has
    /// one and rate-monotonic assignment when none has.
    pub fn from_specs(raw: Vec<TaskSpec>) -> Result<TaskSet, ModelError> {
        let with_priority = raw.iter().filter(|s| s.priority.is_some()).count();
        if with_priority == 0 {
            assign_rate_monotonic(raw)
        } else {
            validate_taskset(raw)
        }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Task> {
        self.tasks.iter()
    }

    /// The task at priority rank `rank` (1-based).
    pub fn task(&self, rank: usize) -> Result<&Task, ModelError> {
        self.check_rank(rank)?;
        Ok(&self.tasks[rank - 1])
    }

    /// Tasks with higher priority than rank `rank`.
    pub fn higher_priority(&self, rank: usize) -> Result<&[Task], ModelError> {
        self.check_rank(rank)?;
        Ok(&self.tasks[..rank - 1])
    }

    pub fn by_id(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Rank of the task with the given id.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id).map(|i| i + 1)
    }

    /// The same system with every time parameter multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<TaskSet, ModelError> {
        if factor == 1 {
            return Ok(self.clone());
        }
        if factor == 0 {
            return Err(ModelError::InvalidField {
                id: self.tasks[0].id.clone(),
                field: "scale",
                reason: "scale factor must be positive",
            });
        }
        let tasks = self
            .tasks
            .iter()
            .map(|t| t.scaled(factor))
            .collect::<Result<_, _>>()?;
        Ok(TaskSet { tasks })
    }

    /// The `k` highest-priority tasks.
    pub fn prefix(&self, k: usize) -> Result<TaskSet, ModelError> {
        self.check_rank(k)?;
        Ok(TaskSet {
            tasks: self.tasks[..k].to_vec(),
        })
    }

    pub fn max_period(&self) -> TimeTicks {
        self.tasks
            .iter()
            .map(Task::period)
            .max()
            .unwrap_or(TimeTicks::ZERO)
    }

    pub fn to_specs(&self) -> Vec<TaskSpec> {
        self.tasks.iter().map(Task::to_spec).collect()
    }

    pub fn to_file(&self) -> TaskSetFile {
        TaskSetFile {
            note: None,
            tasks: self.to_specs(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("task sets always serialize")
    }

    pub fn from_json(json: &str) -> Result<TaskSet, ModelError> {
        let file: TaskSetFile = serde_json::from_str(json).map_err(|e| ModelError::Io {
            path: "<input>".into(),
            reason: e.to_string(),
        })?;
        TaskSet::from_specs(file.tasks)
    }

    pub fn load(path: &Path) -> Result<TaskSet, ModelError> {
        let io = |reason: String| ModelError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let file: TaskSetFile = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        TaskSet::from_specs(file.tasks)
    }

    fn check_rank(&self, rank: usize) -> Result<(), ModelError> {
        if rank == 0 || rank > self.tasks.len() {
            return Err(ModelError::RankOutOfRange {
                rank,
                len: self.tasks.len(),
            });
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a Task;
    type IntoIter = std::slice::Iter<'a, Task>;
    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}
