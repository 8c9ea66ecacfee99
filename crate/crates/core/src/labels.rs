//! Class definitions and ground-truth label intervals.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::packet::FlowKey;
use crate::time::Nanos;

/// Service type of a flow. Codes: NonHAS = 0, HAS = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServiceClass {
    NonHas = 0,
    Has = 1,
}

/// Play-back buffer state. Codes: Filling = 0, Steady = 1, Depleting = 2, Unclear = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BufferState {
    Filling = 0,
    Steady = 1,
    Depleting = 2,
    Unclear = 3,
}

impl BufferState {
    pub const ALL: [BufferState; 4] =
        [BufferState::Filling, BufferState::Steady, BufferState::Depleting, BufferState::Unclear];
}

/// Which of the two classification problems a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    /// HAS vs non-HAS.
    Service,
    /// Buffer state of an HAS flow.
    Buffer,
}

impl Task {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Task::Service => &["NonHAS", "HAS"],
            Task::Buffer => &["Filling", "Steady", "Depleting", "Unclear"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Service(ServiceClass),
    Buffer(BufferState),
}

impl Label {
    pub fn task(self) -> Task {
        match self {
            Label::Service(_) => Task::Service,
            Label::Buffer(_) => Task::Buffer,
        }
    }

    pub fn code(self) -> usize {
        match self {
            Label::Service(c) => c as usize,
            Label::Buffer(s) => s as usize,
        }
    }

    pub fn name(self) -> &'static str {
        self.task().class_names()[self.code()]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "HAS" => Label::Service(ServiceClass::Has),
            "NonHAS" => Label::Service(ServiceClass::NonHas),
            "Filling" => Label::Buffer(BufferState::Filling),
            "Steady" => Label::Buffer(BufferState::Steady),
            "Depleting" => Label::Buffer(BufferState::Depleting),
            "Unclear" => Label::Buffer(BufferState::Unclear),
            _ => return Err(()),
        })
    }
}

/// A labeled half-open time interval `[start, end)` of one flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelInterval {
    pub flow: FlowKey,
    pub start: Nanos,
    pub end: Nanos,
    pub label: Label,
}

impl LabelInterval {
    pub fn contains(&self, t: Nanos) -> bool {
        self.start <= t && t < self.end
    }
}

impl fmt::Display for LabelInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.flow, self.start, self.end, self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("empty or inverted interval {0}")]
    EmptyInterval(LabelInterval),
    #[error("overlapping intervals {first} and {second}")]
    Overlap { first: LabelInterval, second: LabelInterval },
}

/// Checks `start < end` for every interval and disjointness within each
/// (flow, task) group.
pub fn validate_intervals(intervals: &[LabelInterval]) -> Result<(), LabelError> {
    if let Some(bad) = intervals.iter().find(|i| i.start >= i.end) {
        return Err(LabelError::EmptyInterval(*bad));
    }
    let mut sorted: Vec<&LabelInterval> = intervals.iter().collect();
    sorted.sort_by_key(|i| (i.flow, i.label.task(), i.start, i.end));
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.flow == b.flow && a.label.task() == b.label.task() && b.start < a.end {
            return Err(LabelError::Overlap { first: *a, second: *b });
        }
    }
    Ok(())
}

/// Lookup of the label covering an instant, per flow and task.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    // sorted by (flow, task, start)
    intervals: Vec<LabelInterval>,
}

impl LabelIndex {
    pub fn new(intervals: &[LabelInterval]) -> Result<Self, LabelError> {
        validate_intervals(intervals)?;
        let mut intervals = intervals.to_vec();
        intervals.sort_by_key(|i| (i.flow, i.label.task(), i.start));
        Ok(LabelIndex { intervals })
    }

    pub fn lookup(&self, flow: FlowKey, task: Task, t: Nanos) -> Option<Label> {
        let idx = self.intervals.partition_point(|i| (i.flow, i.label.task(), i.start) <= (flow, task, t));
        let cand = self.intervals[..idx].last()?;
        (cand.flow == flow && cand.label.task() == task && cand.contains(t)).then_some(cand.label)
    }
}
