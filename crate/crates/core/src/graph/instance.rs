use super::Graph;
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    PrefixSum,
    Distance,
    PathFinding,
    Lcc,
    Triangles,
    SkipCircles,
    FourCycles,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::PrefixSum,
        TaskKind::Distance,
        TaskKind::PathFinding,
        TaskKind::Lcc,
        TaskKind::Triangles,
        TaskKind::SkipCircles,
        TaskKind::FourCycles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::PrefixSum => "prefixsum",
            TaskKind::Distance => "distance",
            TaskKind::PathFinding => "pathfinding",
            TaskKind::Lcc => "lcc",
            TaskKind::Triangles => "triangles",
            TaskKind::SkipCircles => "skipcircles",
            TaskKind::FourCycles => "fourcycles",
        }
    }

    pub fn is_graph_task(self) -> bool {
        matches!(self, TaskKind::SkipCircles | TaskKind::FourCycles)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "llc" && *k == TaskKind::Lcc))
            .ok_or_else(|| Error::Unknown {
                kind: "task",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    Node(Vec<usize>),
    Graph(usize),
}

/// A graph with per-node inputs, distinguished nodes and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub graph: Graph,
    pub inputs: Vec<Vec<f64>>,
    pub marks: Vec<usize>,
    pub labels: Labels,
    pub task: TaskKind,
}

impl TaskInstance {
    pub fn new(
        graph: Graph,
        inputs: Vec<Vec<f64>>,
        marks: Vec<usize>,
        labels: Labels,
        task: TaskKind,
    ) -> Result<Self> {
        let n = graph.n();
        if inputs.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} input rows for {n} nodes",
                inputs.len()
            )));
        }
        if let Some(w) = inputs.first().map(Vec::len) {
            if inputs.iter().any(|r| r.len() != w) {
                return Err(Error::InvalidParameter("ragged input rows".into()));
            }
        }
        if let Some(&bad) = marks.iter().find(|&&m| m >= n) {
            return Err(Error::NodeOutOfRange { node: bad, n });
        }
        match &labels {
            Labels::Node(l) if l.len() != n => {
                return Err(Error::InvalidParameter(format!(
                    "{} node labels for {n} nodes",
                    l.len()
                )))
            }
            Labels::Graph(_) if !task.is_graph_task() => {
                return Err(Error::InvalidParameter(format!(
                    "task {task} needs node labels"
                )))
            }
            Labels::Node(_) if task.is_graph_task() => {
                return Err(Error::InvalidParameter(format!(
                    "task {task} needs a graph label"
                )))
            }
            _ => {}
        }
        Ok(TaskInstance {
            graph,
            inputs,
            marks,
            labels,
            task,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn feature_width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Node(l) => Some(l),
            Labels::Graph(_) => None,
        }
    }
}
