//! Distance partitions and the flood/echo activation schedule.
//!
//! One phase visits depths `1..=max_dist` outward (`Flood(d)` then
//! `FloodCross(d)`), then `max_dist..=1` inward (`EchoCross(d)` then
//! `Echo(d)`). Only message receivers update in a step; every tree edge
//! carries one message each way per phase and every cross edge two each way.

use crate::error::{Error, Result};
use crate::graph::{Graph, TaskInstance};
use crate::seed;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Flood,
    FloodCross,
    EchoCross,
    Echo,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Flood, Role::FloodCross, Role::EchoCross, Role::Echo];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Flood => "flood",
            Role::FloodCross => "floodcross",
            Role::EchoCross => "echocross",
            Role::Echo => "echo",
        }
    }

    pub fn is_cross(self) -> bool {
        matches!(self, Role::FloodCross | Role::EchoCross)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistancePartition {
    pub origin: usize,
    pub dist: Vec<Option<usize>>,
    pub layers: Vec<Vec<usize>>,
    pub max_dist: usize,
}

impl DistancePartition {
    pub fn reachable(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

pub fn bfs_distances(g: &Graph, origin: usize) -> Result<DistancePartition> {
    let dist = g.bfs(origin)?;
    let max_dist = dist.iter().flatten().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); max_dist + 1];
    for (v, d) in dist.iter().enumerate() {
        if let Some(d) = d {
            layers[*d].push(v);
        }
    }
    Ok(DistancePartition {
        origin,
        dist,
        layers,
        max_dist,
    })
}

/// One sparse activation: `messages` are `(sender, receiver)` pairs sorted by
/// receiver then sender; `active` is the sorted set of receivers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub role: Role,
    pub depth: usize,
    pub messages: Vec<(usize, usize)>,
    pub active: Vec<usize>,
}

impl Step {
    fn new(role: Role, depth: usize) -> Self {
        Step {
            role,
            depth,
            messages: Vec::new(),
            active: Vec::new(),
        }
    }

    fn seal(&mut self) {
        self.messages.sort_unstable_by_key(|&(s, r)| (r, s));
        self.active = self.messages.iter().map(|&(_, r)| r).collect();
        self.active.dedup();
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub partition: DistancePartition,
    pub steps: Vec<Step>,
}

fn flood_slot(d: usize) -> usize {
    2 * (d - 1)
}

fn echo_slot(max_d: usize, d: usize) -> usize {
    2 * max_d + 2 * (max_d - d)
}

pub fn build_schedule(partition: &DistancePartition, g: &Graph) -> Result<Schedule> {
    if partition.dist.len() != g.n() {
        return Err(Error::ScheduleMismatch(format!(
            "partition covers {} nodes, graph has {}",
            partition.dist.len(),
            g.n()
        )));
    }
    if g.bfs(partition.origin)? != partition.dist {
        return Err(Error::ScheduleMismatch(
            "distances differ from BFS on this graph".into(),
        ));
    }
    let max_d = partition.max_dist;
    let mut steps = Vec::with_capacity(4 * max_d);
    for d in 1..=max_d {
        steps.push(Step::new(Role::Flood, d));
        steps.push(Step::new(Role::FloodCross, d));
    }
    for d in (1..=max_d).rev() {
        steps.push(Step::new(Role::EchoCross, d));
        steps.push(Step::new(Role::Echo, d));
    }
    for &(a, b) in g.edges() {
        let (Some(da), Some(db)) = (partition.dist[a], partition.dist[b]) else {
            continue;
        };
        if da == db {
            for (s, r) in [(a, b), (b, a)] {
                steps[flood_slot(da) + 1].messages.push((s, r));
                steps[echo_slot(max_d, da)].messages.push((s, r));
            }
        } else {
            let (near, far, d) = if da < db { (a, b, db) } else { (b, a, da) };
            steps[flood_slot(d)].messages.push((near, far));
            steps[echo_slot(max_d, d) + 1].messages.push((far, near));
        }
    }
    steps.iter_mut().for_each(Step::seal);
    Ok(Schedule {
        partition: partition.clone(),
        steps,
    })
}

/// Convenience: partition plus schedule.
pub fn schedule_for(g: &Graph, origin: usize) -> Result<Schedule> {
    build_schedule(&bfs_distances(g, origin)?, g)
}

impl Schedule {
    /// Steps that actually execute (non-empty inbox set).
    pub fn live_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| !s.is_empty())
    }

    /// Debug listing: `step#, role, depth, |messages|, |active|`.
    pub fn dump(&self) -> String {
        let mut out = String::from("step,role,depth,messages,active\n");
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{},{}\n",
                s.role,
                s.depth,
                s.messages.len(),
                s.active.len()
            ));
        }
        out
    }
}

/// Message accounting for one phase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLedger {
    pub per_role: [u64; 4],
    pub per_step: Vec<u64>,
    pub total: u64,
    pub node_updates: u64,
}

impl MessageLedger {
    pub fn role(&self, role: Role) -> u64 {
        self.per_role[role.index()]
    }

    /// Adds another ledger (e.g. a second phase) to this one.
    pub fn absorb(&mut self, other: &MessageLedger) {
        for (a, b) in self.per_role.iter_mut().zip(other.per_role) {
            *a += b;
        }
        self.per_step.extend_from_slice(&other.per_step);
        self.total += other.total;
        self.node_updates += other.node_updates;
    }
}

pub fn message_counts(schedule: &Schedule) -> MessageLedger {
    let mut ledger = MessageLedger::default();
    for s in &schedule.steps {
        let k = s.messages.len() as u64;
        ledger.per_role[s.role.index()] += k;
        ledger.per_step.push(k);
        ledger.total += k;
        ledger.node_updates += s.active.len() as u64;
    }
    ledger
}

/// Edge classification relative to a partition: `(tree edges, cross edges)`
/// within the reachable component.
pub fn edge_classes(partition: &DistancePartition, g: &Graph) -> (usize, usize) {
    let mut tree = 0;
    let mut cross = 0;
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (partition.dist[u], partition.dist[v]) {
            if a == b {
                cross += 1;
            } else {
                tree += 1;
            }
        }
    }
    (tree, cross)
}

/// Origin-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Fixed,
    Random,
    All,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fixed => "fixed",
            Mode::Random => "random",
            Mode::All => "all",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Mode::Fixed),
            "random" => Ok(Mode::Random),
            "all" => Ok(Mode::All),
            _ => Err(Error::Unknown {
                kind: "mode",
                name: s.to_string(),
            }),
        }
    }
}

/// Fixed: the first mark (node 0 without marks). Random: one uniform node
/// drawn from `seed`. All: every node.
pub fn choose_origins(mode: Mode, instance: &TaskInstance, seed: u64) -> Vec<usize> {
    let n = instance.n();
    match mode {
        Mode::Fixed => vec![instance.marks.first().copied().unwrap_or(0)],
        Mode::Random => vec![seed::rng(seed).gen_range(0..n.max(1))],
        Mode::All => (0..n).collect(),
    }
}

/// Steps of several schedules over disjoint node ranges merged into one
/// sequence. `parts` holds each schedule with the offset of its first node.
/// Steps sharing `(role, depth)` are fused; the per-schedule step order is
/// preserved, and since the node ranges are disjoint the fused execution is
/// identical to running each schedule alone.
pub fn merge_schedules(parts: &[(&Schedule, usize)]) -> Vec<Step> {
    let max_d = parts
        .iter()
        .map(|(s, _)| s.partition.max_dist)
        .max()
        .unwrap_or(0);
    let mut merged: Vec<Step> = Vec::with_capacity(4 * max_d);
    for d in 1..=max_d {
        merged.push(Step::new(Role::Flood, d));
        merged.push(Step::new(Role::FloodCross, d));
    }
    for d in (1..=max_d).rev() {
        merged.push(Step::new(Role::EchoCross, d));
        merged.push(Step::new(Role::Echo, d));
    }
    for (sched, off) in parts {
        for s in &sched.steps {
            let slot = match s.role {
                Role::Flood => flood_slot(s.depth),
                Role::FloodCross => flood_slot(s.depth) + 1,
                Role::EchoCross => echo_slot(max_d, s.depth),
                Role::Echo => echo_slot(max_d, s.depth) + 1,
            };
            let target = &mut merged[slot];
            target
                .messages
                .extend(s.messages.iter().map(|&(a, b)| (a + off, b + off)));
        }
    }
    merged.iter_mut().for_each(Step::seal);
    merged.retain(|s| !s.is_empty());
    merged
}
