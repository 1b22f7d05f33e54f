//! Synthetic task generators and dataset splits.
//!
//! Ground truth always comes from a direct graph algorithm (prefix scan, BFS,
//! tree walk, triangle enumeration), never from the wave machinery.

use crate::error::{Error, Result};
use crate::graph::{
    csl_graph, four_cycles_instance, path_graph, random_connected, random_regular, random_tree,
    Graph, Labels, TaskInstance, TaskKind, CSL_SIZE, CSL_SKIPS,
};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

/// Extra-edge fraction of Distance graphs.
pub const DISTANCE_EXTRA_EDGES: f64 = 0.5;
/// Regular degree of LCC / Triangles graphs.
pub const REGULAR_DEGREE: usize = 3;
/// Gadget side of 4-Cycles instances.
pub const FOUR_CYCLES_GADGET: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

/// `(instances, nodes per instance)` for each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
}

impl SplitPlan {
    pub fn get(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

const ALGORITHMIC_PLAN: SplitPlan = SplitPlan {
    train: (1024, 10),
    val: (100, 20),
    test: (1000, 100),
};

const COUNTING_PLAN: SplitPlan = SplitPlan {
    train: (1000, 20),
    val: (100, 20),
    test: (1000, 100),
};

/// Seed of instance `index` of `split` for `task` under root `seed`.
pub fn instance_seed(task: TaskKind, split: Split, index: usize, seed: u64) -> u64 {
    seed::derive(
        seed,
        &[seed::label(task.name()), split.index(), index as u64],
    )
}

pub trait TaskGenerator: Send + Sync {
    fn kind(&self) -> TaskKind;

    fn input_width(&self) -> usize;

    fn classes(&self) -> usize;

    fn plan(&self) -> SplitPlan;

    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance>;

    /// `count` instances of `n` nodes drawn from independent streams.
    fn generate_split(
        &self,
        split: Split,
        count: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<TaskInstance>> {
        (0..count)
            .map(|i| self.generate(n, instance_seed(self.kind(), split, i, seed)))
            .collect()
    }
}

fn marked_inputs(n: usize, marks: &[usize]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|v| vec![if marks.contains(&v) { 1.0 } else { 0.0 }])
        .collect()
}

pub struct PrefixSum;

impl PrefixSum {
    /// Path with uniform bits, one end marked; labels are running parities
    /// scanned from the marked end. Inputs are `[bit, is_marked]`.
    pub fn instance(bits: &[bool], mark_right: bool) -> Result<TaskInstance> {
        let n = bits.len();
        let g = path_graph(n)?;
        let mark = if mark_right { n - 1 } else { 0 };
        let mut labels = vec![0; n];
        let mut parity = false;
        let order: Vec<usize> = if mark_right {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        };
        for v in order {
            parity ^= bits[v];
            labels[v] = usize::from(parity);
        }
        let inputs = (0..n)
            .map(|v| vec![f64::from(u8::from(bits[v])), f64::from(u8::from(v == mark))])
            .collect();
        TaskInstance::new(
            g,
            inputs,
            vec![mark],
            Labels::Node(labels),
            TaskKind::PrefixSum,
        )
    }
}

impl TaskGenerator for PrefixSum {
    fn kind(&self) -> TaskKind {
        TaskKind::PrefixSum
    }
    fn input_width(&self) -> usize {
        2
    }
    fn classes(&self) -> usize {
        2
    }
    fn plan(&self) -> SplitPlan {
        ALGORITHMIC_PLAN
    }
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        if n == 0 {
            return Err(Error::InvalidParameter("prefixsum needs n >= 1".into()));
        }
        let mut rng = seed::rng(seed);
        let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        Self::instance(&bits, rng.gen_bool(0.5))
    }
}

pub struct Distance;

impl TaskGenerator for Distance {
    fn kind(&self) -> TaskKind {
        TaskKind::Distance
    }
    fn input_width(&self) -> usize {
        1
    }
    fn classes(&self) -> usize {
        2
    }
    fn plan(&self) -> SplitPlan {
        ALGORITHMIC_PLAN
    }
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        if n == 0 {
            return Err(Error::InvalidParameter("distance needs n >= 1".into()));
        }
        let g = random_connected(n, DISTANCE_EXTRA_EDGES, seed::derive(seed, &[0]))?.graph;
        let source = seed::rng(seed::derive(seed, &[1])).gen_range(0..n);
        let dist = g.bfs(source)?;
        let labels = dist
            .iter()
            .map(|d| d.map(|d| d % 2).ok_or(Error::Disconnected))
            .collect::<Result<Vec<_>>>()?;
        TaskInstance::new(
            g,
            marked_inputs(n, &[source]),
            vec![source],
            Labels::Node(labels),
            TaskKind::Distance,
        )
    }
}

pub struct PathFinding;

impl PathFinding {
    /// Labels the unique tree path between `a` and `b` by walking parent
    /// pointers from `b` up to `a`.
    pub fn instance(tree: Graph, a: usize, b: usize) -> Result<TaskInstance> {
        let n = tree.n();
        let mut parent = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([a]);
        parent[a] = a;
        while let Some(v) = queue.pop_front() {
            for &u in tree.neighbors(v) {
                if parent[u] == usize::MAX {
                    parent[u] = v;
                    queue.push_back(u);
                }
            }
        }
        if parent[b] == usize::MAX {
            return Err(Error::Disconnected);
        }
        let mut labels = vec![0; n];
        let mut v = b;
        labels[v] = 1;
        while v != a {
            v = parent[v];
            labels[v] = 1;
        }
        TaskInstance::new(
            tree,
            marked_inputs(n, &[a, b]),
            vec![a, b],
            Labels::Node(labels),
            TaskKind::PathFinding,
        )
    }
}

impl TaskGenerator for PathFinding {
    fn kind(&self) -> TaskKind {
        TaskKind::PathFinding
    }
    fn input_width(&self) -> usize {
        1
    }
    fn classes(&self) -> usize {
        2
    }
    fn plan(&self) -> SplitPlan {
        ALGORITHMIC_PLAN
    }
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        if n < 2 {
            return Err(Error::InvalidParameter("pathfinding needs n >= 2".into()));
        }
        let tree = random_tree(n, seed::derive(seed, &[0]))?;
        let mut rng = seed::rng(seed::derive(seed, &[1]));
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        Self::instance(tree, a, b)
    }
}

/// LCC (`count = true`: triangle count per node, 4 classes) or Triangles
/// (membership indicator) on random 3-regular graphs.
pub struct TriangleTask {
    pub count: bool,
}

impl TriangleTask {
    pub fn instance(g: Graph, count: bool) -> Result<TaskInstance> {
        let n = g.n();
        let tri = g.triangle_counts();
        let labels = tri
            .iter()
            .map(|&t| if count { t.min(3) } else { usize::from(t > 0) })
            .collect();
        let kind = if count {
            TaskKind::Lcc
        } else {
            TaskKind::Triangles
        };
        TaskInstance::new(
            g,
            vec![vec![1.0]; n],
            Vec::new(),
            Labels::Node(labels),
            kind,
        )
    }
}

impl TaskGenerator for TriangleTask {
    fn kind(&self) -> TaskKind {
        if self.count {
            TaskKind::Lcc
        } else {
            TaskKind::Triangles
        }
    }
    fn input_width(&self) -> usize {
        1
    }
    fn classes(&self) -> usize {
        if self.count {
            4
        } else {
            2
        }
    }
    fn plan(&self) -> SplitPlan {
        COUNTING_PLAN
    }
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        Self::instance(random_regular(n, REGULAR_DEGREE, seed)?, self.count)
    }
}

/// Ten CSL isomorphism classes on 41 nodes; every split holds one randomly
/// relabeled copy per class.
pub struct SkipCircles;

impl SkipCircles {
    pub fn instance(class: usize, seed: u64) -> Result<TaskInstance> {
        let k = *CSL_SKIPS
            .get(class)
            .ok_or_else(|| Error::InvalidParameter(format!("skip-circle class {class}")))?;
        let mut perm: Vec<usize> = (0..CSL_SIZE).collect();
        perm.shuffle(&mut seed::rng(seed));
        let g = csl_graph(CSL_SIZE, k)?.permuted(&perm)?;
        TaskInstance::new(
            g,
            vec![vec![1.0]; CSL_SIZE],
            Vec::new(),
            Labels::Graph(class),
            TaskKind::SkipCircles,
        )
    }
}

impl TaskGenerator for SkipCircles {
    fn kind(&self) -> TaskKind {
        TaskKind::SkipCircles
    }
    fn input_width(&self) -> usize {
        1
    }
    fn classes(&self) -> usize {
        CSL_SKIPS.len()
    }
    fn plan(&self) -> SplitPlan {
        let one = (CSL_SKIPS.len(), CSL_SIZE);
        SplitPlan {
            train: one,
            val: one,
            test: one,
        }
    }
    /// Class is drawn from the seed; `n` must be 41.
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        if n != CSL_SIZE {
            return Err(Error::InvalidParameter(format!(
                "skip circles have {CSL_SIZE} nodes"
            )));
        }
        let class = seed::rng(seed::derive(seed, &[0])).gen_range(0..CSL_SKIPS.len());
        Self::instance(class, seed::derive(seed, &[1]))
    }
    fn generate_split(
        &self,
        split: Split,
        count: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<TaskInstance>> {
        if n != CSL_SIZE {
            return Err(Error::InvalidParameter(format!(
                "skip circles have {CSL_SIZE} nodes"
            )));
        }
        (0..count)
            .map(|i| {
                Self::instance(
                    i % CSL_SKIPS.len(),
                    instance_seed(self.kind(), split, i, seed),
                )
            })
            .collect()
    }
}

/// Two bipartite gadgets with random keys; the label says whether the
/// result has a 4-cycle. Key bits are set with probability `1/p` so both
/// labels occur.
pub struct FourCycles;

impl TaskGenerator for FourCycles {
    fn kind(&self) -> TaskKind {
        TaskKind::FourCycles
    }
    fn input_width(&self) -> usize {
        1
    }
    fn classes(&self) -> usize {
        2
    }
    fn plan(&self) -> SplitPlan {
        let n = 4 * FOUR_CYCLES_GADGET;
        SplitPlan {
            train: (1000, n),
            val: (100, n),
            test: (1000, n),
        }
    }
    /// `n` must be a multiple of 4 (four gadget sides).
    fn generate(&self, n: usize, seed: u64) -> Result<TaskInstance> {
        if !n.is_multiple_of(4) || n < 8 {
            return Err(Error::InvalidParameter(format!(
                "4-cycles size {n} is not 4p with p >= 2"
            )));
        }
        let p = n / 4;
        let mut rng = seed::rng(seed);
        let prob = 1.0 / p as f64;
        let mut key = || -> Vec<Vec<bool>> {
            (0..p)
                .map(|_| (0..p).map(|_| rng.gen_bool(prob)).collect())
                .collect()
        };
        let (a, b) = (key(), key());
        let (g, has) = four_cycles_instance(p, &a, &b)?;
        TaskInstance::new(
            g,
            vec![vec![1.0]; n],
            Vec::new(),
            Labels::Graph(usize::from(has)),
            TaskKind::FourCycles,
        )
    }
}

/// Name -> generator table.
pub struct TaskRegistry {
    entries: BTreeMap<TaskKind, Box<dyn TaskGenerator>>,
}

impl TaskRegistry {
    pub fn with_builtins() -> Self {
        let mut r = TaskRegistry {
            entries: BTreeMap::new(),
        };
        r.register(Box::new(PrefixSum));
        r.register(Box::new(Distance));
        r.register(Box::new(PathFinding));
        r.register(Box::new(TriangleTask { count: true }));
        r.register(Box::new(TriangleTask { count: false }));
        r.register(Box::new(SkipCircles));
        r.register(Box::new(FourCycles));
        r
    }

    pub fn register(&mut self, g: Box<dyn TaskGenerator>) {
        self.entries.insert(g.kind(), g);
    }

    pub fn get(&self, kind: TaskKind) -> Result<&dyn TaskGenerator> {
        self.entries
            .get(&kind)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "task",
                name: kind.name().to_string(),
            })
    }

    pub fn by_name(&self, name: &str) -> Result<&dyn TaskGenerator> {
        self.get(name.parse()?)
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<TaskInstance>,
    pub val: Vec<TaskInstance>,
    pub test: Vec<TaskInstance>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[TaskInstance] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// The three splits of `gen`'s plan. Streams are disjoint because the split
/// is part of every instance seed.
pub fn make_splits(gen: &dyn TaskGenerator, seed: u64) -> Result<Splits> {
    let plan = gen.plan();
    let mk = |s: Split| {
        let (count, n) = plan.get(s);
        gen.generate_split(s, count, n, seed)
    };
    Ok(Splits {
        train: mk(Split::Train)?,
        val: mk(Split::Val)?,
        test: mk(Split::Test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_hand_case() {
        let inst = PrefixSum::instance(&[true, false, true], false).unwrap();
        assert_eq!(inst.labels, Labels::Node(vec![1, 1, 0]));
        let inst = PrefixSum::instance(&[false; 5], true).unwrap();
        assert_eq!(inst.labels, Labels::Node(vec![0; 5]));
        assert_eq!(inst.marks, vec![4]);
    }

    #[test]
    fn adjacent_marks_label_only_themselves() {
        let inst = PathFinding::instance(path_graph(5).unwrap(), 2, 3).unwrap();
        assert_eq!(inst.labels, Labels::Node(vec![0, 0, 1, 1, 0]));
    }

    #[test]
    fn k4_and_k33() {
        let k4 = Graph::new(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(
            TriangleTask::instance(k4.clone(), true).unwrap().labels,
            Labels::Node(vec![3; 4])
        );
        assert_eq!(
            TriangleTask::instance(k4, false).unwrap().labels,
            Labels::Node(vec![1; 4])
        );
        let k33: Vec<_> = (0..3).flat_map(|a| (3..6).map(move |b| (a, b))).collect();
        let k33 = Graph::new(6, &k33).unwrap();
        assert_eq!(
            TriangleTask::instance(k33, true).unwrap().labels,
            Labels::Node(vec![0; 6])
        );
    }

    #[test]
    fn distance_source_is_even() {
        let inst = Distance.generate(30, 4).unwrap();
        let s = inst.marks[0];
        assert_eq!(inst.node_labels().unwrap()[s], 0);
        assert!(inst.graph.is_connected());
    }

    #[test]
    fn skip_circle_classes() {
        let split = SkipCircles
            .generate_split(Split::Test, 10, CSL_SIZE, 1)
            .unwrap();
        let classes: Vec<_> = split.iter().map(|i| i.labels.clone()).collect();
        assert_eq!(classes, (0..10).map(Labels::Graph).collect::<Vec<_>>());
        assert!(split.iter().all(|i| i.graph.degrees() == vec![4; CSL_SIZE]));
    }

    #[test]
    fn four_cycle_labels_both_occur() {
        let labels: Vec<_> = (0..200)
            .map(|s| FourCycles.generate(24, s).unwrap().labels)
            .collect();
        assert!(labels.contains(&Labels::Graph(0)));
        assert!(labels.contains(&Labels::Graph(1)));
    }

    #[test]
    fn registry_and_plan() {
        let r = TaskRegistry::with_builtins();
        let g = r.by_name("PrefixSum").unwrap();
        assert_eq!(g.plan().get(Split::Train), (1024, 10));
        assert_eq!(g.plan().get(Split::Test), (1000, 100));
        assert_eq!(r.by_name("llc").unwrap().classes(), 4);
        assert!(r.by_name("sorting").is_err());
    }

    #[test]
    fn splits_use_disjoint_streams() {
        let a = PrefixSum.generate_split(Split::Train, 3, 10, 9).unwrap();
        let b = PrefixSum.generate_split(Split::Val, 3, 10, 9).unwrap();
        assert_ne!(a[0].inputs, b[0].inputs);
        let again = PrefixSum.generate_split(Split::Train, 3, 10, 9).unwrap();
        assert_eq!(a, again);
    }
}
