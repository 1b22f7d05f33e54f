use crate::error::{Error, Result};
use crate::graph::{TaskInstance, TaskKind};
use crate::schedule::{message_counts, schedule_for, MessageLedger, Role, Schedule};

/// Executes one phase of `schedule` over discrete states. `cell` receives the
/// step role, the receiver's state and its inbox of sender states, and
/// returns the receiver's new state. Within a step every receiver reads the
/// states from before the step.
pub fn run_wave<S, F>(schedule: &Schedule, states: &mut [S], mut cell: F)
where
    S: Clone,
    F: FnMut(Role, usize, &S, &[&S]) -> S,
{
    for step in schedule.live_steps() {
        let before: Vec<S> = step.active.iter().map(|&v| states[v].clone()).collect();
        let mut updates = Vec::with_capacity(step.active.len());
        let mut i = 0;
        for (k, &v) in step.active.iter().enumerate() {
            let mut inbox = Vec::new();
            while i < step.messages.len() && step.messages[i].1 == v {
                inbox.push(step.messages[i].0);
                i += 1;
            }
            let senders: Vec<&S> = inbox.iter().map(|&u| &states[u]).collect();
            updates.push(cell(step.role, v, &before[k], &senders));
        }
        for (&v, s) in step.active.iter().zip(updates) {
            states[v] = s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicRun {
    pub labels: Vec<usize>,
    pub ledger: MessageLedger,
}

fn flag(instance: &TaskInstance, v: usize, col: usize) -> bool {
    instance.inputs[v].get(col).copied().unwrap_or(0.0) > 0.5
}

/// Solves PrefixSum, Distance or PathFinding with a single flood-echo phase
/// from the first mark, using hand-written discrete cells.
pub fn symbolic_solve(task: TaskKind, instance: &TaskInstance) -> Result<SymbolicRun> {
    let n = instance.n();
    let origin = *instance
        .marks
        .first()
        .ok_or_else(|| Error::InvalidParameter("symbolic solver needs a marked origin".into()))?;
    let schedule = schedule_for(&instance.graph, origin)?;
    let labels = match task {
        TaskKind::PrefixSum => {
            // state: running parity of bits from the origin up to the node
            let mut parity: Vec<bool> = vec![false; n];
            parity[origin] = flag(instance, origin, 0);
            run_wave(&schedule, &mut parity, |role, v, own, inbox| match role {
                Role::Flood => inbox[0] ^ flag(instance, v, 0),
                _ => *own,
            });
            parity.into_iter().map(usize::from).collect()
        }
        TaskKind::Distance => {
            let mut parity = vec![false; n];
            run_wave(&schedule, &mut parity, |role, _, own, inbox| match role {
                Role::Flood => !*inbox[0],
                _ => *own,
            });
            parity.into_iter().map(usize::from).collect()
        }
        TaskKind::PathFinding => {
            // echo carries "the other mark lies below me" back to the origin
            let mut on_path: Vec<bool> = (0..n).map(|v| flag(instance, v, 0)).collect();
            run_wave(&schedule, &mut on_path, |role, _, own, inbox| match role {
                Role::Echo => *own || inbox.iter().any(|&&b| b),
                _ => *own,
            });
            on_path.into_iter().map(usize::from).collect()
        }
        other => {
            return Err(Error::Unsupported(format!(
                "no symbolic solver for {}",
                other.name()
            )))
        }
    };
    Ok(SymbolicRun {
        labels,
        ledger: message_counts(&schedule),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{path_graph, Graph, Labels};

    #[test]
    fn prefix_parity_on_three_bits() {
        let inputs = vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        let inst = TaskInstance::new(
            path_graph(3).unwrap(),
            inputs,
            vec![0],
            Labels::Node(vec![1, 1, 0]),
            TaskKind::PrefixSum,
        )
        .unwrap();
        let run = symbolic_solve(TaskKind::PrefixSum, &inst).unwrap();
        assert_eq!(run.labels, vec![1, 1, 0]);
        assert_eq!(run.ledger.total, 4);
    }

    #[test]
    fn star_path_between_leaves() {
        let g = Graph::new(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let inputs = (0..5)
            .map(|v| vec![f64::from(u8::from(v == 2 || v == 4))])
            .collect();
        let inst = TaskInstance::new(
            g,
            inputs,
            vec![2, 4],
            Labels::Node(vec![1, 0, 1, 0, 1]),
            TaskKind::PathFinding,
        )
        .unwrap();
        let run = symbolic_solve(TaskKind::PathFinding, &inst).unwrap();
        assert_eq!(run.labels, vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn graph_tasks_unsupported() {
        let inst = TaskInstance::new(
            path_graph(2).unwrap(),
            vec![vec![1.0], vec![0.0]],
            vec![0],
            Labels::Node(vec![0, 0]),
            TaskKind::Triangles,
        )
        .unwrap();
        assert!(matches!(
            symbolic_solve(TaskKind::Triangles, &inst),
            Err(Error::Unsupported(_))
        ));
    }
}
