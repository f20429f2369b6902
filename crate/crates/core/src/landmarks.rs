//! Fact landmarks by backchaining over the delete relaxation.

use std::collections::{BTreeSet, VecDeque};

use crate::planner::RelaxedGraph;
use crate::strips::{ActionId, FactId, GroundTask, State};

/// Fact landmarks of one goal from one initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Landmarks {
    /// Sorted fact ids; empty when `unsolvable`.
    pub facts: Vec<FactId>,
    /// Some goal fact is unreachable even in the relaxation.
    pub unsolvable: bool,
}

impl Landmarks {
    pub fn contains(&self, f: FactId) -> bool {
        self.facts.binary_search(&f).is_ok()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Every goal fact is a landmark. For a landmark `l` not true initially, any
/// action achieving `l` first must be applicable before `l` holds, so the
/// facts shared by the preconditions of all such achievers are landmarks.
/// "Before `l` holds" is approximated by relaxed reachability with the
/// achievers of `l` removed.
pub fn extract_landmarks(task: &GroundTask, init: &State, goal: &[FactId]) -> Landmarks {
    let mut graph = RelaxedGraph::new(task);
    extract_with(&mut graph, init, goal)
}

pub(crate) fn extract_with(graph: &mut RelaxedGraph<'_>, init: &State, goal: &[FactId]) -> Landmarks {
    let task = graph.task();
    let reach = graph.reachable(init, None);
    if goal.iter().any(|&g| !reach[g]) {
        return Landmarks { facts: Vec::new(), unsolvable: true };
    }
    let mut achievers: Vec<Vec<ActionId>> = vec![Vec::new(); task.num_facts()];
    for (id, a) in task.actions().iter().enumerate() {
        for &f in &a.add {
            achievers[f].push(id);
        }
    }
    let mut found: BTreeSet<FactId> = goal.iter().copied().collect();
    let mut queue: VecDeque<FactId> = found.iter().copied().collect();
    while let Some(l) = queue.pop_front() {
        if init.contains(l) {
            continue;
        }
        let before = graph.reachable(init, Some(l));
        let mut shared: Option<BTreeSet<FactId>> = None;
        for &a in &achievers[l] {
            let pre = &task.action(a).pre;
            if !pre.iter().all(|&p| before[p]) {
                continue;
            }
            let pre: BTreeSet<FactId> = pre.iter().copied().collect();
            shared = Some(match shared {
                None => pre,
                Some(s) => s.intersection(&pre).copied().collect(),
            });
        }
        for f in shared.unwrap_or_default() {
            if found.insert(f) {
                queue.push_back(f);
            }
        }
    }
    Landmarks { facts: found.into_iter().collect(), unsolvable: false }
}

/// Landmarks that hold initially or occur in the precondition or add list of
/// an observed action.
pub fn achieved_landmarks(lms: &Landmarks, task: &GroundTask, init: &State, observed: &[ActionId]) -> Vec<FactId> {
    let mut seen = vec![false; task.num_facts()];
    for f in init.facts() {
        seen[f] = true;
    }
    for &a in observed {
        let act = task.action(a);
        for &f in act.pre.iter().chain(&act.add) {
            seen[f] = true;
        }
    }
    lms.facts.iter().copied().filter(|&f| seen[f]).collect()
}
