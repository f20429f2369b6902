use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use super::heuristic::RelaxedGraph;
use super::{Plan, SearchConfig, SearchError, Solution};
use crate::strips::{ActionId, GroundTask, State};

const NO_PARENT: u32 = u32::MAX;

struct Node {
    state: State,
    parent: u32,
    action: u32,
    g: u32,
}

fn extract(task: &GroundTask, nodes: &[Node], mut idx: u32) -> Plan {
    let mut actions = Vec::new();
    let cost = nodes[idx as usize].g;
    while nodes[idx as usize].parent != NO_PARENT {
        actions.push(nodes[idx as usize].action as ActionId);
        idx = nodes[idx as usize].parent;
    }
    actions.reverse();
    debug_assert_eq!(cost, actions.iter().map(|&a| task.action(a).cost).sum::<u32>());
    Plan { actions, cost }
}

/// A* (`optimal`) or greedy best-first search keyed on the configured
/// heuristic. A* reopens states reached again with a lower g.
pub(super) fn best_first(
    task: &GroundTask,
    cfg: &SearchConfig,
    ranks: &[u32],
    optimal: bool,
    transition: &dyn Fn(&State, ActionId) -> State,
) -> Result<Solution, SearchError> {
    let goal = task.goal();
    let mut graph = RelaxedGraph::new(task);
    let Some(h0) = graph.evaluate(cfg.heuristic, task.init(), goal) else {
        return Ok(Solution::Unsolvable);
    };
    let mut nodes = vec![Node { state: task.init().clone(), parent: NO_PARENT, action: 0, g: 0 }];
    let mut best_g: HashMap<State, u32> = HashMap::from([(task.init().clone(), 0)]);
    // key: (primary, h, action rank, insertion sequence, node index)
    let mut open = BinaryHeap::new();
    let primary = |g: u32, h: u32| if optimal { g + h } else { h };
    open.push(Reverse((primary(0, h0), h0, 0u32, 0u64, 0u32)));
    let mut seq = 0u64;
    let mut expanded = 0usize;

    while let Some(Reverse((_, _, _, _, idx))) = open.pop() {
        let g = nodes[idx as usize].g;
        if optimal && best_g.get(&nodes[idx as usize].state).is_some_and(|&b| b < g) {
            continue;
        }
        if task.is_goal(&nodes[idx as usize].state) {
            return Ok(Solution::Found(extract(task, &nodes, idx)));
        }
        if expanded >= cfg.node_limit {
            return Err(SearchError::LimitExceeded { expanded });
        }
        expanded += 1;
        for (a, act) in task.actions().iter().enumerate() {
            if !nodes[idx as usize].state.satisfies(&act.pre) {
                continue;
            }
            let next = transition(&nodes[idx as usize].state, a);
            let g2 = g + act.cost;
            match best_g.entry(next.clone()) {
                Entry::Occupied(mut e) => {
                    if !optimal || *e.get() <= g2 {
                        continue;
                    }
                    e.insert(g2);
                }
                Entry::Vacant(e) => {
                    e.insert(g2);
                }
            }
            let Some(h) = graph.evaluate(cfg.heuristic, &next, goal) else {
                continue;
            };
            seq += 1;
            let child = nodes.len() as u32;
            nodes.push(Node { state: next, parent: idx, action: a as u32, g: g2 });
            open.push(Reverse((primary(g2, h), h, ranks[a], seq, child)));
        }
    }
    Ok(Solution::Unsolvable)
}

/// Plain breadth-first search with the goal test at generation; optimal for
/// unit costs and independent of any heuristic.
pub(super) fn breadth_first(
    task: &GroundTask,
    node_limit: usize,
    ranks: &[u32],
    transition: &dyn Fn(&State, ActionId) -> State,
) -> Result<Solution, SearchError> {
    let mut nodes = vec![Node { state: task.init().clone(), parent: NO_PARENT, action: 0, g: 0 }];
    if task.is_goal(task.init()) {
        return Ok(Solution::Found(Plan::empty()));
    }
    let mut order: Vec<ActionId> = (0..task.actions().len()).collect();
    order.sort_by_key(|&a| ranks[a]);
    let mut seen: HashSet<State> = HashSet::from([task.init().clone()]);
    let mut queue = VecDeque::from([0u32]);
    let mut expanded = 0usize;
    while let Some(idx) = queue.pop_front() {
        if expanded >= node_limit {
            return Err(SearchError::LimitExceeded { expanded });
        }
        expanded += 1;
        let g = nodes[idx as usize].g;
        for &a in &order {
            let act = task.action(a);
            if !nodes[idx as usize].state.satisfies(&act.pre) {
                continue;
            }
            let next = transition(&nodes[idx as usize].state, a);
            if seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            let done = task.is_goal(&next);
            let child = nodes.len() as u32;
            nodes.push(Node { state: next, parent: idx, action: a as u32, g: g + act.cost });
            if done {
                return Ok(Solution::Found(extract(task, &nodes, child)));
            }
            queue.push_back(child);
        }
    }
    Ok(Solution::Unsolvable)
}
