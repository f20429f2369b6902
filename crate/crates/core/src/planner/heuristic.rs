use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::strips::{ActionId, FactId, GroundTask, State};

/// Delete-relaxation estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    /// Number of goal facts not yet true.
    GoalCount,
    /// Most expensive goal fact in the relaxed graph; admissible.
    HMax,
    /// Sum of relaxed goal-fact costs.
    HAdd,
}

const INF: u32 = u32::MAX;

/// Precomputed fact→consumer index for relaxed reachability, plus scratch
/// buffers reused across evaluations.
pub struct RelaxedGraph<'t> {
    task: &'t GroundTask,
    consumers: Vec<Vec<ActionId>>,
    no_pre: Vec<ActionId>,
    fact_cost: Vec<u32>,
    done: Vec<bool>,
    remaining: Vec<u32>,
    acc: Vec<u32>,
    is_goal: Vec<bool>,
    heap: BinaryHeap<Reverse<(u32, FactId)>>,
}

impl<'t> RelaxedGraph<'t> {
    pub fn new(task: &'t GroundTask) -> Self {
        let mut consumers = vec![Vec::new(); task.num_facts()];
        let mut no_pre = Vec::new();
        for (id, a) in task.actions().iter().enumerate() {
            if a.pre.is_empty() {
                no_pre.push(id);
            }
            for &f in &a.pre {
                consumers[f].push(id);
            }
        }
        let nf = task.num_facts();
        let na = task.actions().len();
        RelaxedGraph {
            task,
            consumers,
            no_pre,
            fact_cost: vec![INF; nf],
            done: vec![false; nf],
            remaining: vec![0; na],
            acc: vec![0; na],
            is_goal: vec![false; nf],
            heap: BinaryHeap::new(),
        }
    }

    pub fn task(&self) -> &'t GroundTask {
        self.task
    }

    /// Heuristic value of `state` for `goal`; `None` marks a relaxed dead end.
    pub fn evaluate(&mut self, kind: HeuristicKind, state: &State, goal: &[FactId]) -> Option<u32> {
        match kind {
            HeuristicKind::GoalCount => {
                let reachable = self.reachable(state, None);
                if goal.iter().any(|&g| !reachable[g]) {
                    return None;
                }
                Some(goal.iter().filter(|&&g| !state.contains(g)).count() as u32)
            }
            HeuristicKind::HMax | HeuristicKind::HAdd => self.relaxed_cost(kind == HeuristicKind::HAdd, state, goal),
        }
    }

    fn relaxed_cost(&mut self, additive: bool, state: &State, goal: &[FactId]) -> Option<u32> {
        let actions = self.task.actions();
        self.fact_cost.fill(INF);
        self.done.fill(false);
        self.acc.fill(0);
        for (r, a) in self.remaining.iter_mut().zip(actions) {
            *r = a.pre.len() as u32;
        }
        self.heap.clear();
        let mut goals_left = 0;
        for &g in goal {
            if !self.is_goal[g] {
                self.is_goal[g] = true;
                goals_left += 1;
            }
        }
        for f in state.facts() {
            self.fact_cost[f] = 0;
            self.heap.push(Reverse((0, f)));
        }
        for &a in &self.no_pre {
            for &f in &actions[a].add {
                if 1 < self.fact_cost[f] {
                    self.fact_cost[f] = 1;
                    self.heap.push(Reverse((1, f)));
                }
            }
        }
        while goals_left > 0 {
            let Some(Reverse((c, f))) = self.heap.pop() else { break };
            if self.done[f] {
                continue;
            }
            self.done[f] = true;
            if self.is_goal[f] {
                goals_left -= 1;
            }
            for &a in &self.consumers[f] {
                self.acc[a] = if additive { self.acc[a].saturating_add(c) } else { self.acc[a].max(c) };
                self.remaining[a] -= 1;
                if self.remaining[a] == 0 {
                    let cost = self.acc[a].saturating_add(actions[a].cost);
                    for &g in &actions[a].add {
                        if cost < self.fact_cost[g] {
                            self.fact_cost[g] = cost;
                            self.heap.push(Reverse((cost, g)));
                        }
                    }
                }
            }
        }
        let mut h: u32 = 0;
        let mut dead = false;
        for &g in goal {
            self.is_goal[g] = false;
            let c = self.fact_cost[g];
            if c == INF {
                dead = true;
            } else if additive {
                h = h.saturating_add(c);
            } else {
                h = h.max(c);
            }
        }
        (!dead).then_some(h)
    }

    /// Facts reachable from `state` in the delete relaxation, optionally
    /// ignoring every action that adds `forbidden`.
    pub fn reachable(&mut self, state: &State, forbidden: Option<FactId>) -> Vec<bool> {
        let actions = self.task.actions();
        let mut reached = vec![false; self.task.num_facts()];
        let mut queue: Vec<FactId> = Vec::new();
        for (r, a) in self.remaining.iter_mut().zip(actions) {
            *r = a.pre.len() as u32;
        }
        let usable = |a: ActionId| forbidden.is_none_or(|f| !actions[a].add.contains(&f));
        for f in state.facts() {
            reached[f] = true;
            queue.push(f);
        }
        let fire = |a: ActionId, reached: &mut Vec<bool>, queue: &mut Vec<FactId>| {
            for &g in &actions[a].add {
                if !reached[g] {
                    reached[g] = true;
                    queue.push(g);
                }
            }
        };
        for &a in &self.no_pre {
            if usable(a) {
                fire(a, &mut reached, &mut queue);
            }
        }
        while let Some(f) = queue.pop() {
            for &a in &self.consumers[f] {
                self.remaining[a] -= 1;
                if self.remaining[a] == 0 && usable(a) {
                    fire(a, &mut reached, &mut queue);
                }
            }
        }
        reached
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{ground, parse_domain, parse_problem};

    fn chain() -> GroundTask {
        let dom = parse_domain(
            "(define (domain chain) (:predicates (a) (b) (c) (d))
               (:action ab :precondition (a) :effect (and (b) (not (a))))
               (:action bc :precondition (b) :effect (c))
               (:action ad :precondition (a) :effect (d)))",
        )
        .unwrap();
        let prob = parse_problem("(define (problem p) (:domain chain) (:objects) (:init (a)) (:goal (and (c) (d))))", &dom).unwrap();
        ground(&dom, &prob).unwrap()
    }

    #[test]
    fn hmax_and_hadd_on_chain() {
        let task = chain();
        let mut g = RelaxedGraph::new(&task);
        let goal = task.goal().to_vec();
        assert_eq!(g.evaluate(HeuristicKind::HMax, task.init(), &goal), Some(2));
        assert_eq!(g.evaluate(HeuristicKind::HAdd, task.init(), &goal), Some(3));
        assert_eq!(g.evaluate(HeuristicKind::GoalCount, task.init(), &goal), Some(2));
        // repeated evaluation reuses buffers without leaking state
        assert_eq!(g.evaluate(HeuristicKind::HMax, task.init(), &goal), Some(2));
    }

    #[test]
    fn dead_end_and_forbidden_reachability() {
        let task = chain();
        let mut g = RelaxedGraph::new(&task);
        let b = task.facts().id(&crate::strips::Atom::new("b", Vec::<String>::new())).unwrap();
        let c = task.facts().id(&crate::strips::Atom::new("c", Vec::<String>::new())).unwrap();
        let r = g.reachable(task.init(), Some(b));
        assert!(!r[b] && !r[c]);
        let empty = State::empty(task.num_facts());
        assert_eq!(g.evaluate(HeuristicKind::HMax, &empty, &[c]), None);
    }
}
