//! Forward state-space search: optimal A* and breadth-first search,
//! greedy best-first search for fast satisficing plans, and plan validation.

mod heuristic;
mod search;

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::{HeuristicKind, RelaxedGraph};

use crate::strips::{ActionId, FactId, GroundTask, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    OptimalAstar,
    OptimalBfs,
    SatisficingGbfs,
}

pub const DEFAULT_NODE_LIMIT: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub heuristic: HeuristicKind,
    /// Maximum number of node expansions.
    pub node_limit: usize,
    /// Permutes the action-id tie-breaking order; 0 keeps ids as they are.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::optimal()
    }
}

impl SearchConfig {
    pub fn optimal() -> Self {
        SearchConfig { mode: SearchMode::OptimalAstar, heuristic: HeuristicKind::HMax, node_limit: DEFAULT_NODE_LIMIT, seed: 0 }
    }

    pub fn bfs() -> Self {
        SearchConfig { mode: SearchMode::OptimalBfs, ..SearchConfig::optimal() }
    }

    pub fn satisficing() -> Self {
        SearchConfig { mode: SearchMode::SatisficingGbfs, heuristic: HeuristicKind::HAdd, ..SearchConfig::optimal() }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SearchConfig { seed, ..self }
    }

    pub fn with_node_limit(self, node_limit: usize) -> Self {
        assert!(node_limit > 0, "node_limit must be positive");
        SearchConfig { node_limit, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<ActionId>,
    pub cost: u32,
}

impl Plan {
    pub fn empty() -> Self {
        Plan { actions: Vec::new(), cost: 0 }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn names(&self, task: &GroundTask) -> Vec<String> {
        self.actions.iter().map(|&a| task.action(a).name.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Found(Plan),
    Unsolvable,
}

impl Solution {
    pub fn plan(self) -> Option<Plan> {
        match self {
            Solution::Found(p) => Some(p),
            Solution::Unsolvable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("node limit exceeded after {expanded} expansions")]
    LimitExceeded { expanded: usize },
}

/// Action ranks used for tie-breaking. Seed 0 is the identity.
pub(crate) fn action_ranks(n: usize, seed: u64) -> Vec<u32> {
    let mut order: Vec<u32> = (0..n as u32).collect();
    if seed != 0 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut rank = vec![0; n];
    for (r, &a) in order.iter().enumerate() {
        rank[a as usize] = r as u32;
    }
    rank
}

/// Plans from `task.init()` to `task.goal()`.
///
/// Ties are broken by lower f, then lower h, then lower action rank, then
/// insertion order, so equal configs always give equal plans.
pub fn solve(task: &GroundTask, cfg: &SearchConfig) -> Result<Solution, SearchError> {
    solve_with(task, cfg, &|s, a| task.successor(s, a))
}

/// [`solve`] with a caller-supplied transition function, applied only to
/// actions whose preconditions hold.
pub fn solve_with(task: &GroundTask, cfg: &SearchConfig, transition: &dyn Fn(&State, ActionId) -> State) -> Result<Solution, SearchError> {
    assert!(cfg.node_limit > 0);
    let ranks = action_ranks(task.actions().len(), cfg.seed);
    match cfg.mode {
        SearchMode::OptimalBfs => search::breadth_first(task, cfg.node_limit, &ranks, transition),
        SearchMode::OptimalAstar => search::best_first(task, cfg, &ranks, true, transition),
        SearchMode::SatisficingGbfs => search::best_first(task, cfg, &ranks, false, transition),
    }
}

/// Length of a shortest plan from `task.init()` to `goal`, or `None` when
/// no plan exists.
pub fn optimal_cost(task: &GroundTask, goal: &[FactId]) -> Result<Option<u32>, SearchError> {
    optimal_cost_with(task, goal, &SearchConfig::optimal())
}

pub fn optimal_cost_with(task: &GroundTask, goal: &[FactId], cfg: &SearchConfig) -> Result<Option<u32>, SearchError> {
    let t = task.with_goal(goal.to_vec());
    Ok(solve(&t, cfg)?.plan().map(|p| p.cost))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanFailure {
    #[error("step {step}: {action} is not applicable (missing {})", missing.join(", "))]
    Inapplicable { step: usize, action: String, missing: Vec<String> },
    #[error("plan ends without reaching the goal (missing {})", missing.join(", "))]
    GoalNotReached { missing: Vec<String> },
    #[error("plan cost {stated} does not match its {actual} unit-cost actions")]
    CostMismatch { stated: u32, actual: u32 },
    #[error("step {step}: action id {id} does not exist")]
    UnknownAction { step: usize, id: ActionId },
}

/// Replays `plan` from the initial state and checks that it reaches the goal.
pub fn validate(task: &GroundTask, plan: &Plan) -> Result<(), PlanFailure> {
    let mut s = task.init().clone();
    let mut cost = 0;
    for (step, &a) in plan.actions.iter().enumerate() {
        let Some(act) = task.actions().get(a) else {
            return Err(PlanFailure::UnknownAction { step, id: a });
        };
        let missing: Vec<String> = act.pre.iter().filter(|&&f| !s.contains(f)).map(|&f| task.facts().atom(f).to_string()).collect();
        if !missing.is_empty() {
            return Err(PlanFailure::Inapplicable { step, action: act.name.clone(), missing });
        }
        s = task.successor(&s, a);
        cost += act.cost;
    }
    if cost != plan.cost {
        return Err(PlanFailure::CostMismatch { stated: plan.cost, actual: cost });
    }
    let missing: Vec<String> = task.goal().iter().filter(|&&f| !s.contains(f)).map(|&f| task.facts().atom(f).to_string()).collect();
    if !missing.is_empty() {
        return Err(PlanFailure::GoalNotReached { missing });
    }
    Ok(())
}

/// States along `plan`, starting with the initial state.
pub fn state_trace(task: &GroundTask, plan: &Plan) -> Result<Vec<State>, PlanFailure> {
    validate(task, plan)?;
    let mut states = vec![task.init().clone()];
    for &a in &plan.actions {
        let next = task.successor(states.last().unwrap(), a);
        states.push(next);
    }
    Ok(states)
}

/// Breadth-first enumeration of states reachable from `start`, each with
/// its distance, up to `max_depth` steps when given.
pub fn explore(task: &GroundTask, start: &State, max_depth: Option<usize>) -> Vec<(State, usize)> {
    let mut seen: HashMap<State, usize> = HashMap::new();
    let mut order = vec![(start.clone(), 0)];
    seen.insert(start.clone(), 0);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if max_depth.is_some_and(|m| d >= m) {
            continue;
        }
        for (a, act) in task.actions().iter().enumerate() {
            if s.satisfies(&act.pre) {
                let next = task.successor(&s, a);
                if !seen.contains_key(&next) {
                    seen.insert(next.clone(), d + 1);
                    order.push((next.clone(), d + 1));
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{ground, parse_domain, parse_problem, Atom};

    fn line_task(goal: &str) -> GroundTask {
        let dom = parse_domain(
            "(define (domain line) (:types n) (:predicates (at ?x - n) (next ?x ?y - n) (far))
               (:action step :parameters (?x ?y - n) :precondition (and (at ?x) (next ?x ?y)) :effect (and (at ?y) (not (at ?x)))))",
        )
        .unwrap();
        let prob = parse_problem(
            &format!(
                "(define (problem p) (:domain line) (:objects a b c d - n)
                   (:init (at a) (next a b) (next b c) (next c d) (next b a) (next c b) (next d c)) (:goal {goal}))"
            ),
            &dom,
        )
        .unwrap();
        ground(&dom, &prob).unwrap()
    }

    #[test]
    fn init_satisfies_goal_gives_empty_plan() {
        let task = line_task("(at a)");
        for cfg in [SearchConfig::optimal(), SearchConfig::bfs(), SearchConfig::satisficing()] {
            let plan = solve(&task, &cfg).unwrap().plan().unwrap();
            assert!(plan.is_empty());
            assert_eq!(plan.cost, 0);
            assert!(validate(&task, &plan).is_ok());
        }
    }

    #[test]
    fn all_modes_find_the_three_step_plan() {
        let task = line_task("(at d)");
        for cfg in [SearchConfig::optimal(), SearchConfig::bfs(), SearchConfig::satisficing()] {
            let plan = solve(&task, &cfg).unwrap().plan().unwrap();
            assert_eq!(plan.cost, 3);
            assert_eq!(plan.names(&task), vec!["(step a b)", "(step b c)", "(step c d)"]);
        }
    }

    #[test]
    fn unreachable_atom_is_unsolvable() {
        let task = line_task("(far)");
        assert_eq!(solve(&task, &SearchConfig::optimal()).unwrap(), Solution::Unsolvable);
        assert_eq!(solve(&task, &SearchConfig::bfs()).unwrap(), Solution::Unsolvable);
        let far = task.resolve(&[Atom::new("far", Vec::<String>::new())]).unwrap();
        assert_eq!(optimal_cost(&task, &far).unwrap(), None);
        let at_a = task.resolve(&[Atom::new("at", ["a"])]).unwrap();
        assert_eq!(optimal_cost(&task, &at_a).unwrap(), Some(0));
    }

    #[test]
    fn node_limit_is_reported() {
        let task = line_task("(at d)");
        let cfg = SearchConfig::bfs().with_node_limit(1);
        assert!(matches!(solve(&task, &cfg), Err(SearchError::LimitExceeded { expanded: 1 })));
        let cfg = SearchConfig::optimal().with_node_limit(1);
        assert!(matches!(solve(&task, &cfg), Err(SearchError::LimitExceeded { .. })));
    }

    #[test]
    fn validate_reports_first_bad_step() {
        let task = line_task("(at d)");
        let bad = Plan { actions: vec![task.action_id("(step b c)").unwrap()], cost: 1 };
        match validate(&task, &bad) {
            Err(PlanFailure::Inapplicable { step, .. }) => assert_eq!(step, 0),
            other => panic!("{other:?}"),
        }
        let short = Plan { actions: vec![task.action_id("(step a b)").unwrap()], cost: 1 };
        assert!(matches!(validate(&task, &short), Err(PlanFailure::GoalNotReached { .. })));
        assert!(validate(&line_task("(at a)"), &Plan::empty()).is_ok());
    }

    #[test]
    fn explore_counts_line_states() {
        let task = line_task("(at d)");
        let all = explore(&task, task.init(), None);
        assert_eq!(all.len(), 4);
        assert_eq!(all.iter().map(|(_, d)| *d).max(), Some(3));
        assert_eq!(explore(&task, task.init(), Some(1)).len(), 2);
    }

    #[test]
    fn seeded_ranks_are_permutations() {
        let r = action_ranks(10, 42);
        let mut sorted = r.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_eq!(action_ranks(10, 42), r);
        assert_eq!(action_ranks(4, 0), vec![0, 1, 2, 3]);
    }
}
