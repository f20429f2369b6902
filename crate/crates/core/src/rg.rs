//! Recognition by cost difference: the observations are compiled into the
//! task so that a plan must embed them in order, and each candidate is
//! ranked by how much that constraint raises its optimal cost.

use std::collections::HashMap;

use web_time::Instant;

use crate::planner::{self, Plan, SearchConfig, SearchError};
use crate::recognition::{RecognitionProblem, RecognitionResult};
use crate::strips::{ActionId, Atom, FactId, FactTable, GroundAction, GroundTask, State, StripsError};

/// Predicate used for marker facts; `%` cannot occur in a parsed symbol.
const MARKER: &str = "%observed";

#[derive(Clone, Debug)]
pub struct CompiledTask {
    pub task: GroundTask,
    /// `markers[i]` holds once the first `i` observations have been
    /// explained; `markers[0]` holds initially.
    pub markers: Vec<FactId>,
    /// For each compiled action, the base action it copies.
    pub origin: Vec<ActionId>,
}

impl CompiledTask {
    /// Goal of the compiled task for base goal `goal`.
    pub fn goal_for(&self, goal: &[FactId]) -> Vec<FactId> {
        let mut g = goal.to_vec();
        g.push(*self.markers.last().expect("at least one marker"));
        g
    }
}

/// Adds markers `p_0..p_n` and, for observation `i`, a copy of its action
/// that also needs `p_{i-1}` and adds `p_i`. Base fact and action ids are
/// unchanged.
pub fn compile_observations(task: &GroundTask, observations: &[ActionId]) -> Result<CompiledTask, StripsError> {
    if let Some(&bad) = observations.iter().find(|&&a| a >= task.actions().len()) {
        return Err(StripsError::ActionOutOfRange(bad));
    }
    let base = task.num_facts();
    let mut atoms = task.facts().atoms().to_vec();
    atoms.extend((0..=observations.len()).map(|i| Atom::new(MARKER, [i.to_string()])));
    let markers: Vec<FactId> = (base..atoms.len()).collect();
    let mut actions = task.actions().to_vec();
    let mut origin: Vec<ActionId> = (0..actions.len()).collect();
    for (i, &a) in observations.iter().enumerate() {
        let src = task.action(a);
        let mut pre = src.pre.clone();
        pre.push(markers[i]);
        let mut add = src.add.clone();
        add.push(markers[i + 1]);
        actions.push(GroundAction { name: format!("{} [obs {}]", src.name, i + 1), pre, add, del: src.del.clone(), cost: src.cost });
        origin.push(a);
    }
    let mut init = task.init().widened(atoms.len());
    init.insert(markers[0]);
    let goal = task.goal().to_vec();
    let compiled = GroundTask::new(FactTable::new(atoms), actions, init, goal);
    Ok(CompiledTask { task: compiled, markers, origin })
}

/// Maps a compiled plan back onto base action ids.
pub fn strip_markers(compiled: &CompiledTask, plan: &Plan) -> Plan {
    Plan { actions: plan.actions.iter().map(|&a| compiled.origin[a]).collect(), cost: plan.cost }
}

/// Optimal costs memoised by (initial state, goal).
#[derive(Default)]
pub struct CostCache {
    costs: HashMap<(State, Vec<FactId>), Result<Option<u32>, SearchError>>,
    pub hits: usize,
    pub misses: usize,
}

impl CostCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cost(&mut self, task: &GroundTask, goal: &[FactId], cfg: &SearchConfig) -> Result<Option<u32>, SearchError> {
        let mut key_goal = goal.to_vec();
        key_goal.sort_unstable();
        let key = (task.init().clone(), key_goal);
        if let Some(c) = self.costs.get(&key) {
            self.hits += 1;
            return c.clone();
        }
        self.misses += 1;
        let c = planner::optimal_cost_with(task, goal, cfg);
        self.costs.insert(key, c.clone());
        c
    }
}

/// Cost-difference recognizer output: the shared result plus each
/// candidate's cost increase (`None` when it could not be computed).
#[derive(Clone, Debug, PartialEq)]
pub struct RgOutcome {
    pub result: RecognitionResult,
    pub deltas: Vec<Option<u32>>,
}

/// Returns every candidate with the smallest cost increase. Scores are the
/// negated increases rescaled to [0, 1]. Base costs come from `cache`;
/// compiled costs are always searched.
pub fn recognize_rg(problem: &RecognitionProblem, cfg: &SearchConfig, cache: &mut CostCache) -> Result<RgOutcome, StripsError> {
    let start = Instant::now();
    let compiled = compile_observations(&problem.task, &problem.observations)?;
    let mut deltas = Vec::with_capacity(problem.candidates.len());
    for goal in &problem.candidates {
        let base = cache.cost(&problem.task, goal, cfg);
        let delta = match base {
            Ok(Some(b)) => match planner::optimal_cost_with(&compiled.task, &compiled.goal_for(goal), cfg) {
                Ok(Some(c)) => Some(c - b),
                _ => None,
            },
            _ => None,
        };
        deltas.push(delta);
    }
    let flagged: Vec<usize> = (0..deltas.len()).filter(|&i| deltas[i].is_none()).collect();
    let known: Vec<u32> = deltas.iter().flatten().copied().collect();
    let (lo, hi) = (known.iter().min().copied(), known.iter().max().copied());
    let scores = deltas
        .iter()
        .map(|d| match (d, lo, hi) {
            (Some(d), Some(lo), Some(hi)) if hi > lo => (hi - d) as f64 / (hi - lo) as f64,
            (Some(_), _, _) => 1.0,
            (None, _, _) => 0.0,
        })
        .collect();
    let returned = match lo {
        Some(lo) => (0..deltas.len()).filter(|&i| deltas[i] == Some(lo)).collect(),
        None => (0..deltas.len()).collect(),
    };
    let result = RecognitionResult { scores, returned, flagged, elapsed_secs: start.elapsed().as_secs_f64() };
    Ok(RgOutcome { result, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{ground, parse_domain, parse_problem};

    fn line() -> GroundTask {
        let dom = parse_domain(
            "(define (domain line) (:types n) (:predicates (at ?x - n) (next ?x ?y - n))
               (:action step :parameters (?x ?y - n) :precondition (and (at ?x) (next ?x ?y)) :effect (and (at ?y) (not (at ?x)))))",
        )
        .unwrap();
        let prob = parse_problem(
            "(define (problem p) (:domain line) (:objects n0 n1 n2 n3 - n)
               (:init (at n1) (next n1 n0) (next n0 n1) (next n1 n2) (next n2 n1) (next n2 n3) (next n3 n2)) (:goal (and)))",
            &dom,
        )
        .unwrap();
        ground(&dom, &prob).unwrap()
    }

    fn at(t: &GroundTask, x: &str) -> Vec<FactId> {
        vec![t.facts().id(&Atom::new("at", [x])).unwrap()]
    }

    #[test]
    fn empty_observations_change_nothing() {
        let t = line();
        let c = compile_observations(&t, &[]).unwrap();
        assert_eq!(c.markers.len(), 1);
        assert!(c.task.init().contains(c.markers[0]));
        let g = at(&t, "n3");
        let base = planner::optimal_cost(&t, &g).unwrap();
        let comp = planner::optimal_cost(&c.task, &c.goal_for(&g)).unwrap();
        assert_eq!((base, comp), (Some(2), Some(2)));
    }

    #[test]
    fn observed_detour_costs_extra() {
        let t = line();
        let left = t.action_id("(step n1 n0)").unwrap();
        let problem = RecognitionProblem::new(t.clone(), vec![at(&t, "n3"), at(&t, "n0")], vec![left]).unwrap();
        let mut cache = CostCache::new();
        let out = recognize_rg(&problem, &SearchConfig::optimal(), &mut cache).unwrap();
        assert_eq!(out.deltas, vec![Some(2), Some(0)]);
        assert_eq!(out.result.returned, vec![1]);
        assert_eq!(out.result.scores, vec![0.0, 1.0]);
        recognize_rg(&problem, &SearchConfig::optimal(), &mut cache).unwrap();
        assert_eq!((cache.misses, cache.hits), (2, 2));
    }

    #[test]
    fn compiled_plans_strip_to_base_plans() {
        let t = line();
        let obs = vec![t.action_id("(step n1 n2)").unwrap(), t.action_id("(step n2 n1)").unwrap()];
        let c = compile_observations(&t, &obs).unwrap();
        let goal = at(&t, "n0");
        let plan = planner::solve(&c.task.with_goal(c.goal_for(&goal)), &SearchConfig::optimal()).unwrap().plan().unwrap();
        assert_eq!(plan.cost, 3);
        let base = strip_markers(&c, &plan);
        planner::validate(&t.with_goal(goal), &base).unwrap();
        assert_eq!(&base.actions[..2], &obs[..]);
    }
}
