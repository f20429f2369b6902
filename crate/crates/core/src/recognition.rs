//! Recognition problems, results, and the landmark-based recognizer.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::landmarks::{achieved_landmarks, extract_with, Landmarks};
use crate::planner::RelaxedGraph;
use crate::strips::{ActionId, FactId, GroundTask, StripsError};

/// Slack added to θ comparisons so scores that are equal up to rounding
/// are treated as equal.
const SCORE_EPS: f64 = 1e-9;

/// A hidden-goal problem: task (its init is the agent's start), candidate
/// goals, and observed actions in execution order.
#[derive(Clone, Debug)]
pub struct RecognitionProblem {
    pub task: GroundTask,
    pub candidates: Vec<Vec<FactId>>,
    pub observations: Vec<ActionId>,
}

impl RecognitionProblem {
    pub fn new(task: GroundTask, candidates: Vec<Vec<FactId>>, observations: Vec<ActionId>) -> Result<Self, StripsError> {
        let n = task.num_facts();
        if let Some(&bad) = candidates.iter().flatten().find(|&&f| f >= n) {
            return Err(StripsError::UnknownAtom(format!("fact #{bad}")));
        }
        if let Some(&bad) = observations.iter().find(|&&a| a >= task.actions().len()) {
            return Err(StripsError::ActionOutOfRange(bad));
        }
        Ok(RecognitionProblem { task, candidates, observations })
    }

    /// Same problem with a different observation sequence.
    pub fn with_observations(&self, observations: Vec<ActionId>) -> Self {
        RecognitionProblem { task: self.task.clone(), candidates: self.candidates.clone(), observations }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    /// One score per candidate, in [0, 1].
    pub scores: Vec<f64>,
    /// Indices of returned candidates, ascending.
    pub returned: Vec<usize>,
    /// Candidates the recognizer could not score (unsolvable or over the
    /// search limit).
    pub flagged: Vec<usize>,
    pub elapsed_secs: f64,
}

impl RecognitionResult {
    pub fn spread(&self) -> usize {
        self.returned.len()
    }

    pub fn contains(&self, candidate: usize) -> bool {
        self.returned.binary_search(&candidate).is_ok()
    }
}

/// Candidates whose score is within `theta` percent of the best, skipping
/// flagged ones unless every candidate is flagged.
pub fn select(scores: &[f64], flagged: &[usize], theta: f64) -> Vec<usize> {
    assert!((0.0..=100.0).contains(&theta), "theta must be a percentage");
    let usable: Vec<usize> = (0..scores.len()).filter(|i| !flagged.contains(i)).collect();
    if usable.is_empty() {
        return (0..scores.len()).collect();
    }
    let best = usable.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
    usable.into_iter().filter(|&i| scores[i] >= best - theta / 100.0 - SCORE_EPS).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PomHeuristic {
    /// Achieved over total landmarks.
    GoalCompletion,
    /// Same ratio with each landmark weighted by 1 / (candidates sharing it).
    Uniqueness,
}

/// Landmark sets and achieved subsets for every candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkTable {
    pub landmarks: Vec<Landmarks>,
    pub achieved: Vec<Vec<FactId>>,
}

impl LandmarkTable {
    pub fn build(problem: &RecognitionProblem) -> Self {
        let task = &problem.task;
        let mut graph = RelaxedGraph::new(task);
        let landmarks: Vec<Landmarks> = problem.candidates.iter().map(|g| extract_with(&mut graph, task.init(), g)).collect();
        let achieved = landmarks.iter().map(|l| achieved_landmarks(l, task, task.init(), &problem.observations)).collect();
        LandmarkTable { landmarks, achieved }
    }

    pub fn flagged(&self) -> Vec<usize> {
        (0..self.landmarks.len()).filter(|&i| self.landmarks[i].unsolvable).collect()
    }

    pub fn goal_completion(&self) -> Vec<f64> {
        self.landmarks
            .iter()
            .zip(&self.achieved)
            .map(|(l, a)| if l.unsolvable || l.is_empty() { 0.0 } else { a.len() as f64 / l.len() as f64 })
            .collect()
    }

    pub fn uniqueness(&self) -> Vec<f64> {
        let weight = |f: FactId| 1.0 / self.landmarks.iter().filter(|l| l.contains(f)).count() as f64;
        self.landmarks
            .iter()
            .zip(&self.achieved)
            .map(|(l, a)| {
                if l.unsolvable || l.is_empty() {
                    return 0.0;
                }
                let total: f64 = l.facts.iter().map(|&f| weight(f)).sum();
                a.iter().map(|&f| weight(f)).sum::<f64>() / total
            })
            .collect()
    }

    pub fn scores(&self, heuristic: PomHeuristic) -> Vec<f64> {
        match heuristic {
            PomHeuristic::GoalCompletion => self.goal_completion(),
            PomHeuristic::Uniqueness => self.uniqueness(),
        }
    }
}

/// Landmark-based recognition. Landmarks are recomputed on every call so
/// the measured time covers the full recognizer.
pub fn recognize_pom(problem: &RecognitionProblem, heuristic: PomHeuristic, theta: f64) -> RecognitionResult {
    let start = Instant::now();
    let table = LandmarkTable::build(problem);
    let scores = table.scores(heuristic);
    let flagged = table.flagged();
    let returned = select(&scores, &flagged, theta);
    RecognitionResult { scores, returned, flagged, elapsed_secs: start.elapsed().as_secs_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{ground, parse_domain, parse_problem, Atom};

    fn problem(domain: &str, init: &str, candidates: &[&str], observed: &[&str]) -> RecognitionProblem {
        let dom = parse_domain(domain).unwrap();
        let text = format!("(define (problem p) (:domain d) (:objects) (:init {init}) (:goal (and)))");
        let task = ground(&dom, &parse_problem(&text, &dom).unwrap()).unwrap();
        let cands = candidates.iter().map(|c| vec![task.facts().id(&Atom::new(*c, Vec::<String>::new())).unwrap()]).collect();
        let obs = observed.iter().map(|o| task.action_id(o).unwrap()).collect();
        RecognitionProblem::new(task, cands, obs).unwrap()
    }

    const CHAIN: &str = "(define (domain d) (:predicates (a) (b) (c) (d))
        (:action ab :precondition (a) :effect (and (b) (not (a))))
        (:action bc :precondition (b) :effect (c))
        (:action ad :precondition (a) :effect (d)))";

    const SHARED: &str = "(define (domain d) (:predicates (m) (x) (y))
        (:action go :effect (m))
        (:action mx :precondition (m) :effect (x))
        (:action my :precondition (m) :effect (y)))";

    #[test]
    fn goal_completion_on_chain() {
        let p = problem(CHAIN, "(a)", &["c", "d"], &["(ab)"]);
        let r = recognize_pom(&p, PomHeuristic::GoalCompletion, 0.0);
        assert!((r.scores[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.scores[1] - 1.0 / 2.0).abs() < 1e-12);
        assert_eq!(r.returned, vec![0]);
    }

    #[test]
    fn uniqueness_with_one_shared_landmark() {
        let p = problem(SHARED, "", &["x", "y"], &["(go)"]);
        let r = recognize_pom(&p, PomHeuristic::Uniqueness, 0.0);
        for s in &r.scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-12, "{s}");
        }
        assert_eq!(r.returned, vec![0, 1]);
    }

    #[test]
    fn theta_extremes() {
        let p = problem(CHAIN, "(a)", &["c", "d"], &["(ab)"]);
        assert_eq!(recognize_pom(&p, PomHeuristic::GoalCompletion, 100.0).spread(), 2);
        let empty = p.with_observations(vec![]);
        let t = LandmarkTable::build(&empty);
        assert_eq!(t.achieved[0], t.landmarks[0].facts.iter().copied().filter(|&f| empty.task.init().contains(f)).collect::<Vec<_>>());
    }

    #[test]
    fn unsolvable_candidates_are_skipped() {
        assert_eq!(select(&[0.0, 0.0, 0.0], &[1], 0.0), vec![0, 2]);
        assert_eq!(select(&[0.0, 0.0], &[0, 1], 0.0), vec![0, 1]);
    }
}
