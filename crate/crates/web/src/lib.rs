//! Browser bindings. Every export takes and returns JSON strings so the page
//! needs no generated glue beyond `wasm-bindgen`'s own.

use goalrec_core::codec::{self, parse_hex};
use goalrec_core::dataset::{build_dataset, DatasetConfig, Split};
use goalrec_core::domains::{DomainKind, DomainTemplate, Puzzle};
use goalrec_core::planner::{self, SearchConfig};
use goalrec_core::recognition::{recognize_pom, PomHeuristic, RecognitionProblem, RecognitionResult};
use goalrec_core::rg::{recognize_rg, CostCache};
use goalrec_core::traces::{sample_observations, Rounding};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Keeps the cost-difference recognizer responsive in a browser tab.
const NODE_LIMIT: usize = 400_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub hex: String,
    pub text: String,
}

impl Board {
    fn of(p: &Puzzle) -> Board {
        Board { hex: codec::encode(p).hex(), text: p.render() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub domain: DomainKind,
    pub init: Board,
    pub candidates: Vec<Board>,
    pub goal_index: usize,
    pub plan: Vec<String>,
    pub states: Vec<Board>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    pub cost: u32,
    pub actions: Vec<String>,
    pub states: Vec<Board>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guess {
    pub recognizer: String,
    pub scores: Vec<f64>,
    pub returned: Vec<usize>,
    pub correct: bool,
    pub millis: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionView {
    pub level: u32,
    pub observed: Vec<usize>,
    pub observed_actions: Vec<String>,
    pub guesses: Vec<Guess>,
}

fn domain(name: &str) -> Result<DomainKind, String> {
    name.parse()
}

fn puzzle(kind: DomainKind, hex: &str) -> Result<Puzzle, String> {
    let bits = parse_hex(hex.trim()).map_err(|e| e.to_string())?;
    codec::decode(kind, bits).map_err(|e| e.to_string())
}

/// One benchmark-style problem: a start, candidate goals within the
/// domain's distance window, and an optimal plan to the hidden one.
pub fn generate_problem(name: &str, seed: u64) -> Result<Problem, String> {
    let kind = domain(name)?;
    let cfg = DatasetConfig { seed, problems: 1, unknown_problems: 0, traces_per_goal: 0, extra_goals: 0, levels: vec![100], ..DatasetConfig::for_domain(kind) };
    let ds = build_dataset(&cfg).map_err(|e| e.to_string())?;
    let r = ds.records_in(Split::Test).next().ok_or("no test problem generated")?;
    let decode = |c: u64| codec::decode(kind, c).map(|p| Board::of(&p)).map_err(|e| e.to_string());
    let states = r.states().map_err(|e| e.to_string())?.into_iter().map(decode).collect::<Result<Vec<_>, _>>()?;
    let candidates = r.candidate_codes().map_err(|e| e.to_string())?;
    let goal = r.goal().map_err(|e| e.to_string())?;
    Ok(Problem {
        domain: kind,
        init: states[0].clone(),
        goal_index: candidates.iter().position(|&c| c == goal).ok_or("goal missing from candidates")?,
        candidates: candidates.into_iter().map(decode).collect::<Result<_, _>>()?,
        plan: r.trace_actions.clone(),
        states,
    })
}

/// Optimal plan between two configurations given as 9-digit hex codes.
pub fn plan_between(name: &str, init_hex: &str, goal_hex: &str) -> Result<PlanView, String> {
    let kind = domain(name)?;
    let t = DomainTemplate::new(kind);
    let (init, goal) = (puzzle(kind, init_hex)?, puzzle(kind, goal_hex)?);
    let task = t.task_for(&init, &goal);
    let plan = planner::solve(&task, &SearchConfig::optimal().with_node_limit(NODE_LIMIT))
        .map_err(|e| e.to_string())?
        .plan()
        .ok_or("goal is unreachable from this start")?;
    let trace = planner::state_trace(&task, &plan).map_err(|e| e.to_string())?;
    let states = trace.iter().map(|s| t.puzzle_of(s).map(|p| Board::of(&p)).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    Ok(PlanView { cost: plan.cost, actions: plan.names(&task), states })
}

/// Hides part of the plan and runs both landmark heuristics at `theta` and
/// the cost-difference recognizer on what remains.
pub fn recognize(p: &Problem, level: u32, theta: f64, seed: u64) -> Result<RecognitionView, String> {
    if !(1..=100).contains(&level) {
        return Err("level must lie in 1..=100".into());
    }
    if !(0.0..=100.0).contains(&theta) {
        return Err("theta must lie in 0..=100".into());
    }
    let t = DomainTemplate::new(p.domain);
    let init = puzzle(p.domain, &p.init.hex)?;
    let goals: Vec<Puzzle> = p.candidates.iter().map(|b| puzzle(p.domain, &b.hex)).collect::<Result<_, _>>()?;
    let task = t.task_for(&init, goals.get(p.goal_index).ok_or("goal index out of range")?);
    let seq = sample_observations(p.plan.len(), level, Rounding::Round, &mut ChaCha8Rng::seed_from_u64(seed));
    let observed_actions: Vec<String> = seq.kept_indices.iter().map(|&i| p.plan[i].clone()).collect();
    let ids = observed_actions.iter().map(|n| task.action_id(n)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let problem = RecognitionProblem::new(task, goals.iter().map(|g| t.goal_of(g)).collect(), ids).map_err(|e| e.to_string())?;
    let guess = |name: String, r: RecognitionResult| Guess { correct: r.contains(p.goal_index), recognizer: name, scores: r.scores, returned: r.returned, millis: r.elapsed_secs * 1e3 };
    let mut guesses = vec![
        guess(format!("landmark completion θ={theta}"), recognize_pom(&problem, PomHeuristic::GoalCompletion, theta)),
        guess(format!("landmark uniqueness θ={theta}"), recognize_pom(&problem, PomHeuristic::Uniqueness, theta)),
    ];
    let rg = recognize_rg(&problem, &SearchConfig::optimal().with_node_limit(NODE_LIMIT), &mut CostCache::new()).map_err(|e| e.to_string())?;
    guesses.push(guess("cost difference".into(), rg.result));
    Ok(RecognitionView { level, observed: seq.kept_indices, observed_actions, guesses })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("views serialize")).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn generate(domain: &str, seed: u32) -> Result<String, JsValue> {
    to_js(generate_problem(domain, seed as u64))
}

#[wasm_bindgen]
pub fn plan(domain: &str, init_hex: &str, goal_hex: &str) -> Result<String, JsValue> {
    to_js(plan_between(domain, init_hex, goal_hex))
}

#[wasm_bindgen(js_name = recognize)]
pub fn recognize_js(problem_json: &str, level: u32, theta: f64, seed: u32) -> Result<String, JsValue> {
    let p: Problem = serde_json::from_str(problem_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    to_js(recognize(&p, level, theta, seed as u64))
}
