//! Self-checks that compare each component with a slower, simpler oracle.
//! A fault can be injected to confirm a suite actually catches bugs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::domains::{DomainKind, DomainTemplate, Puzzle};
use crate::landmarks::extract_landmarks;
use crate::neural::{backward, bce_loss, forward, predict, Dims, LstmParams, TENSOR_NAMES};
use crate::planner::{self, solve, solve_with, SearchConfig};
use crate::strips::{GroundTask, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Planner,
    Landmarks,
    Gradient,
    Codec,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Planner, Suite::Landmarks, Suite::Gradient, Suite::Codec];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Planner => "planner",
            Suite::Landmarks => "landmarks",
            Suite::Gradient => "gradient",
            Suite::Codec => "codec",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown oracle suite `{s}`"))
    }
}

/// Deliberate bug planted in the component under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// A* runs with a transition that forgets delete effects.
    IgnoreDeletes,
    /// A* runs with a transition that applies the effects of the next
    /// action id instead of the chosen one.
    OffByOneApply,
    /// Landmark sets gain one extra non-initial fact.
    ExtraLandmark,
    /// Analytic gradients are scaled by 1.01.
    ScaledGradient,
    /// Decoding sees the code with its lowest bit flipped.
    FlippedBit,
}

impl Fault {
    pub const ALL: [Fault; 5] = [Fault::IgnoreDeletes, Fault::OffByOneApply, Fault::ExtraLandmark, Fault::ScaledGradient, Fault::FlippedBit];

    pub fn name(self) -> &'static str {
        match self {
            Fault::IgnoreDeletes => "ignore_deletes",
            Fault::OffByOneApply => "off_by_one_apply",
            Fault::ExtraLandmark => "extra_landmark",
            Fault::ScaledGradient => "scaled_gradient",
            Fault::FlippedBit => "flipped_bit",
        }
    }

    pub fn suite(self) -> Suite {
        match self {
            Fault::IgnoreDeletes | Fault::OffByOneApply => Suite::Planner,
            Fault::ExtraLandmark => Suite::Landmarks,
            Fault::ScaledGradient => Suite::Gradient,
            Fault::FlippedBit => Suite::Codec,
        }
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fault::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown fault `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    /// Random (init, goal) pairs per domain for the planner suite.
    pub planner_cases: usize,
    /// Random problems per domain for the landmark suite; each of their
    /// landmarks is one case.
    pub landmark_cases: usize,
    pub gradient_seeds: usize,
    /// Random configurations per domain for the codec suite.
    pub codec_samples: usize,
    pub fault: Option<Fault>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { seed: 1, planner_cases: 30, landmark_cases: 20, gradient_seeds: 20, codec_samples: 10_000, fault: None }
    }
}

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for relative gradient error, so entries near zero are
/// compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest measured error, for suites that measure one.
    pub worst: Option<f64>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_LISTED: usize = 20;

fn note(failures: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if failures.len() < MAX_LISTED {
        failures.push(msg());
    } else if failures.len() == MAX_LISTED {
        failures.push("further failures omitted".into());
    }
}

pub fn run_suite(suite: Suite, cfg: &OracleConfig) -> SuiteReport {
    let fault = cfg.fault.filter(|f| f.suite() == suite);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (suite as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    match suite {
        Suite::Planner => planner_suite(cfg.planner_cases, fault, &mut rng),
        Suite::Landmarks => landmark_suite(cfg.landmark_cases, fault, &mut rng),
        Suite::Gradient => gradient_suite(cfg.gradient_seeds, cfg.seed, fault),
        Suite::Codec => codec_suite(cfg.codec_samples, fault, &mut rng),
    }
}

pub fn run_all(suites: &[Suite], cfg: &OracleConfig) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run_suite(s, cfg)).collect()
}

/// Problem pairs whose BFS stays small: 8-puzzle inits lie near the goal.
fn random_pair(t: &DomainTemplate, rng: &mut ChaCha8Rng) -> (Puzzle, Puzzle) {
    let goal = t.random_puzzle(rng);
    let init = match t.kind() {
        DomainKind::EightPuzzle => {
            let ball = t.ball(&goal, 0, 10);
            ball.choose(rng).expect("ball contains its center").0.clone()
        }
        _ => t.random_puzzle(rng),
    };
    (init, goal)
}

fn planner_suite(cases: usize, fault: Option<Fault>, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut failures = Vec::new();
    let mut n = 0;
    for kind in DomainKind::ALL {
        let t = DomainTemplate::new(kind);
        for _ in 0..cases {
            n += 1;
            let (init, goal) = random_pair(&t, rng);
            let task = t.task_for(&init, &goal);
            let bfs = solve(&task, &SearchConfig::bfs()).ok().and_then(|s| s.plan());
            let mut astar_cfg = SearchConfig::optimal().with_seed(rng.gen());
            if fault.is_some() {
                // broken transitions can wander through malformed states
                astar_cfg = astar_cfg.with_node_limit(20_000);
            }
            let astar = match fault {
                Some(Fault::IgnoreDeletes) => solve_with(&task, &astar_cfg, &|s: &State, a| {
                    let mut next = s.clone();
                    for &f in &task.action(a).add {
                        next.insert(f);
                    }
                    next
                }),
                Some(Fault::OffByOneApply) => solve_with(&task, &astar_cfg, &|s: &State, a| task.successor(s, (a + 1) % task.actions().len())),
                _ => solve(&task, &astar_cfg),
            }
            .ok()
            .and_then(|s| s.plan());
            let gbfs = solve(&task, &SearchConfig::satisficing()).ok().and_then(|s| s.plan());
            let label = || format!("{kind} {} -> {}", codec::encode(&init).hex(), codec::encode(&goal).hex());
            match (&astar, &bfs) {
                (Some(a), Some(b)) => {
                    if a.cost != b.cost {
                        note(&mut failures, || format!("{}: A* cost {} but BFS cost {}", label(), a.cost, b.cost));
                    }
                    if let Err(e) = planner::validate(&task, a) {
                        note(&mut failures, || format!("{}: A* plan invalid: {e}", label()));
                    }
                }
                (a, b) if a.is_some() != b.is_some() => note(&mut failures, || format!("{}: A* solved {} but BFS solved {}", label(), a.is_some(), b.is_some())),
                _ => {}
            }
            match &gbfs {
                Some(g) => {
                    if planner::validate(&task, g).is_err() || bfs.as_ref().is_some_and(|b| g.cost < b.cost) {
                        note(&mut failures, || format!("{}: GBFS plan invalid or shorter than optimal", label()));
                    }
                }
                None if bfs.is_some() => note(&mut failures, || format!("{}: GBFS found no plan", label())),
                None => {}
            }
        }
    }
    SuiteReport { suite: Suite::Planner, cases: n, failures, worst: None }
}

/// True when `goal` cannot be reached from `init` once every action adding
/// `fact` is removed. Exhaustive breadth-first search, so only for small
/// state spaces.
pub fn needed_on_every_plan(task: &GroundTask, fact: usize) -> bool {
    if task.init().contains(fact) {
        return true;
    }
    let actions = task.actions().iter().filter(|a| !a.add.contains(&fact)).cloned().collect();
    let pruned = GroundTask::new(task.facts().clone(), actions, task.init().clone(), task.goal().to_vec());
    matches!(solve(&pruned, &SearchConfig::bfs()).map(|s| s.plan()), Ok(None))
}

fn landmark_suite(cases: usize, fault: Option<Fault>, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for kind in DomainKind::ALL {
        let t = DomainTemplate::new(kind);
        // every removal proof explores the full state space, so the
        // 8-puzzle gets a smaller share
        let cases = if kind == DomainKind::EightPuzzle { cases.div_ceil(10) } else { cases };
        for _ in 0..cases {
            let (init, goal) = random_pair(&t, rng);
            let task = t.task_for(&init, &goal);
            let mut lms = extract_landmarks(&task, task.init(), task.goal());
            if fault == Some(Fault::ExtraLandmark) {
                let extra = (0..task.num_facts()).find(|f| !task.init().contains(*f) && !lms.contains(*f));
                if let Some(f) = extra {
                    lms.facts.push(f);
                }
            }
            for &l in &lms.facts {
                checked += 1;
                if !needed_on_every_plan(&task, l) {
                    note(&mut failures, || format!("{kind} {} -> {}: {} is not needed on every plan", codec::encode(&init).hex(), codec::encode(&goal).hex(), task.describe_facts([l])[0]));
                }
            }
        }
    }
    SuiteReport { suite: Suite::Landmarks, cases: checked, failures, worst: None }
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter of a small random network.
pub fn gradient_error(seed: u64, scale: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = LstmParams::init(Dims::new(6, 4, 5), &mut rng);
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let tokens: Vec<u32> = (0..3).map(|_| rng.gen_range(0..=6)).collect();
    let target: Vec<f64> = (0..36).map(|_| rng.gen_range(0..2) as f64).collect();
    let mut grad = LstmParams::zeros(p.dims);
    backward(&p, &forward(&p, &tokens).expect("tokens in range"), &target, &mut grad);
    grad.scale(scale);
    let loss = |q: &LstmParams| bce_loss(&predict(q, &tokens).expect("tokens in range"), &target);
    let mut worst: f64 = 0.0;
    let mut q = p.clone();
    for ti in 0..TENSOR_NAMES.len() {
        for k in 0..p.tensors()[ti].len() {
            let orig = p.tensors()[ti][k];
            q.tensors_mut()[ti][k] = orig + FD_STEP;
            let up = loss(&q);
            q.tensors_mut()[ti][k] = orig - FD_STEP;
            let down = loss(&q);
            q.tensors_mut()[ti][k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grad.tensors()[ti][k];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR));
        }
    }
    worst
}

fn gradient_suite(seeds: usize, base: u64, fault: Option<Fault>) -> SuiteReport {
    let scale = if fault == Some(Fault::ScaledGradient) { 1.01 } else { 1.0 };
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for s in 0..seeds as u64 {
        let err = gradient_error(base.wrapping_add(s), scale);
        worst = worst.max(err);
        if !(err < FD_TOLERANCE) {
            note(&mut failures, || format!("seed {}: relative error {err:e}", base.wrapping_add(s)));
        }
    }
    SuiteReport { suite: Suite::Gradient, cases: seeds, failures, worst: Some(worst) }
}

fn codec_suite(samples: usize, fault: Option<Fault>, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut failures = Vec::new();
    let mut n = 0;
    for kind in DomainKind::ALL {
        let t = DomainTemplate::new(kind);
        let puzzles: Vec<Puzzle> = if kind == DomainKind::Hanoi34 {
            (0..64u8).map(|i| Puzzle::Hanoi([i % 4, i / 4 % 4, i / 16])).collect()
        } else {
            (0..samples).map(|_| t.random_puzzle(rng)).collect()
        };
        let mut seen: HashMap<u64, Puzzle> = HashMap::new();
        for p in puzzles {
            n += 1;
            let mut code = codec::encode(&p).bits;
            if fault == Some(Fault::FlippedBit) {
                code ^= 1;
            }
            match codec::decode(kind, code) {
                Ok(back) if back == p => {}
                Ok(back) => note(&mut failures, || format!("{kind}: {p:?} decodes as {back:?}")),
                Err(e) => note(&mut failures, || format!("{kind}: {p:?} does not decode: {e}")),
            }
            // the state-level path must agree with the puzzle-level one
            let s = t.state_of(&p);
            match codec::encode_state(&t, &s) {
                Ok(c) if c.bits == codec::encode(&p).bits => {}
                _ => note(&mut failures, || format!("{kind}: state encoding disagrees for {p:?}")),
            }
            if let Some(other) = seen.insert(codec::encode(&p).bits, p.clone()) {
                if other != p {
                    note(&mut failures, || format!("{kind}: {other:?} and {p:?} share a code"));
                }
            }
        }
    }
    SuiteReport { suite: Suite::Codec, cases: n, failures, worst: None }
}
