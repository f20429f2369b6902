//! Benchmark problems and training corpora, persisted as JSON Lines plus a
//! manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufRead};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{self, encode};
use crate::domains::{DomainKind, DomainTemplate, Puzzle};
use crate::planner::SearchConfig;
use crate::traces::{check_observations, generate_trace, sample_observations, ObservationSequence, PlanTrace, Rounding, LEVELS};

pub const FORMAT: &str = "goalrec-dataset/1";
pub const RECORDS_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    UnknownGoalTest,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::UnknownGoalTest => "unknown_goal_test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub domain: DomainKind,
    pub seed: u64,
    /// Known-goal benchmark problems.
    pub problems: usize,
    pub candidates: usize,
    /// Problems whose hidden goal never occurs in training.
    pub unknown_problems: usize,
    /// Training traces per goal in the training pool; 0 skips the corpus.
    pub traces_per_goal: usize,
    /// Random goals added to the training pool besides benchmark candidates.
    pub extra_goals: usize,
    pub validation_fraction: f64,
    pub levels: Vec<u32>,
    pub rounding: Rounding,
    /// Plan-length window between a problem's start and each candidate.
    pub min_distance: usize,
    pub max_distance: usize,
}

impl DatasetConfig {
    pub fn for_domain(domain: DomainKind) -> Self {
        let (candidates, unknown, extra, max_distance) = match domain {
            DomainKind::Hanoi34 => (4, 0, 0, 64),
            DomainKind::EightPuzzle => (6, 6, 24, 9),
            DomainKind::LightsOut4 => (6, 6, 24, 6),
        };
        let min_distance = if domain == DomainKind::EightPuzzle { 6 } else { 1 };
        DatasetConfig {
            domain,
            seed: 1,
            problems: 6,
            candidates,
            unknown_problems: unknown,
            traces_per_goal: 8,
            extra_goals: extra,
            validation_fraction: 0.1,
            levels: LEVELS.to_vec(),
            rounding: Rounding::Round,
            min_distance,
            max_distance,
        }
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Config(m.to_string()));
        if self.problems == 0 && self.unknown_problems == 0 && self.traces_per_goal == 0 {
            return bad("nothing to generate");
        }
        if self.candidates < 1 {
            return bad("need at least one candidate per problem");
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !LEVELS.contains(l)) {
            return bad("levels must be drawn from 10, 30, 50, 70, 100");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if self.min_distance == 0 || self.min_distance > self.max_distance {
            return bad("distance window must satisfy 1 <= min <= max");
        }
        Ok(())
    }
}

/// One trace at one observability level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub domain: DomainKind,
    pub problem_id: String,
    pub split: Split,
    pub goal_code: String,
    pub candidates: Vec<String>,
    pub trace_states: Vec<String>,
    pub trace_actions: Vec<String>,
    pub level: u32,
    pub kept_indices: Vec<usize>,
}

impl Record {
    pub fn goal(&self) -> Result<u64, DatasetError> {
        Ok(codec::parse_hex(&self.goal_code)?)
    }

    pub fn states(&self) -> Result<Vec<u64>, DatasetError> {
        self.trace_states.iter().map(|s| Ok(codec::parse_hex(s)?)).collect()
    }

    pub fn candidate_codes(&self) -> Result<Vec<u64>, DatasetError> {
        self.candidates.iter().map(|s| Ok(codec::parse_hex(s)?)).collect()
    }

    pub fn observations(&self) -> ObservationSequence {
        ObservationSequence { level: self.level, kept_indices: self.kept_indices.clone() }
    }

    /// Network input: the initial state, then each kept state.
    pub fn observed_states(&self) -> Result<Vec<u64>, DatasetError> {
        let states = self.states()?;
        let mut seq = vec![states[0]];
        seq.extend(self.kept_indices.iter().map(|&i| states[i + 1]));
        Ok(seq)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub records: BTreeMap<Split, usize>,
    pub traces: BTreeMap<Split, usize>,
    pub goals: BTreeMap<Split, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: DatasetConfig,
    pub counts: Counts,
    pub records_file: String,
    pub records_sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub records: Vec<Record>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("only {available} distinct goals available, {needed} needed")]
    InsufficientGoals { needed: usize, available: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("records checksum {found} does not match manifest {expected}")]
    Checksum { expected: String, found: String },
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error("dataset invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

struct Builder<'a> {
    cfg: &'a DatasetConfig,
    template: DomainTemplate,
    rng: ChaCha8Rng,
    balls: HashMap<Puzzle, Vec<Puzzle>>,
    records: Vec<Record>,
}

impl Builder<'_> {
    /// Configurations within the distance window of `center`, in BFS order.
    fn ball(&mut self, center: &Puzzle) -> &[Puzzle] {
        let (lo, hi) = (self.cfg.min_distance, self.cfg.max_distance);
        let t = &self.template;
        self.balls.entry(*center).or_insert_with(|| t.ball(center, lo, hi).into_iter().map(|(p, _)| p).collect())
    }

    fn random_near(&mut self, center: &Puzzle) -> Option<Puzzle> {
        let mut rng = self.rng.clone();
        let pick = self.ball(center).choose(&mut rng).copied();
        self.rng = rng;
        pick
    }

    fn trace(&mut self, init: &Puzzle, goal: &Puzzle) -> PlanTrace {
        let task = self.template.task_for(init, goal);
        let cfg = SearchConfig::optimal().with_seed(self.rng.gen());
        generate_trace(&task, &cfg).expect("within node limit").expect("goals are drawn from reachable states")
    }

    fn emit(&mut self, id: &str, split: Split, trace: &PlanTrace, goal: &Puzzle, candidates: &[Puzzle], levels: &[u32]) {
        let t = &self.template;
        let codes: Vec<String> = trace.states.iter().map(|s| codec::encode_state(t, s).expect("trace states are well formed").hex()).collect();
        let names = trace.plan.names(t.task());
        let cands: Vec<String> = candidates.iter().map(|c| encode(c).hex()).collect();
        for &level in levels {
            let obs = sample_observations(trace.len(), level, self.cfg.rounding, &mut self.rng);
            self.records.push(Record {
                domain: self.cfg.domain,
                problem_id: id.to_string(),
                split,
                goal_code: encode(goal).hex(),
                candidates: cands.clone(),
                trace_states: codes.clone(),
                trace_actions: names.clone(),
                level,
                kept_indices: obs.kept_indices,
            });
        }
    }

    /// A start state and candidate list for hidden goal `goal`, with the
    /// goal at a random position among the candidates.
    fn problem(&mut self, goal: &Puzzle, avoid: &BTreeSet<Puzzle>) -> Option<(Puzzle, Vec<Puzzle>)> {
        let init = self.random_near(goal)?;
        let mut pool: Vec<Puzzle> = self.ball(&init).iter().filter(|p| *p != goal && !avoid.contains(p)).copied().collect();
        if pool.len() + 1 < self.cfg.candidates {
            return None;
        }
        pool.shuffle(&mut self.rng);
        let mut cands: Vec<Puzzle> = pool.into_iter().take(self.cfg.candidates - 1).collect();
        let at = self.rng.gen_range(0..=cands.len());
        cands.insert(at, *goal);
        Some((init, cands))
    }

    fn fresh_goal(&mut self, taken: &BTreeSet<Puzzle>) -> Result<Puzzle, DatasetError> {
        let space = self.cfg.domain.state_space_size();
        for _ in 0..10_000 {
            let p = self.template.random_puzzle(&mut self.rng);
            if !taken.contains(&p) {
                return Ok(p);
            }
        }
        Err(DatasetError::InsufficientGoals { needed: taken.len() + 1, available: space.min(taken.len()) })
    }
}

/// Generates the benchmark problems, unknown-goal problems and training
/// corpus described by `cfg`. Equal configs give equal datasets.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset, DatasetError> {
    cfg.check()?;
    let template = DomainTemplate::new(cfg.domain);
    let mut b = Builder { cfg, template, rng: ChaCha8Rng::seed_from_u64(cfg.seed), balls: HashMap::new(), records: Vec::new() };
    let all = cfg.levels.clone();
    let hanoi = cfg.domain == DomainKind::Hanoi34;
    let reference = b.template.random_puzzle(&mut b.rng);

    // hidden goals that training must never see
    let mut unknown_goals = BTreeSet::new();
    for _ in 0..cfg.unknown_problems {
        let g = b.fresh_goal(&unknown_goals)?;
        unknown_goals.insert(g);
    }

    let mut test_pairs = BTreeSet::new();
    let mut pool: BTreeSet<Puzzle> = BTreeSet::new();
    for i in 0..cfg.problems {
        let (goal, init, cands) = (0..100)
            .find_map(|_| {
                let goal = b.fresh_goal(&unknown_goals).ok()?;
                b.problem(&goal, &unknown_goals).map(|(init, cands)| (goal, init, cands))
            })
            .ok_or(DatasetError::InsufficientGoals { needed: cfg.candidates, available: 0 })?;
        let trace = b.trace(&init, &goal);
        b.emit(&format!("test-{i:03}"), Split::Test, &trace, &goal, &cands, &all);
        test_pairs.insert((init, goal));
        pool.extend(cands);
    }

    for (i, goal) in unknown_goals.clone().iter().enumerate() {
        let (init, cands) = b.problem(goal, &BTreeSet::new()).ok_or(DatasetError::InsufficientGoals { needed: cfg.candidates, available: 0 })?;
        let trace = b.trace(&init, goal);
        b.emit(&format!("unknown-{i:03}"), Split::UnknownGoalTest, &trace, goal, &cands, &all);
    }

    if cfg.traces_per_goal > 0 {
        if hanoi {
            pool = b.template.reachable_from(&reference).into_iter().collect();
        } else {
            for _ in 0..cfg.extra_goals {
                let mut taken = pool.clone();
                taken.extend(unknown_goals.iter().copied());
                let g = b.fresh_goal(&taken)?;
                pool.insert(g);
            }
        }
        pool.retain(|g| !unknown_goals.contains(g));
        let mut n = 0;
        for goal in &pool {
            let mut seen = BTreeSet::new();
            for _ in 0..cfg.traces_per_goal {
                for _attempt in 0..20 {
                    let Some(init) = b.random_near(goal) else { break };
                    if test_pairs.contains(&(init, *goal)) {
                        continue;
                    }
                    let trace = b.trace(&init, goal);
                    if !seen.insert(trace.plan.actions.clone()) {
                        continue;
                    }
                    let split = if b.rng.gen_bool(cfg.validation_fraction) { Split::Validation } else { Split::Train };
                    b.emit(&format!("train-{n:05}"), split, &trace, goal, &[], &all);
                    n += 1;
                    break;
                }
            }
        }
    }
    let ds = Dataset { config: cfg.clone(), records: b.records };
    ds.validate()?;
    Ok(ds)
}

impl Dataset {
    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn counts(&self) -> Counts {
        let mut c = Counts::default();
        let mut traces: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
        let mut goals: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.records {
            *c.records.entry(r.split).or_default() += 1;
            traces.entry(r.split).or_default().insert(&r.problem_id);
            goals.entry(r.split).or_default().insert(&r.goal_code);
        }
        c.traces = traces.into_iter().map(|(k, v)| (k, v.len())).collect();
        c.goals = goals.into_iter().map(|(k, v)| (k, v.len())).collect();
        c
    }

    /// Problems of one split, one entry per problem id in file order.
    pub fn problems(&self, split: Split) -> Vec<Vec<&Record>> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<&Record>> = HashMap::new();
        for r in self.records_in(split) {
            let g = groups.entry(&r.problem_id).or_default();
            if g.is_empty() {
                order.push(&r.problem_id);
            }
            g.push(r);
        }
        order.into_iter().map(|id| groups.remove(id).unwrap()).collect()
    }

    /// Checks every trace replays, observations are well formed and the
    /// splits are kept apart.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let t = DomainTemplate::new(self.config.domain);
        let fail = |r: &Record, m: String| DatasetError::Invariant(format!("record {} (level {}): {m}", r.problem_id, r.level));
        let mut replayed: BTreeSet<(&[String], &[String])> = BTreeSet::new();
        for r in &self.records {
            if r.domain != self.config.domain {
                return Err(fail(r, format!("domain {} in a {} dataset", r.domain, self.config.domain)));
            }
            let states = r.states()?;
            if states.len() != r.trace_actions.len() + 1 {
                return Err(fail(r, "state and action counts disagree".into()));
            }
            if replayed.insert((&r.trace_states, &r.trace_actions)) {
                let task = t.task();
                let mut s = codec::decode_state(&t, states[0])?;
                for (i, name) in r.trace_actions.iter().enumerate() {
                    let a = task.action_id(name).map_err(|e| fail(r, e.to_string()))?;
                    s = task.apply(&s, a).map_err(|e| fail(r, format!("step {}: {e}", i + 1)))?;
                    if codec::encode_state(&t, &s).map_err(|e| fail(r, e.to_string()))?.bits != states[i + 1] {
                        return Err(fail(r, format!("state {} does not follow from its action", i + 1)));
                    }
                }
                if *states.last().unwrap() != r.goal()? {
                    return Err(fail(r, "trace does not end in its goal".into()));
                }
            }
            check_observations(&r.observations(), r.trace_actions.len(), self.config.rounding).map_err(|m| fail(r, m))?;
            let cands = r.candidate_codes()?;
            let hits = cands.iter().filter(|&&c| c == r.goal().unwrap_or(u64::MAX)).count();
            let needs_candidates = matches!(r.split, Split::Test | Split::UnknownGoalTest);
            if (needs_candidates || !cands.is_empty()) && hits != 1 {
                return Err(fail(r, format!("hidden goal appears {hits} times among candidates")));
            }
        }
        let train_goals: BTreeSet<&str> = self.records.iter().filter(|r| matches!(r.split, Split::Train | Split::Validation)).map(|r| r.goal_code.as_str()).collect();
        if let Some(r) = self.records_in(Split::UnknownGoalTest).find(|r| train_goals.contains(r.goal_code.as_str())) {
            return Err(fail(r, format!("unknown-goal code {} also occurs in training", r.goal_code)));
        }
        let train_traces: BTreeSet<&[String]> = self.records.iter().filter(|r| matches!(r.split, Split::Train | Split::Validation)).map(|r| r.trace_states.as_slice()).collect();
        if let Some(r) = self.records.iter().filter(|r| matches!(r.split, Split::Test | Split::UnknownGoalTest)).find(|r| train_traces.contains(r.trace_states.as_slice())) {
            return Err(fail(r, "test trace duplicates a training trace".into()));
        }
        Ok(())
    }

    pub fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn manifest(&self, jsonl: &str) -> Manifest {
        Manifest {
            format: FORMAT.to_string(),
            config: self.config.clone(),
            counts: self.counts(),
            records_file: RECORDS_FILE.to_string(),
            records_sha256: hex_digest(jsonl.as_bytes()),
        }
    }

    /// Writes `dataset.jsonl` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest, DatasetError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let jsonl = self.records_jsonl();
        let manifest = self.manifest(&jsonl);
        let rec = dir.join(RECORDS_FILE);
        fs::write(&rec, &jsonl).map_err(io_err(&rec))?;
        let man = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&man, text).map_err(io_err(&man))?;
        Ok(manifest)
    }

    /// Reads a dataset directory (or its manifest path) and re-checks its
    /// invariants.
    pub fn read(path: &Path) -> Result<Dataset, DatasetError> {
        let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().unwrap_or(Path::new(".")).to_path_buf() };
        let man_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&man_path).map_err(io_err(&man_path))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path: man_path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if manifest.format != FORMAT {
            return Err(DatasetError::Parse { path: man_path.display().to_string(), line: 1, message: format!("unsupported format `{}`", manifest.format) });
        }
        let rec_path = dir.join(&manifest.records_file);
        let (records, bytes) = read_records(&rec_path)?;
        let found = hex_digest(&bytes);
        if found != manifest.records_sha256 {
            return Err(DatasetError::Checksum { expected: manifest.records_sha256, found });
        }
        let ds = Dataset { config: manifest.config, records };
        ds.validate()?;
        Ok(ds)
    }
}

/// Parses a JSON Lines file; errors name the 1-based line.
pub fn read_records(path: &Path) -> Result<(Vec<Record>, Vec<u8>), DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in bytes.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(|e| DatasetError::Parse { path: path.display().to_string(), line: i + 1, message: e.to_string() })?;
        records.push(r);
    }
    Ok((records, bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
