//! Runs recognizers over dataset problems and aggregates Time / Accuracy /
//! Spread per domain and observability level.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{self, bit_agreement, CodecError};
use crate::dataset::{Dataset, DatasetError, Record, Split};
use crate::domains::{DomainKind, DomainTemplate};
use crate::neural::{model_input, predict_goal, ForwardError, LstmModel};
use crate::planner::SearchConfig;
use crate::recognition::{recognize_pom, PomHeuristic, RecognitionProblem, RecognitionResult};
use crate::rg::{recognize_rg, CostCache};
use crate::strips::{FactId, StripsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recognizer {
    PomGc,
    PomUniq,
    Rg,
    Lstm,
}

impl Recognizer {
    pub const ALL: [Recognizer; 4] = [Recognizer::PomGc, Recognizer::PomUniq, Recognizer::Rg, Recognizer::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            Recognizer::PomGc => "pom_gc",
            Recognizer::PomUniq => "pom_uniq",
            Recognizer::Rg => "rg",
            Recognizer::Lstm => "lstm",
        }
    }

    pub fn uses_theta(self) -> bool {
        matches!(self, Recognizer::PomGc | Recognizer::PomUniq)
    }
}

impl FromStr for Recognizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Recognizer::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| format!("unknown recognizer `{s}` (expected pom_gc, pom_uniq, rg or lstm)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub recognizers: Vec<Recognizer>,
    pub thetas: Vec<f64>,
    /// Levels to run; empty means every level in the dataset.
    pub levels: Vec<u32>,
    /// Search limits for the cost-difference recognizer.
    pub search: SearchConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { recognizers: Recognizer::ALL.to_vec(), thetas: vec![0.0, 10.0], levels: Vec::new(), search: SearchConfig::optimal() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("the lstm recognizer needs a checkpoint")]
    MissingCheckpoint,
    #[error("checkpoint is for {model} but the dataset is {dataset}")]
    DomainMismatch { model: DomainKind, dataset: DomainKind },
    #[error("dataset has no {0} records")]
    MissingSplit(Split),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Strips(#[from] StripsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

/// Outcome of one recognizer on one problem at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub domain: DomainKind,
    pub problem_id: String,
    pub level: u32,
    pub observations: usize,
    pub candidates: usize,
    pub recognizer: Recognizer,
    pub theta: Option<f64>,
    pub correct: bool,
    pub strict: bool,
    pub spread: usize,
    pub returned: Vec<usize>,
    pub flagged: usize,
    pub time_secs: f64,
}

/// Aggregate over the problems of one (domain, level, recognizer, θ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub domain: DomainKind,
    pub level: u32,
    pub recognizer: Recognizer,
    pub theta: Option<f64>,
    pub problems: usize,
    pub mean_candidates: f64,
    pub mean_observations: f64,
    /// Percent of problems whose hidden goal is among those returned.
    pub accuracy: f64,
    /// Percent of problems where exactly the hidden goal is returned.
    pub strict_accuracy: f64,
    pub mean_spread: f64,
    pub flagged: usize,
    pub mean_time_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub problems: Vec<ProblemRow>,
}

struct ProblemInput<'a> {
    id: &'a str,
    init: u64,
    goal_index: usize,
    candidates: Vec<u64>,
    records: Vec<&'a Record>,
}

fn load_problem<'a>(records: Vec<&'a Record>) -> Result<ProblemInput<'a>, BenchError> {
    let first = records[0];
    let candidates = first.candidate_codes()?;
    let goal = first.goal()?;
    let goal_index = candidates.iter().position(|&c| c == goal).ok_or_else(|| DatasetError::Invariant(format!("{}: hidden goal missing from candidates", first.problem_id)))?;
    Ok(ProblemInput { id: &first.problem_id, init: first.states()?[0], goal_index, candidates, records })
}

fn candidate_facts(t: &DomainTemplate, codes: &[u64]) -> Result<Vec<Vec<FactId>>, BenchError> {
    codes.iter().map(|&c| Ok(t.goal_of(&codec::decode(t.kind(), c)?))).collect()
}

/// Runs every configured recognizer on the dataset's test problems.
pub fn run_bench(ds: &Dataset, model: Option<&LstmModel>, cfg: &BenchConfig) -> Result<BenchOutput, BenchError> {
    if cfg.recognizers.is_empty() {
        return Err(BenchError::Config("no recognizers selected".into()));
    }
    if cfg.thetas.iter().any(|t| !(0.0..=100.0).contains(t)) {
        return Err(BenchError::Config("theta must lie in [0, 100]".into()));
    }
    if cfg.recognizers.contains(&Recognizer::Lstm) {
        let m = model.ok_or(BenchError::MissingCheckpoint)?;
        if m.domain != ds.config.domain {
            return Err(BenchError::DomainMismatch { model: m.domain, dataset: ds.config.domain });
        }
    }
    let groups = ds.problems(Split::Test);
    if groups.is_empty() {
        return Err(BenchError::MissingSplit(Split::Test));
    }
    let t = DomainTemplate::new(ds.config.domain);
    let mut cache = CostCache::new();
    let mut out = BenchOutput::default();
    for group in groups {
        let p = load_problem(group)?;
        let init = t.state_of(&codec::decode(t.kind(), p.init)?);
        let cand_facts = candidate_facts(&t, &p.candidates)?;
        let task = t.task().with_init_goal(init, cand_facts[p.goal_index].clone());
        for r in &p.records {
            if !cfg.levels.is_empty() && !cfg.levels.contains(&r.level) {
                continue;
            }
            let obs: Vec<usize> = r.kept_indices.iter().map(|&i| task.action_id(&r.trace_actions[i])).collect::<Result<_, _>>()?;
            let problem = RecognitionProblem::new(task.clone(), cand_facts.clone(), obs)?;
            let mut push = |recognizer: Recognizer, theta: Option<f64>, res: &RecognitionResult| {
                out.problems.push(ProblemRow {
                    domain: ds.config.domain,
                    problem_id: p.id.to_string(),
                    level: r.level,
                    observations: r.kept_indices.len(),
                    candidates: p.candidates.len(),
                    recognizer,
                    theta,
                    correct: res.contains(p.goal_index),
                    strict: res.returned == [p.goal_index],
                    spread: res.spread(),
                    returned: res.returned.clone(),
                    flagged: res.flagged.len(),
                    time_secs: res.elapsed_secs,
                });
            };
            for &rec in &cfg.recognizers {
                match rec {
                    Recognizer::PomGc | Recognizer::PomUniq => {
                        let h = if rec == Recognizer::PomGc { PomHeuristic::GoalCompletion } else { PomHeuristic::Uniqueness };
                        for &theta in &cfg.thetas {
                            push(rec, Some(theta), &recognize_pom(&problem, h, theta));
                        }
                    }
                    Recognizer::Rg => {
                        let res = recognize_rg(&problem, &cfg.search, &mut cache)?;
                        push(rec, None, &res.result);
                    }
                    Recognizer::Lstm => {
                        let m = model.expect("checked above");
                        let pred = predict_goal(m, &model_input(r, m.train.include_init)?, &p.candidates)?;
                        push(rec, None, &pred.result);
                    }
                }
            }
        }
    }
    out.rows = aggregate(&out.problems);
    Ok(out)
}

fn theta_key(theta: Option<f64>) -> i64 {
    theta.map_or(-1, |t| (t * 1000.0).round() as i64)
}

pub fn aggregate(problems: &[ProblemRow]) -> Vec<BenchRow> {
    let mut groups: BTreeMap<(DomainKind, u32, Recognizer, i64), Vec<&ProblemRow>> = BTreeMap::new();
    for p in problems {
        groups.entry((p.domain, p.level, p.recognizer, theta_key(p.theta))).or_default().push(p);
    }
    // levels in descending order, as the tables print them
    let mut rows: Vec<BenchRow> = groups
        .into_values()
        .map(|ps| {
            let n = ps.len() as f64;
            let mean = |f: &dyn Fn(&ProblemRow) -> f64| ps.iter().map(|p| f(p)).sum::<f64>() / n;
            BenchRow {
                domain: ps[0].domain,
                level: ps[0].level,
                recognizer: ps[0].recognizer,
                theta: ps[0].theta,
                problems: ps.len(),
                mean_candidates: mean(&|p| p.candidates as f64),
                mean_observations: mean(&|p| p.observations as f64),
                accuracy: 100.0 * mean(&|p| p.correct as u8 as f64),
                strict_accuracy: 100.0 * mean(&|p| p.strict as u8 as f64),
                mean_spread: mean(&|p| p.spread as f64),
                flagged: ps.iter().map(|p| p.flagged).sum(),
                mean_time_secs: mean(&|p| p.time_secs),
            }
        })
        .collect();
    rows.sort_by(|a, b| (a.domain, std::cmp::Reverse(a.level), a.recognizer, theta_key(a.theta)).cmp(&(b.domain, std::cmp::Reverse(b.level), b.recognizer, theta_key(b.theta))));
    rows
}

fn theta_cell(theta: Option<f64>) -> String {
    theta.map_or(String::new(), |t| format!("{t}"))
}

pub const ROWS_HEADER: &str = "domain,level,recognizer,theta,problems,mean_candidates,mean_observations,accuracy,strict_accuracy,mean_spread,flagged,mean_time_s";
pub const PROBLEMS_HEADER: &str = "domain,problem_id,level,observations,candidates,recognizer,theta,correct,strict,spread,returned,flagged,time_s";

/// Aggregate rows as CSV. The timing column is always last.
pub fn rows_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(ROWS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3},{:.3},{:.1},{:.1},{:.3},{},{:.6}",
            r.domain,
            r.level,
            r.recognizer.name(),
            theta_cell(r.theta),
            r.problems,
            r.mean_candidates,
            r.mean_observations,
            r.accuracy,
            r.strict_accuracy,
            r.mean_spread,
            r.flagged,
            r.mean_time_secs
        );
    }
    s
}

/// Per-problem CSV. The timing column is always last.
pub fn problems_csv(problems: &[ProblemRow]) -> String {
    let mut s = String::from(PROBLEMS_HEADER);
    s.push('\n');
    for p in problems {
        let returned: Vec<String> = p.returned.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
            p.domain,
            p.problem_id,
            p.level,
            p.observations,
            p.candidates,
            p.recognizer.name(),
            theta_cell(p.theta),
            p.correct,
            p.strict,
            p.spread,
            returned.join(" "),
            p.flagged,
            p.time_secs
        );
    }
    s
}

/// Drops the trailing timing column from each CSV line, leaving the part
/// that must be reproducible byte for byte.
pub fn strip_timing(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n") + "\n"
}

/// Table in the column order Time, Accuracy, Spread per recognizer.
pub fn rows_table(rows: &[BenchRow]) -> String {
    let mut columns: Vec<(Recognizer, Option<f64>)> = Vec::new();
    for r in rows {
        if !columns.iter().any(|&(rec, th)| rec == r.recognizer && theta_key(th) == theta_key(r.theta)) {
            columns.push((r.recognizer, r.theta));
        }
    }
    columns.sort_by_key(|&(rec, th)| (rec, theta_key(th)));
    let label = |(rec, th): (Recognizer, Option<f64>)| match th {
        Some(t) => format!("{} θ={t}", rec.name()),
        None => rec.name().to_string(),
    };
    let mut s = String::new();
    let _ = write!(s, "{:<13} {:>5} {:>5} {:>6}", "domain", "|G|", "obs%", "|O|");
    for &c in &columns {
        let _ = write!(s, " | {:^27}", label(c));
    }
    s.push('\n');
    let _ = write!(s, "{:<13} {:>5} {:>5} {:>6}", "", "", "", "");
    for _ in &columns {
        let _ = write!(s, " | {:>9} {:>8} {:>8}", "time(s)", "acc%", "spread");
    }
    s.push('\n');
    let mut keys: Vec<(DomainKind, u32)> = rows.iter().map(|r| (r.domain, r.level)).collect();
    keys.dedup();
    for (domain, level) in keys {
        let here: Vec<&BenchRow> = rows.iter().filter(|r| r.domain == domain && r.level == level).collect();
        let _ = write!(s, "{:<13} {:>5.1} {:>5} {:>6.1}", domain.name(), here[0].mean_candidates, level, here[0].mean_observations);
        for &(rec, th) in &columns {
            match here.iter().find(|r| r.recognizer == rec && theta_key(r.theta) == theta_key(th)) {
                Some(r) => {
                    let _ = write!(s, " | {:>9.4} {:>8.1} {:>8.2}", r.mean_time_secs, r.accuracy, r.mean_spread);
                }
                None => {
                    let _ = write!(s, " | {:>9} {:>8} {:>8}", "-", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Unknown-goal evaluation for one level, or all levels when `level` is
/// `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownRow {
    pub domain: DomainKind,
    pub level: Option<u32>,
    pub problems: usize,
    pub records: usize,
    /// Mean fraction of thresholded output bits equal to the true goal code.
    pub reconstruction: f64,
    /// Share of records whose thresholded output is exactly the goal code.
    pub exact_rate: f64,
    /// Share of records where the nearest candidate is the hidden goal.
    pub candidate_accuracy: f64,
}

pub fn run_unknown(ds: &Dataset, model: &LstmModel) -> Result<Vec<UnknownRow>, BenchError> {
    if model.domain != ds.config.domain {
        return Err(BenchError::DomainMismatch { model: model.domain, dataset: ds.config.domain });
    }
    let recs: Vec<&Record> = ds.records_in(Split::UnknownGoalTest).collect();
    if recs.is_empty() {
        return Err(BenchError::MissingSplit(Split::UnknownGoalTest));
    }
    let mut by_level: BTreeMap<u32, Vec<(f64, bool, bool, &str)>> = BTreeMap::new();
    for r in recs {
        let goal = r.goal()?;
        let pred = predict_goal(model, &model_input(r, model.train.include_init)?, &r.candidate_codes()?)?;
        let th = pred.nearest.thresholded;
        by_level.entry(r.level).or_default().push((bit_agreement(th, goal), th == goal, pred.nearest.code == goal, &r.problem_id));
    }
    let row = |level: Option<u32>, xs: &[(f64, bool, bool, &str)]| {
        let n = xs.len() as f64;
        let ids: std::collections::BTreeSet<&str> = xs.iter().map(|x| x.3).collect();
        UnknownRow {
            domain: ds.config.domain,
            level,
            problems: ids.len(),
            records: xs.len(),
            reconstruction: xs.iter().map(|x| x.0).sum::<f64>() / n,
            exact_rate: xs.iter().filter(|x| x.1).count() as f64 / n,
            candidate_accuracy: xs.iter().filter(|x| x.2).count() as f64 / n,
        }
    };
    let mut rows: Vec<UnknownRow> = by_level.iter().rev().map(|(&l, xs)| row(Some(l), xs)).collect();
    let all: Vec<_> = by_level.into_values().flatten().collect();
    rows.push(row(None, &all));
    Ok(rows)
}

pub const UNKNOWN_HEADER: &str = "domain,level,problems,records,reconstruction,exact_rate,candidate_accuracy";

pub fn unknown_csv(rows: &[UnknownRow]) -> String {
    let mut s = String::from(UNKNOWN_HEADER);
    s.push('\n');
    for r in rows {
        let level = r.level.map_or("all".to_string(), |l| l.to_string());
        let _ = writeln!(s, "{},{},{},{},{:.4},{:.4},{:.4}", r.domain, level, r.problems, r.records, r.reconstruction, r.exact_rate, r.candidate_accuracy);
    }
    s
}

pub fn unknown_table(rows: &[UnknownRow]) -> String {
    let mut s = format!("{:<13} {:>5} {:>9} {:>8} {:>15} {:>12} {:>14}\n", "domain", "obs%", "problems", "records", "reconstruction", "exact goal", "nearest goal");
    for r in rows {
        let level = r.level.map_or("all".to_string(), |l| l.to_string());
        let _ = writeln!(
            s,
            "{:<13} {:>5} {:>9} {:>8} {:>14.1}% {:>11.1}% {:>13.1}%",
            r.domain.name(),
            level,
            r.problems,
            r.records,
            100.0 * r.reconstruction,
            100.0 * r.exact_rate,
            100.0 * r.candidate_accuracy
        );
    }
    s
}
