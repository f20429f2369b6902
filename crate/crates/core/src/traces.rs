//! Plan traces and partial observation sequences.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::planner::{self, Plan, SearchConfig, SearchError, Solution};
use crate::strips::{ActionId, FactId, GroundTask, State};

pub const LEVELS: [u32; 5] = [10, 30, 50, 70, 100];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanTrace {
    pub goal: Vec<FactId>,
    pub plan: Plan,
    /// Initial state followed by the state after each action.
    pub states: Vec<State>,
}

impl PlanTrace {
    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }
}

/// Plans from the task's init to its goal and records the visited states.
/// `Ok(None)` when the goal is unreachable.
pub fn generate_trace(task: &GroundTask, cfg: &SearchConfig) -> Result<Option<PlanTrace>, SearchError> {
    let Solution::Found(plan) = planner::solve(task, cfg)? else {
        return Ok(None);
    };
    let states = planner::state_trace(task, &plan).expect("planner output replays");
    Ok(Some(PlanTrace { goal: task.goal().to_vec(), plan, states }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    Round,
    Ceil,
}

/// Number of kept observations for a trace of `len` actions.
pub fn observation_count(len: usize, level: u32, rounding: Rounding) -> usize {
    if len == 0 {
        return 0;
    }
    let exact = level as f64 / 100.0 * len as f64;
    let n = match rounding {
        Rounding::Round => exact.round(),
        Rounding::Ceil => (exact - 1e-9).ceil(),
    } as usize;
    n.clamp(1, len)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    /// Executed actions.
    Action,
    /// States reached by the executed actions.
    State,
}

/// Kept positions of a trace. Position `i` stands for action `i` and for
/// the state it produced (`states[i + 1]`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub level: u32,
    pub kept_indices: Vec<usize>,
}

impl ObservationSequence {
    pub fn full(len: usize) -> Self {
        ObservationSequence { level: 100, kept_indices: (0..len).collect() }
    }

    pub fn actions(&self, trace: &PlanTrace) -> Vec<ActionId> {
        self.kept_indices.iter().map(|&i| trace.plan.actions[i]).collect()
    }

    pub fn states<'t>(&self, trace: &'t PlanTrace) -> Vec<&'t State> {
        self.kept_indices.iter().map(|&i| &trace.states[i + 1]).collect()
    }

    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

/// Uniformly chooses which positions of a `len`-action trace survive at
/// `level` percent, keeping their order.
pub fn sample_observations<R: Rng + ?Sized>(len: usize, level: u32, rounding: Rounding, rng: &mut R) -> ObservationSequence {
    assert!((1..=100).contains(&level), "observability level must be a percentage");
    let n = observation_count(len, level, rounding);
    let mut kept = if n == len { (0..len).collect() } else { index::sample(rng, len, n).into_vec() };
    kept.sort_unstable();
    ObservationSequence { level, kept_indices: kept }
}

/// Whether `seq` is a valid observation sequence of a `len`-action trace.
pub fn check_observations(seq: &ObservationSequence, len: usize, rounding: Rounding) -> Result<(), String> {
    if seq.kept_indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("kept indices {:?} are not strictly increasing", seq.kept_indices));
    }
    if seq.kept_indices.last().is_some_and(|&i| i >= len) {
        return Err(format!("kept index beyond trace of length {len}"));
    }
    let want = observation_count(len, seq.level, rounding);
    if seq.len() != want {
        return Err(format!("{} observations kept at level {} of {len}, expected {want}", seq.len(), seq.level));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts() {
        assert_eq!(observation_count(10, 30, Rounding::Round), 3);
        assert_eq!(observation_count(7, 30, Rounding::Round), 2);
        assert_eq!(observation_count(7, 30, Rounding::Ceil), 3);
        assert_eq!(observation_count(10, 30, Rounding::Ceil), 3);
        assert_eq!(observation_count(3, 10, Rounding::Round), 1);
        assert_eq!(observation_count(0, 50, Rounding::Round), 0);
        assert_eq!(observation_count(9, 100, Rounding::Ceil), 9);
    }

    #[test]
    fn sampling_keeps_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_observations(10, 30, Rounding::Round, &mut rng);
        assert_eq!(s.len(), 3);
        check_observations(&s, 10, Rounding::Round).unwrap();
        assert_eq!(sample_observations(6, 100, Rounding::Round, &mut rng), ObservationSequence::full(6));
        assert!(check_observations(&ObservationSequence { level: 30, kept_indices: vec![2, 1, 5] }, 10, Rounding::Round).is_err());
    }
}
