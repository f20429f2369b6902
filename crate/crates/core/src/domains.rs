//! The three puzzle domains: PDDL fixtures, object sets, and conversions
//! between compact puzzle configurations and STRIPS states.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::planner;
use crate::strips::{self, ActionId, Atom, DomainModel, FactId, GroundTask, ProblemSpec, State, TypedName};

pub const HANOI_DOMAIN: &str = include_str!("../domains/hanoi.pddl");
pub const EIGHT_PUZZLE_DOMAIN: &str = include_str!("../domains/eight-puzzle.pddl");
pub const LIGHTS_OUT_DOMAIN: &str = include_str!("../domains/lights-out.pddl");

pub const HANOI_DISKS: usize = 3;
pub const HANOI_PEGS: usize = 4;
pub const LIGHTS_SIDE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Hanoi34,
    EightPuzzle,
    LightsOut4,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [DomainKind::Hanoi34, DomainKind::EightPuzzle, DomainKind::LightsOut4];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Hanoi34 => "hanoi34",
            DomainKind::EightPuzzle => "eight_puzzle",
            DomainKind::LightsOut4 => "lights_out4",
        }
    }

    /// Size of the configuration space the codec covers.
    pub fn state_space_size(self) -> usize {
        match self {
            DomainKind::Hanoi34 => HANOI_PEGS.pow(HANOI_DISKS as u32),
            // one parity class of the 9! tile arrangements
            DomainKind::EightPuzzle => 181_440,
            DomainKind::LightsOut4 => 1 << (LIGHTS_SIDE * LIGHTS_SIDE),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown domain `{s}` (expected hanoi34, eight_puzzle or lights_out4)"))
    }
}

/// A complete puzzle configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Puzzle {
    /// Peg index (0..4) of each disk, smallest disk first.
    Hanoi([u8; HANOI_DISKS]),
    /// Tile in each cell, row-major; 0 is the blank.
    EightPuzzle([u8; 9]),
    /// Bit `k` set when light `k` (row-major) is on.
    LightsOut(u16),
}

impl Puzzle {
    pub fn kind(&self) -> DomainKind {
        match self {
            Puzzle::Hanoi(_) => DomainKind::Hanoi34,
            Puzzle::EightPuzzle(_) => DomainKind::EightPuzzle,
            Puzzle::LightsOut(_) => DomainKind::LightsOut4,
        }
    }

    pub fn eight_puzzle_solved() -> Puzzle {
        Puzzle::EightPuzzle([0, 1, 2, 3, 4, 5, 6, 7, 8])
    }

    /// Compact text rendering, one row per line.
    pub fn render(&self) -> String {
        match self {
            Puzzle::Hanoi(pegs) => (0..HANOI_PEGS)
                .map(|p| {
                    let disks: Vec<String> = (0..HANOI_DISKS).rev().filter(|&d| pegs[d] as usize == p).map(|d| (d + 1).to_string()).collect();
                    format!("p{}| {}", p + 1, disks.join(" "))
                })
                .collect::<Vec<_>>()
                .join("\n"),
            Puzzle::EightPuzzle(cells) => cells
                .chunks(3)
                .map(|row| row.iter().map(|&t| if t == 0 { ".".to_string() } else { t.to_string() }).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join("\n"),
            Puzzle::LightsOut(bits) => (0..LIGHTS_SIDE)
                .map(|r| (0..LIGHTS_SIDE).map(|c| if bits >> (r * LIGHTS_SIDE + c) & 1 == 1 { '#' } else { '.' }).collect::<String>())
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

fn disk(i: usize) -> String {
    format!("d{}", i + 1)
}

fn peg(i: usize) -> String {
    format!("p{}", i + 1)
}

fn tile(i: usize) -> String {
    format!("t{i}")
}

fn cell9(i: usize) -> String {
    format!("c{i}")
}

fn light(k: usize) -> String {
    format!("c{}{}", k / LIGHTS_SIDE, k % LIGHTS_SIDE)
}

fn grid_neighbors(k: usize, side: usize) -> Vec<usize> {
    let (r, c) = (k / side, k % side);
    let mut out = Vec::new();
    if r > 0 {
        out.push(k - side);
    }
    if c > 0 {
        out.push(k - 1);
    }
    if c + 1 < side {
        out.push(k + 1);
    }
    if r + 1 < side {
        out.push(k + side);
    }
    out
}

/// Lights toggled by pressing light `k`, as a bit mask.
pub fn lights_press_mask(k: usize) -> u16 {
    grid_neighbors(k, LIGHTS_SIDE).into_iter().fold(1u16 << k, |m, n| m | 1 << n)
}

/// Raised when a STRIPS state is not a well-formed configuration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed {kind} state: {reason}")]
pub struct MalformedState {
    pub kind: DomainKind,
    pub reason: String,
}

/// A grounded domain ready to instantiate problems. All problems built
/// from one template share its fact table and action list.
#[derive(Clone, Debug)]
pub struct DomainTemplate {
    kind: DomainKind,
    model: DomainModel,
    objects: Vec<TypedName>,
    static_atoms: Vec<Atom>,
    task: GroundTask,
    static_facts: Vec<FactId>,
}

impl DomainTemplate {
    pub fn new(kind: DomainKind) -> DomainTemplate {
        let text = match kind {
            DomainKind::Hanoi34 => HANOI_DOMAIN,
            DomainKind::EightPuzzle => EIGHT_PUZZLE_DOMAIN,
            DomainKind::LightsOut4 => LIGHTS_OUT_DOMAIN,
        };
        let model = strips::parse_domain(text).expect("bundled domain parses");
        let (objects, static_atoms) = match kind {
            DomainKind::Hanoi34 => hanoi_objects(),
            DomainKind::EightPuzzle => eight_puzzle_objects(),
            DomainKind::LightsOut4 => lights_objects(),
        };
        let reference = match kind {
            DomainKind::Hanoi34 => Puzzle::Hanoi([0; HANOI_DISKS]),
            DomainKind::EightPuzzle => Puzzle::eight_puzzle_solved(),
            DomainKind::LightsOut4 => Puzzle::LightsOut(0),
        };
        // Every fluent atom of every configuration is listed so the fact
        // table does not depend on which configuration seeded it.
        let mut universe_atoms = static_atoms.clone();
        universe_atoms.extend(all_fluent_atoms(kind));
        let spec = ProblemSpec {
            name: format!("{}-template", kind.name()),
            domain: model.name.clone(),
            objects: objects.clone(),
            init: static_atoms.iter().cloned().chain(fluent_atoms(&reference)).collect(),
            goal: Vec::new(),
            candidates: Some(vec![universe_atoms]),
        };
        let task = strips::ground(&model, &spec).expect("bundled problem grounds");
        let static_facts = task.resolve(&static_atoms).expect("static atoms are facts");
        DomainTemplate { kind, model, objects, static_atoms, task, static_facts }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn model(&self) -> &DomainModel {
        &self.model
    }

    /// The grounded template task (its init is a reference configuration).
    pub fn task(&self) -> &GroundTask {
        &self.task
    }

    pub fn state_of(&self, p: &Puzzle) -> State {
        assert_eq!(p.kind(), self.kind, "configuration from another domain");
        let fluent = self.task.resolve(&fluent_atoms(p)).expect("fluent atoms are facts");
        State::from_facts(self.task.num_facts(), self.static_facts.iter().copied().chain(fluent))
    }

    /// Goal fact set describing the whole configuration (fluent facts only).
    pub fn goal_of(&self, p: &Puzzle) -> Vec<FactId> {
        self.task.resolve(&fluent_atoms(p)).expect("fluent atoms are facts")
    }

    pub fn task_for(&self, init: &Puzzle, goal: &Puzzle) -> GroundTask {
        self.task.with_init_goal(self.state_of(init), self.goal_of(goal))
    }

    pub fn malformed(&self, reason: impl Into<String>) -> MalformedState {
        MalformedState { kind: self.kind, reason: reason.into() }
    }

    /// Reads a configuration back from a state, rejecting anything that is
    /// not exactly the state of some configuration.
    pub fn puzzle_of(&self, s: &State) -> Result<Puzzle, MalformedState> {
        if s.universe() != self.task.num_facts() {
            return Err(self.malformed("state belongs to a different task"));
        }
        let facts = self.task.facts();
        let holds = |pred: &str, args: &[String]| -> bool {
            facts.id(&Atom { predicate: pred.to_string(), args: args.to_vec() }).is_some_and(|f| s.contains(f))
        };
        let p = match self.kind {
            DomainKind::Hanoi34 => {
                let places: Vec<String> = (0..HANOI_DISKS).map(disk).chain((0..HANOI_PEGS).map(peg)).collect();
                let mut support = [0usize; HANOI_DISKS];
                for (d, slot) in support.iter_mut().enumerate() {
                    let under: Vec<usize> = (0..places.len()).filter(|&pl| holds("on", &[disk(d), places[pl].clone()])).collect();
                    match under.as_slice() {
                        [one] => *slot = *one,
                        [] => return Err(self.malformed(format!("disk {} is on nothing", disk(d)))),
                        _ => return Err(self.malformed(format!("disk {} is on several places", disk(d)))),
                    }
                }
                let mut pegs = [0u8; HANOI_DISKS];
                for d in 0..HANOI_DISKS {
                    let mut cur = support[d];
                    let mut hops = 0;
                    while cur < HANOI_DISKS {
                        cur = support[cur];
                        hops += 1;
                        if hops > HANOI_DISKS {
                            return Err(self.malformed("disks stacked in a cycle"));
                        }
                    }
                    pegs[d] = (cur - HANOI_DISKS) as u8;
                }
                Puzzle::Hanoi(pegs)
            }
            DomainKind::EightPuzzle => {
                let mut cells = [0u8; 9];
                for (c, slot) in cells.iter_mut().enumerate() {
                    let mut found: Vec<u8> = (1..9).filter(|&t| holds("at", &[tile(t), cell9(c)])).map(|t| t as u8).collect();
                    if holds("blank", &[cell9(c)]) {
                        found.push(0);
                    }
                    match found.as_slice() {
                        [one] => *slot = *one,
                        [] => return Err(self.malformed(format!("cell {} has no tile", cell9(c)))),
                        _ => return Err(self.malformed(format!("cell {} holds several tiles", cell9(c)))),
                    }
                }
                Puzzle::EightPuzzle(cells)
            }
            DomainKind::LightsOut4 => {
                let mut bits = 0u16;
                for k in 0..LIGHTS_SIDE * LIGHTS_SIDE {
                    match (holds("lit", &[light(k)]), holds("dark", &[light(k)])) {
                        (true, false) => bits |= 1 << k,
                        (false, true) => {}
                        _ => return Err(self.malformed(format!("light {} is neither or both on and off", light(k)))),
                    }
                }
                Puzzle::LightsOut(bits)
            }
        };
        validate_puzzle(&p).map_err(|r| self.malformed(r))?;
        if self.state_of(&p) != *s {
            return Err(self.malformed("state has facts outside its configuration"));
        }
        Ok(p)
    }

    /// Configuration after one action, with the action id.
    pub fn successors(&self, p: &Puzzle) -> Vec<(ActionId, Puzzle)> {
        let s = self.state_of(p);
        self.task
            .actions()
            .iter()
            .enumerate()
            .filter(|(_, a)| s.satisfies(&a.pre))
            .map(|(id, _)| (id, self.puzzle_of(&self.task.successor(&s, id)).expect("transitions keep states well formed")))
            .collect()
    }

    /// Configurations within `[min_depth, max_depth]` steps of `center`,
    /// in breadth-first order.
    pub fn ball(&self, center: &Puzzle, min_depth: usize, max_depth: usize) -> Vec<(Puzzle, usize)> {
        let start = self.state_of(center);
        planner::explore(&self.task, &start, Some(max_depth))
            .into_iter()
            .filter(|(_, d)| *d >= min_depth)
            .map(|(s, d)| (self.puzzle_of(&s).expect("reachable states are well formed"), d))
            .collect()
    }

    /// Every configuration reachable from `from`.
    pub fn reachable_from(&self, from: &Puzzle) -> Vec<Puzzle> {
        let start = self.state_of(from);
        planner::explore(&self.task, &start, None)
            .into_iter()
            .map(|(s, _)| self.puzzle_of(&s).expect("reachable states are well formed"))
            .collect()
    }

    /// Uniformly random configuration reachable from the reference one.
    pub fn random_puzzle<R: Rng + ?Sized>(&self, rng: &mut R) -> Puzzle {
        match self.kind {
            DomainKind::Hanoi34 => {
                let mut pegs = [0u8; HANOI_DISKS];
                for p in &mut pegs {
                    *p = rng.gen_range(0..HANOI_PEGS as u8);
                }
                Puzzle::Hanoi(pegs)
            }
            DomainKind::EightPuzzle => loop {
                let mut cells = [0u8, 1, 2, 3, 4, 5, 6, 7, 8];
                cells.shuffle(rng);
                let p = Puzzle::EightPuzzle(cells);
                if eight_puzzle_solvable(&cells) {
                    return p;
                }
            },
            DomainKind::LightsOut4 => {
                let mut bits = 0u16;
                for k in 0..LIGHTS_SIDE * LIGHTS_SIDE {
                    if rng.gen_bool(0.5) {
                        bits ^= lights_press_mask(k);
                    }
                }
                Puzzle::LightsOut(bits)
            }
        }
    }

    /// A PDDL problem for `init` with goal `goal` and optional candidates.
    pub fn problem_spec(&self, name: &str, init: &Puzzle, goal: &Puzzle, candidates: Option<&[Puzzle]>) -> ProblemSpec {
        ProblemSpec {
            name: name.to_string(),
            domain: self.model.name.clone(),
            objects: self.objects.clone(),
            init: self.static_atoms.iter().cloned().chain(fluent_atoms(init)).collect(),
            goal: fluent_atoms(goal),
            candidates: candidates.map(|cs| cs.iter().map(fluent_atoms).collect()),
        }
    }
}

/// Tile arrangements reachable from the solved configuration: an even number
/// of inversions among the non-blank tiles (3 columns is odd).
pub fn eight_puzzle_solvable(cells: &[u8; 9]) -> bool {
    let tiles: Vec<u8> = cells.iter().copied().filter(|&t| t != 0).collect();
    let mut inversions = 0;
    for i in 0..tiles.len() {
        for j in i + 1..tiles.len() {
            if tiles[i] > tiles[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 0
}

pub(crate) fn validate_puzzle(p: &Puzzle) -> Result<(), String> {
    match p {
        Puzzle::Hanoi(pegs) => {
            if let Some(&bad) = pegs.iter().find(|&&x| x as usize >= HANOI_PEGS) {
                return Err(format!("peg index {bad} out of range"));
            }
        }
        Puzzle::EightPuzzle(cells) => {
            let mut seen = [false; 9];
            for &t in cells {
                if t > 8 {
                    return Err(format!("tile {t} out of range"));
                }
                if seen[t as usize] {
                    return Err(format!("tile {t} appears twice"));
                }
                seen[t as usize] = true;
            }
        }
        Puzzle::LightsOut(_) => {}
    }
    Ok(())
}

fn fluent_atoms(p: &Puzzle) -> Vec<Atom> {
    match p {
        Puzzle::Hanoi(pegs) => {
            let mut atoms = Vec::new();
            for pg in 0..HANOI_PEGS {
                // largest disk at the bottom
                let mut below = peg(pg);
                for d in (0..HANOI_DISKS).rev().filter(|&d| pegs[d] as usize == pg) {
                    atoms.push(Atom::new("on", [disk(d), below.clone()]));
                    below = disk(d);
                }
                atoms.push(Atom::new("clear", [below]));
            }
            atoms
        }
        Puzzle::EightPuzzle(cells) => cells
            .iter()
            .enumerate()
            .map(|(c, &t)| if t == 0 { Atom::new("blank", [cell9(c)]) } else { Atom::new("at", [tile(t as usize), cell9(c)]) })
            .collect(),
        Puzzle::LightsOut(bits) => (0..LIGHTS_SIDE * LIGHTS_SIDE)
            .map(|k| Atom::new(if bits >> k & 1 == 1 { "lit" } else { "dark" }, [light(k)]))
            .collect(),
    }
}

fn all_fluent_atoms(kind: DomainKind) -> Vec<Atom> {
    match kind {
        DomainKind::Hanoi34 => {
            let places: Vec<String> = (0..HANOI_DISKS).map(disk).chain((0..HANOI_PEGS).map(peg)).collect();
            let mut atoms: Vec<Atom> = places.iter().map(|p| Atom::new("clear", [p.clone()])).collect();
            for d in 0..HANOI_DISKS {
                for p in &places {
                    atoms.push(Atom::new("on", [disk(d), p.clone()]));
                }
            }
            atoms
        }
        DomainKind::EightPuzzle => {
            let mut atoms: Vec<Atom> = (0..9).map(|c| Atom::new("blank", [cell9(c)])).collect();
            for t in 1..9 {
                for c in 0..9 {
                    atoms.push(Atom::new("at", [tile(t), cell9(c)]));
                }
            }
            atoms
        }
        DomainKind::LightsOut4 => (0..LIGHTS_SIDE * LIGHTS_SIDE)
            .flat_map(|k| [Atom::new("lit", [light(k)]), Atom::new("dark", [light(k)])])
            .collect(),
    }
}

fn hanoi_objects() -> (Vec<TypedName>, Vec<Atom>) {
    let mut objects: Vec<TypedName> = (0..HANOI_DISKS).map(|d| TypedName::new(disk(d), "disk")).collect();
    objects.extend((0..HANOI_PEGS).map(|p| TypedName::new(peg(p), "peg")));
    let mut statics = Vec::new();
    for d in 0..HANOI_DISKS {
        for larger in d + 1..HANOI_DISKS {
            statics.push(Atom::new("smaller", [disk(d), disk(larger)]));
        }
        for p in 0..HANOI_PEGS {
            statics.push(Atom::new("smaller", [disk(d), peg(p)]));
        }
    }
    (objects, statics)
}

fn eight_puzzle_objects() -> (Vec<TypedName>, Vec<Atom>) {
    let mut objects: Vec<TypedName> = (1..9).map(|t| TypedName::new(tile(t), "tile")).collect();
    objects.extend((0..9).map(|c| TypedName::new(cell9(c), "cell")));
    let statics = (0..9).flat_map(|c| grid_neighbors(c, 3).into_iter().map(move |n| Atom::new("adjacent", [cell9(c), cell9(n)]))).collect();
    (objects, statics)
}

fn lights_objects() -> (Vec<TypedName>, Vec<Atom>) {
    let n = LIGHTS_SIDE * LIGHTS_SIDE;
    let objects = (0..n).map(|k| TypedName::new(light(k), "cell")).collect();
    let statics = (0..n)
        .map(|k| {
            let nbrs = grid_neighbors(k, LIGHTS_SIDE);
            let shape = match nbrs.len() {
                2 => "nbr-corner",
                3 => "nbr-edge",
                _ => "nbr-inner",
            };
            Atom::new(shape, std::iter::once(light(k)).chain(nbrs.into_iter().map(light)))
        })
        .collect();
    (objects, statics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_through_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in DomainKind::ALL {
            let t = DomainTemplate::new(kind);
            for _ in 0..50 {
                let p = t.random_puzzle(&mut rng);
                assert_eq!(t.puzzle_of(&t.state_of(&p)).unwrap(), p);
            }
        }
    }

    #[test]
    fn hanoi_stack_atoms() {
        let t = DomainTemplate::new(DomainKind::Hanoi34);
        let s = t.state_of(&Puzzle::Hanoi([0, 0, 0]));
        let names = t.task().describe_facts(s.facts().filter(|f| !t.static_facts.contains(f)));
        assert_eq!(names.len(), 7);
        for atom in ["(on d3 p1)", "(on d2 d3)", "(on d1 d2)", "(clear d1)", "(clear p4)"] {
            assert!(names.contains(&atom.to_string()), "{atom} missing from {names:?}");
        }
    }

    #[test]
    fn malformed_states_are_rejected() {
        let t = DomainTemplate::new(DomainKind::EightPuzzle);
        let mut s = t.state_of(&Puzzle::eight_puzzle_solved());
        let extra = t.task().facts().id(&Atom::new("at", ["t1", "c0"])).unwrap();
        s.insert(extra);
        assert!(t.puzzle_of(&s).is_err());

        let h = DomainTemplate::new(DomainKind::Hanoi34);
        let mut s = h.state_of(&Puzzle::Hanoi([0, 0, 0]));
        s.insert(h.task().facts().id(&Atom::new("on", ["d1", "p2"])).unwrap());
        let err = h.puzzle_of(&s).unwrap_err();
        assert!(err.reason.contains("several"), "{err}");
    }

    #[test]
    fn press_masks() {
        assert_eq!(lights_press_mask(0).count_ones(), 3);
        assert_eq!(lights_press_mask(1).count_ones(), 4);
        assert_eq!(lights_press_mask(5).count_ones(), 5);
    }

    #[test]
    fn solvability_parity() {
        assert!(eight_puzzle_solvable(&[0, 1, 2, 3, 4, 5, 6, 7, 8]));
        assert!(!eight_puzzle_solvable(&[0, 2, 1, 3, 4, 5, 6, 7, 8]));
    }

    #[test]
    fn kind_names_parse() {
        for k in DomainKind::ALL {
            assert_eq!(k.name().parse::<DomainKind>().unwrap(), k);
        }
        assert!("sokoban".parse::<DomainKind>().is_err());
    }
}
