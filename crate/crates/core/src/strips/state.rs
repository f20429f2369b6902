use std::fmt;

pub type FactId = usize;

/// Fixed-width set of true facts over one task's fact universe.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Box<[u64]>,
    universe: usize,
}

impl State {
    pub fn empty(universe: usize) -> Self {
        State { words: vec![0; universe.div_ceil(64)].into_boxed_slice(), universe }
    }

    /// Builds a state from fact ids; ids outside the universe are ignored by
    /// the caller's contract and trip a debug assertion.
    pub fn from_facts(universe: usize, facts: impl IntoIterator<Item = FactId>) -> Self {
        let mut s = State::empty(universe);
        for f in facts {
            s.insert(f);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn contains(&self, f: FactId) -> bool {
        f < self.universe && self.words[f / 64] & (1 << (f % 64)) != 0
    }

    #[inline]
    pub(crate) fn insert(&mut self, f: FactId) {
        debug_assert!(f < self.universe);
        self.words[f / 64] |= 1 << (f % 64);
    }

    #[inline]
    pub(crate) fn remove(&mut self, f: FactId) {
        self.words[f / 64] &= !(1 << (f % 64));
    }

    /// True when every fact in `facts` holds.
    pub fn satisfies(&self, facts: &[FactId]) -> bool {
        facts.iter().all(|&f| self.contains(f))
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn facts(&self) -> impl Iterator<Item = FactId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Facts on which `self` and `other` differ.
    pub fn difference(&self, other: &State) -> Vec<FactId> {
        let mut out = Vec::new();
        for (wi, (a, b)) in self.words.iter().zip(other.words.iter()).enumerate() {
            let mut x = a ^ b;
            while x != 0 {
                out.push(wi * 64 + x.trailing_zeros() as usize);
                x &= x - 1;
            }
        }
        out
    }

    /// Same facts over a larger universe; used when a task is extended with
    /// extra facts appended after the original ones.
    pub fn widened(&self, universe: usize) -> State {
        assert!(universe >= self.universe);
        State::from_facts(universe, self.facts())
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.facts()).finish()
    }
}
