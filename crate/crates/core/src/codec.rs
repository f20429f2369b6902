//! Injective 36-bit state codes and the integer vocabulary fed to the LSTM.
//!
//! Layouts, with integer bit 0 the least significant:
//! - eight_puzzle: nine 4-bit tile ids, cell 0 in bits 35..32 down to cell 8
//!   in bits 3..0; 0 is the blank.
//! - lights_out4: light `k` (row-major) in bit `15 - k`; bits 16..35 zero.
//! - hanoi34: peg of disk `d` (0 = smallest) in bits `5-2d..4-2d`; bits
//!   6..35 zero.
//!
//! Network neuron `b` reads integer bit `35 - b`, so neuron 0 is the most
//! significant bit and the 9-digit hex form reads in neuron order.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domains::{self, DomainKind, DomainTemplate, MalformedState, Puzzle, HANOI_DISKS, LIGHTS_SIDE};
use crate::strips::State;

pub const CODE_BITS: usize = 36;
pub const CODE_MASK: u64 = (1 << CODE_BITS) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateCode {
    pub kind: DomainKind,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("{kind} code {code:#011x} sets padding bits {mask:#011x}")]
    Padding { kind: DomainKind, code: u64, mask: u64 },
    #[error("{kind} code {code:#011x}: {reason}")]
    Invalid { kind: DomainKind, code: u64, reason: String },
    #[error("`{0}` is not a 9-digit hex code")]
    Format(String),
}

impl StateCode {
    /// Bit read by network neuron `b`.
    pub fn neuron(&self, b: usize) -> bool {
        self.bits >> (CODE_BITS - 1 - b) & 1 == 1
    }

    pub fn neurons(&self) -> [f64; CODE_BITS] {
        std::array::from_fn(|b| if self.neuron(b) { 1.0 } else { 0.0 })
    }

    pub fn hex(&self) -> String {
        format!("{:09x}", self.bits)
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:09x}", self.bits)
    }
}

/// Parses the 9-hex-digit form.
pub fn parse_hex(s: &str) -> Result<u64, CodecError> {
    if s.len() != 9 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(CodecError::Format(s.to_string()));
    }
    u64::from_str_radix(s, 16).map_err(|_| CodecError::Format(s.to_string()))
}

/// Packs the neurons' values (read as bits) back into an integer.
pub fn bits_from_neurons(neurons: &[bool]) -> u64 {
    neurons.iter().take(CODE_BITS).enumerate().fold(0u64, |acc, (b, &on)| acc | (on as u64) << (CODE_BITS - 1 - b))
}

fn padding_mask(kind: DomainKind) -> u64 {
    match kind {
        DomainKind::Hanoi34 => CODE_MASK & !((1 << (2 * HANOI_DISKS)) - 1),
        DomainKind::LightsOut4 => CODE_MASK & !((1 << (LIGHTS_SIDE * LIGHTS_SIDE)) - 1),
        DomainKind::EightPuzzle => 0,
    }
}

pub fn encode(p: &Puzzle) -> StateCode {
    let bits = match p {
        Puzzle::Hanoi(pegs) => pegs.iter().enumerate().fold(0u64, |acc, (d, &pg)| acc | (pg as u64) << (2 * (HANOI_DISKS - 1 - d))),
        Puzzle::EightPuzzle(cells) => cells.iter().fold(0u64, |acc, &t| acc << 4 | t as u64),
        Puzzle::LightsOut(lights) => lights.reverse_bits() as u64,
    };
    StateCode { kind: p.kind(), bits }
}

/// Encodes a STRIPS state of the template's domain.
pub fn encode_state(t: &DomainTemplate, s: &State) -> Result<StateCode, MalformedState> {
    t.puzzle_of(s).map(|p| encode(&p))
}

pub fn decode_state(t: &DomainTemplate, bits: u64) -> Result<State, CodecError> {
    decode(t.kind(), bits).map(|p| t.state_of(&p))
}

pub fn decode(kind: DomainKind, bits: u64) -> Result<Puzzle, CodecError> {
    let pad = (bits & padding_mask(kind)) | (bits & !CODE_MASK);
    if pad != 0 {
        return Err(CodecError::Padding { kind, code: bits, mask: pad });
    }
    let p = match kind {
        DomainKind::Hanoi34 => Puzzle::Hanoi(std::array::from_fn(|d| (bits >> (2 * (HANOI_DISKS - 1 - d)) & 3) as u8)),
        DomainKind::EightPuzzle => Puzzle::EightPuzzle(std::array::from_fn(|c| (bits >> (4 * (8 - c)) & 0xf) as u8)),
        DomainKind::LightsOut4 => Puzzle::LightsOut((bits as u16).reverse_bits()),
    };
    domains::validate_puzzle(&p).map_err(|reason| CodecError::Invalid { kind, code: bits, reason })?;
    Ok(p)
}

/// Result of snapping network outputs onto a candidate goal.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestMatch {
    pub index: usize,
    pub code: u64,
    /// Expected Hamming distance to the chosen candidate.
    pub distance: f64,
    /// Outputs thresholded at 0.5.
    pub thresholded: u64,
    /// Fraction of thresholded bits agreeing with the chosen candidate.
    pub bit_match: f64,
}

/// Fraction of the 36 bits on which two codes agree.
pub fn bit_agreement(a: u64, b: u64) -> f64 {
    (CODE_BITS as u32 - ((a ^ b) & CODE_MASK).count_ones()) as f64 / CODE_BITS as f64
}

pub fn threshold(probs: &[f64]) -> u64 {
    bits_from_neurons(&probs.iter().map(|&p| p >= 0.5).collect::<Vec<_>>())
}

pub fn expected_distance(probs: &[f64], code: u64) -> f64 {
    probs.iter().enumerate().map(|(b, &p)| if code >> (CODE_BITS - 1 - b) & 1 == 1 { 1.0 - p } else { p }).sum()
}

/// Candidate minimising expected Hamming distance to `probs`; the first
/// candidate wins ties.
pub fn nearest_valid(probs: &[f64], candidates: &[u64]) -> NearestMatch {
    assert_eq!(probs.len(), CODE_BITS);
    assert!(!candidates.is_empty(), "nearest_valid needs candidates");
    let mut best = (0usize, f64::INFINITY);
    for (i, &c) in candidates.iter().enumerate() {
        let d = expected_distance(probs, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    let code = candidates[best.0];
    let thresholded = threshold(probs);
    NearestMatch { index: best.0, code, distance: best.1, thresholded, bit_match: bit_agreement(thresholded, code) }
}

/// State code to token id. Id 0 is reserved for codes never seen while
/// building.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    ids: BTreeMap<u64, u32>,
    frozen: bool,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `code` if unseen; returns its id.
    pub fn insert(&mut self, code: u64) -> u32 {
        assert!(!self.frozen, "vocabulary is frozen");
        let next = self.ids.len() as u32 + 1;
        *self.ids.entry(code).or_insert(next)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn id(&self, code: u64) -> u32 {
        self.ids.get(&code).copied().unwrap_or(0)
    }

    /// Number of known codes; token ids range over `0..=len()`.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.ids.iter().map(|(&c, &i)| (c, i))
    }

    /// Rebuilds from (code, id) pairs, checking ids are exactly `1..=n`.
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, u32)>) -> Result<Self, String> {
        let ids: BTreeMap<u64, u32> = entries.into_iter().collect();
        let mut seen: Vec<u32> = ids.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &id)| id as usize != i + 1) {
            return Err("vocabulary ids are not a permutation of 1..=n".into());
        }
        Ok(Vocabulary { ids, frozen: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_codes() {
        assert_eq!(encode(&Puzzle::LightsOut(0)).bits, 0);
        assert_eq!(encode(&Puzzle::Hanoi([0, 0, 0])).bits, 0);
    }

    #[test]
    fn solved_eight_puzzle_code() {
        let code = encode(&Puzzle::eight_puzzle_solved());
        assert_eq!(code.bits, 0x012345678);
        assert_eq!(code.hex(), "012345678");
        assert_eq!(decode(DomainKind::EightPuzzle, 0x012345678).unwrap(), Puzzle::eight_puzzle_solved());
    }

    #[test]
    fn neuron_order_is_most_significant_first() {
        let c = StateCode { kind: DomainKind::EightPuzzle, bits: 1 << 35 };
        assert!(c.neuron(0));
        assert!(!c.neuron(35));
        assert_eq!(bits_from_neurons(&std::array::from_fn::<bool, 36, _>(|b| c.neuron(b))), c.bits);
    }

    #[test]
    fn light_zero_is_bit_fifteen() {
        assert_eq!(encode(&Puzzle::LightsOut(1)).bits, 1 << 15);
    }

    #[test]
    fn invalid_codes() {
        assert!(matches!(decode(DomainKind::EightPuzzle, 0x312345673), Err(CodecError::Invalid { .. })));
        assert!(matches!(decode(DomainKind::EightPuzzle, 0x912345670), Err(CodecError::Invalid { .. })));
        assert!(matches!(decode(DomainKind::LightsOut4, 1 << 20), Err(CodecError::Padding { .. })));
        assert!(matches!(decode(DomainKind::Hanoi34, 1 << 6), Err(CodecError::Padding { .. })));
        assert!(matches!(decode(DomainKind::Hanoi34, 1 << 36), Err(CodecError::Padding { .. })));
    }

    #[test]
    fn hex_parsing() {
        assert_eq!(parse_hex("012345678").unwrap(), 0x012345678);
        assert!(parse_hex("12345678").is_err());
        assert!(parse_hex("01234567g").is_err());
    }

    #[test]
    fn nearest_exact_and_symmetric() {
        let cands = [0x012345678u64, 0x102345678];
        let exact: Vec<f64> = StateCode { kind: DomainKind::EightPuzzle, bits: cands[1] }.neurons().to_vec();
        let m = nearest_valid(&exact, &cands);
        assert_eq!((m.index, m.distance, m.bit_match), (1, 0.0, 1.0));
        let half = vec![0.5; 36];
        let m = nearest_valid(&half, &cands);
        assert_eq!(m.index, 0);
        assert_eq!(m.distance, 18.0);
    }

    #[test]
    fn vocabulary_ids() {
        let mut v = Vocabulary::new();
        assert_eq!(v.insert(7), 1);
        assert_eq!(v.insert(3), 2);
        assert_eq!(v.insert(7), 1);
        v.freeze();
        assert_eq!(v.id(99), 0);
        let back = Vocabulary::from_entries(v.entries()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_entries([(1, 1), (2, 3)]).is_err());
    }
}
