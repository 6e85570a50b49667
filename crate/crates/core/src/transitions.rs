//! Stay/step/skip predecessor structure.
//!
//! Every state has exactly 21 predecessor lanes in a fixed order: lane 0 is
//! the stay, lanes `1 + l` (`l` in 0..4) are the steps and lanes `5 + L`
//! (`L` in 0..16) are the skips. For a state `n` of order `k`:
//!
//! ```text
//! stay:  n
//! step:  l * 4^(k-1) + n / 4
//! skip:  L * 4^(k-2) + n / 16
//! ```
//!
//! The trellis stores lane indices (relative pointers), and traceback turns
//! them back into global states with [`TransitionTable::reconstruct_prev`].

use thiserror::Error;

use crate::model::{check_k, n_states, ModelError, LANES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransitionError {
    #[error("relative pointer {0} out of range 0..{LANES}")]
    LaneOutOfRange(u8),
    #[error("state {state} out of range for {n_states} states")]
    StateOutOfRange { state: u32, n_states: usize },
}

/// Transition class of a lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionClass {
    Stay,
    Step,
    Skip,
}

impl TransitionClass {
    pub fn of_lane(lane: u8) -> Self {
        match lane {
            0 => Self::Stay,
            1..=4 => Self::Step,
            _ => Self::Skip,
        }
    }

    /// Bases the read grows by when taking a transition of this class.
    pub fn advance(self) -> usize {
        match self {
            Self::Stay => 0,
            Self::Step => 1,
            Self::Skip => 2,
        }
    }
}

/// The `N x 21` predecessor map for one k-mer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable {
    pub(crate) k: usize,
    pub(crate) pred: Vec<[u32; LANES]>,
}

impl TransitionTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_states(&self) -> usize {
        self.pred.len()
    }

    /// The 21 predecessors of `state`, in lane order.
    pub fn predecessors(&self, state: u32) -> &[u32; LANES] {
        &self.pred[state as usize]
    }

    /// Global predecessor of `cur` through lane `lane`, computed from the
    /// label arithmetic rather than read from the table.
    pub fn reconstruct_prev(&self, cur: u32, lane: u8) -> Result<u32, TransitionError> {
        if cur as usize >= self.n_states() {
            return Err(TransitionError::StateOutOfRange {
                state: cur,
                n_states: self.n_states(),
            });
        }
        if lane as usize >= LANES {
            return Err(TransitionError::LaneOutOfRange(lane));
        }
        Ok(prev_state(self.k, cur, lane))
    }

    /// Classifies `from -> to` with stay > step > skip precedence, or `None`
    /// if no lane connects them.
    pub fn classify(&self, from: u32, to: u32) -> Option<TransitionClass> {
        classify(self.k, from, to)
    }

    /// Lanes of `to` whose predecessor is `from`, ascending.
    pub fn connecting_lanes(&self, from: u32, to: u32) -> impl Iterator<Item = u8> + '_ {
        let row = &self.pred[to as usize];
        (0..LANES as u8).filter(move |&t| row[t as usize] == from)
    }
}

/// Builds the predecessor table for order `k`.
pub fn build_table(k: usize) -> Result<TransitionTable, ModelError> {
    check_k(k)?;
    let n = n_states(k);
    let step_stride = 1u32 << (2 * (k - 1));
    let skip_stride = 1u32 << (2 * (k - 2));
    let pred = (0..n as u32)
        .map(|state| {
            let mut row = [0u32; LANES];
            row[0] = state;
            for l in 0..4u32 {
                row[1 + l as usize] = l * step_stride + state / 4;
            }
            for big_l in 0..16u32 {
                row[5 + big_l as usize] = big_l * skip_stride + state / 16;
            }
            row
        })
        .collect();
    Ok(TransitionTable { k, pred })
}

/// Label arithmetic behind [`TransitionTable::reconstruct_prev`]: the lane
/// selects a shifted copy of `cur` plus an offset, mirroring an adder bank
/// fed by divide-by-4 shifters. `lane` must be below 21.
#[inline]
pub(crate) fn prev_state(k: usize, cur: u32, lane: u8) -> u32 {
    match lane {
        0 => cur,
        1..=4 => (((lane - 1) as u32) << (2 * (k - 1))) + (cur >> 2),
        _ => (((lane - 5) as u32) << (2 * (k - 2))) + (cur >> 4),
    }
}

pub(crate) fn classify(k: usize, from: u32, to: u32) -> Option<TransitionClass> {
    if from == to {
        return Some(TransitionClass::Stay);
    }
    let step_mask = (1u32 << (2 * (k - 1))) - 1;
    if from & step_mask == to >> 2 {
        return Some(TransitionClass::Step);
    }
    let skip_mask = (1u32 << (2 * (k - 2))) - 1;
    if from & skip_mask == to >> 4 {
        return Some(TransitionClass::Skip);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{decode_kmer, encode_kmer, MAX_K, MIN_K};

    #[test]
    fn worked_step_and_skip_examples() {
        let table = build_table(3).unwrap();
        let cgt = encode_kmer("CGT").unwrap();
        let gac = encode_kmer("GAC").unwrap();
        let acg = encode_kmer("ACG").unwrap();
        assert_eq!((cgt, gac, acg), (27, 33, 6));
        // l = 0 is lane 1; L = 1 is lane 6.
        assert_eq!(table.predecessors(27)[1], 6);
        assert_eq!(table.predecessors(33)[6], 6);
        assert_eq!(table.reconstruct_prev(27, 1), Ok(6));
        assert_eq!(table.reconstruct_prev(33, 6), Ok(6));
    }

    #[test]
    fn stay_lane_is_identity() {
        for k in MIN_K..=MAX_K {
            let table = build_table(k).unwrap();
            for n in 0..table.n_states() as u32 {
                assert_eq!(table.predecessors(n)[0], n);
                assert_eq!(table.reconstruct_prev(n, 0), Ok(n));
            }
        }
    }

    #[test]
    fn arithmetic_reconstruction_agrees_with_table() {
        for k in MIN_K..=MAX_K {
            let table = build_table(k).unwrap();
            for n in 0..table.n_states() as u32 {
                for t in 0..LANES as u8 {
                    let prev = table.reconstruct_prev(n, t).unwrap();
                    assert_eq!(prev, table.predecessors(n)[t as usize]);
                    assert!((prev as usize) < table.n_states());
                }
            }
        }
    }

    #[test]
    fn lanes_agree_with_kmer_strings() {
        for k in MIN_K..=4 {
            let table = build_table(k).unwrap();
            for y in 0..table.n_states() as u32 {
                let ys = decode_kmer(y, k);
                for t in 1..LANES {
                    let xs = decode_kmer(table.predecessors(y)[t], k);
                    if t < 5 {
                        // x's last k-1 bases are y's first k-1 bases.
                        assert_eq!(&xs[1..], &ys[..k - 1], "step {xs}->{ys}");
                    } else {
                        assert_eq!(&xs[2..], &ys[..k - 2], "skip {xs}->{ys}");
                    }
                }
            }
        }
    }

    #[test]
    fn classify_uses_stay_step_skip_precedence() {
        let table = build_table(3).unwrap();
        let s = |k: &str| encode_kmer(k).unwrap();
        assert_eq!(table.classify(s("ACG"), s("CGT")), Some(TransitionClass::Step));
        assert_eq!(table.classify(s("ACG"), s("GAC")), Some(TransitionClass::Skip));
        assert_eq!(table.classify(s("AAA"), s("AAA")), Some(TransitionClass::Stay));
        // ACC -> CCG is both a step and a skip.
        assert_eq!(table.classify(s("ACC"), s("CCG")), Some(TransitionClass::Step));
        assert_eq!(table.classify(s("ACG"), s("TTT")), None);
        let lanes: Vec<u8> = table.connecting_lanes(s("AAA"), s("AAA")).collect();
        assert_eq!(lanes, vec![0, 1, 5]);
    }

    #[test]
    fn classify_matches_lane_membership() {
        for k in MIN_K..=4 {
            let table = build_table(k).unwrap();
            let n = table.n_states() as u32;
            for from in 0..n {
                for to in 0..n {
                    let first = table.connecting_lanes(from, to).next();
                    let expected = first.map(TransitionClass::of_lane);
                    assert_eq!(table.classify(from, to), expected, "{from}->{to}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_inputs_rejected() {
        let table = build_table(2).unwrap();
        assert_eq!(
            table.reconstruct_prev(16, 0),
            Err(TransitionError::StateOutOfRange { state: 16, n_states: 16 })
        );
        assert_eq!(table.reconstruct_prev(3, 21), Err(TransitionError::LaneOutOfRange(21)));
        assert!(build_table(1).is_err());
        assert!(build_table(7).is_err());
    }
}
