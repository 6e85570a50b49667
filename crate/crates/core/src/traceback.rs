//! Pointer-chasing traceback and read assembly.

use thiserror::Error;

use crate::model::{decode_kmer, KmerModel, BASES};
use crate::transitions::{classify, prev_state, TransitionClass, TransitionTable};
use crate::trellis::TrellisResult;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TracebackError {
    #[error("pointer matrix has {pointers} states but the table has {table}")]
    DimensionMismatch { pointers: usize, table: usize },
    #[error("end state {0} out of range")]
    EndStateOutOfRange(u32),
    #[error("empty state path")]
    EmptyPath,
    #[error("invalid transition {from} -> {to} at event {index}")]
    InvalidTransition { index: usize, from: u32, to: u32 },
    #[error("lane {lane} at event {index} does not connect {from} -> {to}")]
    LaneMismatch {
        index: usize,
        lane: u8,
        from: u32,
        to: u32,
    },
    #[error("path has {states} states but {lanes} lanes")]
    LaneCount { states: usize, lanes: usize },
}

/// Decoded global states, one per event, in forward event order.
///
/// `lanes[m]`, when present, is the relative pointer that connects
/// `states[m]` to `states[m + 1]`. The trellis records it, and it settles the
/// transition class when a pair is ambiguous (e.g. `AAA -> AAA` is both a
/// stay and a step).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StatePath {
    pub states: Vec<u32>,
    pub lanes: Option<Vec<u8>>,
}

impl StatePath {
    /// A path without lane information.
    pub fn from_states(states: Vec<u32>) -> Self {
        Self {
            states,
            lanes: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transition class of each consecutive pair. Uses the recorded lane
    /// when present, otherwise stay > step > skip precedence.
    pub fn classes(&self, k: usize) -> Result<Vec<TransitionClass>, TracebackError> {
        if let Some(lanes) = &self.lanes {
            if lanes.len() + 1 != self.states.len() {
                return Err(TracebackError::LaneCount {
                    states: self.states.len(),
                    lanes: lanes.len(),
                });
            }
        }
        self.states
            .windows(2)
            .enumerate()
            .map(|(m, pair)| {
                let (from, to) = (pair[0], pair[1]);
                match &self.lanes {
                    Some(lanes) => {
                        let lane = lanes[m];
                        if lane as usize >= crate::LANES || prev_state(k, to, lane) != from {
                            return Err(TracebackError::LaneMismatch {
                                index: m + 1,
                                lane,
                                from,
                                to,
                            });
                        }
                        Ok(TransitionClass::of_lane(lane))
                    }
                    None => classify(k, from, to).ok_or(TracebackError::InvalidTransition {
                        index: m + 1,
                        from,
                        to,
                    }),
                }
            })
            .collect()
    }
}

/// A decoded read with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Read {
    pub bases: String,
    pub channel_id: u32,
    /// Event offsets covered, start inclusive and end exclusive.
    pub chunk_span: (u64, u64),
    /// Sequence numbers of chunks whose first state did not connect to the
    /// previous chunk's last state.
    pub junction_breaks: Vec<u64>,
}

impl Read {
    pub fn has_junction_break(&self) -> bool {
        !self.junction_breaks.is_empty()
    }
}

/// Follows the relative pointers back from the end state.
pub fn trace<C>(
    result: &TrellisResult<C>,
    table: &TransitionTable,
) -> Result<StatePath, TracebackError> {
    let pointers = &result.pointers;
    if pointers.n_states() != table.n_states() {
        return Err(TracebackError::DimensionMismatch {
            pointers: pointers.n_states(),
            table: table.n_states(),
        });
    }
    if result.end_state as usize >= table.n_states() {
        return Err(TracebackError::EndStateOutOfRange(result.end_state));
    }
    let m_events = pointers.m_events();
    let k = table.k();
    let mut states = vec![0u32; m_events];
    let mut lanes = vec![0u8; pointers.n_columns()];
    let mut prev = result.end_state;
    states[m_events - 1] = prev;
    for m in (0..pointers.n_columns()).rev() {
        let lane = pointers.get(prev, m);
        lanes[m] = lane;
        prev = prev_state(k, prev, lane);
        states[m] = prev;
    }
    Ok(StatePath {
        states,
        lanes: Some(lanes),
    })
}

pub(crate) fn push_transition_bases(bases: &mut String, to: u32, class: TransitionClass) {
    match class {
        TransitionClass::Stay => {}
        TransitionClass::Step => bases.push(BASES[(to & 3) as usize] as char),
        TransitionClass::Skip => {
            bases.push(BASES[((to >> 2) & 3) as usize] as char);
            bases.push(BASES[(to & 3) as usize] as char);
        }
    }
}

/// Base string for a path: the first k-mer in full, then 0, 1 or 2 bases
/// per stay, step or skip.
pub fn path_bases(path: &StatePath, k: usize) -> Result<String, TracebackError> {
    let first = *path.states.first().ok_or(TracebackError::EmptyPath)?;
    let classes = path.classes(k)?;
    let mut bases = decode_kmer(first, k);
    for (class, &to) in classes.into_iter().zip(&path.states[1..]) {
        push_transition_bases(&mut bases, to, class);
    }
    Ok(bases)
}

/// Assembles the read for a path. The result reports channel 0 and the span
/// `0..len`; the pipeline fills in real provenance.
pub fn assemble_read(path: &StatePath, model: &KmerModel) -> Result<Read, TracebackError> {
    Ok(Read {
        bases: path_bases(path, model.k())?,
        channel_id: 0,
        chunk_span: (0, path.len() as u64),
        junction_breaks: Vec::new(),
    })
}
