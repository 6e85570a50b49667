//! Trellis construction.
//!
//! For every event `x[m]` and state `n` the builder gathers the 21 candidate
//! metrics `alpha[m-1][pred[n][t]] + trans_cost[t]`, keeps the smallest
//! (lowest lane wins ties) as the relative pointer `beta[n][m-1]`, and updates
//!
//! ```text
//! alpha'[m][n] = trans[best] - sigma[n] + (x[m] - mu[n])^2
//! ```
//!
//! The minimum of `alpha'[m]` (lowest state wins ties) is then subtracted from
//! every entry so the metrics stay bounded. Before the first event all
//! metrics are zero, so event 0 only contributes its emission term and
//! produces no pointer column.
//!
//! Two kernels compute the same thing. [`Variant::Reference`] walks the
//! predecessor table lane by lane. [`Variant::Optimized`] uses the fact that
//! every state sharing `n / 4` has the same four step predecessors and every
//! state sharing `n / 16` the same sixteen skip predecessors, so each group
//! minimum is found once and reused. The candidate values and the tie order
//! are identical, so the two kernels agree bit for bit.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::cost::Cost;
use crate::model::{KmerModel, LANES};
use crate::transitions::TransitionTable;

/// Largest chunk the detector accepts by default.
pub const DEFAULT_MAX_EVENTS: usize = 512;

const DUMP_MAGIC: &[u8; 4] = b"PPTB";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrellisError {
    #[error("empty chunk")]
    EmptyChunk,
    #[error("chunk of {len} events exceeds the maximum of {max}")]
    ChunkTooLong { len: usize, max: usize },
    #[error("event {index} is not finite ({value})")]
    NonFiniteEvent { index: usize, value: f64 },
    #[error("model has {model} states but the transition table has {table}")]
    DimensionMismatch { model: usize, table: usize },
    #[error("{what} is not representable in the selected metric")]
    NotRepresentable { what: String },
}

/// Whether each event's metrics are shifted so their minimum is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Enabled,
    Disabled,
}

/// Which kernel evaluates the per-event update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Variant {
    /// Lane-by-lane gather over the predecessor table.
    #[default]
    Reference,
    /// Grouped step/skip minima; assumes the canonical lane layout from
    /// [`crate::build_table`].
    Optimized,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Self::Reference => "reference",
            Self::Optimized => "optimized",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(Self::Reference),
            "optimized" => Ok(Self::Optimized),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisOptions {
    pub max_events: usize,
    pub normalization: Normalization,
    pub variant: Variant,
}

impl Default for TrellisOptions {
    fn default() -> Self {
        Self {
            max_events: DEFAULT_MAX_EVENTS,
            normalization: Normalization::Enabled,
            variant: Variant::Reference,
        }
    }
}

impl TrellisOptions {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_max_events(mut self, max_events: usize) -> Self {
        self.max_events = max_events;
        self
    }
}

/// Relative trellis pointers, stored column by column.
///
/// Column `c` holds the pointers computed while processing event `c + 1`, one
/// byte per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointerMatrix {
    n_states: usize,
    m_events: usize,
    data: Vec<u8>,
}

impl PointerMatrix {
    pub fn new(n_states: usize) -> Self {
        Self {
            n_states,
            m_events: 0,
            data: Vec::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn m_events(&self) -> usize {
        self.m_events
    }

    pub fn n_columns(&self) -> usize {
        self.m_events.saturating_sub(1)
    }

    pub fn column(&self, c: usize) -> &[u8] {
        &self.data[c * self.n_states..(c + 1) * self.n_states]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.data.chunks_exact(self.n_states.max(1))
    }

    /// Pointer for `state` in column `c`.
    pub fn get(&self, state: u32, c: usize) -> u8 {
        self.data[c * self.n_states + state as usize]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    fn record_event(&mut self, column: Option<&[u8]>) {
        if let Some(col) = column {
            self.data.extend_from_slice(col);
        }
        self.m_events += 1;
    }

    /// Writes the `PPTB` dump: magic, `m_events` and `N` as little-endian
    /// `u32`, then every column as `N` bytes.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.m_events as u32).to_le_bytes())?;
        w.write_all(&(self.n_states as u32).to_le_bytes())?;
        w.write_all(&self.data)
    }

    pub fn read_dump<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(bad("not a PPTB pointer dump".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let m_events = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n_states = u32::from_le_bytes(word) as usize;
        let mut data = vec![0u8; m_events.saturating_sub(1) * n_states];
        r.read_exact(&mut data)?;
        if let Some(p) = data.iter().find(|&&p| p as usize >= LANES) {
            return Err(bad(format!("pointer {p} out of range")));
        }
        Ok(Self {
            n_states,
            m_events,
            data,
        })
    }
}

/// Output of a completed construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisResult<C = f64> {
    pub pointers: PointerMatrix,
    /// Most likely final state.
    pub end_state: u32,
    /// Minimum of the final event's metrics before normalization.
    pub end_cost: C,
    /// Unnormalized cost of the best path: every subtracted minimum plus
    /// `end_cost`.
    pub total_cost: C,
}

/// Final-event summary returned by [`TrellisBuilder::best`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrellisEnd<C> {
    pub end_state: u32,
    pub end_cost: C,
    pub total_cost: C,
}

struct Params<C> {
    mu: Vec<C>,
    sigma: Vec<C>,
    trans_cost: [C; LANES],
}

impl<C: Cost> Params<C> {
    fn new(model: &KmerModel) -> Result<Self, TrellisError> {
        let convert = |vals: &[f64], what: &str, f: fn(f64) -> Option<C>| {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| {
                    f(v).ok_or_else(|| TrellisError::NotRepresentable {
                        what: format!("{what}[{i}] = {v}"),
                    })
                })
                .collect::<Result<Vec<C>, _>>()
        };
        let mu = convert(model.mu(), "mu", C::from_level)?;
        let sigma = convert(model.sigma(), "sigma", C::from_cost)?;
        let tc = convert(model.trans_cost(), "trans_cost", C::from_cost)?;
        let mut trans_cost = [C::ZERO; LANES];
        trans_cost.copy_from_slice(&tc);
        Ok(Self {
            mu,
            sigma,
            trans_cost,
        })
    }
}

#[inline(always)]
fn post<C: Cost>(trans: C, x: C, mu: C, sigma: C) -> C {
    (trans - sigma) + C::squared_error(x, mu)
}

/// Incremental trellis construction, one event at a time.
pub struct TrellisBuilder<'a, C: Cost = f64> {
    table: &'a TransitionTable,
    params: Params<C>,
    opts: TrellisOptions,
    alpha: Vec<C>,
    next: Vec<C>,
    column: Vec<u8>,
    step_best: Vec<(C, u8)>,
    skip_best: Vec<(C, u8)>,
    events: usize,
    offset: C,
    best: Option<TrellisEnd<C>>,
}

impl<'a, C: Cost> TrellisBuilder<'a, C> {
    pub fn new(
        model: &KmerModel,
        table: &'a TransitionTable,
        opts: TrellisOptions,
    ) -> Result<Self, TrellisError> {
        let n = table.n_states();
        if model.n_states() != n {
            return Err(TrellisError::DimensionMismatch {
                model: model.n_states(),
                table: n,
            });
        }
        Ok(Self {
            table,
            params: Params::new(model)?,
            opts,
            alpha: vec![C::ZERO; n],
            next: vec![C::ZERO; n],
            column: vec![0; n],
            step_best: vec![(C::ZERO, 0); n / 4],
            skip_best: vec![(C::ZERO, 0); n / 16],
            events: 0,
            offset: C::ZERO,
            best: None,
        })
    }

    /// Number of events consumed so far.
    pub fn events(&self) -> usize {
        self.events
    }

    /// Metrics after the latest event (normalized unless disabled).
    pub fn posteriors(&self) -> &[C] {
        &self.alpha
    }

    /// Best end state and costs after the latest event.
    pub fn best(&self) -> Option<TrellisEnd<C>> {
        self.best
    }

    /// Consumes one event. Returns the new pointer column for every event
    /// after the first.
    pub fn push(&mut self, x: f64) -> Result<Option<&[u8]>, TrellisError> {
        let index = self.events;
        if !x.is_finite() {
            return Err(TrellisError::NonFiniteEvent { index, value: x });
        }
        if index >= self.opts.max_events {
            return Err(TrellisError::ChunkTooLong {
                len: index + 1,
                max: self.opts.max_events,
            });
        }
        let xc = C::from_level(x).ok_or_else(|| TrellisError::NotRepresentable {
            what: format!("event {index} = {x}"),
        })?;

        if index == 0 {
            let p = &self.params;
            for (n, out) in self.next.iter_mut().enumerate() {
                *out = post(C::ZERO, xc, p.mu[n], p.sigma[n]);
            }
        } else {
            match self.opts.variant {
                Variant::Reference => self.update_reference(xc),
                Variant::Optimized => self.update_optimized(xc),
            }
        }

        let (min_state, min_cost) = find_min(&self.next);
        let end = TrellisEnd {
            end_state: min_state as u32,
            end_cost: min_cost,
            total_cost: self.offset + min_cost,
        };
        self.best = Some(end);
        match self.opts.normalization {
            Normalization::Enabled => {
                for (a, &v) in self.alpha.iter_mut().zip(&self.next) {
                    *a = v - min_cost;
                }
                self.offset = end.total_cost;
            }
            Normalization::Disabled => self.alpha.copy_from_slice(&self.next),
        }
        self.events += 1;
        Ok((index > 0).then_some(self.column.as_slice()))
    }

    fn update_reference(&mut self, x: C) {
        let tc = &self.params.trans_cost;
        let p = &self.params;
        let alpha = &self.alpha;
        for (n, row) in self.table.pred.iter().enumerate() {
            let mut best = alpha[row[0] as usize] + tc[0];
            let mut lane = 0u8;
            for t in 1..LANES {
                let v = alpha[row[t] as usize] + tc[t];
                if v < best {
                    best = v;
                    lane = t as u8;
                }
            }
            self.column[n] = lane;
            self.next[n] = post(best, x, p.mu[n], p.sigma[n]);
        }
    }

    fn update_optimized(&mut self, x: C) {
        let k = self.table.k();
        let step_stride = 1usize << (2 * (k - 1));
        let skip_stride = 1usize << (2 * (k - 2));
        let tc = &self.params.trans_cost;
        let alpha = &self.alpha;

        for (g, slot) in self.step_best.iter_mut().enumerate() {
            *slot = min_over_group(alpha, g, step_stride, &tc[1..5], 1);
        }
        for (g, slot) in self.skip_best.iter_mut().enumerate() {
            *slot = min_over_group(alpha, g, skip_stride, &tc[5..LANES], 5);
        }

        let p = &self.params;
        for n in 0..alpha.len() {
            let mut best = alpha[n] + tc[0];
            let mut lane = 0u8;
            let (step, step_lane) = self.step_best[n >> 2];
            if step < best {
                best = step;
                lane = step_lane;
            }
            let (skip, skip_lane) = self.skip_best[n >> 4];
            if skip < best {
                best = skip;
                lane = skip_lane;
            }
            self.column[n] = lane;
            self.next[n] = post(best, x, p.mu[n], p.sigma[n]);
        }
    }

    /// Ends construction and returns the final-event summary.
    pub fn finish(self) -> Result<TrellisEnd<C>, TrellisError> {
        self.best.ok_or(TrellisError::EmptyChunk)
    }
}

#[inline(always)]
fn min_over_group<C: Cost>(
    alpha: &[C],
    group: usize,
    stride: usize,
    costs: &[C],
    first_lane: u8,
) -> (C, u8) {
    let mut best = alpha[group] + costs[0];
    let mut lane = first_lane;
    for (j, &c) in costs.iter().enumerate().skip(1) {
        let v = alpha[j * stride + group] + c;
        if v < best {
            best = v;
            lane = first_lane + j as u8;
        }
    }
    (best, lane)
}

/// Index and value of the minimum; the lowest index wins ties.
#[inline]
pub(crate) fn find_min<C: Cost>(vals: &[C]) -> (usize, C) {
    let mut idx = 0;
    let mut best = vals[0];
    for (i, &v) in vals.iter().enumerate().skip(1) {
        if v < best {
            best = v;
            idx = i;
        }
    }
    (idx, best)
}

/// Builds the trellis for one chunk with the default options (64-bit
/// reference kernel, normalization on, at most 512 events).
pub fn construct(
    model: &KmerModel,
    table: &TransitionTable,
    events: &[f64],
) -> Result<TrellisResult<f64>, TrellisError> {
    construct_with(model, table, events, TrellisOptions::default())
}

/// Builds the trellis for one chunk in the metric `C` with explicit options.
pub fn construct_with<C: Cost>(
    model: &KmerModel,
    table: &TransitionTable,
    events: &[f64],
    opts: TrellisOptions,
) -> Result<TrellisResult<C>, TrellisError> {
    if events.is_empty() {
        return Err(TrellisError::EmptyChunk);
    }
    if events.len() > opts.max_events {
        return Err(TrellisError::ChunkTooLong {
            len: events.len(),
            max: opts.max_events,
        });
    }
    let mut builder = TrellisBuilder::<C>::new(model, table, opts)?;
    let mut pointers = PointerMatrix::new(table.n_states());
    pointers.data.reserve((events.len() - 1) * table.n_states());
    for &x in events {
        let column = builder.push(x)?;
        pointers.record_event(column);
    }
    let end = builder.finish()?;
    Ok(TrellisResult {
        pointers,
        end_state: end.end_state,
        end_cost: end.end_cost,
        total_cost: end.total_cost,
    })
}

#[derive(Debug, Error)]
pub enum StreamError<E: std::error::Error + 'static> {
    #[error("event source failed at event {index}: {source}")]
    Source {
        index: usize,
        #[source]
        source: E,
    },
    #[error("pointer sink failed at event {index}: {source}")]
    Sink {
        index: usize,
        #[source]
        source: E,
    },
    #[error(transparent)]
    Trellis(#[from] TrellisError),
}

/// Summary of a streaming construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSummary<C> {
    pub events: usize,
    pub columns: usize,
    pub end: TrellisEnd<C>,
}

/// Streams events from `source` and hands each pointer column to `sink` as
/// soon as it is computed. `sink` receives the column index and its bytes.
///
/// Produces exactly the columns and end state of [`construct_with`] on the
/// same events.
pub fn construct_streaming<C, E, I, S>(
    model: &KmerModel,
    table: &TransitionTable,
    opts: TrellisOptions,
    source: I,
    mut sink: S,
) -> Result<StreamSummary<C>, StreamError<E>>
where
    C: Cost,
    E: std::error::Error + 'static,
    I: IntoIterator<Item = Result<f64, E>>,
    S: FnMut(usize, &[u8]) -> Result<(), E>,
{
    let mut builder = TrellisBuilder::<C>::new(model, table, opts)?;
    let mut columns = 0;
    for (index, item) in source.into_iter().enumerate() {
        let x = item.map_err(|source| StreamError::Source { index, source })?;
        if let Some(column) = builder.push(x)? {
            sink(columns, column).map_err(|source| StreamError::Sink { index, source })?;
            columns += 1;
        }
    }
    let events = builder.events();
    let end = builder.finish()?;
    Ok(StreamSummary {
        events,
        columns,
        end,
    })
}
