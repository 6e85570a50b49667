//! Chunked multi-channel detection.
//!
//! Each channel's event stream is cut into chunks of at most `chunk_len`
//! events. Every chunk is decoded on its own, starting from a flat prior, and
//! the per-chunk reads are spliced back into one read per channel. Chunks are
//! dispatched round-robin across channels (chunk 0 of every channel, then
//! chunk 1, and so on) to a pool of workers; output for a channel never
//! depends on the worker count or on the other channels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{decode_kmer, KmerModel, ModelError, LANES};
use crate::traceback::{assemble_read, push_transition_bases, trace, Read, StatePath, TracebackError};
use crate::transitions::{build_table, prev_state, TransitionClass, TransitionTable};
use crate::trellis::{construct_with, TrellisError, TrellisOptions, Variant, DEFAULT_MAX_EVENTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid channel configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Trellis(#[from] TrellisError),
    #[error(transparent)]
    Traceback(#[from] TracebackError),
    #[error("chunk sequence gap: expected {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("nothing to splice")]
    NothingToSplice,
    #[error("event source: {0}")]
    Source(String),
}

/// Chunk length: a fixed number of events, or the whole stream at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkSize {
    Fixed(usize),
    Whole,
}

impl ChunkSize {
    fn limit(self) -> usize {
        match self {
            Self::Fixed(m) => m,
            Self::Whole => usize::MAX,
        }
    }
}

impl fmt::Display for ChunkSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(m) => write!(f, "{m}"),
            Self::Whole => f.write_str("inf"),
        }
    }
}

impl FromStr for ChunkSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "∞" => Ok(Self::Whole),
            _ => match s.parse::<usize>() {
                Ok(m) if m >= 1 => Ok(Self::Fixed(m)),
                _ => Err(format!("invalid chunk size '{s}' (expected a positive integer or 'inf')")),
            },
        }
    }
}

/// Channel layout and nominal per-channel event rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub n_channels: usize,
    /// Events per second per channel; only used for deadline accounting.
    pub event_rate: f64,
    pub chunk: ChunkSize,
}

impl ChannelConfig {
    pub fn new(n_channels: usize, event_rate: f64, chunk: ChunkSize) -> Result<Self, PipelineError> {
        if n_channels == 0 {
            return Err(PipelineError::Config("need at least one channel".into()));
        }
        if !(event_rate.is_finite() && event_rate > 0.0) {
            return Err(PipelineError::Config(format!("event rate must be positive, got {event_rate}")));
        }
        if let ChunkSize::Fixed(m) = chunk {
            if !(2..=DEFAULT_MAX_EVENTS).contains(&m) {
                return Err(PipelineError::Config(format!(
                    "chunk length {m} outside 2..={DEFAULT_MAX_EVENTS}"
                )));
            }
        }
        Ok(Self {
            n_channels,
            event_rate,
            chunk,
        })
    }
}

/// A bounded run of events from one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EventChunk {
    pub channel_id: u32,
    pub seq_no: u64,
    /// Offset of the first sample within the channel's stream.
    pub offset: u64,
    pub samples: Vec<f64>,
}

/// Splits a stream into chunks of `chunk` events; the last may be shorter.
pub fn chunk_stream(channel_id: u32, events: &[f64], chunk: ChunkSize) -> Vec<EventChunk> {
    let len = chunk.limit().min(events.len().max(1));
    events
        .chunks(len)
        .enumerate()
        .map(|(i, samples)| EventChunk {
            channel_id,
            seq_no: i as u64,
            offset: (i * len) as u64,
            samples: samples.to_vec(),
        })
        .collect()
}

/// Decoded chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkOutput {
    pub channel_id: u32,
    pub seq_no: u64,
    pub path: StatePath,
    pub read: Read,
}

/// Decoded channel: the spliced read plus the concatenated state path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelOutput {
    pub channel_id: u32,
    pub read: Read,
    /// States of all chunks back to back. Lanes are dropped because chunk
    /// junctions have none.
    pub path: StatePath,
    pub chunks: usize,
}

/// Model, transition table and kernel choice bundled for decoding.
#[derive(Debug, Clone)]
pub struct Detector {
    model: KmerModel,
    table: TransitionTable,
    options: TrellisOptions,
}

impl Detector {
    pub fn new(model: KmerModel, variant: Variant) -> Result<Self, ModelError> {
        let table = build_table(model.k())?;
        Ok(Self {
            model,
            table,
            options: TrellisOptions::default().with_variant(variant),
        })
    }

    pub fn model(&self) -> &KmerModel {
        &self.model
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn variant(&self) -> Variant {
        self.options.variant
    }

    /// Construct, trace and assemble one chunk of at most 512 events.
    pub fn detect_chunk(&self, chunk: &EventChunk) -> Result<ChunkOutput, PipelineError> {
        self.detect_with_limit(chunk, DEFAULT_MAX_EVENTS)
    }

    fn detect_with_limit(&self, chunk: &EventChunk, limit: usize) -> Result<ChunkOutput, PipelineError> {
        let opts = self.options.with_max_events(limit);
        let result = construct_with::<f64>(&self.model, &self.table, &chunk.samples, opts)?;
        let path = trace(&result, &self.table)?;
        let mut read = assemble_read(&path, &self.model)?;
        read.channel_id = chunk.channel_id;
        read.chunk_span = (chunk.offset, chunk.offset + chunk.samples.len() as u64);
        Ok(ChunkOutput {
            channel_id: chunk.channel_id,
            seq_no: chunk.seq_no,
            path,
            read,
        })
    }

    fn detect_sized(&self, chunk: &EventChunk, size: ChunkSize) -> Result<ChunkOutput, PipelineError> {
        match size {
            ChunkSize::Fixed(_) => self.detect_chunk(chunk),
            ChunkSize::Whole => self.detect_with_limit(chunk, chunk.samples.len().max(1)),
        }
    }

    /// Decodes one channel's stream sequentially.
    pub fn decode_stream(
        &self,
        channel_id: u32,
        events: &[f64],
        chunk: ChunkSize,
    ) -> Result<ChannelOutput, PipelineError> {
        let outputs = chunk_stream(channel_id, events, chunk)
            .iter()
            .map(|c| self.detect_sized(c, chunk))
            .collect::<Result<Vec<_>, _>>()?;
        channel_output(channel_id, &outputs, &self.model)
    }
}

/// Lane used to bridge a chunk junction: the cheapest lane of `to` whose
/// predecessor is `from`, lowest lane on ties.
fn junction_class(model: &KmerModel, from: u32, to: u32) -> Option<TransitionClass> {
    let costs = model.trans_cost();
    (0..LANES as u8)
        .filter(|&t| prev_state(model.k(), to, t) == from)
        .min_by(|&a, &b| costs[a as usize].total_cmp(&costs[b as usize]).then(a.cmp(&b)))
        .map(TransitionClass::of_lane)
}

/// Joins per-chunk outputs of one channel into a single read.
///
/// Chunk 0 contributes its whole read. At each junction the pair (last
/// state of the previous chunk, first state of the next) is bridged with the
/// cheapest connecting lane, adding 0, 1 or 2 bases; if no lane connects
/// them the next chunk's first k-mer is emitted in full and the junction is
/// flagged. The rest of each chunk's read follows.
pub fn splice(chunks: &[ChunkOutput], model: &KmerModel) -> Result<Read, PipelineError> {
    let first = chunks.first().ok_or(PipelineError::NothingToSplice)?;
    let k = model.k();
    let mut read = first.read.clone();
    let mut prev = first;
    for cur in &chunks[1..] {
        if cur.seq_no != prev.seq_no + 1 {
            return Err(PipelineError::SeqGap {
                expected: prev.seq_no + 1,
                found: cur.seq_no,
            });
        }
        let last_state = *prev.path.states.last().ok_or(TracebackError::EmptyPath)?;
        let first_state = *cur.path.states.first().ok_or(TracebackError::EmptyPath)?;
        match junction_class(model, last_state, first_state) {
            Some(class) => push_transition_bases(&mut read.bases, first_state, class),
            None => {
                read.junction_breaks.push(cur.seq_no);
                read.bases.push_str(&decode_kmer(first_state, k));
            }
        }
        read.bases.push_str(&cur.read.bases[k..]);
        read.chunk_span.1 = cur.read.chunk_span.1;
        prev = cur;
    }
    Ok(read)
}

fn channel_output(
    channel_id: u32,
    outputs: &[ChunkOutput],
    model: &KmerModel,
) -> Result<ChannelOutput, PipelineError> {
    let read = splice(outputs, model)?;
    let states = outputs.iter().flat_map(|o| o.path.states.iter().copied()).collect();
    Ok(ChannelOutput {
        channel_id,
        read,
        path: StatePath::from_states(states),
        chunks: outputs.len(),
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct SourceError(pub String);

/// A per-channel supplier of event chunks.
pub trait EventSource: Send {
    fn channel_id(&self) -> u32;
    /// Next run of at most `max_len` events, or `None` once exhausted.
    fn next_chunk(&mut self, max_len: usize) -> Result<Option<Vec<f64>>, SourceError>;
}

/// An in-memory event stream.
#[derive(Debug, Clone)]
pub struct VecSource {
    channel_id: u32,
    samples: Vec<f64>,
    pos: usize,
}

impl VecSource {
    pub fn new(channel_id: u32, samples: Vec<f64>) -> Self {
        Self {
            channel_id,
            samples,
            pos: 0,
        }
    }
}

impl EventSource for VecSource {
    fn channel_id(&self) -> u32 {
        self.channel_id
    }

    fn next_chunk(&mut self, max_len: usize) -> Result<Option<Vec<f64>>, SourceError> {
        if self.pos >= self.samples.len() {
            return Ok(None);
        }
        let end = self.pos.saturating_add(max_len).min(self.samples.len());
        let out = self.samples[self.pos..end].to_vec();
        self.pos = end;
        Ok(Some(out))
    }
}

/// Receives one completed channel at a time, in source order.
pub trait ChannelSink {
    fn accept(&mut self, output: ChannelOutput);
}

impl ChannelSink for Vec<ChannelOutput> {
    fn accept(&mut self, output: ChannelOutput) {
        self.push(output);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelFailure {
    pub channel_id: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub channels: usize,
    pub chunks: usize,
    /// Events decoded across all successful channels.
    pub events: u64,
    pub elapsed: Duration,
    pub events_per_second: f64,
    /// Achieved rate over the aggregate rate `n_channels * event_rate`.
    pub deadline_ratio: f64,
    pub failed: Vec<ChannelFailure>,
}

struct WorkItem {
    slot: usize,
    chunk: EventChunk,
}

struct ChannelState {
    channel_id: u32,
    next_seq: u64,
    offset: u64,
    exhausted: bool,
    failure: Option<String>,
    outputs: BTreeMap<u64, Result<ChunkOutput, PipelineError>>,
}

/// Decodes every source chunk by chunk with `workers` threads and passes each
/// finished channel to `sink`. A failing channel is reported in the summary
/// and does not stop the others.
pub fn run_channels(
    sources: Vec<Box<dyn EventSource>>,
    cfg: &ChannelConfig,
    detector: &Detector,
    workers: usize,
    sink: &mut dyn ChannelSink,
) -> RunSummary {
    let start = Instant::now();
    let mut sources = sources;
    let mut states: Vec<ChannelState> = sources
        .iter()
        .map(|s| ChannelState {
            channel_id: s.channel_id(),
            next_seq: 0,
            offset: 0,
            exhausted: false,
            failure: None,
            outputs: BTreeMap::new(),
        })
        .collect();

    let size = cfg.chunk;
    let mut dispatch = |emit: &mut dyn FnMut(WorkItem), states: &mut [ChannelState]| loop {
        let mut any = false;
        for (slot, (source, st)) in sources.iter_mut().zip(states.iter_mut()).enumerate() {
            if st.exhausted || st.failure.is_some() {
                continue;
            }
            match source.next_chunk(size.limit()) {
                Ok(Some(samples)) => {
                    any = true;
                    let chunk = EventChunk {
                        channel_id: st.channel_id,
                        seq_no: st.next_seq,
                        offset: st.offset,
                        samples,
                    };
                    st.next_seq += 1;
                    st.offset += chunk.samples.len() as u64;
                    emit(WorkItem { slot, chunk });
                }
                Ok(None) => st.exhausted = true,
                Err(e) => st.failure = Some(PipelineError::Source(e.0).to_string()),
            }
        }
        if !any {
            break;
        }
    };

    if workers <= 1 {
        let mut results = Vec::new();
        dispatch(
            &mut |item: WorkItem| {
                let out = detector.detect_sized(&item.chunk, size);
                results.push((item.slot, item.chunk.seq_no, out));
            },
            &mut states,
        );
        for (slot, seq, out) in results {
            states[slot].outputs.insert(seq, out);
        }
    } else {
        let (work_tx, work_rx) = crossbeam_channel::bounded::<WorkItem>(workers * 2);
        let (done_tx, done_rx) = crossbeam_channel::unbounded();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let work_rx = work_rx.clone();
                let done_tx = done_tx.clone();
                scope.spawn(move || {
                    for item in work_rx {
                        let out = detector.detect_sized(&item.chunk, size);
                        if done_tx.send((item.slot, item.chunk.seq_no, out)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(done_tx);
            dispatch(
                &mut |item: WorkItem| {
                    work_tx.send(item).expect("decode workers exited early");
                },
                &mut states,
            );
            drop(work_tx);
        });
        for (slot, seq, out) in done_rx {
            states[slot].outputs.insert(seq, out);
        }
    }

    let mut summary = RunSummary {
        channels: states.len(),
        chunks: 0,
        events: 0,
        elapsed: Duration::ZERO,
        events_per_second: 0.0,
        deadline_ratio: 0.0,
        failed: Vec::new(),
    };
    for st in states {
        let finished = match st.failure {
            Some(msg) => Err(msg),
            None => st
                .outputs
                .into_values()
                .collect::<Result<Vec<_>, _>>()
                .and_then(|outs| channel_output(st.channel_id, &outs, detector.model()))
                .map_err(|e| e.to_string()),
        };
        match finished {
            Ok(out) => {
                summary.chunks += out.chunks;
                summary.events += out.path.len() as u64;
                sink.accept(out);
            }
            Err(message) => summary.failed.push(ChannelFailure {
                channel_id: st.channel_id,
                message,
            }),
        }
    }
    summary.elapsed = start.elapsed();
    let secs = summary.elapsed.as_secs_f64().max(f64::MIN_POSITIVE);
    summary.events_per_second = summary.events as f64 / secs;
    summary.deadline_ratio = summary.events_per_second / (cfg.n_channels as f64 * cfg.event_rate);
    summary
}
