//! End-to-end decode throughput.
//!
//! Streams are simulated up front and held in memory; the timed region is
//! the multi-channel run (construct, trace, assemble, splice) only.

use std::io::{self, Write};
use std::time::Instant;

use crate::eval::EvalError;
use crate::model::KmerModel;
use crate::pipeline::{run_channels, ChannelConfig, ChannelOutput, ChunkSize, Detector, EventSource, VecSource};
use crate::simulator::{derive_seed, simulate, SimulationSpec};
use crate::trellis::{Variant, DEFAULT_MAX_EVENTS};

/// Smallest event count that gives stable timings.
pub const MIN_BENCH_EVENTS: usize = 1_000_000;
pub const TSV_HEADER: &str = "variant\tworkers\tevents\tseconds\tevents_per_sec";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub n_events: usize,
    pub channels: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(n_events: usize, seed: u64) -> Self {
        Self {
            n_events,
            channels: 8,
            snr_db: 12.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub variant: Variant,
    pub workers: usize,
    pub total_events: u64,
    pub wall_seconds: f64,
    pub events_per_second: f64,
}

/// Simulated per-channel streams totalling `n_events` events.
pub fn bench_streams(model: &KmerModel, cfg: &BenchConfig) -> Result<Vec<Vec<f64>>, EvalError> {
    if cfg.n_events < MIN_BENCH_EVENTS {
        return Err(EvalError::TooFewEvents {
            requested: cfg.n_events,
            minimum: MIN_BENCH_EVENTS,
        });
    }
    let channels = cfg.channels.max(1);
    (0..channels)
        .map(|c| {
            let share = cfg.n_events / channels + usize::from(c < cfg.n_events % channels);
            // The walk averages under one base per event, so `share` bases
            // always outlast the cap.
            let spec = SimulationSpec::new(share + model.k(), *model.kinetics(), cfg.snr_db, derive_seed(cfg.seed, &[c as u64]))
                .with_max_events(share);
            Ok(simulate(model, &spec)?.events)
        })
        .collect()
}

/// Decodes `streams` with chunks of 512 events and reports the rate.
pub fn bench_throughput(
    model: &KmerModel,
    streams: &[Vec<f64>],
    variant: Variant,
    workers: usize,
) -> Result<(BenchReport, Vec<ChannelOutput>), EvalError> {
    let detector = Detector::new(model.clone(), variant)?;
    let cfg = ChannelConfig::new(streams.len().max(1), 1.0, ChunkSize::Fixed(DEFAULT_MAX_EVENTS))?;
    let sources: Vec<Box<dyn EventSource>> = streams
        .iter()
        .enumerate()
        .map(|(i, s)| Box::new(VecSource::new(i as u32, s.clone())) as Box<dyn EventSource>)
        .collect();
    let mut outputs = Vec::with_capacity(streams.len());
    let start = Instant::now();
    let summary = run_channels(sources, &cfg, &detector, workers.max(1), &mut outputs);
    let wall_seconds = start.elapsed().as_secs_f64().max(1e-9);
    if let Some(f) = summary.failed.first() {
        return Err(EvalError::ChannelFailed {
            channel_id: f.channel_id,
            message: f.message.clone(),
        });
    }
    Ok((
        BenchReport {
            variant,
            workers: workers.max(1),
            total_events: summary.events,
            wall_seconds,
            events_per_second: summary.events as f64 / wall_seconds,
        },
        outputs,
    ))
}

pub fn write_bench_tsv<W: Write>(rows: &[BenchReport], mut w: W) -> io::Result<()> {
    writeln!(w, "{TSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{:.6}\t{:.1}",
            r.variant.label(),
            r.workers,
            r.total_events,
            r.wall_seconds,
            r.events_per_second
        )?;
    }
    Ok(())
}

pub fn format_bench_table(rows: &[BenchReport]) -> String {
    let mut s = format!("{:>10} {:>7} {:>10} {:>9} {:>14}\n", "variant", "workers", "events", "seconds", "events/s");
    for r in rows {
        s.push_str(&format!(
            "{:>10} {:>7} {:>10} {:>9.3} {:>14.0}\n",
            r.variant.label(),
            r.workers,
            r.total_events,
            r.wall_seconds,
            r.events_per_second
        ));
    }
    s
}
