//! Accuracy as a function of noise level and chunk length.
//!
//! Sample `i` is simulated with seed `derive_seed(master, [i])` in every
//! cell. Because the simulator draws the same random numbers at every noise
//! level, all cells see the same base strings, walks and standardized noise,
//! and cell-to-cell differences reflect only the SNR and the chunking.

use std::io::{self, Write};

use crate::eval::metrics::{mean, score, standard_error, AccuracyReport};
use crate::eval::EvalError;
use crate::model::{KmerModel, TransitionKinetics};
use crate::pipeline::{ChunkSize, Detector};
use crate::simulator::{derive_seed, simulate, SimulationSpec};
use crate::trellis::Variant;

pub const DEFAULT_SNR_GRID: [f64; 6] = [0.0, 3.0, 6.0, 9.0, 12.0, 15.0];
pub const DEFAULT_CHUNK_GRID: [ChunkSize; 3] = [ChunkSize::Fixed(32), ChunkSize::Fixed(512), ChunkSize::Whole];
pub const TSV_HEADER: &str = "snr_db\tchunk\tstate_acc\tbase_identity\tn";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_grid: Vec<f64>,
    pub chunk_grid: Vec<ChunkSize>,
    pub n_samples: usize,
    pub seq_len: usize,
    /// Walk kinetics; `None` uses the model's own.
    pub kinetics: Option<TransitionKinetics>,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_grid: DEFAULT_SNR_GRID.to_vec(),
            chunk_grid: DEFAULT_CHUNK_GRID.to_vec(),
            n_samples: 100,
            seq_len: 600,
            kinetics: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub snr_db: f64,
    pub chunk: ChunkSize,
    pub state_acc: f64,
    pub state_se: f64,
    pub base_identity: f64,
    pub identity_se: f64,
    pub n: usize,
}

/// Runs the grid; rows are ordered by SNR, then by chunk size as given.
pub fn sweep_accuracy(model: &KmerModel, cfg: &SweepConfig, seed: u64) -> Result<Vec<SweepCell>, EvalError> {
    if cfg.snr_grid.is_empty() || cfg.chunk_grid.is_empty() || cfg.n_samples == 0 {
        return Err(EvalError::EmptyGrid);
    }
    let detector = Detector::new(model.clone(), Variant::Optimized)?;
    let kinetics = cfg.kinetics.unwrap_or(*model.kinetics());
    let (n_snr, n_chunk) = (cfg.snr_grid.len(), cfg.chunk_grid.len());

    let run_sample = |i: usize| -> Result<Vec<AccuracyReport>, EvalError> {
        let mut out = Vec::with_capacity(n_snr * n_chunk);
        for &snr in &cfg.snr_grid {
            let spec = SimulationSpec::new(cfg.seq_len, kinetics, snr, derive_seed(seed, &[i as u64]));
            let truth = simulate(model, &spec)?;
            for &chunk in &cfg.chunk_grid {
                let decoded = detector.decode_stream(0, &truth.events, chunk)?;
                out.push(score(&decoded.path, &decoded.read.bases, &truth)?);
            }
        }
        Ok(out)
    };

    let workers = cfg.workers.clamp(1, cfg.n_samples);
    let per_sample: Vec<Vec<AccuracyReport>> = if workers == 1 {
        (0..cfg.n_samples).map(run_sample).collect::<Result<_, _>>()?
    } else {
        let mut slots: Vec<Option<Result<Vec<AccuracyReport>, EvalError>>> =
            (0..cfg.n_samples).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_sample = &run_sample;
                    scope.spawn(move || {
                        (w..cfg.n_samples)
                            .step_by(workers)
                            .map(|i| (i, run_sample(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("sweep worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every sample assigned"))
            .collect::<Result<_, _>>()?
    };

    let mut rows = Vec::with_capacity(n_snr * n_chunk);
    for (si, &snr_db) in cfg.snr_grid.iter().enumerate() {
        for (ci, &chunk) in cfg.chunk_grid.iter().enumerate() {
            let cell: Vec<AccuracyReport> = per_sample.iter().map(|s| s[si * n_chunk + ci]).collect();
            let acc: Vec<f64> = cell.iter().map(|r| r.state_accuracy).collect();
            let ident: Vec<f64> = cell.iter().map(|r| r.base_identity).collect();
            rows.push(SweepCell {
                snr_db,
                chunk,
                state_acc: mean(acc.iter().copied()),
                state_se: standard_error(&acc),
                base_identity: mean(ident.iter().copied()),
                identity_se: standard_error(&ident),
                n: cell.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_tsv<W: Write>(rows: &[SweepCell], mut w: W) -> io::Result<()> {
    writeln!(w, "{TSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}\t{}\t{:.6}\t{:.6}\t{}", r.snr_db, r.chunk, r.state_acc, r.base_identity, r.n)?;
    }
    Ok(())
}

/// Aligned table including standard errors.
pub fn format_sweep_table(rows: &[SweepCell]) -> String {
    let mut s = format!(
        "{:>8} {:>6} {:>10} {:>8} {:>13} {:>8} {:>5}\n",
        "snr_db", "chunk", "state_acc", "±se", "base_identity", "±se", "n"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>8} {:>6} {:>10.4} {:>8.4} {:>13.4} {:>8.4} {:>5}\n",
            r.snr_db, r.chunk.to_string(), r.state_acc, r.state_se, r.base_identity, r.identity_se, r.n
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synth_model;

    fn small_cfg(workers: usize) -> SweepConfig {
        SweepConfig {
            snr_grid: vec![0.0, 20.0, f64::INFINITY],
            chunk_grid: vec![ChunkSize::Fixed(16), ChunkSize::Whole],
            n_samples: 6,
            seq_len: 120,
            kinetics: None,
            workers,
        }
    }

    #[test]
    fn grid_shape_and_determinism() {
        let model = synth_model(3, 7, 200.0, 1.0).unwrap();
        let a = sweep_accuracy(&model, &small_cfg(1), 5).unwrap();
        let b = sweep_accuracy(&model, &small_cfg(3), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!((a[1].snr_db, a[1].chunk), (0.0, ChunkSize::Whole));
        for r in &a {
            assert!((0.0..=1.0).contains(&r.state_acc) && (0.0..=1.0).contains(&r.base_identity));
        }
        // Noiseless cells recover every state.
        assert!(a[4..].iter().all(|r| r.state_acc == 1.0));
        assert!(a[0].state_acc < a[2].state_acc);
    }

    #[test]
    fn tsv_layout() {
        let rows = vec![SweepCell {
            snr_db: 15.0,
            chunk: ChunkSize::Whole,
            state_acc: 0.5,
            state_se: 0.1,
            base_identity: 0.25,
            identity_se: 0.0,
            n: 100,
        }];
        let mut buf = Vec::new();
        write_sweep_tsv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db\tchunk\tstate_acc\tbase_identity\tn\n15\tinf\t0.500000\t0.250000\t100\n"
        );
        assert!(format_sweep_table(&rows).contains("inf"));
    }

    #[test]
    fn empty_grid_rejected() {
        let model = synth_model(2, 7, 200.0, 1.0).unwrap();
        let cfg = SweepConfig { snr_grid: vec![], ..small_cfg(1) };
        assert!(matches!(sweep_accuracy(&model, &cfg, 1), Err(EvalError::EmptyGrid)));
    }
}
