//! Ground-truthed synthetic event streams.
//!
//! A uniform random base string is walked by a cursor. Each dwell emits one
//! event `mu[kmer] + noise`, then the cursor advances by 0, 1 or 2 bases
//! according to the kinetics. The walk ends when an advance would move past
//! the last full k-mer; a skip from the second-to-last k-mer is shortened to
//! a step.
//!
//! Noise has standard deviation `std(mu) / 10^(snr_db / 20)`, so `snr_db`
//! compares the spread of k-mer levels with the per-event noise. An infinite
//! `snr_db` gives noiseless events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{KmerModel, TransitionKinetics, BASES};
use crate::transitions::TransitionClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("sequence length {seq_len} is shorter than k = {k}")]
    TooShort { seq_len: usize, k: usize },
    #[error("snr_db must be finite or +inf, got {0}")]
    InvalidSnr(f64),
    #[error("event cap must be at least 1")]
    ZeroCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub seq_len: usize,
    pub kinetics: TransitionKinetics,
    /// `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
    /// Stops the walk after this many events; the base string is then cut to
    /// the part the cursor has covered.
    pub max_events: Option<usize>,
}

impl SimulationSpec {
    pub fn new(seq_len: usize, kinetics: TransitionKinetics, snr_db: f64, seed: u64) -> Self {
        Self {
            seq_len,
            kinetics,
            snr_db,
            seed,
            max_events: None,
        }
    }

    pub fn with_max_events(mut self, cap: usize) -> Self {
        self.max_events = Some(cap);
        self
    }

    pub fn noise_sigma(&self, model: &KmerModel) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            model.level_std() / 10f64.powf(self.snr_db / 20.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub bases: String,
    /// One state per event.
    pub true_states: Vec<u32>,
    pub events: Vec<f64>,
    /// Class of each move between consecutive events (`len = events - 1`).
    pub moves: Vec<TransitionClass>,
}

/// Runs one seeded walk. Each event consumes one normal and one uniform draw
/// whatever the noise level, so two specs that differ only in `snr_db` share
/// their base string, walk and standardized noise.
pub fn simulate(model: &KmerModel, spec: &SimulationSpec) -> Result<GroundTruth, SimulationError> {
    let k = model.k();
    if spec.seq_len < k {
        return Err(SimulationError::TooShort {
            seq_len: spec.seq_len,
            k,
        });
    }
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(SimulationError::InvalidSnr(spec.snr_db));
    }
    if spec.max_events == Some(0) {
        return Err(SimulationError::ZeroCap);
    }
    let sigma = spec.noise_sigma(model);
    let cap = spec.max_events.unwrap_or(usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let codes: Vec<u8> = (0..spec.seq_len).map(|_| rng.random_range(0..4u8)).collect();
    let last = spec.seq_len - k;
    let mask = (1u32 << (2 * k)) - 1;
    let mut state = codes[..k].iter().fold(0u32, |s, &b| (s << 2) | b as u32);
    let mut pos = 0usize;

    let kin = spec.kinetics;
    let mut true_states = Vec::new();
    let mut events = Vec::new();
    let mut moves = Vec::new();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        true_states.push(state);
        events.push(model.mu()[state as usize] + sigma * z);
        let u: f64 = rng.random();
        if events.len() >= cap {
            break;
        }
        let class = if u < kin.p_stay {
            TransitionClass::Stay
        } else if u < kin.p_stay + kin.p_step {
            TransitionClass::Step
        } else {
            TransitionClass::Skip
        };
        let class = match class {
            TransitionClass::Skip if pos + 1 == last => TransitionClass::Step,
            c => c,
        };
        let advance = class.advance();
        if pos + advance > last {
            break;
        }
        for i in 0..advance {
            state = ((state << 2) | codes[pos + k + i] as u32) & mask;
        }
        pos += advance;
        moves.push(class);
    }

    let bases = codes[..pos + k].iter().map(|&c| BASES[c as usize] as char).collect();
    Ok(GroundTruth {
        bases,
        true_states,
        events,
        moves,
    })
}

/// Mixes a master seed with indices into a sub-seed (SplitMix64 finalizer
/// applied after each part).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(master), |acc, &p| mix(acc.rotate_left(23) ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{decode_kmer, synth_model};
    use crate::traceback::{path_bases, StatePath};
    use crate::transitions::classify;

    fn model() -> KmerModel {
        synth_model(3, 11, 200.0, 1.0).unwrap()
    }

    #[test]
    fn noiseless_step_walk_visits_each_kmer_once() {
        let m = model();
        let spec = SimulationSpec::new(10, TransitionKinetics::step_only(), f64::INFINITY, 4);
        let truth = simulate(&m, &spec).unwrap();
        assert_eq!(truth.events.len(), 8);
        assert_eq!(truth.bases.len(), 10);
        for (i, (&s, &x)) in truth.true_states.iter().zip(&truth.events).enumerate() {
            assert_eq!(x, m.mu()[s as usize]);
            assert_eq!(decode_kmer(s, 3), truth.bases[i..i + 3]);
        }
    }

    #[test]
    fn same_seed_same_truth() {
        let m = model();
        let spec = SimulationSpec::new(300, TransitionKinetics::default(), 6.0, 99);
        assert_eq!(simulate(&m, &spec).unwrap(), simulate(&m, &spec).unwrap());
        let other = SimulationSpec { seed: 100, ..spec };
        assert_ne!(simulate(&m, &spec).unwrap(), simulate(&m, &other).unwrap());
    }

    #[test]
    fn stay_only_walk_is_capped() {
        let m = model();
        let kin = TransitionKinetics::new(1.0, 0.0, 0.0).unwrap();
        let truth = simulate(&m, &SimulationSpec::new(50, kin, 10.0, 1).with_max_events(40)).unwrap();
        assert_eq!(truth.true_states.len(), 40);
        assert!(truth.true_states.iter().all(|&s| s == truth.true_states[0]));
        assert_eq!(truth.bases.len(), 3);
    }

    #[test]
    fn bad_specs_rejected() {
        let m = model();
        let kin = TransitionKinetics::default();
        assert_eq!(
            simulate(&m, &SimulationSpec::new(2, kin, 1.0, 0)),
            Err(SimulationError::TooShort { seq_len: 2, k: 3 })
        );
        assert!(simulate(&m, &SimulationSpec::new(9, kin, f64::NAN, 0)).is_err());
        assert!(simulate(&m, &SimulationSpec::new(9, kin, 3.0, 0).with_max_events(0)).is_err());
    }

    #[test]
    fn walks_are_valid_and_bases_match_moves() {
        let m = model();
        for seed in 0..50 {
            let truth = simulate(&m, &SimulationSpec::new(120, TransitionKinetics::default(), 9.0, seed)).unwrap();
            assert_eq!(truth.true_states.len(), truth.events.len());
            assert_eq!(truth.moves.len() + 1, truth.events.len());
            let visited = 1 + truth.moves.iter().filter(|&&c| c != TransitionClass::Stay).count();
            assert!(truth.events.len() >= visited);
            for pair in truth.true_states.windows(2) {
                assert!(classify(3, pair[0], pair[1]).is_some());
            }
            let lanes: Vec<u8> = truth
                .true_states
                .windows(2)
                .zip(&truth.moves)
                .map(|(pair, &class)| lane_for(pair[0], pair[1], class))
                .collect();
            let path = StatePath { states: truth.true_states.clone(), lanes: Some(lanes) };
            assert_eq!(path_bases(&path, 3).unwrap(), truth.bases);
        }
    }

    fn lane_for(from: u32, to: u32, class: TransitionClass) -> u8 {
        let table = crate::transitions::build_table(3).unwrap();
        let lane = table
            .connecting_lanes(from, to)
            .find(|&t| TransitionClass::of_lane(t) == class)
            .expect("class connects the pair");
        lane
    }

    #[test]
    fn move_frequencies_follow_kinetics() {
        let m = model();
        let kin = TransitionKinetics::default();
        let truth = simulate(&m, &SimulationSpec::new(100_000, kin, 9.0, 5)).unwrap();
        let n = truth.moves.len() as f64;
        for (class, p) in [
            (TransitionClass::Stay, kin.p_stay),
            (TransitionClass::Step, kin.p_step),
            (TransitionClass::Skip, kin.p_skip),
        ] {
            let freq = truth.moves.iter().filter(|&&c| c == class).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "{class:?}: {freq} vs {p}");
        }
    }

    #[test]
    fn noise_matches_requested_snr() {
        let m = model();
        let spec = SimulationSpec::new(120_000, TransitionKinetics::default(), 6.0, 8);
        let truth = simulate(&m, &spec).unwrap();
        let resid: Vec<f64> = truth
            .true_states
            .iter()
            .zip(&truth.events)
            .map(|(&s, &x)| x - m.mu()[s as usize])
            .collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let target = spec.noise_sigma(&m);
        assert!((sd / target - 1.0).abs() < 0.02, "{sd} vs {target}");
    }

    #[test]
    fn snr_only_rescales_noise() {
        let m = model();
        let a = simulate(&m, &SimulationSpec::new(200, TransitionKinetics::default(), 3.0, 2)).unwrap();
        let b = simulate(&m, &SimulationSpec::new(200, TransitionKinetics::default(), f64::INFINITY, 2)).unwrap();
        assert_eq!(a.bases, b.bases);
        assert_eq!(a.true_states, b.true_states);
        assert_ne!(a.events, b.events);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive_seed(7, &[i])).chain((0..10).map(|i| derive_seed(8, &[i]))).collect();
        assert_eq!(s.len(), 1010);
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
        assert_ne!(derive_seed(7, &[3, 4]), derive_seed(7, &[4, 3]));
    }
}
