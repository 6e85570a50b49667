//! k-mer emission model and transition kinetics.
//!
//! A [`KmerModel`] holds one expected event level (`mu`) and one emission
//! offset (`sigma`) per k-mer state, plus the 21 negative-log transition costs
//! shared by every state. States are numbered in lexicographic base-4 order
//! with `A=0, C=1, G=2, T=3`, so for `k = 3` the state `AAA` is 0, `AAC` is 1
//! and `TTT` is 63.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Smallest supported k-mer order.
pub const MIN_K: usize = 2;
/// Largest supported k-mer order.
pub const MAX_K: usize = 6;
/// Number of predecessor lanes per state: 1 stay, 4 steps, 16 skips.
pub const LANES: usize = 21;

/// Nucleotide alphabet in state-index order.
pub const BASES: [u8; 4] = *b"ACGT";

const MAGIC_LINE: &str = "POREPATH-MODEL v1";
const KINETICS_TOLERANCE: f64 = 1e-9;

/// Mean level around which [`synth_model`] centres its levels.
pub const LEVEL_CENTRE: f64 = 100.0;
/// Synthesized levels and offsets are rounded to this grid (2^-10) so they are
/// exactly representable in 32-bit event files and in [`crate::ExactCost`].
pub const LEVEL_QUANTUM: f64 = 1.0 / 1024.0;
/// Default level spread. For k = 3 the level gap is about 3.17, so one wrong
/// state costs at least 10 in squared error, more than the 2 x 4.22 any change
/// of its two adjacent lanes can save under the default kinetics. Noiseless
/// state paths are therefore the unique optimum.
pub const DEFAULT_LEVEL_SPREAD: f64 = 200.0;
pub const DEFAULT_SIGMA_BASE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("k out of range: {0} (expected {MIN_K}..={MAX_K})")]
    KOutOfRange(usize),
    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),
    #[error("{0}")]
    Invariant(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{msg}")]
    Synth { msg: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn check_k(k: usize) -> Result<(), ModelError> {
    if (MIN_K..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(ModelError::KOutOfRange(k))
    }
}

/// Number of states for a k-mer order, `4^k`.
pub const fn n_states(k: usize) -> usize {
    1 << (2 * k)
}

/// Index of a nucleotide in `ACGT` order.
pub fn base_index(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Encodes a k-mer string as its state index.
pub fn encode_kmer(kmer: &str) -> Option<u32> {
    let mut idx = 0u32;
    for &b in kmer.as_bytes() {
        idx = (idx << 2) | base_index(b)? as u32;
    }
    Some(idx)
}

/// Decodes a state index into its k-mer string.
pub fn decode_kmer(state: u32, k: usize) -> String {
    (0..k)
        .rev()
        .map(|i| BASES[((state >> (2 * i)) & 3) as usize] as char)
        .collect()
}

/// Generative probabilities of the three transition classes.
///
/// Each probability lies in `[0, 1]` and the three sum to one. Zero entries
/// are allowed for simulation (e.g. a step-only walk), but a decoder model
/// needs all three strictly positive so its costs are finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKinetics {
    pub p_stay: f64,
    pub p_step: f64,
    pub p_skip: f64,
}

impl TransitionKinetics {
    pub fn new(p_stay: f64, p_step: f64, p_skip: f64) -> Result<Self, ModelError> {
        for (name, p) in [("p_stay", p_stay), ("p_step", p_step), ("p_skip", p_skip)] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidKinetics(format!(
                    "{name}={p} outside [0, 1]"
                )));
            }
        }
        let sum = p_stay + p_step + p_skip;
        if (sum - 1.0).abs() > KINETICS_TOLERANCE {
            return Err(ModelError::InvalidKinetics(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            p_stay,
            p_step,
            p_skip,
        })
    }

    /// Pure one-base advance: every transition is a step.
    pub fn step_only() -> Self {
        Self {
            p_stay: 0.0,
            p_step: 1.0,
            p_skip: 0.0,
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.p_stay > 0.0 && self.p_step > 0.0 && self.p_skip > 0.0
    }
}

impl Default for TransitionKinetics {
    fn default() -> Self {
        Self {
            p_stay: 0.10,
            p_step: 0.85,
            p_skip: 0.05,
        }
    }
}

/// Converts kinetics into the 21 per-lane negative-log costs.
///
/// Lane 0 is the stay, lanes 1..=4 the steps and lanes 5..=20 the skips; the
/// probability of each class is split uniformly over its members.
pub fn derive_trans_cost(kin: &TransitionKinetics) -> Result<[f64; LANES], ModelError> {
    if !kin.is_strictly_positive() {
        return Err(ModelError::InvalidKinetics(format!(
            "decoder costs need every probability > 0, got stay={} step={} skip={}",
            kin.p_stay, kin.p_step, kin.p_skip
        )));
    }
    let stay = -kin.p_stay.ln();
    let step = -(kin.p_step / 4.0).ln();
    let skip = -(kin.p_skip / 16.0).ln();
    let mut cost = [skip; LANES];
    cost[0] = stay;
    cost[1..5].fill(step);
    Ok(cost)
}

/// Per-state emission parameters plus the shared transition costs.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct KmerModel {
    k: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    kinetics: TransitionKinetics,
    trans_cost: [f64; LANES],
}

impl KmerModel {
    /// Builds a model whose transition costs are derived from `kinetics`.
    pub fn new(
        k: usize,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        kinetics: TransitionKinetics,
    ) -> Result<Self, ModelError> {
        let trans_cost = derive_trans_cost(&kinetics)?;
        Self::with_trans_cost(k, mu, sigma, kinetics, trans_cost)
    }

    /// Builds a model with explicit transition costs. `kinetics` is kept as
    /// metadata (it drives simulation) and is not cross-checked against
    /// `trans_cost`.
    pub fn with_trans_cost(
        k: usize,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        kinetics: TransitionKinetics,
        trans_cost: [f64; LANES],
    ) -> Result<Self, ModelError> {
        check_k(k)?;
        let n = n_states(k);
        if mu.len() != n {
            return Err(ModelError::Invariant(format!(
                "expected {n} mu values, got {}",
                mu.len()
            )));
        }
        if sigma.len() != n {
            return Err(ModelError::Invariant(format!(
                "expected {n} sigma values, got {}",
                sigma.len()
            )));
        }
        if let Some(i) = mu.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Invariant(format!("mu[{i}] not finite")));
        }
        if let Some(i) = sigma.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Invariant(format!("sigma[{i}] not finite")));
        }
        for (i, c) in trans_cost.iter().enumerate() {
            if !c.is_finite() {
                return Err(ModelError::Invariant(format!("trans_cost[{i}] not finite")));
            }
            if *c < 0.0 {
                return Err(ModelError::Invariant(format!(
                    "trans_cost[{i}] negative ({c})"
                )));
            }
        }
        Ok(Self {
            k,
            mu,
            sigma,
            kinetics,
            trans_cost,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_states(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Per-state offset subtracted in the posterior update. It is an opaque
    /// term, not a Gaussian standard deviation.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn kinetics(&self) -> &TransitionKinetics {
        &self.kinetics
    }

    pub fn trans_cost(&self) -> &[f64; LANES] {
        &self.trans_cost
    }

    /// Population standard deviation of the level table.
    pub fn level_std(&self) -> f64 {
        let n = self.mu.len() as f64;
        let mean = self.mu.iter().sum::<f64>() / n;
        (self.mu.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Reads a model from the line-oriented text format.
    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        parse_model(text)
    }

    /// Serializes the model. Floats use the shortest round-tripping
    /// representation, so `from_text(to_text(m)) == m` bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC_LINE}");
        let _ = writeln!(out, "k {}", self.k);
        let kin = &self.kinetics;
        let _ = writeln!(out, "kin {} {} {}", kin.p_stay, kin.p_step, kin.p_skip);
        out.push_str("tcost");
        for c in &self.trans_cost {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
        for (i, (mu, sigma)) in self.mu.iter().zip(&self.sigma).enumerate() {
            let _ = writeln!(out, "{} {mu} {sigma}", decode_kmer(i as u32, self.k));
        }
        out
    }
}

/// Loads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<KmerModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model(&text)
}

/// Writes a model file.
pub fn save_model(model: &KmerModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model.to_text()).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, ModelError> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_model(text: &str) -> Result<KmerModel, ModelError> {
    // Significant lines only, each tagged with its 1-based line number.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, magic) = lines.next().ok_or_else(|| parse_err(1, "empty model file"))?;
    if magic != MAGIC_LINE {
        return Err(parse_err(ln, format!("expected header '{MAGIC_LINE}'")));
    }

    let (ln, kline) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing 'k' line"))?;
    let k = match kline.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["k", v] => v
            .parse::<usize>()
            .map_err(|_| parse_err(ln, format!("invalid k '{v}'")))?,
        _ => return Err(parse_err(ln, "expected 'k <int>'")),
    };
    check_k(k).map_err(|e| parse_err(ln, e.to_string()))?;
    let n = n_states(k);

    let (ln, kin_line) = lines
        .next()
        .ok_or_else(|| parse_err(ln + 1, "missing 'kin' line"))?;
    let kinetics = match kin_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["kin", a, b, c] => TransitionKinetics::new(
            parse_f64(a, ln, "p_stay")?,
            parse_f64(b, ln, "p_step")?,
            parse_f64(c, ln, "p_skip")?,
        )
        .map_err(|e| parse_err(ln, e.to_string()))?,
        _ => return Err(parse_err(ln, "expected 'kin <p_stay> <p_step> <p_skip>'")),
    };

    let mut trans_cost: Option<[f64; LANES]> = None;
    let mut mu = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut last_line = ln;
    for (ln, line) in lines {
        last_line = ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() == Some(&"tcost") {
            if trans_cost.is_some() || !mu.is_empty() {
                return Err(parse_err(ln, "'tcost' must appear once, before the states"));
            }
            if toks.len() != LANES + 1 {
                return Err(parse_err(
                    ln,
                    format!("expected {LANES} transition costs, got {}", toks.len() - 1),
                ));
            }
            let mut costs = [0.0; LANES];
            for (i, t) in toks[1..].iter().enumerate() {
                costs[i] = parse_f64(t, ln, &format!("trans_cost[{i}]"))?;
            }
            trans_cost = Some(costs);
            continue;
        }
        if toks.len() != 3 {
            return Err(parse_err(ln, "expected '<kmer> <mu> <sigma>'"));
        }
        let expected = mu.len();
        if expected >= n {
            return Err(parse_err(ln, format!("expected {n} states, found more")));
        }
        let kmer = toks[0];
        let state = (kmer.len() == k)
            .then(|| encode_kmer(kmer))
            .flatten()
            .ok_or_else(|| parse_err(ln, format!("invalid {k}-mer '{kmer}'")))?;
        if state as usize != expected {
            return Err(parse_err(
                ln,
                format!(
                    "k-mer '{kmer}' out of order, expected '{}'",
                    decode_kmer(expected as u32, k)
                ),
            ));
        }
        mu.push(parse_f64(toks[1], ln, "mu")?);
        sigma.push(parse_f64(toks[2], ln, "sigma")?);
    }
    if mu.len() != n {
        return Err(parse_err(
            last_line,
            format!("expected {n} states, got {}", mu.len()),
        ));
    }

    match trans_cost {
        Some(costs) => KmerModel::with_trans_cost(k, mu, sigma, kinetics, costs),
        None => KmerModel::new(k, mu, sigma, kinetics),
    }
}

fn quantize(v: f64) -> f64 {
    (v / LEVEL_QUANTUM).round() * LEVEL_QUANTUM
}

/// Generates a synthetic model.
///
/// Levels are `N` evenly spaced values spanning `level_spread` around
/// [`LEVEL_CENTRE`], rounded to [`LEVEL_QUANTUM`] and assigned to states by a
/// seeded Fisher-Yates shuffle (ChaCha8). Every `sigma` equals `sigma_base`
/// (also quantized) and the costs come from the default kinetics. Levels are
/// pairwise distinct whenever `level_spread / (N - 1)` exceeds the quantum.
pub fn synth_model(
    k: usize,
    seed: u64,
    level_spread: f64,
    sigma_base: f64,
) -> Result<KmerModel, ModelError> {
    check_k(k)?;
    if !(level_spread.is_finite() && level_spread > 0.0) {
        return Err(ModelError::Synth {
            msg: format!("level spread must be positive, got {level_spread}"),
        });
    }
    if !(sigma_base.is_finite() && sigma_base > 0.0) {
        return Err(ModelError::Synth {
            msg: format!("sigma base must be positive, got {sigma_base}"),
        });
    }
    let n = n_states(k);
    let lo = LEVEL_CENTRE - level_spread / 2.0;
    let gap = level_spread / (n - 1) as f64;
    let mut levels: Vec<f64> = (0..n).map(|i| quantize(lo + gap * i as f64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    levels.shuffle(&mut rng);
    let sigma = vec![quantize(sigma_base); n];
    KmerModel::new(k, levels, sigma, TransitionKinetics::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} != {b}");
    }

    #[test]
    fn kmer_codec_matches_lexicographic_order() {
        assert_eq!(encode_kmer("AAA"), Some(0));
        assert_eq!(encode_kmer("AAC"), Some(1));
        assert_eq!(encode_kmer("ACG"), Some(6));
        assert_eq!(encode_kmer("CGT"), Some(27));
        assert_eq!(encode_kmer("GAC"), Some(33));
        assert_eq!(encode_kmer("TTT"), Some(63));
        assert_eq!(encode_kmer("AXA"), None);
        assert_eq!(decode_kmer(27, 3), "CGT");
    }

    #[test]
    fn kmer_codec_is_a_bijection() {
        for k in MIN_K..=MAX_K {
            for n in 0..n_states(k) as u32 {
                assert_eq!(encode_kmer(&decode_kmer(n, k)), Some(n));
            }
        }
    }

    #[test]
    fn uniform_kinetics_costs() {
        let third = 1.0 / 3.0;
        let c = derive_trans_cost(&TransitionKinetics::new(third, third, third).unwrap()).unwrap();
        assert_close(c[0], 3f64.ln());
        assert_close(c[1], 12f64.ln());
        assert_close(c[5], 48f64.ln());
    }

    #[test]
    fn default_kinetics_costs() {
        let c = derive_trans_cost(&TransitionKinetics::new(0.10, 0.85, 0.05).unwrap()).unwrap();
        // -ln(0.10), -ln(0.85 / 4), -ln(0.05 / 16)
        assert_close(c[0], 2.302_585_092_994_045_7);
        assert_close(c[1], 1.548_813_290_617_665_5);
        assert_close(c[5], 5.768_320_995_793_772);
        assert_eq!(c.len(), LANES);
        assert!(c[1..5].iter().all(|&v| v == c[1]));
        assert!(c[5..].iter().all(|&v| v == c[5]));
    }

    #[test]
    fn degenerate_kinetics_rejected_for_costs() {
        assert!(derive_trans_cost(&TransitionKinetics::step_only()).is_err());
        assert!(TransitionKinetics::new(0.5, 0.6, 0.1).is_err());
        assert!(TransitionKinetics::new(-0.1, 1.0, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn costs_are_a_distribution(a in 0.01f64..1.0, b in 0.01f64..1.0, c in 0.01f64..1.0) {
            let s = a + b + c;
            let kin = TransitionKinetics::new(a / s, b / s, 1.0 - a / s - b / s).unwrap();
            let total: f64 = derive_trans_cost(&kin).unwrap().iter().map(|c| (-c).exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn text_format_round_trips(k in 2usize..=4, seed in any::<u64>(), spread in 1.0f64..500.0) {
            let model = synth_model(k, seed, spread, 1.25).unwrap();
            let back = KmerModel::from_text(&model.to_text()).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_model(3, 7, 100.0, 1.0).unwrap();
        let b = synth_model(3, 7, 100.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_model(3, 8, 100.0, 1.0).unwrap());
        assert_eq!(synth_model(2, 1, 10.0, 1.0).unwrap().n_states(), 16);
        assert!(matches!(synth_model(7, 1, 10.0, 1.0), Err(ModelError::KOutOfRange(7))));
    }

    #[test]
    fn synth_levels_span_the_spread_and_are_distinct() {
        let m = synth_model(3, 7, 100.0, 1.0).unwrap();
        let max = m.mu().iter().cloned().fold(f64::MIN, f64::max);
        let min = m.mu().iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min >= 90.0);
        let mut sorted = m.mu().to_vec();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn parse_rejects_short_state_table() {
        let text = synth_model(3, 1, 50.0, 1.0).unwrap().to_text();
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        let err = KmerModel::from_text(&truncated).unwrap_err().to_string();
        assert!(err.contains("expected 64 states"), "{err}");
    }

    #[test]
    fn parse_names_negative_cost_index() {
        let text = synth_model(2, 1, 50.0, 1.0).unwrap().to_text();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut toks: Vec<String> = lines[3].split(' ').map(String::from).collect();
        toks[4] = "-0.5".into();
        lines[3] = toks.join(" ");
        let err = KmerModel::from_text(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("trans_cost[3] negative"), "{err}");
    }

    #[test]
    fn parse_names_non_finite_sigma() {
        let text = synth_model(2, 1, 50.0, 1.0).unwrap().to_text();
        let lines: Vec<String> = text
            .lines()
            .map(|l| if l.starts_with("TA ") { "TA 1.0 NaN".to_string() } else { l.to_string() })
            .collect();
        let err = KmerModel::from_text(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("sigma[12] not finite"), "{err}");
    }

    #[test]
    fn parse_requires_lexicographic_order() {
        let text = "POREPATH-MODEL v1\nk 2\nkin 0.1 0.85 0.05\nAC 1 0\nAA 2 0\n";
        let err = KmerModel::from_text(text).unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn parse_without_tcost_derives_costs_and_skips_comments() {
        let mut text = String::from("# generated\nPOREPATH-MODEL v1\nk 2\nkin 0.2 0.6 0.2\n");
        for i in 0..16u32 {
            text.push_str(&format!("# state {i}\n{} {} 0.5\n", decode_kmer(i, 2), i));
        }
        let m = KmerModel::from_text(&text).unwrap();
        assert_eq!(m.k(), 2);
        assert_eq!(m.trans_cost(), &derive_trans_cost(m.kinetics()).unwrap());
    }
}
