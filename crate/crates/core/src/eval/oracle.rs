//! Exhaustive-enumeration decoder for small instances.
//!
//! Every start state and every sequence of lanes is scored with the same
//! accumulation the trellis uses, `((cost + trans) - sigma) + (x - mu)^2`,
//! without normalization. The search is a depth-first walk over successor
//! lists sorted by `(next state, lane)`, so the first minimum found belongs to
//! the lexicographically smallest state sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::{Cost, ExactCost};
use crate::model::{KmerModel, TransitionKinetics, LANES};
use crate::simulator::derive_seed;
use crate::traceback::{trace, StatePath};
use crate::transitions::{build_table, TransitionTable};
use crate::trellis::{construct_with, Normalization, TrellisError, TrellisOptions};

/// Largest number of paths the oracle will enumerate.
pub const MAX_PATHS: f64 = 1.0e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration bound exceeded: {n_states} states x 21^{} steps = {paths:.3e} paths > 1e8", .m_events.saturating_sub(1))]
    TooLarge {
        n_states: usize,
        m_events: usize,
        paths: f64,
    },
    #[error(transparent)]
    Trellis(#[from] TrellisError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<C> {
    pub path: StatePath,
    pub cost: C,
    /// False when another state sequence reaches the same cost.
    pub unique: bool,
}

/// Number of paths for `n_states` states and `m_events` events.
pub fn path_count(n_states: usize, m_events: usize) -> f64 {
    n_states as f64 * (LANES as f64).powi(m_events.saturating_sub(1) as i32)
}

/// Checks the enumeration bound without doing any work.
pub fn check_size(n_states: usize, m_events: usize) -> Result<(), OracleError> {
    let paths = path_count(n_states, m_events);
    if paths > MAX_PATHS {
        return Err(OracleError::TooLarge {
            n_states,
            m_events,
            paths,
        });
    }
    Ok(())
}

struct Search<'a, C> {
    succ: &'a [Vec<(u32, u8, C)>],
    /// `sq[m][n] = (x[m] - mu[n])^2`.
    sq: Vec<Vec<C>>,
    sigma: Vec<C>,
    states: Vec<u32>,
    lanes: Vec<u8>,
    best: Option<(C, Vec<u32>, Vec<u8>)>,
    unique: bool,
}

impl<C: Cost> Search<'_, C> {
    fn visit(&mut self, depth: usize, cost: C) {
        let state = self.states[depth - 1] as usize;
        let last = depth + 1 == self.sq.len();
        for &(next, lane, tc) in &self.succ[state] {
            let c = ((cost + tc) - self.sigma[next as usize]) + self.sq[depth][next as usize];
            if last && self.best.as_ref().is_some_and(|(b, _, _)| c > *b) {
                continue;
            }
            self.states[depth] = next;
            self.lanes[depth - 1] = lane;
            if last {
                self.offer(c);
            } else {
                self.visit(depth + 1, c);
            }
        }
    }

    fn offer(&mut self, cost: C) {
        match &self.best {
            Some((b, states, _)) if cost == *b => {
                if *states != self.states {
                    self.unique = false;
                }
            }
            Some((b, _, _)) if !(cost < *b) => {}
            _ => {
                self.best = Some((cost, self.states.clone(), self.lanes.clone()));
                self.unique = true;
            }
        }
    }
}

/// Minimum-cost path by exhaustive enumeration.
pub fn oracle_decode<C: Cost>(
    model: &KmerModel,
    table: &TransitionTable,
    events: &[f64],
) -> Result<OracleResult<C>, OracleError> {
    let n = table.n_states();
    if model.n_states() != n {
        return Err(TrellisError::DimensionMismatch {
            model: model.n_states(),
            table: n,
        }
        .into());
    }
    if events.is_empty() {
        return Err(TrellisError::EmptyChunk.into());
    }
    check_size(n, events.len())?;

    let not_rep = |what: String| OracleError::Trellis(TrellisError::NotRepresentable { what });
    let conv = |v: f64, f: fn(f64) -> Option<C>, what: &str| f(v).ok_or_else(|| not_rep(format!("{what} = {v}")));
    let mu = model
        .mu()
        .iter()
        .map(|&v| conv(v, C::from_level, "mu"))
        .collect::<Result<Vec<_>, _>>()?;
    let sigma = model
        .sigma()
        .iter()
        .map(|&v| conv(v, C::from_cost, "sigma"))
        .collect::<Result<Vec<_>, _>>()?;
    let tc = model
        .trans_cost()
        .iter()
        .map(|&v| conv(v, C::from_cost, "trans_cost"))
        .collect::<Result<Vec<_>, _>>()?;
    let sq = events
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !x.is_finite() {
                return Err(OracleError::Trellis(TrellisError::NonFiniteEvent { index: i, value: x }));
            }
            let xc = conv(x, C::from_level, "event")?;
            Ok(mu.iter().map(|&m| C::squared_error(xc, m)).collect())
        })
        .collect::<Result<Vec<Vec<C>>, _>>()?;

    let mut succ: Vec<Vec<(u32, u8, C)>> = vec![Vec::with_capacity(LANES); n];
    for to in 0..n as u32 {
        for (lane, &from) in table.predecessors(to).iter().enumerate() {
            succ[from as usize].push((to, lane as u8, tc[lane]));
        }
    }
    for list in &mut succ {
        list.sort_by_key(|&(to, lane, _)| (to, lane));
        debug_assert_eq!(list.len(), LANES);
    }

    let m = events.len();
    let mut search = Search {
        succ: &succ,
        sq,
        sigma,
        states: vec![0; m],
        lanes: vec![0; m - 1],
        best: None,
        unique: true,
    };
    for start in 0..n as u32 {
        let c = (C::ZERO - search.sigma[start as usize]) + search.sq[0][start as usize];
        search.states[0] = start;
        if m == 1 {
            search.offer(c);
        } else {
            search.visit(1, c);
        }
    }
    let (cost, states, lanes) = search.best.expect("at least one path");
    Ok(OracleResult {
        path: StatePath {
            states,
            lanes: Some(lanes),
        },
        cost,
        unique: search.unique,
    })
}

/// A random instance whose levels, costs and events all lie on the exact
/// metric grid.
pub fn random_instance(k: usize, m_events: usize, seed: u64) -> (KmerModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1usize << (2 * k);
    let mu: Vec<f64> = (0..n)
        .map(|_| ExactCost::quantize_level(rng.random_range(90.0..110.0)))
        .collect();
    let sigma: Vec<f64> = (0..n)
        .map(|_| ExactCost::quantize_cost(rng.random_range(0.0..2.0)))
        .collect();
    let p_stay = rng.random_range(0.05..0.3);
    let p_skip = rng.random_range(0.01..0.2);
    let kin = TransitionKinetics::new(p_stay, 1.0 - p_stay - p_skip, p_skip).expect("valid kinetics");
    let tc = crate::model::derive_trans_cost(&kin)
        .expect("positive kinetics")
        .map(ExactCost::quantize_cost);
    let model = KmerModel::with_trans_cost(k, mu, sigma, kin, tc).expect("valid random model");
    let events = (0..m_events)
        .map(|_| {
            let s = rng.random_range(0..n);
            ExactCost::quantize_level(model.mu()[s] + rng.random_range(-4.0..4.0))
        })
        .collect();
    (model, events)
}

/// Outcome of one trellis-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrial {
    pub m_events: usize,
    pub seed: u64,
    pub oracle_cost: ExactCost,
    /// Final best metric with normalization disabled.
    pub trellis_cost: ExactCost,
    /// Sum of removed minima plus the final best metric, normalization on.
    pub normalized_total: ExactCost,
    pub unique: bool,
    /// Whether the traced path equals the oracle path (unique optima only).
    pub path_match: Option<bool>,
}

impl OracleTrial {
    pub fn passed(&self) -> bool {
        self.oracle_cost == self.trellis_cost
            && self.oracle_cost == self.normalized_total
            && self.path_match != Some(false)
    }
}

pub fn run_trial(k: usize, m_events: usize, seed: u64) -> Result<OracleTrial, OracleError> {
    check_size(1 << (2 * k), m_events)?;
    let table = build_table(k).map_err(|e| TrellisError::NotRepresentable { what: e.to_string() })?;
    let (model, events) = random_instance(k, m_events, seed);
    let oracle = oracle_decode::<ExactCost>(&model, &table, &events)?;
    let opts = TrellisOptions::default().with_max_events(m_events);
    let raw = construct_with::<ExactCost>(&model, &table, &events, opts.with_normalization(Normalization::Disabled))?;
    let norm = construct_with::<ExactCost>(&model, &table, &events, opts)?;
    let path_match = if oracle.unique {
        let traced = trace(&norm, &table).expect("trellis output traces");
        Some(traced.states == oracle.path.states)
    } else {
        None
    };
    Ok(OracleTrial {
        m_events,
        seed,
        oracle_cost: oracle.cost,
        trellis_cost: raw.end_cost,
        normalized_total: norm.total_cost,
        unique: oracle.unique,
        path_match,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub k: usize,
    pub trials: usize,
    pub exact: usize,
    pub unique: usize,
    pub path_matches: usize,
    pub failures: Vec<OracleTrial>,
}

impl OracleSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.exact == self.trials && self.path_matches == self.unique
    }
}

/// Runs `trials` comparisons with `M` cycling through `2..=max_m`. Trial `i`
/// uses the seed `derive_seed(seed, [i])`.
pub fn run_trials(k: usize, trials: usize, max_m: usize, seed: u64) -> Result<OracleSummary, OracleError> {
    check_size(1 << (2 * k), max_m)?;
    let mut summary = OracleSummary {
        k,
        trials,
        exact: 0,
        unique: 0,
        path_matches: 0,
        failures: Vec::new(),
    };
    let span = max_m.max(2) - 1;
    for i in 0..trials {
        let m = 2 + i % span;
        let trial = run_trial(k, m, derive_seed(seed, &[i as u64]))?;
        if trial.oracle_cost == trial.trellis_cost && trial.oracle_cost == trial.normalized_total {
            summary.exact += 1;
        }
        if trial.unique {
            summary.unique += 1;
        }
        if trial.path_match == Some(true) {
            summary.path_matches += 1;
        }
        if !trial.passed() {
            summary.failures.push(trial);
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synth_model;
    use crate::trellis::construct;

    #[test]
    fn single_event_is_argmin() {
        let model = synth_model(2, 3, 100.0, 1.0).unwrap();
        let table = build_table(2).unwrap();
        let x = model.mu()[5] + 0.25;
        let o = oracle_decode::<f64>(&model, &table, &[x]).unwrap();
        let t = construct(&model, &table, &[x]).unwrap();
        assert_eq!(o.path.states, vec![t.end_state]);
        assert_eq!(o.cost, t.end_cost);
        assert!(o.unique);
    }

    #[test]
    fn size_bound_enforced() {
        assert!(check_size(16, 6).is_ok());
        assert!(check_size(64, 12).is_err());
        let model = synth_model(3, 3, 100.0, 1.0).unwrap();
        let table = build_table(3).unwrap();
        assert!(matches!(
            oracle_decode::<f64>(&model, &table, &[1.0; 7]),
            Err(OracleError::TooLarge { n_states: 64, m_events: 7, .. })
        ));
    }

    #[test]
    fn random_instances_match_trellis() {
        for i in 0..60 {
            let trial = run_trial(2, 2 + i % 4, derive_seed(11, &[i as u64])).unwrap();
            assert!(trial.passed(), "{trial:?}");
        }
    }

    #[test]
    fn ties_between_state_sequences_clear_uniqueness() {
        // Two identical levels make A-A and C-C style paths tie.
        let mut mu = vec![50.0; 16];
        mu[0] = 10.0;
        mu[5] = 10.0;
        let sigma = vec![0.0; 16];
        let model = KmerModel::new(2, mu, sigma, TransitionKinetics::default()).unwrap();
        let table = build_table(2).unwrap();
        let o = oracle_decode::<f64>(&model, &table, &[10.0, 10.0]).unwrap();
        assert!(!o.unique);
        assert_eq!(o.path.states, vec![0, 0]);
    }
}
