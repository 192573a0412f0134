//! Inequality values on exact tables and estimators on trial records.
//!
//! The CH-Eberhard combination used throughout is
//!
//! ```text
//! B = P(+0|ab') + P(0+|a'b) + P(++|a'b') - P(++|ab)
//! ```
//!
//! and local models satisfy `B >= 0`. The CHSH combination is
//! `S = E(ab) + E(a'b) + E(ab') - E(a'b')` with `E = P(++) + P(00) - P(+0) - P(0+)`;
//! on no-signaling tables `S = 2 - 4B`.
//!
//! Per trial, the count increment `s` is `+1` for `(ab', +0)`, `(a'b, 0+)`,
//! `(a'b', ++)`, `-1` for `(ab, ++)` and `0` otherwise. Its conditional mean
//! under unbiased settings is `B_n / 4`, so `T = sum(s)` is a supermartingale
//! with nonnegative drift for any memory-dependent local strategy.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_session, EngineError, SettingsDistribution, SourceModel, Strategy};
use crate::model::{BehaviorTable, ModelError, OutcomePair, SettingPair, TrialRecord, EXACT_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("table is signaling (marginal deviation {deviation:e}); the identity does not apply")]
    Signaling { deviation: f64 },
    #[error("no trials with setting pair {0}; conditional estimate undefined")]
    EmptyPair(SettingPair),
    #[error("record {row} is malformed: outcome {outcome} on a trial with no emission")]
    Malformed { row: usize, outcome: OutcomePair },
    #[error("|T| = {t} exceeds the trial count {n}")]
    CountOutOfRange { t: i64, n: u64 },
    #[error("p-value needs at least one trial")]
    NoTrials,
    #[error("at least one replication is required")]
    NoReps,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `(setting pair, outcome pair, sign)` terms of the CH-Eberhard combination.
pub const B_TERMS: [(SettingPair, OutcomePair, i8); 4] = [
    (SettingPair::AB_PRIME, OutcomePair::PZ, 1),
    (SettingPair::A_PRIME_B, OutcomePair::ZP, 1),
    (SettingPair::A_PRIME_B_PRIME, OutcomePair::PP, 1),
    (SettingPair::AB, OutcomePair::PP, -1),
];

/// Per-trial contribution `s` to the count statistic.
pub fn increment(settings: SettingPair, outcomes: OutcomePair) -> i8 {
    B_TERMS
        .iter()
        .find(|(s, o, _)| *s == settings && *o == outcomes)
        .map_or(0, |t| t.2)
}

fn b_value_unchecked(table: &BehaviorTable) -> f64 {
    B_TERMS
        .iter()
        .map(|&(s, o, sign)| f64::from(sign) * table.p(s, o))
        .sum()
}

pub fn b_value(table: &BehaviorTable) -> Result<f64, StatsError> {
    table.require_valid(EXACT_TOL)?;
    Ok(b_value_unchecked(table))
}

pub fn correlator(table: &BehaviorTable, pair: SettingPair) -> f64 {
    table.p(pair, OutcomePair::PP) + table.p(pair, OutcomePair::ZZ)
        - table.p(pair, OutcomePair::PZ)
        - table.p(pair, OutcomePair::ZP)
}

fn chsh_combination(e: impl Fn(SettingPair) -> f64) -> f64 {
    e(SettingPair::AB) + e(SettingPair::A_PRIME_B) + e(SettingPair::AB_PRIME)
        - e(SettingPair::A_PRIME_B_PRIME)
}

pub fn chsh_value(table: &BehaviorTable) -> Result<f64, StatsError> {
    table.require_valid(EXACT_TOL)?;
    Ok(chsh_combination(|p| correlator(table, p)))
}

/// `|S - (2 - 4B)|` for a no-signaling table.
pub fn check_identity(table: &BehaviorTable, tol: f64) -> Result<f64, StatsError> {
    table.require_valid(tol.max(EXACT_TOL))?;
    let deviation = table.no_signaling_deviation();
    if deviation > tol {
        return Err(StatsError::Signaling { deviation });
    }
    let s = chsh_combination(|p| correlator(table, p));
    Ok((s - (2.0 - 4.0 * b_value_unchecked(table))).abs())
}

/// Exact expected increment `E[s]` for one trial under `table` with settings drawn from `dist`.
///
/// Equals `B / 4` for unbiased settings.
pub fn expected_increment(table: &BehaviorTable, dist: &SettingsDistribution) -> f64 {
    B_TERMS
        .iter()
        .map(|&(s, o, sign)| f64::from(sign) * dist.pair_prob(s) * table.p(s, o))
        .sum()
}

/// Tally of `(setting pair, outcome pair)` occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountsMatrix {
    counts: [[u64; 4]; 4],
    total: u64,
}

impl CountsMatrix {
    pub fn add(&mut self, settings: SettingPair, outcomes: OutcomePair) {
        self.counts[settings.index()][outcomes.index()] += 1;
        self.total += 1;
    }

    pub fn get(&self, settings: SettingPair, outcomes: OutcomePair) -> u64 {
        self.counts[settings.index()][outcomes.index()]
    }

    pub fn pair_total(&self, settings: SettingPair) -> u64 {
        self.counts[settings.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn frequency(&self, settings: SettingPair, outcomes: OutcomePair) -> Result<f64, StatsError> {
        let n = self.pair_total(settings);
        if n == 0 {
            return Err(StatsError::EmptyPair(settings));
        }
        Ok(self.get(settings, outcomes) as f64 / n as f64)
    }
}

pub fn counts_from_records(records: &[TrialRecord]) -> Result<CountsMatrix, StatsError> {
    let mut counts = CountsMatrix::default();
    for (row, r) in records.iter().enumerate() {
        if !r.is_consistent() {
            return Err(StatsError::Malformed {
                row,
                outcome: r.outcomes,
            });
        }
        counts.add(r.settings, r.outcomes);
    }
    Ok(counts)
}

/// Point estimate with a plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// CH-Eberhard value from per-setting conditional frequencies.
pub fn b_conditional(counts: &CountsMatrix) -> Result<Estimate, StatsError> {
    let mut value = 0.0;
    let mut var = 0.0;
    for &(s, o, sign) in &B_TERMS {
        let p = counts.frequency(s, o)?;
        value += f64::from(sign) * p;
        var += p * (1.0 - p) / counts.pair_total(s) as f64;
    }
    Ok(Estimate {
        value,
        se: var.sqrt(),
    })
}

/// CHSH value from conditional frequencies; each correlator is the mean of a `±1` product.
pub fn chsh_estimate(counts: &CountsMatrix) -> Result<Estimate, StatsError> {
    let mut var = 0.0;
    let mut es = [0.0; 4];
    for pair in SettingPair::ALL {
        let same = counts.frequency(pair, OutcomePair::PP)? + counts.frequency(pair, OutcomePair::ZZ)?;
        let e = 2.0 * same - 1.0;
        es[pair.index()] = e;
        var += (1.0 - e * e) / counts.pair_total(pair) as f64;
    }
    Ok(Estimate {
        value: chsh_combination(|p| es[p.index()]),
        se: var.sqrt(),
    })
}

/// `T = sum of s` over `n` trials, plus the number of nonzero increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountStatistic {
    pub t: i64,
    pub n: u64,
    /// Trials with `s != 0`; `s^2` summed.
    pub nonzero: u64,
}

impl CountStatistic {
    /// `4T/n`, the count-based CH-Eberhard estimate assuming equal setting weights.
    pub fn b_joint4(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            4.0 * self.t as f64 / self.n as f64
        }
    }

    /// Plug-in standard error of [`b_joint4`](Self::b_joint4).
    pub fn b_joint4_se(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.t as f64 / n;
        let var = (self.nonzero as f64 / n - mean * mean).max(0.0);
        4.0 * (var / n).sqrt()
    }
}

pub fn t_statistic(records: &[TrialRecord]) -> CountStatistic {
    let mut stat = CountStatistic {
        n: records.len() as u64,
        ..CountStatistic::default()
    };
    for r in records {
        let s = increment(r.settings, r.outcomes);
        stat.t += i64::from(s);
        stat.nonzero += u64::from(s != 0);
    }
    stat
}

/// One-sided Azuma-Hoeffding bound `exp(-T^2 / 2n)` for `T < 0`, and 1 otherwise.
///
/// Valid when every increment lies in `[-1, 1]` and has nonnegative
/// conditional mean given the past, whatever the memory of the strategy.
pub fn martingale_pvalue(t: i64, n: u64) -> Result<f64, StatsError> {
    if n == 0 {
        return Err(StatsError::NoTrials);
    }
    if t.unsigned_abs() > n {
        return Err(StatsError::CountOutOfRange { t, n });
    }
    if t >= 0 {
        return Ok(1.0);
    }
    let t = t as f64;
    Ok((-t * t / (2.0 * n as f64)).exp().min(1.0))
}

/// Rejection threshold used by [`fluctuation_monte_carlo`].
pub const ALPHA: f64 = 0.05;

/// Quantile levels reported for `4T/n`.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSummary {
    pub reps: u64,
    pub n: u64,
    pub frac_negative: f64,
    pub frac_rejected: f64,
    /// `(level, 4T/n quantile)` for each of [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
}

/// Per-replication seeds, drawn from a dedicated stream of the master seed.
pub fn replication_seeds(seed: u64, reps: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (0..reps).map(|_| rng.next_u64()).collect()
}

/// Runs `reps` independent sessions (concurrently) and returns their count statistics in rep order.
pub fn replicate_counts(
    strategy: &Strategy,
    dist: SettingsDistribution,
    source: SourceModel,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<Vec<CountStatistic>, StatsError> {
    if reps == 0 {
        return Err(StatsError::NoReps);
    }
    replication_seeds(seed, reps)
        .into_par_iter()
        .map(|s| {
            let records = run_session(strategy, source, dist, n, s)?;
            Ok(t_statistic(&records))
        })
        .collect()
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], level: f64) -> f64 {
    let rank = (level * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn fluctuation_monte_carlo(
    strategy: &Strategy,
    dist: SettingsDistribution,
    source: SourceModel,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<FluctuationSummary, StatsError> {
    let stats = replicate_counts(strategy, dist, source, n, reps, seed)?;
    let mut negative = 0u64;
    let mut rejected = 0u64;
    let mut b4 = Vec::with_capacity(stats.len());
    for s in &stats {
        negative += u64::from(s.t < 0);
        rejected += u64::from(martingale_pvalue(s.t, s.n)? <= ALPHA);
        b4.push(s.b_joint4());
    }
    b4.sort_by(f64::total_cmp);
    Ok(FluctuationSummary {
        reps,
        n,
        frac_negative: negative as f64 / reps as f64,
        frac_rejected: rejected as f64 / reps as f64,
        quantiles: QUANTILE_LEVELS
            .iter()
            .map(|&l| (l, quantile(&b4, l)))
            .collect(),
    })
}
