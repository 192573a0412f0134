//! Adversarial search over history-classed memory policies.
//!
//! The objective is the analytic per-trial drift `E[s | class]`, computed
//! exactly from each class's behavior table; a policy scores the minimum
//! drift over its classes. Because the drift is linear in each class's
//! model, its extreme values sit on the 16 deterministic assignments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::SettingsDistribution;
use crate::model::{HiddenValue, LhvModel, ModelError};
use crate::report::Report;
use crate::statistics::{b_value, expected_increment};
use crate::strategies::{
    make_deterministic, make_memory_policy, DeterministicAssignment, HistoryClassing, TablePolicy,
    TablePolicySpec,
};

/// Default bound on the number of policy tables enumerated exhaustively.
pub const DEFAULT_CAP: u128 = 1 << 24;

/// Largest class count the stochastic search will tabulate.
pub const MAX_HILL_CLIMB_CLASSES: usize = 1 << 12;

const VERTICES: usize = DeterministicAssignment::COUNT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search space has {size} policy tables ({classes} classes), above the cap of {cap}")]
    TooLarge {
        size: String,
        classes: String,
        cap: u128,
    },
    #[error("iterations and restarts must both be at least 1")]
    NoBudget,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub classing: HistoryClassing,
    pub policy: TablePolicy,
    /// Minimum over classes of the exact per-trial drift of `policy`.
    pub best_drift: f64,
    pub evaluations: u64,
    /// Exhaustive: number of optimal policy tables. Hill climbing: restarts reaching the optimum.
    pub optimal_count: u128,
}

impl SearchResult {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push_f64("best_drift", self.best_drift);
        r.push("optimal_count", self.optimal_count);
        r.push("depth", self.classing.depth);
        r.push("evaluations", self.evaluations);
        r
    }
}

/// All 16 deterministic assignments with their exact CH-Eberhard values.
pub fn enumerate_assignments() -> Vec<(DeterministicAssignment, f64)> {
    DeterministicAssignment::all()
        .map(|a| {
            let b = b_value(&make_deterministic(a).behavior()).expect("LHV tables are valid");
            (a, b)
        })
        .collect()
}

/// Exact per-trial drift of each assignment, indexed by assignment index.
pub fn assignment_drifts(dist: &SettingsDistribution) -> [f64; VERTICES] {
    let mut out = [0.0; VERTICES];
    for a in DeterministicAssignment::all() {
        out[a.index()] = expected_increment(&make_deterministic(a).behavior(), dist);
    }
    out
}

/// Minimum over classes of the exact drift of `policy`.
pub fn policy_drift(policy: &TablePolicy, dist: &SettingsDistribution) -> f64 {
    policy
        .class_tables()
        .iter()
        .map(|t| expected_increment(t, dist))
        .fold(f64::INFINITY, f64::min)
}

fn too_large(classing: &HistoryClassing, cap: u128) -> SearchError {
    let classes = classing
        .class_count()
        .map_or_else(|| "overflowing".to_string(), |c| c.to_string());
    let size = classing
        .class_count()
        .and_then(|c| (VERTICES as u128).checked_pow(c as u32))
        .map_or_else(
            || format!("16^{classes}"),
            |s| s.to_string(),
        );
    SearchError::TooLarge { size, classes, cap }
}

fn deterministic_policy(classing: HistoryClassing, digits: &[usize]) -> Result<TablePolicy, ModelError> {
    let mut spec = TablePolicySpec::new(classing)?;
    for (class, &d) in digits.iter().enumerate() {
        spec.set(class, make_deterministic(DeterministicAssignment::from_index(d)));
    }
    make_memory_policy(spec)
}

#[derive(Clone, Copy)]
struct Best {
    drift: f64,
    code: u64,
    count: u128,
}

impl Best {
    fn merge(a: Best, b: Best) -> Best {
        if a.drift < b.drift {
            a
        } else if b.drift < a.drift {
            b
        } else {
            Best {
                drift: a.drift,
                code: a.code.min(b.code),
                count: a.count + b.count,
            }
        }
    }
}

/// Enumerates every table of deterministic assignments over the classes.
///
/// Policies are encoded as base-16 numbers with class 0 most significant;
/// ties go to the smallest encoding.
pub fn exhaustive_policy_search(
    classing: HistoryClassing,
    dist: &SettingsDistribution,
    cap: u128,
) -> Result<SearchResult, SearchError> {
    let classes = classing.class_count().ok_or_else(|| too_large(&classing, cap))?;
    let size = (VERTICES as u128)
        .checked_pow(classes as u32)
        .filter(|&s| s <= cap && s <= u64::MAX as u128)
        .ok_or_else(|| too_large(&classing, cap))?;
    let drifts = assignment_drifts(dist);
    let decode = |code: u64| -> Vec<usize> {
        let mut digits = vec![0; classes];
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = (c % VERTICES as u64) as usize;
            c /= VERTICES as u64;
        }
        digits
    };
    let best = (0..size as u64)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut drift = f64::INFINITY;
            for _ in 0..classes {
                drift = drift.min(drifts[(c % VERTICES as u64) as usize]);
                c /= VERTICES as u64;
            }
            Best {
                drift,
                code,
                count: 1,
            }
        })
        .reduce(
            || Best {
                drift: f64::INFINITY,
                code: u64::MAX,
                count: 0,
            },
            Best::merge,
        );
    Ok(SearchResult {
        classing,
        policy: deterministic_policy(classing, &decode(best.code))?,
        best_drift: best.drift,
        evaluations: size as u64,
        optimal_count: best.count,
    })
}

/// Closed-form optimum of the exhaustive search, using per-class independence:
/// the best value is the best vertex drift `d*`, and a table is optimal iff at
/// least one class uses a vertex attaining `d*`. Returns `(d*, count)`, with
/// `count = None` when it overflows.
pub fn classwise_optimum(
    classing: HistoryClassing,
    dist: &SettingsDistribution,
) -> (f64, Option<u128>) {
    let drifts = assignment_drifts(dist);
    let best = drifts.iter().copied().fold(f64::INFINITY, f64::min);
    let attaining = drifts.iter().filter(|&&d| d == best).count() as u128;
    let count = classing.class_count().and_then(|c| {
        let all = (VERTICES as u128).checked_pow(c as u32)?;
        let none = (VERTICES as u128 - attaining).checked_pow(c as u32)?;
        Some(all - none)
    });
    (best, count)
}

/// Per-class convex weights over the 16 deterministic assignments.
pub type MixtureWeights = Vec<[f64; VERTICES]>;

fn class_value(w: &[f64; VERTICES], drifts: &[f64; VERTICES]) -> f64 {
    w.iter().zip(drifts).map(|(w, d)| w * d).sum()
}

fn restart_rng(seed: u64, restart: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    rng
}

fn random_weights(rng: &mut ChaCha8Rng, classes: usize) -> MixtureWeights {
    (0..classes)
        .map(|_| {
            let mut w = [0.0; VERTICES];
            for x in w.iter_mut() {
                *x = 1.0 - rng.gen::<f64>();
            }
            let sum: f64 = w.iter().sum();
            w.map(|x| x / sum)
        })
        .collect()
}

/// Initial candidate of a given restart, as drawn by [`hill_climb_policy`].
pub fn seeded_candidate(classing: HistoryClassing, seed: u64, restart: u64) -> MixtureWeights {
    let classes = classing.class_count().unwrap_or(0);
    random_weights(&mut restart_rng(seed, restart), classes)
}

/// Minimum over classes of the mixture drift.
pub fn mixture_drift(weights: &MixtureWeights, dist: &SettingsDistribution) -> f64 {
    let drifts = assignment_drifts(dist);
    weights
        .iter()
        .map(|w| class_value(w, &drifts))
        .fold(f64::INFINITY, f64::min)
}

fn min_index(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

fn climb(
    classes: usize,
    iters: u64,
    seed: u64,
    restart: u64,
    drifts: &[f64; VERTICES],
) -> (MixtureWeights, f64) {
    let mut rng = restart_rng(seed, restart);
    let mut weights = random_weights(&mut rng, classes);
    let mut values: Vec<f64> = weights.iter().map(|w| class_value(w, drifts)).collect();
    let mut current = values.iter().copied().fold(f64::INFINITY, f64::min);

    for _ in 1..iters {
        let class = if rng.gen_bool(0.5) {
            min_index(&values)
        } else {
            rng.gen_range(0..classes)
        };
        let w = &weights[class];
        let support: Vec<usize> = (0..VERTICES).filter(|&v| w[v] > 0.0).collect();
        let from = support[rng.gen_range(0..support.len())];
        let mut to = rng.gen_range(0..VERTICES - 1);
        if to >= from {
            to += 1;
        }
        let moved = if rng.gen_bool(0.5) {
            w[from]
        } else {
            w[from] * rng.gen::<f64>()
        };
        let mut proposal = *w;
        proposal[from] -= moved;
        if moved == w[from] {
            proposal[from] = 0.0;
        }
        proposal[to] += moved;
        let value = class_value(&proposal, drifts);
        let candidate = values
            .iter()
            .enumerate()
            .map(|(c, &v)| if c == class { value } else { v })
            .fold(f64::INFINITY, f64::min);
        if candidate <= current {
            weights[class] = proposal;
            values[class] = value;
            current = candidate;
        }
    }
    (weights, current)
}

fn mixture_policy(classing: HistoryClassing, weights: &MixtureWeights) -> Result<TablePolicy, ModelError> {
    let mut spec = TablePolicySpec::new(classing)?;
    for (class, w) in weights.iter().enumerate() {
        let sum: f64 = w.iter().sum();
        let hidden = (0..VERTICES)
            .filter(|&v| w[v] > 0.0)
            .map(|v| {
                let a = DeterministicAssignment::from_index(v);
                let m = make_deterministic(a);
                let h = &m.hidden()[0];
                HiddenValue::new(a.to_string(), w[v] / sum, h.resp_a, h.resp_b)
            })
            .collect();
        spec.set(class, LhvModel::new(hidden)?);
    }
    make_memory_policy(spec)
}

/// Stochastic local search over per-class mixtures of deterministic assignments.
///
/// Each restart draws a random interior candidate and proposes mass transfers
/// between assignments, accepting any move that does not raise the objective.
/// With `iters == 1` only the initial candidate is evaluated. Restarts run
/// concurrently; the lowest drift wins, ties going to the lowest restart.
pub fn hill_climb_policy(
    classing: HistoryClassing,
    iters: u64,
    restarts: u64,
    seed: u64,
    dist: &SettingsDistribution,
) -> Result<SearchResult, SearchError> {
    if iters == 0 || restarts == 0 {
        return Err(SearchError::NoBudget);
    }
    let classes = classing
        .class_count()
        .filter(|&c| c <= MAX_HILL_CLIMB_CLASSES)
        .ok_or_else(|| too_large(&classing, MAX_HILL_CLIMB_CLASSES as u128))?;
    let drifts = assignment_drifts(dist);
    let runs: Vec<(MixtureWeights, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| climb(classes, iters, seed, r, &drifts))
        .collect();
    let winner = runs
        .iter()
        .enumerate()
        .fold(0, |best, (i, run)| if run.1 < runs[best].1 { i } else { best });
    let best_drift = runs[winner].1;
    let optimal_count = runs
        .iter()
        .filter(|r| (r.1 - best_drift).abs() <= 1e-12)
        .count() as u128;
    Ok(SearchResult {
        classing,
        policy: mixture_policy(classing, &runs[winner].0)?,
        best_drift,
        evaluations: iters * restarts,
        optimal_count,
    })
}
