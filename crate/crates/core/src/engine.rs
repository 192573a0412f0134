//! Sequential trial loop.
//!
//! Every session draws from six substreams derived from one master seed:
//! Alice's setting, Bob's setting, emission, hidden value, Alice's outcome
//! and Bob's outcome. Each wing's outcome reads only its own substream and
//! its own setting, so locality within a trial is structural. Settings and
//! emission are drawn every trial; hidden value and outcomes only when a pair
//! is emitted.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    visible_window, BehaviorTable, Choice, MemoryPolicy, ModelError, Outcome, OutcomePair,
    SettingPair, TrialRecord, Wing, EXACT_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("setting bias {0} is outside [-1, 1]")]
    BadBias(f64),
    #[error("emission probability {0} is outside [0, 1]")]
    BadEmitProb(f64),
    #[error("a session needs at least one trial")]
    NoTrials,
    #[error("policy produced an invalid model at trial {trial}: {source}")]
    Policy { trial: u64, source: ModelError },
}

/// Independent biased coin per wing: `P(a) = (1 + eps_a) / 2`, `P(b) = (1 + eps_b) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsDistribution {
    eps_a: f64,
    eps_b: f64,
}

impl SettingsDistribution {
    pub fn new(eps_a: f64, eps_b: f64) -> Result<Self, EngineError> {
        for eps in [eps_a, eps_b] {
            if !(-1.0..=1.0).contains(&eps) {
                return Err(EngineError::BadBias(eps));
            }
        }
        Ok(SettingsDistribution { eps_a, eps_b })
    }

    pub fn unbiased() -> Self {
        SettingsDistribution {
            eps_a: 0.0,
            eps_b: 0.0,
        }
    }

    pub fn eps(&self, wing: Wing) -> f64 {
        match wing {
            Wing::Alice => self.eps_a,
            Wing::Bob => self.eps_b,
        }
    }

    /// Probability that `wing` picks `choice`.
    pub fn choice_prob(&self, wing: Wing, choice: Choice) -> f64 {
        let eps = self.eps(wing);
        match choice {
            Choice::Unprimed => (1.0 + eps) / 2.0,
            Choice::Primed => (1.0 - eps) / 2.0,
        }
    }

    pub fn pair_prob(&self, pair: SettingPair) -> f64 {
        self.choice_prob(Wing::Alice, pair.alice) * self.choice_prob(Wing::Bob, pair.bob)
    }

    pub fn is_unbiased(&self) -> bool {
        self.eps_a == 0.0 && self.eps_b == 0.0
    }
}

impl Default for SettingsDistribution {
    fn default() -> Self {
        SettingsDistribution::unbiased()
    }
}

/// Pair source: a pair is produced in a trial with probability `emit_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    emit_prob: f64,
}

impl SourceModel {
    pub fn new(emit_prob: f64) -> Result<Self, EngineError> {
        if !(0.0..=1.0).contains(&emit_prob) {
            return Err(EngineError::BadEmitProb(emit_prob));
        }
        Ok(SourceModel { emit_prob })
    }

    pub fn always() -> Self {
        SourceModel { emit_prob: 1.0 }
    }

    pub fn emit_prob(&self) -> f64 {
        self.emit_prob
    }
}

#[derive(Debug, Clone, Copy)]
enum Substream {
    SettingsA = 0,
    SettingsB = 1,
    Emission = 2,
    Lambda = 3,
    OutcomeA = 4,
    OutcomeB = 5,
}

/// Six ChaCha8 substreams sharing one seed and differing in stream id.
#[derive(Debug, Clone)]
pub struct RandomnessStreams {
    settings_a: ChaCha8Rng,
    settings_b: ChaCha8Rng,
    emission: ChaCha8Rng,
    lambda: ChaCha8Rng,
    outcome_a: ChaCha8Rng,
    outcome_b: ChaCha8Rng,
}

impl RandomnessStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |s: Substream| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            rng
        };
        RandomnessStreams {
            settings_a: stream(Substream::SettingsA),
            settings_b: stream(Substream::SettingsB),
            emission: stream(Substream::Emission),
            lambda: stream(Substream::Lambda),
            outcome_a: stream(Substream::OutcomeA),
            outcome_b: stream(Substream::OutcomeB),
        }
    }
}

/// Draws a setting pair, consuming one value from each settings substream.
pub fn draw_settings(dist: &SettingsDistribution, streams: &mut RandomnessStreams) -> SettingPair {
    let pick = |rng: &mut ChaCha8Rng, wing| {
        if rng.gen::<f64>() < dist.choice_prob(wing, Choice::Unprimed) {
            Choice::Unprimed
        } else {
            Choice::Primed
        }
    };
    let alice = pick(&mut streams.settings_a, Wing::Alice);
    let bob = pick(&mut streams.settings_b, Wing::Bob);
    SettingPair::new(alice, bob)
}

/// A behavior table replayed directly, bypassing hidden variables.
///
/// This is the only way to inject non-local or signaling correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Playback {
    table: BehaviorTable,
}

impl Playback {
    pub fn table(&self) -> &BehaviorTable {
        &self.table
    }

    fn sample(&self, pair: SettingPair, u: f64) -> OutcomePair {
        let row = self.table.row(pair);
        let mut acc = 0.0;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return OutcomePair::from_index(i);
            }
        }
        let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(3);
        OutcomePair::from_index(last)
    }
}

/// Wraps a table for playback; rejects tables that fail validation at 1e-12.
pub fn behavior_playback(table: BehaviorTable) -> Result<Playback, ModelError> {
    table.require_valid(EXACT_TOL)?;
    Ok(Playback { table })
}

/// What answers for the two wings when a pair is emitted.
#[derive(Clone)]
pub enum Strategy {
    Policy(Arc<dyn MemoryPolicy>),
    Playback(Playback),
}

impl Strategy {
    pub fn policy(policy: impl MemoryPolicy + 'static) -> Strategy {
        Strategy::Policy(Arc::new(policy))
    }

    /// The exact per-trial table when it does not depend on history.
    pub fn stationary_table(&self) -> Option<BehaviorTable> {
        match self {
            Strategy::Policy(p) => p.stationary_table(),
            Strategy::Playback(p) => Some(*p.table()),
        }
    }
}

impl std::fmt::Debug for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Policy(p) => write!(f, "Policy(depth={})", p.depth()),
            Strategy::Playback(p) => write!(f, "Playback({:?})", p.table()),
        }
    }
}

/// One in-progress session. Cloning forks the streams and history, which is
/// how counterfactual single-trial comparisons are made.
#[derive(Debug, Clone)]
pub struct Session<'s> {
    strategy: &'s Strategy,
    source: SourceModel,
    dist: SettingsDistribution,
    streams: RandomnessStreams,
    history: Vec<TrialRecord>,
}

impl<'s> Session<'s> {
    pub fn new(
        strategy: &'s Strategy,
        source: SourceModel,
        dist: SettingsDistribution,
        seed: u64,
    ) -> Self {
        Session {
            strategy,
            source,
            dist,
            streams: RandomnessStreams::from_seed(seed),
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn into_records(self) -> Vec<TrialRecord> {
        self.history
    }

    pub fn step(&mut self) -> Result<TrialRecord, EngineError> {
        self.step_with_settings(None)
    }

    /// Runs one trial. The settings substreams are always consumed; when
    /// `forced` is given it replaces the drawn pair.
    pub fn step_with_settings(
        &mut self,
        forced: Option<SettingPair>,
    ) -> Result<TrialRecord, EngineError> {
        let index = self.history.len() as u64;
        let drawn = draw_settings(&self.dist, &mut self.streams);
        let settings = forced.unwrap_or(drawn);
        let emitted = self.streams.emission.gen::<f64>() < self.source.emit_prob();

        let outcomes = if !emitted {
            OutcomePair::ZZ
        } else {
            match self.strategy {
                Strategy::Policy(policy) => {
                    let window = visible_window(&self.history, policy.depth());
                    let model = policy
                        .model_at(window)
                        .map_err(|source| EngineError::Policy {
                            trial: index,
                            source,
                        })?;
                    let lambda = &model.hidden()[model.pick(self.streams.lambda.gen())];
                    let wing_outcome = |rng: &mut ChaCha8Rng, wing: Wing| {
                        let p = lambda.response(wing, settings.choice(wing));
                        if rng.gen::<f64>() < p {
                            Outcome::Plus
                        } else {
                            Outcome::Zero
                        }
                    };
                    let alice = wing_outcome(&mut self.streams.outcome_a, Wing::Alice);
                    let bob = wing_outcome(&mut self.streams.outcome_b, Wing::Bob);
                    OutcomePair::new(alice, bob)
                }
                Strategy::Playback(playback) => {
                    playback.sample(settings, self.streams.lambda.gen())
                }
            }
        };

        let record = TrialRecord {
            index,
            emitted,
            settings,
            outcomes,
        };
        assert!(record.is_consistent(), "no-emission trial recorded a detection");
        self.history.push(record);
        Ok(record)
    }
}

/// Runs `n` trials and returns the records in trial order.
pub fn run_session(
    strategy: &Strategy,
    source: SourceModel,
    dist: SettingsDistribution,
    n: u64,
    seed: u64,
) -> Result<Vec<TrialRecord>, EngineError> {
    if n == 0 {
        return Err(EngineError::NoTrials);
    }
    let mut session = Session::new(strategy, source, dist, seed);
    session.history.reserve(n as usize);
    for _ in 0..n {
        session.step()?;
    }
    Ok(session.into_records())
}

/// Keeps the trials where at least one wing recorded `+`.
pub fn filter_detected(records: &[TrialRecord]) -> Vec<TrialRecord> {
    records
        .iter()
        .filter(|r| r.outcomes.any_detection())
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LhvModel, Stationary};

    fn demo() -> Strategy {
        Strategy::policy(Stationary(
            LhvModel::single([1.0, 1.0], [1.0, 0.0]).unwrap(),
        ))
    }

    #[test]
    fn distribution_domains() {
        assert_eq!(
            SettingsDistribution::new(1.5, 0.0),
            Err(EngineError::BadBias(1.5))
        );
        assert!(SettingsDistribution::new(-1.0, 1.0).is_ok());
        assert_eq!(SourceModel::new(-0.1), Err(EngineError::BadEmitProb(-0.1)));
    }

    #[test]
    fn biased_pair_probabilities() {
        let d = SettingsDistribution::new(0.1, 0.1).unwrap();
        let want = [0.3025, 0.2475, 0.2475, 0.2025];
        for (pair, w) in SettingPair::ALL.into_iter().zip(want) {
            assert!((d.pair_prob(pair) - w).abs() < 1e-15, "{pair}");
        }
    }

    #[test]
    fn fully_biased_always_ab() {
        let d = SettingsDistribution::new(1.0, 1.0).unwrap();
        let mut s = RandomnessStreams::from_seed(3);
        for _ in 0..10_000 {
            assert_eq!(draw_settings(&d, &mut s), SettingPair::AB);
        }
    }

    #[test]
    fn unbiased_pair_frequencies_within_5_sigma() {
        let d = SettingsDistribution::unbiased();
        let mut s = RandomnessStreams::from_seed(11);
        let n = 1_000_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[draw_settings(&d, &mut s).index()] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn no_emission_gives_all_zero() {
        let recs = run_session(
            &demo(),
            SourceModel::new(0.0).unwrap(),
            SettingsDistribution::unbiased(),
            100,
            1,
        )
        .unwrap();
        assert_eq!(recs.len(), 100);
        assert!(recs.iter().all(|r| !r.emitted && r.outcomes == OutcomePair::ZZ));
        assert!(filter_detected(&recs).is_empty());
    }

    #[test]
    fn zero_trials_rejected() {
        let err = run_session(
            &demo(),
            SourceModel::always(),
            SettingsDistribution::unbiased(),
            0,
            1,
        );
        assert_eq!(err, Err(EngineError::NoTrials));
    }

    #[test]
    fn same_seed_same_session() {
        let st = demo();
        let run = |seed| {
            run_session(
                &st,
                SourceModel::new(0.5).unwrap(),
                SettingsDistribution::unbiased(),
                1000,
                seed,
            )
            .unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn filter_keeps_single_detection() {
        let recs = vec![
            TrialRecord {
                index: 0,
                emitted: false,
                settings: SettingPair::AB,
                outcomes: OutcomePair::ZZ,
            },
            TrialRecord {
                index: 1,
                emitted: true,
                settings: SettingPair::A_PRIME_B,
                outcomes: OutcomePair::PP,
            },
        ];
        assert_eq!(filter_detected(&recs), vec![recs[1]]);
    }

    #[test]
    fn playback_rejects_invalid_table() {
        let t = BehaviorTable::new([[0.5, 0.0, 0.0, 0.0]; 4]);
        assert!(behavior_playback(t).is_err());
        assert!(behavior_playback(BehaviorTable::pr_box()).is_ok());
    }

    struct Broken;

    impl MemoryPolicy for Broken {
        fn depth(&self) -> usize {
            1
        }
        fn model_at(
            &self,
            window: &[TrialRecord],
        ) -> Result<std::borrow::Cow<'_, LhvModel>, ModelError> {
            if window.is_empty() {
                Ok(std::borrow::Cow::Owned(
                    LhvModel::single([1.0; 2], [1.0; 2]).unwrap(),
                ))
            } else {
                Err(ModelError::MissingClass("x".into()))
            }
        }
    }

    #[test]
    fn invalid_policy_output_names_trial() {
        let st = Strategy::policy(Broken);
        let err = run_session(
            &st,
            SourceModel::always(),
            SettingsDistribution::unbiased(),
            10,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::Policy { trial: 1, .. }));
        assert!(err.to_string().contains("trial 1"));
    }
}
