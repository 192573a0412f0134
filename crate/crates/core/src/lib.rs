//! Trial-level simulation and statistics for CH-Eberhard Bell tests with
//! local hidden-variable strategies that may remember earlier trials.
//!
//! - [`model`]: settings, outcomes, behavior tables, LHV mixtures, memory policies.
//! - [`engine`]: seeded sequential trial loop with per-role random substreams.
//! - [`strategies`]: deterministic assignments, random models, table policies, file formats.
//! - [`statistics`]: exact inequality values, estimators, count statistic, martingale p-value.
//! - [`search`]: adversarial drift minimization over memory policies.
//! - [`records`], [`report`]: CSV trial records and `key=value` reports.

pub mod engine;
pub mod model;
pub mod records;
pub mod report;
pub mod search;
pub mod statistics;
pub mod strategies;

pub use engine::{
    behavior_playback, filter_detected, run_session, EngineError, Session, SettingsDistribution,
    SourceModel, Strategy,
};
pub use model::{
    behavior_from_lhv, behavior_from_policy, BehaviorTable, LhvModel, MemoryPolicy, OutcomePair,
    SettingPair, Stationary, TrialRecord,
};
