//! Built-in strategies: deterministic assignments, random mixtures,
//! history-classed memory policies and named CLI strategies.

mod file;

use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{behavior_playback, Strategy};
use crate::model::{
    BehaviorTable, HiddenValue, LhvModel, MemoryPolicy, ModelError, Outcome, OutcomePair,
    SettingPair, Stationary, TrialRecord,
};

pub use file::{
    parse_strategy_file, parse_table_file, write_model_file, write_policy_file, write_table_file,
    ParseError, StrategyFile,
};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error("bad strategy `{name}`: {reason}")]
    BadArgument { name: String, reason: String },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A local deterministic strategy: `+` or `0` for each of `a, a', b, b'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeterministicAssignment {
    pub alice: [Outcome; 2],
    pub bob: [Outcome; 2],
}

impl DeterministicAssignment {
    pub const COUNT: usize = 16;

    /// Bits `A(a) A(a') B(b) B(b')`, most significant first, with `+` as 1.
    pub fn index(&self) -> usize {
        [self.alice[0], self.alice[1], self.bob[0], self.bob[1]]
            .iter()
            .fold(0, |acc, o| (acc << 1) | usize::from(o.is_plus()))
    }

    pub fn from_index(i: usize) -> Self {
        let bit = |k: usize| {
            if (i >> k) & 1 == 1 {
                Outcome::Plus
            } else {
                Outcome::Zero
            }
        };
        DeterministicAssignment {
            alice: [bit(3), bit(2)],
            bob: [bit(1), bit(0)],
        }
    }

    pub fn all() -> impl Iterator<Item = DeterministicAssignment> {
        (0..Self::COUNT).map(Self::from_index)
    }

    /// The model that answers `+` on `a`, `a'`, `b` and `0` on `b'`.
    pub fn demo() -> Self {
        DeterministicAssignment {
            alice: [Outcome::Plus, Outcome::Plus],
            bob: [Outcome::Plus, Outcome::Zero],
        }
    }

    pub fn to_model(&self) -> LhvModel {
        make_deterministic(*self)
    }
}

impl fmt::Display for DeterministicAssignment {
    /// `++,+0` style: Alice's `a a'`, then Bob's `b b'`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |o: Outcome| o.symbol();
        write!(
            f,
            "{}{},{}{}",
            s(self.alice[0]),
            s(self.alice[1]),
            s(self.bob[0]),
            s(self.bob[1])
        )
    }
}

impl FromStr for DeterministicAssignment {
    type Err = String;

    /// Accepts `++,+0` or `+++0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols: Vec<char> = s.chars().filter(|&c| c != ',').collect();
        let comma_ok = match s.find(',') {
            None => true,
            Some(i) => i == 2 && s.matches(',').count() == 1,
        };
        if symbols.len() != 4 || !comma_ok {
            return Err(format!("expected four of `+`/`0` such as `++,+0`, got `{s}`"));
        }
        let mut out = [Outcome::Zero; 4];
        for (slot, c) in out.iter_mut().zip(&symbols) {
            *slot = Outcome::from_symbol(*c).ok_or_else(|| format!("bad outcome `{c}` in `{s}`"))?;
        }
        Ok(DeterministicAssignment {
            alice: [out[0], out[1]],
            bob: [out[2], out[3]],
        })
    }
}

fn response(o: Outcome) -> f64 {
    if o.is_plus() {
        1.0
    } else {
        0.0
    }
}

pub fn make_deterministic(assignment: DeterministicAssignment) -> LhvModel {
    LhvModel::single(
        assignment.alice.map(response),
        assignment.bob.map(response),
    )
    .expect("0/1 responses with unit weight are a valid model")
}

pub fn demo_model() -> LhvModel {
    make_deterministic(DeterministicAssignment::demo())
}

pub fn uniform_model() -> LhvModel {
    LhvModel::single([0.5; 2], [0.5; 2]).expect("valid")
}

fn normalized_weights(raw: &[f64]) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

/// `k` hidden values with random positive weights and uniform responses.
pub fn random_lhv_model(k: usize, seed: u64) -> Result<LhvModel, ModelError> {
    if k == 0 {
        return Err(ModelError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (0, 1] keeps every weight strictly positive
    let raw: Vec<f64> = (0..k).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let hidden = normalized_weights(&raw)
        .into_iter()
        .enumerate()
        .map(|(i, w)| HiddenValue::new(i.to_string(), w, rng.gen(), rng.gen()))
        .collect();
    LhvModel::new(hidden)
}

/// `k` hidden values with random weights, each a random deterministic assignment.
pub fn random_deterministic_mixture(k: usize, seed: u64) -> Result<LhvModel, ModelError> {
    if k == 0 {
        return Err(ModelError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..k).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let hidden = normalized_weights(&raw)
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let a = DeterministicAssignment::from_index(rng.gen_range(0..16));
            HiddenValue::new(
                format!("{i}:{a}"),
                w,
                a.alice.map(response),
                a.bob.map(response),
            )
        })
        .collect();
    LhvModel::new(hidden)
}

/// What part of each past trial a history class retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Outcome pair only: 4 values per trial.
    Outcome,
    /// Setting pair and outcome pair: 16 values per trial.
    Full,
}

impl Granularity {
    pub fn radix(self) -> usize {
        match self {
            Granularity::Outcome => 4,
            Granularity::Full => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Outcome => "outcome",
            Granularity::Full => "full",
        }
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outcome" => Ok(Granularity::Outcome),
            "full" => Ok(Granularity::Full),
            _ => Err(format!("granularity must be `outcome` or `full`, got `{s}`")),
        }
    }
}

/// Coarse-graining of the last `depth` trials into a class index.
///
/// Missing records at the start of a session count as `(ab, 00)`, a trial
/// with no emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HistoryClassing {
    pub depth: usize,
    pub granularity: Granularity,
}

impl HistoryClassing {
    pub fn new(depth: usize, granularity: Granularity) -> Self {
        HistoryClassing { depth, granularity }
    }

    /// `radix^depth`, or `None` on overflow.
    pub fn class_count(&self) -> Option<usize> {
        self.granularity.radix().checked_pow(self.depth as u32)
    }

    fn digit(&self, settings: SettingPair, outcomes: OutcomePair) -> usize {
        match self.granularity {
            Granularity::Outcome => outcomes.index(),
            Granularity::Full => 4 * settings.index() + outcomes.index(),
        }
    }

    fn digits(&self, class: usize) -> Vec<usize> {
        let radix = self.granularity.radix();
        let mut out = vec![0; self.depth];
        let mut c = class;
        for d in out.iter_mut().rev() {
            *d = c % radix;
            c /= radix;
        }
        out
    }

    /// Class of a window (oldest first); only the last `depth` records are read.
    pub fn classify(&self, window: &[TrialRecord]) -> usize {
        let radix = self.granularity.radix();
        let missing = self.depth.saturating_sub(window.len());
        let recent = &window[window.len().saturating_sub(self.depth)..];
        let pad = (0..missing).map(|_| self.digit(SettingPair::AB, OutcomePair::ZZ));
        pad.chain(recent.iter().map(|r| self.digit(r.settings, r.outcomes)))
            .fold(0, |acc, d| acc * radix + d)
    }

    /// `*` at depth 0; otherwise tokens such as `++/+0` or `ab':++/a'b:00`, oldest first.
    pub fn label(&self, class: usize) -> String {
        if self.depth == 0 {
            return "*".to_string();
        }
        self.digits(class)
            .into_iter()
            .map(|d| match self.granularity {
                Granularity::Outcome => OutcomePair::from_index(d).label().to_string(),
                Granularity::Full => format!(
                    "{}:{}",
                    SettingPair::from_index(d / 4).label(),
                    OutcomePair::from_index(d % 4).label()
                ),
            })
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// One record position of a [`ClassPattern`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TokenPattern {
    settings: Option<SettingPair>,
    outcomes: Option<OutcomePair>,
}

/// Pattern over history classes used in policy files.
///
/// `*` alone matches every class. Otherwise one `/`-separated token per
/// remembered trial, oldest first; a token is `*`, an outcome pair (`+0`),
/// or under full granularity `<pair>:<outcome>` where either side may be `*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPattern {
    tokens: Option<Vec<TokenPattern>>,
}

impl ClassPattern {
    pub fn any() -> Self {
        ClassPattern { tokens: None }
    }

    pub fn parse(s: &str, classing: &HistoryClassing) -> Result<Self, String> {
        if s == "*" {
            return Ok(ClassPattern::any());
        }
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != classing.depth {
            return Err(format!(
                "pattern `{s}` has {} trial tokens, depth is {}",
                parts.len(),
                classing.depth
            ));
        }
        let outcome = |t: &str| -> Result<Option<OutcomePair>, String> {
            if t == "*" {
                Ok(None)
            } else {
                OutcomePair::from_label(t)
                    .map(Some)
                    .ok_or_else(|| format!("bad outcome pair `{t}`"))
            }
        };
        let tokens = parts
            .into_iter()
            .map(|part| match part.split_once(':') {
                None => Ok(TokenPattern {
                    settings: None,
                    outcomes: outcome(part)?,
                }),
                Some(_) if classing.granularity == Granularity::Outcome => Err(format!(
                    "token `{part}` names a setting pair but classes are outcome-only"
                )),
                Some((sp, oo)) => {
                    let settings = if sp == "*" {
                        None
                    } else {
                        Some(
                            SettingPair::from_label(sp)
                                .ok_or_else(|| format!("bad setting pair `{sp}`"))?,
                        )
                    };
                    Ok(TokenPattern {
                        settings,
                        outcomes: outcome(oo)?,
                    })
                }
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(ClassPattern {
            tokens: Some(tokens),
        })
    }

    pub fn matches(&self, classing: &HistoryClassing, class: usize) -> bool {
        let Some(tokens) = &self.tokens else {
            return true;
        };
        tokens.iter().zip(classing.digits(class)).all(|(tok, d)| {
            let (settings, outcomes) = match classing.granularity {
                Granularity::Outcome => (None, OutcomePair::from_index(d)),
                Granularity::Full => (
                    Some(SettingPair::from_index(d / 4)),
                    OutcomePair::from_index(d % 4),
                ),
            };
            tok.outcomes.is_none_or(|o| o == outcomes)
                && tok.settings.is_none_or(|s| Some(s) == settings)
        })
    }
}

/// Per-class models of a memory policy; may be partial until validated by
/// [`make_memory_policy`].
#[derive(Debug, Clone, PartialEq)]
pub struct TablePolicySpec {
    pub classing: HistoryClassing,
    /// Model per class index; `None` where undeclared.
    pub models: Vec<Option<LhvModel>>,
}

impl TablePolicySpec {
    pub fn new(classing: HistoryClassing) -> Result<Self, ModelError> {
        let count = classing
            .class_count()
            .filter(|&c| c <= 1 << 20)
            .ok_or(ModelError::ClassSpaceTooLarge {
                depth: classing.depth,
            })?;
        Ok(TablePolicySpec {
            classing,
            models: vec![None; count],
        })
    }

    /// Assigns `model` to every still-undeclared class matching `pattern`; returns how many.
    pub fn assign(&mut self, pattern: &ClassPattern, model: &LhvModel) -> usize {
        let mut n = 0;
        for (class, slot) in self.models.iter_mut().enumerate() {
            if slot.is_none() && pattern.matches(&self.classing, class) {
                *slot = Some(model.clone());
                n += 1;
            }
        }
        n
    }

    pub fn set(&mut self, class: usize, model: LhvModel) {
        self.models[class] = Some(model);
    }
}

/// Memory policy answering with the model mapped to the current history class.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePolicy {
    classing: HistoryClassing,
    models: Vec<LhvModel>,
}

impl TablePolicy {
    pub fn classing(&self) -> HistoryClassing {
        self.classing
    }

    pub fn models(&self) -> &[LhvModel] {
        &self.models
    }

    /// Exact tables for every class.
    pub fn class_tables(&self) -> Vec<BehaviorTable> {
        self.models.iter().map(LhvModel::behavior).collect()
    }

    pub fn to_spec(&self) -> TablePolicySpec {
        TablePolicySpec {
            classing: self.classing,
            models: self.models.iter().cloned().map(Some).collect(),
        }
    }
}

impl MemoryPolicy for TablePolicy {
    fn depth(&self) -> usize {
        self.classing.depth
    }

    fn model_at(&self, window: &[TrialRecord]) -> Result<Cow<'_, LhvModel>, ModelError> {
        Ok(Cow::Borrowed(&self.models[self.classing.classify(window)]))
    }
}

/// Checks totality and builds the policy.
pub fn make_memory_policy(spec: TablePolicySpec) -> Result<TablePolicy, ModelError> {
    let classing = spec.classing;
    let models = spec
        .models
        .into_iter()
        .enumerate()
        .map(|(class, m)| m.ok_or_else(|| ModelError::MissingClass(classing.label(class))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TablePolicy { classing, models })
}

/// Resolves model names usable both on the command line and in policy files:
/// `demo-d`, `uniform`, `det:<A(a)A(a')>,<B(b)B(b')>`, `random-lhv:<k>:<seed>`.
pub fn named_model(name: &str) -> Result<Option<LhvModel>, StrategyError> {
    let bad = |reason: String| StrategyError::BadArgument {
        name: name.to_string(),
        reason,
    };
    if name == "demo-d" {
        return Ok(Some(demo_model()));
    }
    if name == "uniform" {
        return Ok(Some(uniform_model()));
    }
    if let Some(code) = name.strip_prefix("det:") {
        let a: DeterministicAssignment = code.parse().map_err(bad)?;
        return Ok(Some(a.to_model()));
    }
    if let Some(args) = name.strip_prefix("random-lhv:") {
        let (k, seed) = args
            .split_once(':')
            .ok_or_else(|| bad("expected random-lhv:<k>:<seed>".into()))?;
        let k: usize = k.parse().map_err(|_| bad(format!("bad k `{k}`")))?;
        let seed: u64 = seed.parse().map_err(|_| bad(format!("bad seed `{seed}`")))?;
        if k == 0 {
            return Err(bad("k must be at least 1".into()));
        }
        return Ok(Some(random_lhv_model(k, seed)?));
    }
    Ok(None)
}

fn read(path: &Path) -> Result<String, StrategyError> {
    std::fs::read_to_string(path).map_err(|source| StrategyError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Builds a named strategy.
///
/// Besides the named models, accepts `pr-box` (playback), `table:<file>`
/// (playback of a table file), `memory:<file>` and `file:<file>` (strategy
/// files; either form accepts single-model or memory-policy files).
pub fn builtin(name: &str) -> Result<Strategy, StrategyError> {
    if let Some(model) = named_model(name)? {
        return Ok(Strategy::policy(Stationary(model)));
    }
    if name == "pr-box" {
        return Ok(Strategy::Playback(behavior_playback(BehaviorTable::pr_box())?));
    }
    if let Some(path) = name.strip_prefix("table:") {
        let text = read(Path::new(path))?;
        let table = parse_table_file(&text).map_err(|source| StrategyError::Parse {
            path: path.to_string(),
            source,
        })?;
        return Ok(Strategy::Playback(behavior_playback(table)?));
    }
    if let Some(path) = name
        .strip_prefix("memory:")
        .or_else(|| name.strip_prefix("file:"))
    {
        let text = read(Path::new(path))?;
        let parsed = parse_strategy_file(&text).map_err(|source| StrategyError::Parse {
            path: path.to_string(),
            source,
        })?;
        return Ok(match parsed {
            StrategyFile::Single(m) => Strategy::policy(Stationary(m)),
            StrategyFile::Memory(p) => Strategy::policy(p),
        });
    }
    Err(StrategyError::Unknown(name.to_string()))
}
