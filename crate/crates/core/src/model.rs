//! Domain types for a two-party, two-setting, two-outcome Bell scenario.
//!
//! Settings are `a`/`a'` for Alice and `b`/`b'` for Bob; each wing records
//! either `+` (a detection) or `0` (nothing). A [`BehaviorTable`] holds the
//! sixteen conditional probabilities `P(xy | setting pair)` and an
//! [`LhvModel`] is a finite mixture of hidden values with per-wing response
//! probabilities. Enumeration order is fixed everywhere:
//! setting pairs `ab, ab', a'b, a'b'` and outcome pairs `++, +0, 0+, 00`.

use std::borrow::Cow;
use std::fmt;

use thiserror::Error;

/// Tolerance used for algebraic invariants (normalization, no-signaling).
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model has no hidden values")]
    Empty,
    #[error("weight of hidden value `{label}` is {weight}, expected a finite value >= 0")]
    BadWeight { label: String, weight: f64 },
    #[error("weights sum to {sum}, expected 1 within {EXACT_TOL:e}")]
    NotNormalized { sum: f64 },
    #[error("response probability {value} for hidden value `{label}` is outside [0, 1]")]
    BadResponse { label: String, value: f64 },
    #[error("invalid behavior table: {0}")]
    InvalidTable(ValidationReport),
    #[error("policy has no model for history class {0}")]
    MissingClass(String),
    #[error("history classing with depth {depth} has too many classes to tabulate")]
    ClassSpaceTooLarge { depth: usize },
}

/// Which party a setting or outcome belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wing {
    Alice,
    Bob,
}

/// Binary measurement choice of one wing: unprimed (`a`, `b`) or primed (`a'`, `b'`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    Unprimed,
    Primed,
}

impl Choice {
    pub const ALL: [Choice; 2] = [Choice::Unprimed, Choice::Primed];

    pub fn index(self) -> usize {
        match self {
            Choice::Unprimed => 0,
            Choice::Primed => 1,
        }
    }

    pub fn from_index(i: usize) -> Choice {
        if i == 0 {
            Choice::Unprimed
        } else {
            Choice::Primed
        }
    }

    /// Label such as `a`, `a'`, `b` or `b'`.
    pub fn label(self, wing: Wing) -> &'static str {
        match (wing, self) {
            (Wing::Alice, Choice::Unprimed) => "a",
            (Wing::Alice, Choice::Primed) => "a'",
            (Wing::Bob, Choice::Unprimed) => "b",
            (Wing::Bob, Choice::Primed) => "b'",
        }
    }
}

/// Single-wing result: `+` for a detection event, `0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Zero,
}

impl Outcome {
    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Zero => '0',
        }
    }

    pub fn from_symbol(c: char) -> Option<Outcome> {
        match c {
            '+' => Some(Outcome::Plus),
            '0' => Some(Outcome::Zero),
            _ => None,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Outcome::Plus
    }
}

/// One choice per wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingPair {
    pub alice: Choice,
    pub bob: Choice,
}

impl SettingPair {
    pub const AB: SettingPair = SettingPair::new(Choice::Unprimed, Choice::Unprimed);
    pub const AB_PRIME: SettingPair = SettingPair::new(Choice::Unprimed, Choice::Primed);
    pub const A_PRIME_B: SettingPair = SettingPair::new(Choice::Primed, Choice::Unprimed);
    pub const A_PRIME_B_PRIME: SettingPair = SettingPair::new(Choice::Primed, Choice::Primed);

    /// `ab, ab', a'b, a'b'`.
    pub const ALL: [SettingPair; 4] = [
        SettingPair::AB,
        SettingPair::AB_PRIME,
        SettingPair::A_PRIME_B,
        SettingPair::A_PRIME_B_PRIME,
    ];

    pub const fn new(alice: Choice, bob: Choice) -> SettingPair {
        SettingPair { alice, bob }
    }

    pub fn index(self) -> usize {
        2 * self.alice.index() + self.bob.index()
    }

    pub fn from_index(i: usize) -> SettingPair {
        SettingPair::ALL[i]
    }

    pub fn choice(self, wing: Wing) -> Choice {
        match wing {
            Wing::Alice => self.alice,
            Wing::Bob => self.bob,
        }
    }

    pub fn label(self) -> &'static str {
        ["ab", "ab'", "a'b", "a'b'"][self.index()]
    }

    pub fn from_label(s: &str) -> Option<SettingPair> {
        SettingPair::ALL.into_iter().find(|p| p.label() == s)
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One outcome per wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutcomePair {
    pub alice: Outcome,
    pub bob: Outcome,
}

impl OutcomePair {
    pub const PP: OutcomePair = OutcomePair::new(Outcome::Plus, Outcome::Plus);
    pub const PZ: OutcomePair = OutcomePair::new(Outcome::Plus, Outcome::Zero);
    pub const ZP: OutcomePair = OutcomePair::new(Outcome::Zero, Outcome::Plus);
    pub const ZZ: OutcomePair = OutcomePair::new(Outcome::Zero, Outcome::Zero);

    /// `++, +0, 0+, 00`.
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair::PP,
        OutcomePair::PZ,
        OutcomePair::ZP,
        OutcomePair::ZZ,
    ];

    pub const fn new(alice: Outcome, bob: Outcome) -> OutcomePair {
        OutcomePair { alice, bob }
    }

    pub fn index(self) -> usize {
        let bit = |o: Outcome| if o.is_plus() { 0 } else { 1 };
        2 * bit(self.alice) + bit(self.bob)
    }

    pub fn from_index(i: usize) -> OutcomePair {
        OutcomePair::ALL[i]
    }

    pub fn outcome(self, wing: Wing) -> Outcome {
        match wing {
            Wing::Alice => self.alice,
            Wing::Bob => self.bob,
        }
    }

    pub fn label(self) -> &'static str {
        ["++", "+0", "0+", "00"][self.index()]
    }

    pub fn from_label(s: &str) -> Option<OutcomePair> {
        OutcomePair::ALL.into_iter().find(|p| p.label() == s)
    }

    pub fn any_detection(self) -> bool {
        self != OutcomePair::ZZ
    }
}

impl fmt::Display for OutcomePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Result of [`BehaviorTable::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    /// Magnitude of the most negative entry (0 if none is negative).
    pub max_negativity: f64,
    /// Largest `|row sum - 1|` over the four setting pairs.
    pub max_row_deviation: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "negativity {:e}, row normalization deviation {:e}",
            self.max_negativity, self.max_row_deviation
        )
    }
}

/// Conditional joint outcome probabilities `prob[setting pair][outcome pair]`.
///
/// Construction does not validate; call [`validate`](Self::validate). Tables
/// need not be no-signaling, so non-local behaviors can be represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorTable {
    prob: [[f64; 4]; 4],
}

impl BehaviorTable {
    pub fn new(prob: [[f64; 4]; 4]) -> BehaviorTable {
        BehaviorTable { prob }
    }

    /// Every entry 1/4.
    pub fn uniform() -> BehaviorTable {
        BehaviorTable::new([[0.25; 4]; 4])
    }

    /// `00` with certainty under every setting pair.
    pub fn all_zero_outcomes() -> BehaviorTable {
        BehaviorTable::new([[0.0, 0.0, 0.0, 1.0]; 4])
    }

    /// Perfect correlation under `ab`, `ab'`, `a'b` and anticorrelation under `a'b'`.
    pub fn pr_box() -> BehaviorTable {
        let same = [0.5, 0.0, 0.0, 0.5];
        let diff = [0.0, 0.5, 0.5, 0.0];
        BehaviorTable::new([same, same, same, diff])
    }

    pub fn p(&self, pair: SettingPair, outcome: OutcomePair) -> f64 {
        self.prob[pair.index()][outcome.index()]
    }

    pub fn row(&self, pair: SettingPair) -> &[f64; 4] {
        &self.prob[pair.index()]
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.prob
    }

    /// Checks nonnegativity and row normalization.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut max_negativity: f64 = 0.0;
        let mut max_row_deviation: f64 = 0.0;
        let mut finite = true;
        for row in &self.prob {
            for &p in row {
                finite &= p.is_finite();
                max_negativity = max_negativity.max(-p);
            }
            max_row_deviation = max_row_deviation.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        ValidationReport {
            ok: finite && max_negativity <= tol && max_row_deviation <= tol,
            max_negativity,
            max_row_deviation,
        }
    }

    pub(crate) fn require_valid(&self, tol: f64) -> Result<(), ModelError> {
        let report = self.validate(tol);
        if report.ok {
            Ok(())
        } else {
            Err(ModelError::InvalidTable(report))
        }
    }

    /// Probability that `wing` records `+` under `pair`.
    pub fn marginal_plus(&self, wing: Wing, pair: SettingPair) -> f64 {
        OutcomePair::ALL
            .into_iter()
            .filter(|o| o.outcome(wing).is_plus())
            .map(|o| self.p(pair, o))
            .sum()
    }

    /// Largest mismatch of a wing's marginal across the other wing's two settings.
    pub fn no_signaling_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for own in Choice::ALL {
            let alice_u = self.marginal_plus(Wing::Alice, SettingPair::new(own, Choice::Unprimed));
            let alice_p = self.marginal_plus(Wing::Alice, SettingPair::new(own, Choice::Primed));
            let bob_u = self.marginal_plus(Wing::Bob, SettingPair::new(Choice::Unprimed, own));
            let bob_p = self.marginal_plus(Wing::Bob, SettingPair::new(Choice::Primed, own));
            worst = worst.max((alice_u - alice_p).abs()).max((bob_u - bob_p).abs());
        }
        worst
    }

    /// Entrywise `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &BehaviorTable, w: f64) -> BehaviorTable {
        let mut prob = [[0.0; 4]; 4];
        for (s, row) in prob.iter_mut().enumerate() {
            for (o, p) in row.iter_mut().enumerate() {
                *p = w * self.prob[s][o] + (1.0 - w) * other.prob[s][o];
            }
        }
        BehaviorTable::new(prob)
    }

    pub fn max_abs_diff(&self, other: &BehaviorTable) -> f64 {
        self.prob
            .iter()
            .flatten()
            .zip(other.prob.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Validation of a table: `ok` iff nonnegativity and row normalization hold within `tol`.
pub fn validate_behavior(table: &BehaviorTable, tol: f64) -> ValidationReport {
    table.validate(tol)
}

/// Maximum marginal mismatch; `<= tol` means the table is no-signaling.
pub fn check_no_signaling(table: &BehaviorTable) -> f64 {
    table.no_signaling_deviation()
}

/// One hidden value with its weight and per-wing probabilities of `+`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenValue {
    pub label: String,
    pub weight: f64,
    /// `P(+ | a, λ)`, `P(+ | a', λ)`.
    pub resp_a: [f64; 2],
    /// `P(+ | b, λ)`, `P(+ | b', λ)`.
    pub resp_b: [f64; 2],
}

impl HiddenValue {
    pub fn new(label: impl Into<String>, weight: f64, resp_a: [f64; 2], resp_b: [f64; 2]) -> Self {
        HiddenValue {
            label: label.into(),
            weight,
            resp_a,
            resp_b,
        }
    }

    pub fn response(&self, wing: Wing, choice: Choice) -> f64 {
        match wing {
            Wing::Alice => self.resp_a[choice.index()],
            Wing::Bob => self.resp_b[choice.index()],
        }
    }
}

/// Finite local hidden-variable model. Always satisfies its invariants:
/// nonnegative weights summing to 1 within [`EXACT_TOL`] and responses in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvModel {
    hidden: Vec<HiddenValue>,
}

impl LhvModel {
    pub fn new(hidden: Vec<HiddenValue>) -> Result<LhvModel, ModelError> {
        if hidden.is_empty() {
            return Err(ModelError::Empty);
        }
        for h in &hidden {
            if !h.weight.is_finite() || h.weight < 0.0 {
                return Err(ModelError::BadWeight {
                    label: h.label.clone(),
                    weight: h.weight,
                });
            }
            for &r in h.resp_a.iter().chain(&h.resp_b) {
                if !(0.0..=1.0).contains(&r) {
                    return Err(ModelError::BadResponse {
                        label: h.label.clone(),
                        value: r,
                    });
                }
            }
        }
        let sum: f64 = hidden.iter().map(|h| h.weight).sum();
        if (sum - 1.0).abs() > EXACT_TOL {
            return Err(ModelError::NotNormalized { sum });
        }
        Ok(LhvModel { hidden })
    }

    /// Single hidden value with weight 1.
    pub fn single(resp_a: [f64; 2], resp_b: [f64; 2]) -> Result<LhvModel, ModelError> {
        LhvModel::new(vec![HiddenValue::new("l0", 1.0, resp_a, resp_b)])
    }

    pub fn hidden(&self) -> &[HiddenValue] {
        &self.hidden
    }

    /// Index of the hidden value selected by a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, h) in self.hidden.iter().enumerate() {
            acc += h.weight;
            if u < acc {
                return i;
            }
        }
        // rounding can leave acc slightly below 1; fall back to the last positive weight
        self.hidden
            .iter()
            .rposition(|h| h.weight > 0.0)
            .unwrap_or(self.hidden.len() - 1)
    }

    /// Joint outcome distribution under local factorization over the hidden values.
    pub fn behavior(&self) -> BehaviorTable {
        let mut prob = [[0.0; 4]; 4];
        for h in &self.hidden {
            for pair in SettingPair::ALL {
                let pa = h.response(Wing::Alice, pair.alice);
                let pb = h.response(Wing::Bob, pair.bob);
                let row = &mut prob[pair.index()];
                row[OutcomePair::PP.index()] += h.weight * pa * pb;
                row[OutcomePair::PZ.index()] += h.weight * pa * (1.0 - pb);
                row[OutcomePair::ZP.index()] += h.weight * (1.0 - pa) * pb;
                row[OutcomePair::ZZ.index()] += h.weight * (1.0 - pa) * (1.0 - pb);
            }
        }
        BehaviorTable::new(prob)
    }
}

pub fn behavior_from_lhv(model: &LhvModel) -> BehaviorTable {
    model.behavior()
}

/// Completed trial as seen by both wings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialRecord {
    pub index: u64,
    pub emitted: bool,
    pub settings: SettingPair,
    pub outcomes: OutcomePair,
}

impl TrialRecord {
    /// `emitted = false` implies outcome `00`.
    pub fn is_consistent(&self) -> bool {
        self.emitted || self.outcomes == OutcomePair::ZZ
    }
}

/// Value of [`MemoryPolicy::depth`] for policies that read the whole session.
pub const UNBOUNDED_DEPTH: usize = usize::MAX;

/// Maps the visible history to the hidden-variable model for the next trial.
///
/// `window` holds at most `depth()` most recent records, oldest first. The
/// same window is visible to both wings (two-sided memory).
pub trait MemoryPolicy: Send + Sync {
    fn depth(&self) -> usize;

    fn model_at(&self, window: &[TrialRecord]) -> Result<Cow<'_, LhvModel>, ModelError>;

    /// Exact table of the current stationary model, when the policy ignores history.
    fn stationary_table(&self) -> Option<BehaviorTable> {
        if self.depth() == 0 {
            self.model_at(&[]).ok().map(|m| m.behavior())
        } else {
            None
        }
    }
}

/// Memoryless policy: the same model at every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary(pub LhvModel);

impl MemoryPolicy for Stationary {
    fn depth(&self) -> usize {
        0
    }

    fn model_at(&self, _window: &[TrialRecord]) -> Result<Cow<'_, LhvModel>, ModelError> {
        Ok(Cow::Borrowed(&self.0))
    }
}

/// The most recent `depth` records of `history`.
pub fn visible_window(history: &[TrialRecord], depth: usize) -> &[TrialRecord] {
    &history[history.len().saturating_sub(depth)..]
}

pub fn behavior_from_policy(
    policy: &dyn MemoryPolicy,
    history: &[TrialRecord],
) -> Result<BehaviorTable, ModelError> {
    let model = policy.model_at(visible_window(history, policy.depth()))?;
    Ok(model.behavior())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> LhvModel {
        LhvModel::single([1.0, 1.0], [1.0, 0.0]).unwrap()
    }

    #[test]
    fn enumeration_order_is_fixed() {
        let labels: Vec<_> = SettingPair::ALL.iter().map(|p| p.label()).collect();
        assert_eq!(labels, ["ab", "ab'", "a'b", "a'b'"]);
        let labels: Vec<_> = OutcomePair::ALL.iter().map(|p| p.label()).collect();
        assert_eq!(labels, ["++", "+0", "0+", "00"]);
        for (i, p) in SettingPair::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(SettingPair::from_label(p.label()), Some(*p));
        }
        for (i, p) in OutcomePair::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
        }
    }

    #[test]
    fn uniform_table_is_valid_and_no_signaling() {
        let t = BehaviorTable::uniform();
        assert!(validate_behavior(&t, EXACT_TOL).ok);
        assert_eq!(check_no_signaling(&t), 0.0);
    }

    #[test]
    fn short_row_reports_deviation() {
        let mut rows = [[0.25; 4]; 4];
        rows[2] = [0.3, 0.2, 0.2, 0.2];
        let r = validate_behavior(&BehaviorTable::new(rows), EXACT_TOL);
        assert!(!r.ok);
        assert!((r.max_row_deviation - 0.1).abs() < 1e-12);
        assert_eq!(r.max_negativity, 0.0);
    }

    #[test]
    fn negative_entry_fails() {
        let mut rows = [[0.25; 4]; 4];
        rows[0] = [0.5, -0.25, 0.5, 0.25];
        let r = validate_behavior(&BehaviorTable::new(rows), EXACT_TOL);
        assert!(!r.ok);
        assert_eq!(r.max_negativity, 0.25);
    }

    #[test]
    fn signaling_table_deviation_one() {
        // Alice's "+" marginal under a is 1 with b and 0 with b'
        let mut rows = [[0.25; 4]; 4];
        rows[SettingPair::AB.index()] = [1.0, 0.0, 0.0, 0.0];
        rows[SettingPair::AB_PRIME.index()] = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(check_no_signaling(&BehaviorTable::new(rows)), 1.0);
    }

    #[test]
    fn demo_model_table() {
        let t = behavior_from_lhv(&demo());
        let expect = |pair, out| {
            matches!(
                (pair, out),
                (SettingPair::AB, OutcomePair::PP)
                    | (SettingPair::AB_PRIME, OutcomePair::PZ)
                    | (SettingPair::A_PRIME_B, OutcomePair::PP)
                    | (SettingPair::A_PRIME_B_PRIME, OutcomePair::PZ)
            )
        };
        for pair in SettingPair::ALL {
            for out in OutcomePair::ALL {
                let want = if expect(pair, out) { 1.0 } else { 0.0 };
                assert_eq!(t.p(pair, out), want, "{pair} {out}");
            }
        }
    }

    #[test]
    fn half_responses_give_uniform() {
        let m = LhvModel::single([0.5, 0.5], [0.5, 0.5]).unwrap();
        assert_eq!(m.behavior(), BehaviorTable::uniform());
    }

    #[test]
    fn mixture_averages_tables() {
        let d1 = demo();
        let d2 = LhvModel::single([0.0, 1.0], [0.0, 1.0]).unwrap();
        let mix = LhvModel::new(vec![
            HiddenValue::new("x", 0.5, [1.0, 1.0], [1.0, 0.0]),
            HiddenValue::new("y", 0.5, [0.0, 1.0], [0.0, 1.0]),
        ])
        .unwrap();
        let want = d1.behavior().mix(&d2.behavior(), 0.5);
        assert!(mix.behavior().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn model_invariants_rejected() {
        assert_eq!(LhvModel::new(vec![]), Err(ModelError::Empty));
        assert!(matches!(
            LhvModel::new(vec![HiddenValue::new("x", 0.9, [0.5; 2], [0.5; 2])]),
            Err(ModelError::NotNormalized { .. })
        ));
        assert!(matches!(
            LhvModel::new(vec![HiddenValue::new("x", 1.0, [1.5, 0.0], [0.5; 2])]),
            Err(ModelError::BadResponse { .. })
        ));
        assert!(matches!(
            LhvModel::new(vec![
                HiddenValue::new("x", 1.5, [0.5; 2], [0.5; 2]),
                HiddenValue::new("y", -0.5, [0.5; 2], [0.5; 2]),
            ]),
            Err(ModelError::BadWeight { .. })
        ));
    }

    #[test]
    fn pick_respects_weights() {
        let m = LhvModel::new(vec![
            HiddenValue::new("x", 0.25, [1.0; 2], [1.0; 2]),
            HiddenValue::new("y", 0.0, [1.0; 2], [1.0; 2]),
            HiddenValue::new("z", 0.75, [1.0; 2], [1.0; 2]),
        ])
        .unwrap();
        assert_eq!(m.pick(0.0), 0);
        assert_eq!(m.pick(0.2499), 0);
        assert_eq!(m.pick(0.25), 2);
        assert_eq!(m.pick(0.999_999_999_999_999_9), 2);
    }

    struct AfterPlusPlus {
        demo: LhvModel,
        uniform: LhvModel,
    }

    impl MemoryPolicy for AfterPlusPlus {
        fn depth(&self) -> usize {
            1
        }
        fn model_at(&self, window: &[TrialRecord]) -> Result<Cow<'_, LhvModel>, ModelError> {
            match window.last() {
                Some(r) if r.outcomes == OutcomePair::PP => Ok(Cow::Borrowed(&self.demo)),
                _ => Ok(Cow::Borrowed(&self.uniform)),
            }
        }
    }

    fn record(index: u64, settings: SettingPair, outcomes: OutcomePair) -> TrialRecord {
        TrialRecord {
            index,
            emitted: true,
            settings,
            outcomes,
        }
    }

    #[test]
    fn policy_behavior_follows_history() {
        let p = AfterPlusPlus {
            demo: demo(),
            uniform: LhvModel::single([0.5; 2], [0.5; 2]).unwrap(),
        };
        let hist = [
            record(0, SettingPair::AB, OutcomePair::ZZ),
            record(1, SettingPair::AB, OutcomePair::PP),
        ];
        assert_eq!(behavior_from_policy(&p, &hist).unwrap(), demo().behavior());
        assert_eq!(behavior_from_policy(&p, &[]).unwrap(), BehaviorTable::uniform());
        assert_eq!(
            behavior_from_policy(&p, &hist[..1]).unwrap(),
            BehaviorTable::uniform()
        );
    }

    #[test]
    fn stationary_ignores_history() {
        let p = Stationary(demo());
        let hist = [record(0, SettingPair::AB, OutcomePair::PP)];
        assert_eq!(
            behavior_from_policy(&p, &hist).unwrap(),
            behavior_from_policy(&p, &[]).unwrap()
        );
        assert_eq!(p.stationary_table(), Some(demo().behavior()));
    }
}
