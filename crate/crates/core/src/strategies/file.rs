//! Plain-text strategy, policy and table files.
//!
//! A single-model strategy file:
//!
//! ```text
//! lambda l0 weight=1
//! respA l0 a=1 a'=1
//! respB l0 b=1 b'=0
//! ```
//!
//! A memory policy adds a `depth` line, an optional `classes outcome|full`
//! line, `model <id>` blocks grouping lambda lines, and
//! `class <pattern> -> <model-id>` lines. The first class line matching a
//! history class wins. A model id may also be a named model (`demo-d`,
//! `uniform`, `det:..`, `random-lhv:..`). Table files hold one row per
//! setting pair: `<pair> <p++> <p+0> <p0+> <p00>`. `#` starts a comment.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::model::{BehaviorTable, HiddenValue, LhvModel, ModelError, OutcomePair, SettingPair};

use super::{
    make_memory_policy, named_model, ClassPattern, Granularity, HistoryClassing, TablePolicy,
    TablePolicySpec,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyFile {
    Single(LhvModel),
    Memory(TablePolicy),
}

#[derive(Default)]
struct LambdaDraft {
    line: usize,
    id: String,
    weight: f64,
    resp_a: Option<[f64; 2]>,
    resp_b: Option<[f64; 2]>,
}

struct ModelDraft {
    line: usize,
    id: String,
    lambdas: Vec<LambdaDraft>,
}

impl ModelDraft {
    fn finish(self) -> Result<(String, LhvModel), ParseError> {
        if self.lambdas.is_empty() {
            return err(self.line, format!("model `{}` has no lambda lines", self.id));
        }
        let mut hidden = Vec::with_capacity(self.lambdas.len());
        for l in self.lambdas {
            let Some(resp_a) = l.resp_a else {
                return err(l.line, format!("lambda `{}` has no respA line", l.id));
            };
            let Some(resp_b) = l.resp_b else {
                return err(l.line, format!("lambda `{}` has no respB line", l.id));
            };
            hidden.push(HiddenValue::new(l.id, l.weight, resp_a, resp_b));
        }
        let model = LhvModel::new(hidden).or_else(|e| err(self.line, e.to_string()))?;
        Ok((self.id, model))
    }
}

fn parse_prob(line: usize, raw: &str) -> Result<f64, ParseError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("`{raw}` is not a number")),
    }
}

/// Parses `key=value` fields in a fixed order.
fn keyed(line: usize, fields: &[&str], keys: &[&str]) -> Result<Vec<f64>, ParseError> {
    if fields.len() != keys.len() {
        return err(
            line,
            format!("expected {} fields ({}), got {}", keys.len(), keys.join(" "), fields.len()),
        );
    }
    fields
        .iter()
        .zip(keys)
        .map(|(f, k)| match f.split_once('=') {
            Some((key, v)) if key == *k => parse_prob(line, v),
            _ => err(line, format!("expected `{k}=<value>`, got `{f}`")),
        })
        .collect()
}

struct ClassLine {
    line: usize,
    pattern: String,
    model: String,
}

/// Parses a single-model strategy file or a memory-policy file.
pub fn parse_strategy_file(text: &str) -> Result<StrategyFile, ParseError> {
    let mut depth: Option<(usize, usize)> = None;
    let mut granularity = Granularity::Outcome;
    let mut loose = ModelDraft {
        line: 1,
        id: String::new(),
        lambdas: Vec::new(),
    };
    let mut blocks: Vec<ModelDraft> = Vec::new();
    let mut classes: Vec<ClassLine> = Vec::new();
    let mut memory = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let current = blocks.last_mut().unwrap_or(&mut loose);
        match words[0] {
            "depth" => {
                memory = true;
                if depth.is_some() {
                    return err(line, "duplicate depth line");
                }
                let [_, d] = words[..] else {
                    return err(line, "expected `depth <n>`");
                };
                let d = d
                    .parse()
                    .or_else(|_| err(line, format!("bad depth `{d}`")))?;
                depth = Some((d, line));
            }
            "classes" => {
                memory = true;
                let [_, g] = words[..] else {
                    return err(line, "expected `classes outcome|full`");
                };
                granularity = g.parse().or_else(|e: String| err(line, e))?;
            }
            "model" => {
                memory = true;
                let [_, id] = words[..] else {
                    return err(line, "expected `model <id>`");
                };
                if blocks.iter().any(|b| b.id == id) {
                    return err(line, format!("duplicate model `{id}`"));
                }
                blocks.push(ModelDraft {
                    line,
                    id: id.to_string(),
                    lambdas: Vec::new(),
                });
            }
            "class" => {
                memory = true;
                let [_, pattern, "->", model] = words[..] else {
                    return err(line, "expected `class <pattern> -> <model-id>`");
                };
                classes.push(ClassLine {
                    line,
                    pattern: pattern.to_string(),
                    model: model.to_string(),
                });
            }
            "lambda" => {
                let [_, id, w] = words[..] else {
                    return err(line, "expected `lambda <id> weight=<w>`");
                };
                if current.lambdas.iter().any(|l| l.id == id) {
                    return err(line, format!("duplicate lambda `{id}`"));
                }
                let weight = keyed(line, &[w], &["weight"])?[0];
                current.lambdas.push(LambdaDraft {
                    line,
                    id: id.to_string(),
                    weight,
                    ..LambdaDraft::default()
                });
            }
            kw @ ("respA" | "respB") => {
                let alice = kw == "respA";
                let keys: &[&str] = if alice { &["a", "a'"] } else { &["b", "b'"] };
                let Some(id) = words.get(1) else {
                    return err(line, format!("expected `{kw} <id> ...`"));
                };
                let v = keyed(line, &words[2..], keys)?;
                let Some(l) = current.lambdas.iter_mut().find(|l| l.id == *id) else {
                    return err(line, format!("{kw} for undeclared lambda `{id}`"));
                };
                let slot = if alice { &mut l.resp_a } else { &mut l.resp_b };
                if slot.is_some() {
                    return err(line, format!("duplicate {kw} for lambda `{id}`"));
                }
                for &p in &v {
                    if !(0.0..=1.0).contains(&p) {
                        return err(line, format!("response probability {p} outside [0, 1]"));
                    }
                }
                *slot = Some([v[0], v[1]]);
            }
            other => return err(line, format!("unknown directive `{other}`")),
        }
    }

    if !memory {
        let (_, model) = loose.finish()?;
        return Ok(StrategyFile::Single(model));
    }
    if let Some(l) = loose.lambdas.first() {
        return err(l.line, "lambda outside a model block in a memory policy file");
    }
    let Some((depth, depth_line)) = depth else {
        return err(1, "memory policy file has no `depth` line");
    };
    let classing = HistoryClassing::new(depth, granularity);
    let mut spec =
        TablePolicySpec::new(classing).or_else(|e| err(depth_line, e.to_string()))?;
    let mut models: HashMap<String, LhvModel> = HashMap::new();
    for block in blocks {
        let (id, model) = block.finish()?;
        models.insert(id, model);
    }
    for c in classes {
        let pattern = ClassPattern::parse(&c.pattern, &classing).or_else(|e| err(c.line, e))?;
        let model = match models.get(&c.model) {
            Some(m) => m.clone(),
            None => match named_model(&c.model) {
                Ok(Some(m)) => m,
                Ok(None) => return err(c.line, format!("unknown model `{}`", c.model)),
                Err(e) => return err(c.line, e.to_string()),
            },
        };
        spec.assign(&pattern, &model);
    }
    match make_memory_policy(spec) {
        Ok(p) => Ok(StrategyFile::Memory(p)),
        Err(ModelError::MissingClass(class)) => err(
            depth_line,
            format!("no class line covers history class `{class}`"),
        ),
        Err(e) => err(depth_line, e.to_string()),
    }
}

fn write_model(out: &mut String, model: &LhvModel) {
    let usable = |l: &str| !l.is_empty() && !l.contains(char::is_whitespace) && !l.contains('#');
    let labels_ok = model.hidden().iter().all(|h| usable(&h.label))
        && (1..model.hidden().len())
            .all(|i| model.hidden()[..i].iter().all(|p| p.label != model.hidden()[i].label));
    for (i, h) in model.hidden().iter().enumerate() {
        let id = if labels_ok { h.label.clone() } else { format!("l{i}") };
        let _ = writeln!(out, "lambda {id} weight={}", h.weight);
        let _ = writeln!(out, "respA {id} a={} a'={}", h.resp_a[0], h.resp_a[1]);
        let _ = writeln!(out, "respB {id} b={} b'={}", h.resp_b[0], h.resp_b[1]);
    }
}

/// Single-model strategy file text.
pub fn write_model_file(model: &LhvModel) -> String {
    let mut out = String::new();
    write_model(&mut out, model);
    out
}

/// Memory-policy file text; identical class models share one block.
pub fn write_policy_file(policy: &TablePolicy) -> String {
    let classing = policy.classing();
    let mut distinct: Vec<&LhvModel> = Vec::new();
    let mut ids = Vec::with_capacity(policy.models().len());
    for m in policy.models() {
        let id = match distinct.iter().position(|d| *d == m) {
            Some(i) => i,
            None => {
                distinct.push(m);
                distinct.len() - 1
            }
        };
        ids.push(id);
    }
    let mut out = String::new();
    let _ = writeln!(out, "depth {}", classing.depth);
    let _ = writeln!(out, "classes {}", classing.granularity.name());
    for (i, m) in distinct.iter().enumerate() {
        let _ = writeln!(out, "model m{i}");
        write_model(&mut out, m);
    }
    for (class, id) in ids.into_iter().enumerate() {
        let _ = writeln!(out, "class {} -> m{id}", classing.label(class));
    }
    out
}

pub fn parse_table_file(text: &str) -> Result<BehaviorTable, ParseError> {
    let mut rows: [Option<[f64; 4]>; 4] = [None; 4];
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some(pair) = SettingPair::from_label(words[0]) else {
            return err(line, format!("unknown setting pair `{}`", words[0]));
        };
        if words.len() != 5 {
            return err(
                line,
                format!("expected `{} <p++> <p+0> <p0+> <p00>`", pair.label()),
            );
        }
        if rows[pair.index()].is_some() {
            return err(line, format!("duplicate row for {pair}"));
        }
        let mut row = [0.0; 4];
        for (slot, w) in row.iter_mut().zip(&words[1..]) {
            *slot = parse_prob(line, w)?;
        }
        rows[pair.index()] = Some(row);
    }
    let mut prob = [[0.0; 4]; 4];
    for pair in SettingPair::ALL {
        match rows[pair.index()] {
            Some(r) => prob[pair.index()] = r,
            None => return err(last_line.max(1), format!("missing row for {pair}")),
        }
    }
    Ok(BehaviorTable::new(prob))
}

pub fn write_table_file(table: &BehaviorTable) -> String {
    let mut out = String::from("# pair ");
    let header: Vec<_> = OutcomePair::ALL.iter().map(|o| o.label()).collect();
    let _ = writeln!(out, "{}", header.join(" "));
    for pair in SettingPair::ALL {
        let row: Vec<String> = table.row(pair).iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "{} {}", pair.label(), row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{behavior_from_policy, MemoryPolicy, TrialRecord};
    use crate::strategies::{demo_model, uniform_model};

    const DEMO: &str = "\
# the demo model
lambda l0 weight=1
respA l0 a=1 a'=1
respB l0 b=1 b'=0
";

    #[test]
    fn single_model() {
        assert_eq!(
            parse_strategy_file(DEMO).unwrap(),
            StrategyFile::Single(demo_model())
        );
        let text = write_model_file(&demo_model());
        assert_eq!(
            parse_strategy_file(&text).unwrap(),
            StrategyFile::Single(demo_model())
        );
    }

    fn line_of(text: &str) -> usize {
        parse_strategy_file(text).unwrap_err().line
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("lambda x weight=1\nrespA x a=1 a'=2\n"), 2);
        assert_eq!(line_of("lambda x weight=1\nrespA y a=1 a'=1\n"), 2);
        assert_eq!(line_of("\n\nlambda x weight=1\nrespA x a=1 a'=1\n"), 3);
        assert_eq!(line_of("lambda x weight=1\nrespB x a=1 a'=1\n"), 2);
        assert_eq!(line_of("lambda x weight=abc\n"), 1);
        assert_eq!(line_of("lambda x weight=1\nlambda x weight=0\n"), 2);
        assert_eq!(line_of("frobnicate\n"), 1);
        assert_eq!(
            line_of("lambda x weight=0.5\nrespA x a=1 a'=1\nrespB x b=1 b'=1\n"),
            1
        );
        let e = parse_strategy_file("lambda x weight=1\n").unwrap_err();
        assert!(e.to_string().starts_with("line 1:"), "{e}");
        assert!(e.message.contains("respA"));
    }

    const MEMORY: &str = "\
depth 1
classes outcome
model zero
lambda z weight=1
respA z a=0 a'=0
respB z b=0 b'=0
class ++ -> zero
class * -> demo-d
";

    fn rec(outcomes: OutcomePair) -> TrialRecord {
        TrialRecord {
            index: 0,
            emitted: true,
            settings: SettingPair::AB,
            outcomes,
        }
    }

    #[test]
    fn memory_policy() {
        let StrategyFile::Memory(p) = parse_strategy_file(MEMORY).unwrap() else {
            panic!("expected a memory policy");
        };
        assert_eq!(p.depth(), 1);
        assert_eq!(
            behavior_from_policy(&p, &[rec(OutcomePair::PP)]).unwrap(),
            BehaviorTable::all_zero_outcomes()
        );
        assert_eq!(
            behavior_from_policy(&p, &[rec(OutcomePair::ZP)]).unwrap(),
            demo_model().behavior()
        );
        let again = parse_strategy_file(&write_policy_file(&p)).unwrap();
        assert_eq!(again, StrategyFile::Memory(p));
    }

    #[test]
    fn memory_errors() {
        let missing = "depth 1\nclass ++ -> demo-d\n";
        let e = parse_strategy_file(missing).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("+0"), "{e}");
        assert_eq!(line_of("depth 1\nclass ++ -> nothing\n"), 2);
        assert_eq!(line_of("depth 1\nclass ab:++ -> demo-d\n"), 2);
        assert_eq!(line_of("depth 1\nlambda x weight=1\n"), 2);
        assert_eq!(line_of("class * -> demo-d\n"), 1);
        assert_eq!(line_of("depth 1\nmodel m\nmodel m\n"), 3);
        assert_eq!(line_of("depth 1\nclass ++ demo-d\n"), 2);
        let full = "depth 1\nclasses full\nclass a'b:* -> uniform\nclass * -> demo-d\n";
        let StrategyFile::Memory(p) = parse_strategy_file(full).unwrap() else {
            panic!()
        };
        let u = uniform_model();
        assert_eq!(p.models().iter().filter(|m| **m == u).count(), 4);
    }

    #[test]
    fn tables() {
        let t = BehaviorTable::pr_box();
        assert_eq!(parse_table_file(&write_table_file(&t)).unwrap(), t);
        let e = parse_table_file("ab 1 0 0 0\nab' 1 0 0 0\n").unwrap_err();
        assert!(e.message.contains("a'b"));
        assert_eq!(parse_table_file("xy 1 0 0 0\n").unwrap_err().line, 1);
        assert_eq!(parse_table_file("ab 1 0 0\n").unwrap_err().line, 1);
        assert_eq!(
            parse_table_file("ab 1 0 0 0\nab 1 0 0 0\n").unwrap_err().line,
            2
        );
    }
}
