//! Line-oriented `key=value` reports with a fixed key order.

use std::fmt;
use std::str::FromStr;

use crate::model::{BehaviorTable, OutcomePair, SettingPair, TrialRecord};
use crate::statistics::{
    b_conditional, check_identity, chsh_estimate, counts_from_records, martingale_pvalue,
    t_statistic, StatsError,
};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

/// Float formatting shared by every report: shortest round-trip form,
/// switching to exponent notation for very small or very large magnitudes.
pub fn format_f64(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-6..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), format_f64(value)));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Report, String> {
        let mut report = Report::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            report.push(k, v);
        }
        Ok(report)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Which estimator families go into an analysis report.
///
/// The conditional family (`b_cond`, `s_hat`) needs every setting pair
/// present; the joint family (`t`, `b_joint4`, `p_value`) does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimators {
    pub conditional: bool,
    pub joint: bool,
}

impl Estimators {
    pub const BOTH: Estimators = Estimators {
        conditional: true,
        joint: true,
    };
}

impl Default for Estimators {
    fn default() -> Self {
        Estimators::BOTH
    }
}

impl FromStr for Estimators {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Estimators::BOTH),
            "conditional" => Ok(Estimators {
                conditional: true,
                joint: false,
            }),
            "joint" => Ok(Estimators {
                conditional: false,
                joint: true,
            }),
            _ => Err(format!(
                "estimator must be `both`, `conditional` or `joint`, got `{s}`"
            )),
        }
    }
}

/// Key order: `n`, `counts.<pair>.<outcome>`, `b_cond`, `b_cond_se`, `t`,
/// `b_joint4`, `p_value`, `s_hat`, `s_hat_se`, `identity_deviation`.
///
/// `identity_deviation` appears only when `model_table` is given and no-signaling.
pub fn analysis_report(
    records: &[TrialRecord],
    model_table: Option<&BehaviorTable>,
    estimators: Estimators,
) -> Result<Report, StatsError> {
    let counts = counts_from_records(records)?;
    let mut r = Report::new();
    r.push("n", counts.total());
    for pair in SettingPair::ALL {
        for outcome in OutcomePair::ALL {
            r.push(
                format!("counts.{}.{}", pair.label(), outcome.label()),
                counts.get(pair, outcome),
            );
        }
    }
    if estimators.conditional {
        let b = b_conditional(&counts)?;
        r.push_f64("b_cond", b.value);
        r.push_f64("b_cond_se", b.se);
    }
    if estimators.joint {
        let stat = t_statistic(records);
        r.push("t", stat.t);
        r.push_f64("b_joint4", stat.b_joint4());
        let p = if stat.n == 0 {
            1.0
        } else {
            martingale_pvalue(stat.t, stat.n)?
        };
        r.push_f64("p_value", p);
    }
    if estimators.conditional {
        let s = chsh_estimate(&counts)?;
        r.push_f64("s_hat", s.value);
        r.push_f64("s_hat_se", s.se);
    }
    if let Some(table) = model_table {
        if let Ok(dev) = check_identity(table, crate::model::EXACT_TOL) {
            r.push_f64("identity_deviation", dev);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_round_trips() {
        for v in [0.0, 1.0, -0.22, 0.135_335_283_236_612_7, 1e-300, 3e-7, 2.5e20] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_f64(1e-300), "1e-300");
        assert_eq!(format_f64(0.5), "0.5");
    }

    #[test]
    fn parse_round_trip() {
        let mut r = Report::new();
        r.push("n", 3);
        r.push_f64("b_cond", -0.25);
        let text = r.to_string();
        assert_eq!(text, "n=3\nb_cond=-0.25\n");
        assert_eq!(Report::parse(&text).unwrap(), r);
        assert!(Report::parse("garbage\n").is_err());
    }

    #[test]
    fn empty_records_joint_only() {
        let est: Estimators = "joint".parse().unwrap();
        let r = analysis_report(&[], None, est).unwrap();
        assert_eq!(r.get("t"), Some("0"));
        assert_eq!(r.get("p_value"), Some("1"));
        assert!(r.get("b_cond").is_none());
        assert!(matches!(
            analysis_report(&[], None, Estimators::BOTH),
            Err(StatsError::EmptyPair(_))
        ));
    }
}
