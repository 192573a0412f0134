//! `bellmem` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 inequality/assertion failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use bellmem::engine::{run_session, SettingsDistribution, SourceModel};
use bellmem::model::{BehaviorTable, EXACT_TOL};
use bellmem::records::{read_records, write_records};
use bellmem::report::{analysis_report, Estimators, Report};
use bellmem::search::{exhaustive_policy_search, hill_climb_policy, DEFAULT_CAP};
use bellmem::statistics::{
    b_value, check_identity, chsh_value, fluctuation_monte_carlo, StatsError,
};
use bellmem::strategies::{
    builtin, parse_table_file, random_deterministic_mixture, random_lhv_model, write_policy_file,
    Granularity, HistoryClassing,
};
use bellmem::filter_detected;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

fn failure(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "bellmem", version, about = "CH-Eberhard Bell test simulator with memory-dependent local strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session (or a batch of sessions) and report its statistics
    Simulate(SimulateArgs),
    /// Analyze an existing trial-record CSV
    Analyze(AnalyzeArgs),
    /// Sweep random local models through the inequality identities
    Check(CheckArgs),
    /// Search memory policies for the lowest analytic drift
    Search(SearchArgs),
}

#[derive(Args)]
struct Common {
    /// Master seed; all randomness derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (CSV for simulate, policy file for search)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report file; stdout when omitted
    #[arg(long)]
    report: Option<PathBuf>,
    /// key=value file whose keys mirror the long flags (`bias_a=0.1`); flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// demo-d, det:<++,+0>, uniform, pr-box, random-lhv:<k>:<seed>, memory:<file>, table:<file>
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    emit_prob: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bias_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bias_b: Option<f64>,
    /// both, conditional or joint
    #[arg(long)]
    estimator: Option<String>,
    /// Independent replications; above 1 prints a fluctuation summary instead of a CSV
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Trial-record CSV
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keep only trials with at least one detection before analyzing
    #[arg(long)]
    filter_detected: bool,
    #[arg(long)]
    estimator: Option<String>,
    /// Stationary strategy whose exact table is used for identity_deviation
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Table file to check instead of (or besides) random models
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    depth: Option<usize>,
    /// exhaustive or hill-climb
    #[arg(long)]
    mode: Option<String>,
    /// outcome or full
    #[arg(long)]
    classes: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    bias_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bias_b: Option<f64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    restarts: Option<u64>,
    /// Largest number of policy tables enumerated in exhaustive mode
    #[arg(long)]
    cap: Option<u128>,
}

/// Values from `--config`, consumed key by key so leftovers can be reported.
struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>) -> CliResult<Config> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    usage(format!("{}: line {}: expected key=value", path.display(), i + 1))
                })?;
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Config { values })
    }

    fn take<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse()
                    .map_err(|e| usage(format!("config key `{key}`: bad value `{v}`: {e}")))
            })
            .transpose()
    }

    fn take_flag(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        Ok(flag || self.take::<bool>(key, None)?.unwrap_or(false))
    }

    fn finish(self) -> CliResult<()> {
        match self.values.keys().next() {
            Some(k) => Err(usage(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }
}

struct Outputs {
    seed: Option<u64>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
}

fn common(config: &mut Config, c: Common) -> CliResult<Outputs> {
    Ok(Outputs {
        seed: config.take("seed", c.seed)?,
        out: config.take("out", c.out)?,
        report: config.take("report", c.report)?,
    })
}

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("--{flag} is required")))
}

fn emit_report(report: &Report, path: Option<&Path>) -> CliResult<()> {
    let text = report.to_string();
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| usage(format!("cannot write report: {e}")))
        }
    }
}

fn stats_error(e: StatsError) -> CliError {
    match e {
        StatsError::EmptyPair(_) => failure(e.to_string()),
        _ => usage(e.to_string()),
    }
}

fn parse_estimators(s: Option<String>) -> CliResult<Estimators> {
    s.map_or(Ok(Estimators::BOTH), |s| s.parse().map_err(usage))
}

fn settings(bias_a: Option<f64>, bias_b: Option<f64>) -> CliResult<SettingsDistribution> {
    SettingsDistribution::new(bias_a.unwrap_or(0.0), bias_b.unwrap_or(0.0))
        .map_err(|e| usage(e.to_string()))
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut cfg = Config::load(args.common.config.as_deref())?;
    let io = common(&mut cfg, args.common)?;
    let strategy = require(cfg.take("strategy", args.strategy)?, "strategy")?;
    let trials = require(cfg.take("trials", args.trials)?, "trials")?;
    let emit_prob = cfg.take("emit_prob", args.emit_prob)?.unwrap_or(1.0);
    let bias_a = cfg.take("bias_a", args.bias_a)?;
    let bias_b = cfg.take("bias_b", args.bias_b)?;
    let estimators = parse_estimators(cfg.take("estimator", args.estimator)?)?;
    let reps = cfg.take("reps", args.reps)?.unwrap_or(1);
    cfg.finish()?;

    let seed = require(io.seed, "seed")?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let source = SourceModel::new(emit_prob).map_err(|e| usage(e.to_string()))?;
    let dist = settings(bias_a, bias_b)?;
    if reps == 1 && io.out.is_none() {
        return Err(usage("--out is required for a single session"));
    }
    let strategy = builtin(&strategy).map_err(|e| usage(e.to_string()))?;

    if reps > 1 {
        let summary = fluctuation_monte_carlo(&strategy, dist, source, trials, reps, seed)
            .map_err(|e| usage(e.to_string()))?;
        let mut r = Report::new();
        r.push("reps", summary.reps);
        r.push("n", summary.n);
        r.push_f64("frac_negative", summary.frac_negative);
        r.push_f64("frac_p_le_0.05", summary.frac_rejected);
        for (level, q) in &summary.quantiles {
            r.push_f64(format!("b_joint4.q{level}"), *q);
        }
        return emit_report(&r, io.report.as_deref());
    }

    let records = run_session(&strategy, source, dist, trials, seed)
        .map_err(|e| failure(e.to_string()))?;
    let out = io.out.expect("checked above");
    let file = fs::File::create(&out)
        .map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    write_records(std::io::BufWriter::new(file), &records).map_err(|e| usage(e.to_string()))?;
    let table = strategy.stationary_table();
    let report = analysis_report(&records, table.as_ref(), estimators).map_err(stats_error)?;
    emit_report(&report, io.report.as_deref())
}

fn analyze(args: AnalyzeArgs) -> CliResult<()> {
    let mut cfg = Config::load(args.common.config.as_deref())?;
    let io = common(&mut cfg, args.common)?;
    let input: PathBuf = require(cfg.take("input", args.input)?, "input")?;
    let filter = cfg.take_flag("filter_detected", args.filter_detected)?;
    let estimators = parse_estimators(cfg.take("estimator", args.estimator)?)?;
    let strategy: Option<String> = cfg.take("strategy", args.strategy)?;
    cfg.finish()?;

    let table = match strategy {
        Some(s) => builtin(&s)
            .map_err(|e| usage(e.to_string()))?
            .stationary_table(),
        None => None,
    };
    let file = fs::File::open(&input)
        .map_err(|e| usage(format!("cannot open {}: {e}", input.display())))?;
    let mut records = read_records(std::io::BufReader::new(file))
        .map_err(|e| usage(format!("{}: {e}", input.display())))?;
    if filter {
        records = filter_detected(&records);
    }
    let report = analysis_report(&records, table.as_ref(), estimators).map_err(stats_error)?;
    emit_report(&report, io.report.as_deref())
}

struct TableVerdict {
    b: f64,
    s: f64,
    no_signaling: f64,
    identity: Option<f64>,
}

fn judge(table: &BehaviorTable, tol: f64) -> Result<TableVerdict, StatsError> {
    let b = b_value(table)?;
    let s = chsh_value(table)?;
    let no_signaling = table.no_signaling_deviation();
    let identity = check_identity(table, tol).ok();
    Ok(TableVerdict {
        b,
        s,
        no_signaling,
        identity,
    })
}

fn check(args: CheckArgs) -> CliResult<()> {
    let mut cfg = Config::load(args.common.config.as_deref())?;
    let io = common(&mut cfg, args.common)?;
    let samples = cfg.take("samples", args.samples)?;
    let tol = cfg.take("tol", args.tol)?.unwrap_or(EXACT_TOL);
    let table_path: Option<PathBuf> = cfg.take("table", args.table)?;
    cfg.finish()?;

    if !(tol.is_finite() && tol >= 0.0) {
        return Err(usage("--tol must be a finite value >= 0"));
    }
    let samples = match (samples, &table_path) {
        (Some(0), _) => return Err(usage("--samples must be at least 1")),
        (Some(n), _) => n,
        (None, Some(_)) => 0,
        (None, None) => return Err(usage("--samples or --table is required")),
    };
    let table = match &table_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            let t = parse_table_file(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let v = t.validate(tol.max(EXACT_TOL));
            if !v.ok {
                return Err(usage(format!("{}: invalid table: {v}", p.display())));
            }
            Some(t)
        }
        None => None,
    };

    let mut failures: Vec<String> = Vec::new();
    let mut r = Report::new();
    if samples > 0 {
        let seed = require(io.seed, "seed")?;
        let mut max_ns: f64 = 0.0;
        let mut max_id: f64 = 0.0;
        let mut min_b = f64::INFINITY;
        let mut max_s = f64::NEG_INFINITY;
        for (i, s) in bellmem::statistics::replication_seeds(seed, samples)
            .into_iter()
            .enumerate()
        {
            let k = 1 + i % 4;
            let model = if i % 2 == 0 {
                random_lhv_model(k, s)
            } else {
                random_deterministic_mixture(k, s)
            }
            .map_err(|e| usage(e.to_string()))?;
            let v = judge(&model.behavior(), tol).map_err(|e| failure(e.to_string()))?;
            max_ns = max_ns.max(v.no_signaling);
            min_b = min_b.min(v.b);
            max_s = max_s.max(v.s);
            match v.identity {
                Some(d) => max_id = max_id.max(d),
                None => failures.push(format!("sample {i}: signaling {:e}", v.no_signaling)),
            }
            if v.no_signaling > tol {
                failures.push(format!("sample {i}: no-signaling deviation {:e}", v.no_signaling));
            }
            if let Some(d) = v.identity.filter(|&d| d > tol) {
                failures.push(format!("sample {i}: identity deviation {d:e}"));
            }
            if v.b < -tol || v.s > 2.0 + tol {
                failures.push(format!("sample {i}: B = {}, S = {}", v.b, v.s));
            }
            if (v.b >= -tol) != (v.s <= 2.0 + tol) {
                failures.push(format!("sample {i}: B >= 0 and S <= 2 disagree"));
            }
        }
        r.push("samples", samples);
        r.push_f64("max_no_signaling_deviation", max_ns);
        r.push_f64("max_identity_deviation", max_id);
        r.push_f64("min_b", min_b);
        r.push_f64("max_s", max_s);
    }
    if let Some(t) = table {
        let v = judge(&t, tol).map_err(|e| usage(e.to_string()))?;
        let local = v.b >= -tol && v.s <= 2.0 + tol && v.no_signaling <= tol;
        r.push_f64("table.b", v.b);
        r.push_f64("table.s", v.s);
        r.push_f64("table.no_signaling_deviation", v.no_signaling);
        if let Some(d) = v.identity {
            r.push_f64("table.identity_deviation", d);
        }
        r.push("table.lhv_compatible", local);
        if !local {
            failures.push(format!(
                "table is not LHV-compatible: B = {}, S = {}, no-signaling deviation {:e}",
                v.b, v.s, v.no_signaling
            ));
        }
    }
    r.push("failures", failures.len());
    emit_report(&r, io.report.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failure(failures.join("\n")))
    }
}

fn search(args: SearchArgs) -> CliResult<()> {
    let mut cfg = Config::load(args.common.config.as_deref())?;
    let io = common(&mut cfg, args.common)?;
    let depth = require(cfg.take("depth", args.depth)?, "depth")?;
    let mode = cfg.take("mode", args.mode)?.unwrap_or_else(|| "exhaustive".into());
    let granularity: Granularity = cfg
        .take::<String>("classes", args.classes)?
        .map_or(Ok(Granularity::Outcome), |s| s.parse().map_err(usage))?;
    let bias_a = cfg.take("bias_a", args.bias_a)?;
    let bias_b = cfg.take("bias_b", args.bias_b)?;
    let iters = cfg.take("iters", args.iters)?.unwrap_or(2000);
    let restarts = cfg.take("restarts", args.restarts)?.unwrap_or(16);
    let cap = cfg.take("cap", args.cap)?.unwrap_or(DEFAULT_CAP);
    cfg.finish()?;

    let dist = settings(bias_a, bias_b)?;
    let classing = HistoryClassing::new(depth, granularity);
    let result = match mode.as_str() {
        "exhaustive" => exhaustive_policy_search(classing, &dist, cap),
        "hill-climb" => {
            let seed = require(io.seed, "seed")?;
            hill_climb_policy(classing, iters, restarts, seed, &dist)
        }
        other => return Err(usage(format!("--mode must be exhaustive or hill-climb, got `{other}`"))),
    }
    .map_err(|e| usage(e.to_string()))?;
    if let Some(out) = &io.out {
        fs::write(out, write_policy_file(&result.policy))
            .map_err(|e| usage(format!("cannot write {}: {e}", out.display())))?;
    }
    emit_report(&result.report(), io.report.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Check(a) => check(a),
        Command::Search(a) => search(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bellmem: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
