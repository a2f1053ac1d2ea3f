//! Command-line front end.
//!
//! Every subcommand produces one artifact (JSON for scalar reports, CSV for
//! grids, paths and curves) written to `--out` or stdout. CSV artifacts start
//! with `#` comment lines recording the market, the seed and all parameters,
//! so the same invocation always reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::admissible::{admissible_interval, check_no_arbitrage};
use crate::error::Error;
use crate::estimate::Estimate;
use crate::game::{interval_grid_bounds, saddle_surface, verify_saddle};
use crate::growth::{newton, solve_kelly, KellyOptions, KellySolution};
use crate::market::{parse_market, MarketDocument, MarketSpec};
use crate::outperformance::{outperformance_curve, BinaryJumpMarket};
use crate::randomization::{
    investment_game_payoff, primitive_game_payoff, FairRandomization, PerformanceMeasure,
};
use crate::simulator::{simulate, simulate_terminal, NamedRule, PathConfig};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_180_101;

#[derive(Debug, Parser)]
#[command(
    name = "jump-kelly",
    version,
    about = "Kelly rule and wealth-ratio game for jump-diffusion markets"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Market description (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub market: Option<PathBuf>,
    /// Use the built-in single-stock example market.
    #[arg(long, global = true)]
    pub paper_example: bool,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check market invariants, the admissible set and the no-arbitrage condition.
    Validate,
    /// Solve for the Kelly rule.
    Kelly(KellyArgs),
    /// Payoff kernel surface 100*pi(b, c) on an admissible grid (single stock).
    Saddle(SaddleArgs),
    /// Simulate wealth paths of several rules on shared randomness.
    Simulate(SimulateArgs),
    /// Analytic outperformance probabilities over a range of horizons.
    Outperform(OutperformArgs),
    /// Monte Carlo payoff of the investment (or primitive) phi-game.
    PhiGame(PhiGameArgs),
}

#[derive(Debug, Args)]
pub struct KellyArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Run the solver even if the jump support admits arbitrage.
    #[arg(long)]
    pub allow_arbitrage: bool,
}

#[derive(Debug, Args)]
pub struct SaddleArgs {
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 300.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Comma-separated rules `[name=]value`; a value is `kelly` or the
    /// per-stock fractions separated by `:`.
    #[arg(long, default_value = "kelly,1,1.1")]
    pub rules: String,
    /// Statistics mode: simulate this many independent paths and report
    /// terminal values per path.
    #[arg(long)]
    pub paths: Option<u64>,
    /// Accept rules that a jump can bankrupt.
    #[arg(long)]
    pub allow_inadmissible: bool,
}

#[derive(Debug, Args)]
pub struct OutperformArgs {
    /// First rule (`kelly` or a number).
    #[arg(long, default_value = "kelly")]
    pub b: String,
    #[arg(long, default_value = "1")]
    pub c: String,
    #[arg(long, default_value = "1.1")]
    pub d: String,
    #[arg(long, default_value_t = 300.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct PhiGameArgs {
    /// `degenerate`, `uniform`, `lognormal:<s>` or `discrete:<v>:<p>,...`.
    #[arg(long, default_value = "uniform")]
    pub w1: String,
    #[arg(long, default_value = "uniform")]
    pub w2: String,
    /// `indicator:<alpha>`, `power:<gamma>` or `share`.
    #[arg(long, default_value = "indicator:1")]
    pub phi: String,
    #[arg(long, default_value = "kelly")]
    pub b: String,
    #[arg(long, default_value = "kelly")]
    pub c: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: u64,
    /// Play the primitive game E[phi(W1/W2)]; no market needed.
    #[arg(long)]
    pub primitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Config,
    Validation,
    Solver,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> u8 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Validation => 3,
            FailureKind::Solver => 4,
            FailureKind::Io => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
    /// Partial artifact to emit anyway (e.g. a failing validation report).
    #[serde(skip)]
    pub artifact: Option<String>,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Config,
            message: message.into(),
            artifact: None,
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> String {
        json!({
            "error": {
                "kind": self.kind,
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidMarket(_) | Error::Arbitrage { .. } => FailureKind::Validation,
            Error::NonConvergence { .. } => FailureKind::Solver,
            Error::Io(_) => FailureKind::Io,
            _ => FailureKind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
            artifact: None,
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|out| emit(&cli.common, &out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(artifact) = &err.artifact {
                let _ = emit(&cli.common, artifact);
            }
            eprintln!("{}", err.record());
            ExitCode::from(err.kind.exit_code())
        }
    }
}

fn emit(common: &CommonArgs, artifact: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError {
        kind: FailureKind::Io,
        message: e.to_string(),
        artifact: None,
    };
    match &common.out {
        Some(path) => fs::write(path, artifact).map_err(io),
        None => std::io::stdout().write_all(artifact.as_bytes()).map_err(io),
    }
}

/// Runs a parsed command and returns the artifact text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Validate => validate_cmd(&load_market(&cli.common)?),
        Command::Kelly(args) => kelly_cmd(&load_market(&cli.common)?, args),
        Command::Saddle(args) => saddle_cmd(&load_market(&cli.common)?, args),
        Command::Simulate(args) => simulate_cmd(&load_market(&cli.common)?, args, cli.common.seed),
        Command::Outperform(args) => outperform_cmd(&load_market(&cli.common)?, args),
        Command::PhiGame(args) => phi_game_cmd(&cli.common, args),
    }
}

fn load_market(common: &CommonArgs) -> Result<MarketSpec, CliError> {
    match (&common.market, common.paper_example) {
        (Some(_), true) => Err(CliError::config(
            "give either --market or --paper-example, not both",
        )),
        (None, false) => Err(CliError::config(
            "a market is required: --market <FILE> or --paper-example",
        )),
        (None, true) => Ok(MarketSpec::example()),
        (Some(path), false) => {
            let text = fs::read_to_string(path).map_err(|e| CliError {
                kind: FailureKind::Io,
                message: format!("{}: {e}", path.display()),
                artifact: None,
            })?;
            Ok(parse_market(&text)?)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn market_json(spec: &MarketSpec) -> String {
    serde_json::to_string(&MarketDocument::from_spec(spec)).expect("serializable market")
}

fn header(out: &mut String, command: &str, spec: Option<&MarketSpec>, params: serde_json::Value) {
    let _ = writeln!(out, "# jump-kelly {command}");
    if let Some(spec) = spec {
        let _ = writeln!(out, "# market: {}", market_json(spec));
    }
    let _ = writeln!(out, "# params: {params}");
}

fn interval_json(lower: f64, upper: f64) -> serde_json::Value {
    let bound = |v: f64| {
        if v.is_finite() {
            json!(v)
        } else if v > 0.0 {
            json!("inf")
        } else {
            json!("-inf")
        }
    };
    json!({ "lower": bound(lower), "upper": bound(upper) })
}

fn validate_cmd(spec: &MarketSpec) -> Result<String, CliError> {
    let report = spec.validate();
    let no_arbitrage = check_no_arbitrage(spec.jumps());
    let interval = if spec.n() == 1 {
        admissible_interval(spec.jumps())
            .ok()
            .map(|b| interval_json(b.lower, b.upper))
    } else {
        None
    };
    let artifact = to_json(&json!({
        "result": if report.is_valid() { "PASS" } else { "FAIL" },
        "violations": report.violations,
        "no_arbitrage": no_arbitrage,
        "admissible_interval": interval,
        "market": MarketDocument::from_spec(spec),
    }));
    if report.is_valid() {
        Ok(artifact)
    } else {
        Err(CliError {
            kind: FailureKind::Validation,
            message: format!("invalid market: {report}"),
            artifact: Some(artifact),
        })
    }
}

fn kelly_report(sol: &KellySolution) -> String {
    to_json(sol)
}

fn kelly_cmd(spec: &MarketSpec, args: &KellyArgs) -> Result<String, CliError> {
    let opts = KellyOptions {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let sol = if args.allow_arbitrage && !check_no_arbitrage(spec.jumps()).passed() {
        let sol = newton(spec, &DVector::zeros(spec.n()), opts)?;
        if !sol.converged {
            return Err(CliError {
                kind: FailureKind::Solver,
                message: format!(
                    "Kelly solver did not converge after {} iterations on an arbitrage market",
                    sol.iterations
                ),
                artifact: Some(kelly_report(&sol)),
            });
        }
        sol
    } else {
        solve_kelly(spec, opts)?
    };
    Ok(kelly_report(&sol))
}

fn saddle_cmd(spec: &MarketSpec, args: &SaddleArgs) -> Result<String, CliError> {
    if spec.n() != 1 {
        return Err(CliError::config(
            "saddle surface output needs a single-stock market",
        ));
    }
    let report = verify_saddle(spec, args.grid_points)?;
    let (lower, upper) = interval_grid_bounds(spec, report.b_star[0])?;
    let step = (upper - lower) / (args.grid_points - 1) as f64;
    let grid: Vec<DVector<f64>> = (0..args.grid_points)
        .map(|i| DVector::from_element(1, lower + step * i as f64))
        .collect();
    let surface = saddle_surface(spec, &grid, &grid)?;

    let mut out = String::new();
    header(
        &mut out,
        "saddle",
        Some(spec),
        json!({ "grid_points": args.grid_points, "lower": lower, "upper": upper }),
    );
    let _ = writeln!(
        out,
        "# saddle: {}",
        serde_json::to_string(&report).expect("report")
    );
    let _ = writeln!(out, "# rows: b, columns: c, values: 100*pi(b,c)");
    out.push_str("b\\c");
    for c in &grid {
        let _ = write!(out, ",{}", c[0]);
    }
    out.push('\n');
    for (i, b) in grid.iter().enumerate() {
        let _ = write!(out, "{}", b[0]);
        for j in 0..grid.len() {
            let _ = write!(out, ",{}", surface[(i, j)]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Resolves `kelly` or `:`-separated fractions into a rule.
fn parse_rule_value(value: &str, spec: &MarketSpec) -> Result<DVector<f64>, CliError> {
    let value = value.trim();
    if value == "kelly" {
        return Ok(solve_kelly(spec, KellyOptions::default())?.b_star);
    }
    let parts = value
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::config(format!("rule `{value}` is not `kelly` or numbers")))?;
    if parts.len() != spec.n() {
        return Err(CliError::config(format!(
            "rule `{value}` has {} components, market has {} stocks",
            parts.len(),
            spec.n()
        )));
    }
    Ok(DVector::from_vec(parts))
}

fn parse_rules(text: &str, spec: &MarketSpec) -> Result<Vec<NamedRule>, CliError> {
    let rules = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (name, value) = match item.split_once('=') {
                Some((name, value)) => (name.trim().to_string(), value),
                None => (item.trim().to_string(), item),
            };
            Ok(NamedRule::new(name, parse_rule_value(value, spec)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if rules.is_empty() {
        return Err(CliError::config("--rules is empty"));
    }
    Ok(rules)
}

fn scalar_rule(text: &str, spec: &MarketSpec) -> Result<f64, CliError> {
    let b = parse_rule_value(text, spec)?;
    Ok(b[0])
}

fn simulate_cmd(spec: &MarketSpec, args: &SimulateArgs, seed: u64) -> Result<String, CliError> {
    let rules = parse_rules(&args.rules, spec)?;
    let names: Vec<String> = rules.iter().map(|r| r.name.clone()).collect();
    let rule_values: Vec<Vec<f64>> = rules
        .iter()
        .map(|r| r.b.iter().copied().collect())
        .collect();
    let mut out = String::new();

    if let Some(n_paths) = args.paths {
        if n_paths == 0 {
            return Err(CliError::config("--paths must be positive"));
        }
        let bs: Vec<DVector<f64>> = rules.iter().map(|r| r.b.clone()).collect();
        let outcomes = simulate_terminal(spec, &bs, args.horizon, seed, n_paths)?;
        header(
            &mut out,
            "simulate --paths",
            Some(spec),
            json!({ "horizon": args.horizon, "seed": seed, "paths": n_paths, "rules": names, "rule_values": rule_values }),
        );
        if args.horizon > 0.0 {
            for (r, name) in names.iter().enumerate() {
                let rates: Vec<f64> = outcomes
                    .iter()
                    .map(|o| o.log_wealth[r] / args.horizon)
                    .collect();
                let e = Estimate::from_samples(&rates);
                let _ = writeln!(
                    out,
                    "# growth {name}: mean {} stderr {}",
                    e.estimate, e.stderr
                );
            }
        }
        out.push_str("path,N_T,U_T");
        for name in &names {
            let _ = write!(out, ",log_V_{name}");
        }
        out.push('\n');
        for (i, o) in outcomes.iter().enumerate() {
            let _ = write!(out, "{i},{},{}", o.jumps, o.up_jumps);
            for lw in &o.log_wealth {
                let _ = write!(out, ",{lw}");
            }
            out.push('\n');
        }
        return Ok(out);
    }

    let config = if args.allow_inadmissible {
        PathConfig::allowing_inadmissible(spec, args.horizon, args.dt, seed, rules)?
    } else {
        PathConfig::new(spec, args.horizon, args.dt, seed, rules)?
    };
    let paths = simulate(spec, &config)?;
    header(
        &mut out,
        "simulate",
        Some(spec),
        json!({ "horizon": args.horizon, "dt": args.dt, "seed": seed, "rules": names, "rule_values": rule_values }),
    );
    for (name, ruin) in names.iter().zip(&paths.bankrupt_at) {
        if let Some(t) = ruin {
            let _ = writeln!(out, "# bankrupt {name} at t = {t}");
        }
    }
    out.push('t');
    for name in &names {
        let _ = write!(out, ",{name}");
    }
    out.push_str(",N_t,U_t\n");
    for (k, t) in paths.times.iter().enumerate() {
        let _ = write!(out, "{t}");
        for row in &paths.wealth {
            let _ = write!(out, ",{}", row[k]);
        }
        let _ = writeln!(out, ",{},{}", paths.jump_counts[k], paths.up_counts[k]);
    }
    Ok(out)
}

fn outperform_cmd(spec: &MarketSpec, args: &OutperformArgs) -> Result<String, CliError> {
    let market = BinaryJumpMarket::from_spec(spec)?;
    if !(args.t_step > 0.0 && args.t_max >= 0.0) {
        return Err(CliError::config("need --t-step > 0 and --t-max >= 0"));
    }
    let b = scalar_rule(&args.b, spec)?;
    let c = scalar_rule(&args.c, spec)?;
    let d = scalar_rule(&args.d, spec)?;
    let steps = (args.t_max / args.t_step + 1e-9).floor() as usize;
    let t_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * args.t_step).collect();
    let bc = outperformance_curve(b, c, &t_grid, &market, args.tol)?;
    let bd = outperformance_curve(b, d, &t_grid, &market, args.tol)?;
    let cd = outperformance_curve(c, d, &t_grid, &market, args.tol)?;

    let mut out = String::new();
    header(
        &mut out,
        "outperform",
        Some(spec),
        json!({ "b": b, "c": c, "d": d, "t_max": args.t_max, "t_step": args.t_step, "tol": args.tol }),
    );
    out.push_str("t,P(b beats c),P(b beats d),P(c beats d)\n");
    for (k, t) in t_grid.iter().enumerate() {
        let _ = writeln!(out, "{t},{},{},{}", bc[k], bd[k], cd[k]);
    }
    Ok(out)
}

fn phi_game_cmd(common: &CommonArgs, args: &PhiGameArgs) -> Result<String, CliError> {
    let w1: FairRandomization = args.w1.parse()?;
    let w2: FairRandomization = args.w2.parse()?;
    let phi: PerformanceMeasure = args.phi.parse()?;
    let seed = common.seed;
    let (estimate, setup) = if args.primitive {
        let e = primitive_game_payoff(&w1, &w2, &phi, args.n_paths, seed)?;
        (e, json!({ "game": "primitive" }))
    } else {
        let spec = load_market(common)?;
        let b = parse_rule_value(&args.b, &spec)?;
        let c = parse_rule_value(&args.c, &spec)?;
        let e = investment_game_payoff(&w1, &w2, &b, &c, &phi, args.t, &spec, args.n_paths, seed)?;
        let b: Vec<f64> = b.iter().copied().collect();
        let c: Vec<f64> = c.iter().copied().collect();
        (
            e,
            json!({ "game": "investment", "b": b, "c": c, "t": args.t, "market": MarketDocument::from_spec(&spec) }),
        )
    };
    Ok(to_json(&json!({
        "estimate": estimate.estimate,
        "stderr": estimate.stderr,
        "n": estimate.n,
        "w1": w1.to_string(),
        "w2": w2.to_string(),
        "phi": phi,
        "seed": seed,
        "setup": setup,
    })))
}
