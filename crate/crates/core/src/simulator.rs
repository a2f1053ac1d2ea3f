//! Exact event-driven simulation of rebalanced wealth.
//!
//! Wealth of rule `b` has the closed form
//!
//! ```text
//! log V_t(b) = [r + (mu - r 1)'b - b' Sigma b / 2] t + sum_i b_i sigma_i W_it
//!              + sum_{k <= N_t} log(1 + b'x_k)
//! ```
//!
//! so a path only needs the jump times, the jump outcomes and the Brownian
//! motion at the event and output times. Nothing is discretized: Brownian
//! increments over each segment are drawn exactly, and `dt` only sets where
//! the path is reported. All rules in one call share the same realization.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;

use crate::admissible::require_admissible;
use crate::error::{check_len, Error, Result};
use crate::estimate::{parallel_samples, stream_rng, Substream};
use crate::market::MarketSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedRule {
    pub name: String,
    pub b: DVector<f64>,
}

impl NamedRule {
    pub fn new(name: impl Into<String>, b: DVector<f64>) -> Self {
        Self {
            name: name.into(),
            b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    horizon: f64,
    dt: f64,
    seed: u64,
    rules: Vec<NamedRule>,
    allow_inadmissible: bool,
}

impl PathConfig {
    /// Requires `0 < dt <= horizon` and every rule admissible for `spec`.
    pub fn new(
        spec: &MarketSpec,
        horizon: f64,
        dt: f64,
        seed: u64,
        rules: Vec<NamedRule>,
    ) -> Result<Self> {
        Self::build(spec, horizon, dt, seed, rules, false)
    }

    /// Like [`PathConfig::new`] but accepts rules that a jump can bankrupt.
    /// Such a rule's wealth drops to 0 at the first jump with `1 + b'x <= 0`
    /// and stays there.
    pub fn allowing_inadmissible(
        spec: &MarketSpec,
        horizon: f64,
        dt: f64,
        seed: u64,
        rules: Vec<NamedRule>,
    ) -> Result<Self> {
        Self::build(spec, horizon, dt, seed, rules, true)
    }

    fn build(
        spec: &MarketSpec,
        horizon: f64,
        dt: f64,
        seed: u64,
        rules: Vec<NamedRule>,
        allow_inadmissible: bool,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt <= horizon && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"
            )));
        }
        if rules.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one rule is required".into(),
            ));
        }
        for rule in &rules {
            check_len("rule", spec.n(), rule.b.len())?;
            if !allow_inadmissible {
                require_admissible(&rule.b, spec.jumps()).map_err(|e| {
                    Error::InvalidArgument(format!("rule `{}` refused: {e}", rule.name))
                })?;
            }
        }
        Ok(Self {
            horizon,
            dt,
            seed,
            rules,
            allow_inadmissible,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rules(&self) -> &[NamedRule] {
        &self.rules
    }

    pub fn allows_inadmissible(&self) -> bool {
        self.allow_inadmissible
    }

    /// `0, dt, 2 dt, ...` up to the horizon, which is always included.
    pub fn output_times(&self) -> Vec<f64> {
        let steps = (self.horizon / self.dt).floor() as usize;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * self.dt).collect();
        let last = *times.last().expect("at least time 0");
        if self.horizon - last > 1e-9 * self.dt {
            times.push(self.horizon);
        } else if let Some(t) = times.last_mut() {
            *t = self.horizon;
        }
        times
    }
}

/// One simulated realization for every configured rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WealthPathSet {
    pub rule_names: Vec<String>,
    pub times: Vec<f64>,
    /// `wealth[rule][k]` at `times[k]`; starts at 1, exactly 0 once bankrupt.
    pub wealth: Vec<Vec<f64>>,
    /// `log_wealth[rule][k]`; `-inf` once bankrupt.
    pub log_wealth: Vec<Vec<f64>>,
    /// `brownian[k][i] = W_i(times[k])`.
    pub brownian: Vec<Vec<f64>>,
    pub jump_times: Vec<f64>,
    /// Atom index drawn at each jump.
    pub jump_outcomes: Vec<usize>,
    /// `N_t` at each output time.
    pub jump_counts: Vec<u64>,
    /// `U_t`, upward jumps up to each output time.
    pub up_counts: Vec<u64>,
    /// Time of ruin per rule, if any.
    pub bankrupt_at: Vec<Option<f64>>,
}

impl WealthPathSet {
    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.rule_names.iter().position(|n| n == name)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths contain time 0")
    }
}

/// Jump arrivals and outcomes over `[0, horizon]`.
fn sample_jumps(spec: &MarketSpec, horizon: f64, seed: u64, index: u64) -> (Vec<f64>, Vec<usize>) {
    let jumps = spec.jumps();
    if !jumps.is_active() {
        return (Vec::new(), Vec::new());
    }
    let mut time_rng = stream_rng(seed, index, Substream::JumpTimes);
    let exp = Exp::new(jumps.lambda()).expect("lambda > 0");
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(&mut time_rng);
        if t > horizon {
            break;
        }
        times.push(t);
    }
    let mut outcome_rng = stream_rng(seed, index, Substream::JumpOutcomes);
    let weights = WeightedIndex::new(jumps.atoms().iter().map(|a| a.p))
        .expect("validated atom probabilities");
    let outcomes = times
        .iter()
        .map(|_| weights.sample(&mut outcome_rng))
        .collect();
    (times, outcomes)
}

/// Lower-triangular `L` with `L L' = rho`; identity when `rho` is not
/// positive definite (only possible for pure-jump markets, where the
/// Brownian motions carry zero weight).
fn correlation_factor(spec: &MarketSpec) -> DMatrix<f64> {
    let n = spec.n();
    spec.diffusion()
        .rho()
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::identity(n, n))
}

fn brownian_increment(factor: &DMatrix<f64>, dt: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let n = factor.nrows();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    factor * z * dt.sqrt()
}

/// Per-rule constants: drift of log-wealth and diffusion loadings `b_i sigma_i`.
struct RuleTerms {
    drift: f64,
    loading: DVector<f64>,
}

impl RuleTerms {
    fn new(b: &DVector<f64>, spec: &MarketSpec) -> Self {
        let d = spec.diffusion();
        let drift = d.r() + d.excess_drift().dot(b) - 0.5 * b.dot(&(spec.covariance() * b));
        Self {
            drift,
            loading: b.component_mul(d.sigma()),
        }
    }

    fn log_wealth(&self, t: f64, w: &DVector<f64>, jump_log: f64) -> f64 {
        self.drift * t + self.loading.dot(w) + jump_log
    }
}

/// Simulates path 0 of `config`.
pub fn simulate(spec: &MarketSpec, config: &PathConfig) -> Result<WealthPathSet> {
    simulate_path(spec, config, 0)
}

/// Simulates path `index`; different indices are independent realizations.
pub fn simulate_path(spec: &MarketSpec, config: &PathConfig, index: u64) -> Result<WealthPathSet> {
    for rule in &config.rules {
        check_len("rule", spec.n(), rule.b.len())?;
    }
    let times = config.output_times();
    let (jump_times, jump_outcomes) = sample_jumps(spec, config.horizon, config.seed, index);
    let factor = correlation_factor(spec);
    let mut diffusion_rng = stream_rng(config.seed, index, Substream::Diffusion);
    let atoms = spec.jumps().atoms();

    let terms: Vec<RuleTerms> = config
        .rules
        .iter()
        .map(|r| RuleTerms::new(&r.b, spec))
        .collect();
    let n_rules = config.rules.len();
    let mut jump_log = vec![0.0; n_rules];
    let mut bankrupt_at: Vec<Option<f64>> = vec![None; n_rules];
    let mut w = DVector::zeros(spec.n());
    let mut now = 0.0;
    let mut next_jump = 0;
    let mut ups = 0u64;

    let mut log_wealth = vec![Vec::with_capacity(times.len()); n_rules];
    let mut brownian = Vec::with_capacity(times.len());
    let mut jump_counts = Vec::with_capacity(times.len());
    let mut up_counts = Vec::with_capacity(times.len());

    for &t in &times {
        while next_jump < jump_times.len() && jump_times[next_jump] <= t {
            let tj = jump_times[next_jump];
            if tj > now {
                w += brownian_increment(&factor, tj - now, &mut diffusion_rng);
                now = tj;
            }
            let atom = &atoms[jump_outcomes[next_jump]];
            if atom.is_up() {
                ups += 1;
            }
            for (r, rule) in config.rules.iter().enumerate() {
                if bankrupt_at[r].is_some() {
                    continue;
                }
                let gross = 1.0 + rule.b.dot(&atom.x);
                if gross > 0.0 {
                    jump_log[r] += gross.ln();
                } else {
                    bankrupt_at[r] = Some(tj);
                }
            }
            next_jump += 1;
        }
        if t > now {
            w += brownian_increment(&factor, t - now, &mut diffusion_rng);
            now = t;
        }
        for (r, term) in terms.iter().enumerate() {
            let lw = if bankrupt_at[r].is_some() {
                f64::NEG_INFINITY
            } else {
                term.log_wealth(t, &w, jump_log[r])
            };
            log_wealth[r].push(lw);
        }
        brownian.push(w.iter().copied().collect());
        jump_counts.push(next_jump as u64);
        up_counts.push(ups);
    }

    let wealth = log_wealth
        .iter()
        .map(|row| row.iter().map(|lw| lw.exp()).collect())
        .collect();
    Ok(WealthPathSet {
        rule_names: config.rules.iter().map(|r| r.name.clone()).collect(),
        times,
        wealth,
        log_wealth,
        brownian,
        jump_times,
        jump_outcomes,
        jump_counts,
        up_counts,
        bankrupt_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalGrowth {
    /// `log V_T / T`; `-inf` when bankrupt.
    pub rate: f64,
    pub bankrupt: bool,
}

/// Realized continuously-compounded growth rate `log V_T / T` of a named rule.
pub fn empirical_growth_rate(paths: &WealthPathSet, rule: &str) -> Result<EmpiricalGrowth> {
    let idx = paths
        .rule_index(rule)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown rule `{rule}`")))?;
    let horizon = paths.horizon();
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(
            "growth rate needs a positive horizon".into(),
        ));
    }
    if paths.bankrupt_at[idx].is_some() {
        return Ok(EmpiricalGrowth {
            rate: f64::NEG_INFINITY,
            bankrupt: true,
        });
    }
    let lw = *paths.log_wealth[idx].last().expect("nonempty path");
    Ok(EmpiricalGrowth {
        rate: lw / horizon,
        bankrupt: false,
    })
}

/// Terminal state of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalOutcome {
    /// `log V_T` per rule.
    pub log_wealth: Vec<f64>,
    pub jumps: u64,
    pub up_jumps: u64,
}

/// Samples `log V_T` for many independent paths, in parallel and in path
/// order. Only `W_T` is drawn for the diffusion, which is exact for terminal
/// wealth. Jump times and outcomes of path `i` coincide with those of
/// [`simulate_path`] at index `i` under the same seed.
pub fn simulate_terminal(
    spec: &MarketSpec,
    rules: &[DVector<f64>],
    horizon: f64,
    seed: u64,
    n_paths: u64,
) -> Result<Vec<TerminalOutcome>> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must be >= 0"
        )));
    }
    for b in rules {
        check_len("rule", spec.n(), b.len())?;
        require_admissible(b, spec.jumps())?;
    }
    let factor = correlation_factor(spec);
    let terms: Vec<RuleTerms> = rules.iter().map(|b| RuleTerms::new(b, spec)).collect();
    let atoms = spec.jumps().atoms();
    Ok(parallel_samples(n_paths, |index| {
        let (jump_times, outcomes) = sample_jumps(spec, horizon, seed, index);
        let mut rng = stream_rng(seed, index, Substream::Diffusion);
        let w = if horizon > 0.0 {
            brownian_increment(&factor, horizon, &mut rng)
        } else {
            DVector::zeros(spec.n())
        };
        let log_wealth = rules
            .iter()
            .zip(&terms)
            .map(|(b, term)| {
                let jump_log: f64 = outcomes
                    .iter()
                    .map(|&k| (1.0 + b.dot(&atoms[k].x)).ln())
                    .sum();
                term.log_wealth(horizon, &w, jump_log)
            })
            .collect();
        TerminalOutcome {
            log_wealth,
            jumps: jump_times.len() as u64,
            up_jumps: outcomes.iter().filter(|&&k| atoms[k].is_up()).count() as u64,
        }
    }))
}
