//! Asymptotic growth rate of a rebalancing rule and the Kelly solver.
//!
//! For a rule `b` the continuously-compounded growth rate converges to
//!
//! ```text
//! G(b) = r + (mu - r 1)'b - b' Sigma b / 2 + lambda E[log(1 + b'x)]
//! ```
//!
//! which is strictly concave on the admissible set. The Kelly rule is its
//! unique maximizer.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::admissible::{check_no_arbitrage, require_admissible, safety_margin, NoArbitrageStatus};
use crate::error::{check_len, Error, Result};
use crate::market::{MarketSpec, ViolationKind};

/// Ridge added to a singular (pure-jump) covariance for the Newton solve.
pub const PURE_JUMP_RIDGE: f64 = 1e-12;

/// A trial step must keep at least this fraction of the current safety margin.
pub const MARGIN_RETENTION: f64 = 0.1;

const MAX_HALVINGS: usize = 80;

/// `G(b)`. The jump expectation is an exact sum over the atoms.
pub fn growth_rate(b: &DVector<f64>, spec: &MarketSpec) -> Result<f64> {
    check_len("rule", spec.n(), b.len())?;
    require_admissible(b, spec.jumps())?;
    let d = spec.diffusion();
    let quad = b.dot(&(spec.covariance() * b));
    let mut g = d.r() + d.excess_drift().dot(b) - 0.5 * quad;
    let jumps = spec.jumps();
    if jumps.is_active() {
        let e_log: f64 = jumps
            .atoms()
            .iter()
            .map(|a| a.p * (1.0 + b.dot(&a.x)).ln())
            .sum();
        g += jumps.lambda() * e_log;
    }
    Ok(g)
}

/// Growth rate while no jump occurs, `r + (mu - r) b - sigma^2 b^2 / 2`, for a
/// single stock.
pub fn diffusion_growth_rate(b: f64, spec: &MarketSpec) -> Result<f64> {
    if spec.n() != 1 {
        return Err(Error::InvalidArgument(format!(
            "diffusion growth rate is defined for a single stock, got n = {}",
            spec.n()
        )));
    }
    let d = spec.diffusion();
    let s = d.sigma()[0];
    Ok(d.r() + (d.mu()[0] - d.r()) * b - 0.5 * s * s * b * b)
}

/// `mu - r 1 - Sigma b + lambda E[x / (1 + b'x)]`.
pub fn growth_gradient(b: &DVector<f64>, spec: &MarketSpec) -> Result<DVector<f64>> {
    check_len("rule", spec.n(), b.len())?;
    require_admissible(b, spec.jumps())?;
    let mut g = spec.diffusion().excess_drift() - spec.covariance() * b;
    let jumps = spec.jumps();
    if jumps.is_active() {
        for a in jumps.atoms() {
            let w = jumps.lambda() * a.p / (1.0 + b.dot(&a.x));
            g.axpy(w, &a.x, 1.0);
        }
    }
    Ok(g)
}

/// `-Sigma + lambda D` with `D = -E[x x' / (1 + b'x)^2]`.
pub fn growth_hessian(b: &DVector<f64>, spec: &MarketSpec) -> Result<DMatrix<f64>> {
    check_len("rule", spec.n(), b.len())?;
    require_admissible(b, spec.jumps())?;
    let mut h = -spec.covariance().clone();
    let jumps = spec.jumps();
    if jumps.is_active() {
        for a in jumps.atoms() {
            let gross = 1.0 + b.dot(&a.x);
            let w = jumps.lambda() * a.p / (gross * gross);
            h.ger(-w, &a.x, &a.x, 1.0);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KellyOptions {
    /// Stop once `|gradient|_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KellyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KellySolution {
    #[serde(serialize_with = "crate::market::serialize_vector")]
    pub b_star: DVector<f64>,
    pub growth_rate: f64,
    /// Infinity norm of the gradient at `b_star`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves for the Kelly rule starting from the all-bond portfolio.
///
/// Refuses invalid markets and markets whose jump support admits arbitrage
/// (the growth rate is unbounded there). Non-convergence is an error carrying
/// the last iterate.
pub fn solve_kelly(spec: &MarketSpec, opts: KellyOptions) -> Result<KellySolution> {
    solve_kelly_from(spec, &DVector::zeros(spec.n()), opts)
}

/// [`solve_kelly`] from an arbitrary admissible starting rule.
pub fn solve_kelly_from(
    spec: &MarketSpec,
    start: &DVector<f64>,
    opts: KellyOptions,
) -> Result<KellySolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} must be > 0",
            opts.tol
        )));
    }
    if spec.jumps().is_active() {
        if let NoArbitrageStatus::Fail { direction, .. } = check_no_arbitrage(spec.jumps()).status {
            return Err(Error::Arbitrage { direction });
        }
    }
    let mut report = spec.validate();
    report
        .violations
        .retain(|v| v.kind != ViolationKind::Arbitrage);
    if !report.is_valid() {
        return Err(Error::InvalidMarket(report));
    }

    let sol = newton(spec, start, opts)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence {
            iterations: sol.iterations,
            gradient_norm: sol.gradient_norm,
            last_iterate: sol.b_star.iter().copied().collect(),
        })
    }
}

/// Damped Newton ascent on `G`.
///
/// Each step solves `(Sigma - lambda D) s = gradient` and halves the step
/// length until the trial point keeps at least [`MARGIN_RETENTION`] of the
/// current safety margin and does not lower `G`. The returned solution has
/// `converged = false` when `max_iter` is exhausted or no acceptable step
/// exists.
pub fn newton(
    spec: &MarketSpec,
    start: &DVector<f64>,
    opts: KellyOptions,
) -> Result<KellySolution> {
    let n = spec.n();
    check_len("starting rule", n, start.len())?;
    let ridge = if spec.diffusion().is_pure_jump() {
        PURE_JUMP_RIDGE
    } else {
        0.0
    };

    let mut b = start.clone();
    let mut value = growth_rate(&b, spec)?;
    let mut margin = safety_margin(&b, spec.jumps())?;
    let mut iterations = 0;
    loop {
        let grad = growth_gradient(&b, spec)?;
        let gradient_norm = grad.amax();
        if gradient_norm <= opts.tol || iterations >= opts.max_iter {
            return Ok(KellySolution {
                growth_rate: value,
                gradient_norm,
                iterations,
                converged: gradient_norm <= opts.tol,
                b_star: b,
            });
        }
        iterations += 1;

        // Sigma - lambda D is positive definite on the admissible set.
        let mut curvature = -growth_hessian(&b, spec)?;
        for i in 0..n {
            curvature[(i, i)] += ridge;
        }
        let step = match curvature.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => match curvature.lu().solve(&grad) {
                Some(s) => s,
                None => return Ok(stalled(b, value, gradient_norm, iterations)),
            },
        };

        let slack = 4.0 * f64::EPSILON * (1.0 + value.abs());
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &b + &step * alpha;
            let trial_margin = safety_margin(&trial, spec.jumps())?;
            if trial_margin > 0.0 && trial_margin >= MARGIN_RETENTION * margin {
                let trial_value = growth_rate(&trial, spec)?;
                if trial_value >= value - slack {
                    accepted = Some((trial, trial_value, trial_margin));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, trial_value, trial_margin)) => {
                b = trial;
                value = trial_value;
                margin = trial_margin;
            }
            None => return Ok(stalled(b, value, gradient_norm, iterations)),
        }
    }
}

fn stalled(b: DVector<f64>, value: f64, gradient_norm: f64, iterations: usize) -> KellySolution {
    KellySolution {
        b_star: b,
        growth_rate: value,
        gradient_norm,
        iterations,
        converged: false,
    }
}
