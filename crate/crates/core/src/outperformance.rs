//! Closed-form outperformance probabilities for one stock with binary jumps.
//!
//! Conditional on `N_t = n` jumps of which `u` are up, `log V_t(b) - log V_t(c)`
//! is Gaussian with mean
//! `u log((1+b x_up)/(1+c x_up)) + (n-u) log((1+b x_down)/(1+c x_down)) + (gamma(b)-gamma(c)) t`
//! and standard deviation `sigma |b - c| sqrt(t)`, where `gamma` is the growth
//! rate during diffusion. Mixing over the Poisson count and the binomial
//! up-count gives `Prob{V_t(b) > V_t(c)}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::normal::normal_cdf;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryJumpMarket {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub lambda: f64,
    pub x_up: f64,
    pub x_down: f64,
    pub p_up: f64,
}

impl BinaryJumpMarket {
    pub fn new(
        mu: f64,
        sigma: f64,
        r: f64,
        lambda: f64,
        x_up: f64,
        x_down: f64,
        p_up: f64,
    ) -> Result<Self> {
        let finite = [mu, sigma, r, lambda, x_up, x_down, p_up]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "binary market parameters must be finite".into(),
            ));
        }
        if !(x_down < 0.0 && 0.0 < x_up) || x_down < -1.0 {
            return Err(Error::InvalidArgument(format!(
                "need -1 <= x_down < 0 < x_up, got x_down = {x_down}, x_up = {x_up}"
            )));
        }
        if !(p_up > 0.0 && p_up < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p_up = {p_up} must be in (0, 1)"
            )));
        }
        if sigma < 0.0 || lambda < 0.0 {
            return Err(Error::InvalidArgument(
                "sigma and lambda must be >= 0".into(),
            ));
        }
        Ok(Self {
            mu,
            sigma,
            r,
            lambda,
            x_up,
            x_down,
            p_up,
        })
    }

    /// Extracts the binary market from a single-stock spec with one positive
    /// and one negative jump atom.
    pub fn from_spec(spec: &MarketSpec) -> Result<Self> {
        if spec.n() != 1 {
            return Err(Error::InvalidArgument(format!(
                "outperformance probabilities need a single stock, got n = {}",
                spec.n()
            )));
        }
        let atoms = spec.jumps().atoms();
        let up = atoms.iter().filter(|a| a.x[0] > 0.0).collect::<Vec<_>>();
        let down = atoms.iter().filter(|a| a.x[0] < 0.0).collect::<Vec<_>>();
        if atoms.len() != 2 || up.len() != 1 || down.len() != 1 {
            return Err(Error::InvalidArgument(
                "outperformance probabilities need exactly one up and one down jump atom".into(),
            ));
        }
        let d = spec.diffusion();
        Self::new(
            d.mu()[0],
            d.sigma()[0],
            d.r(),
            spec.jumps().lambda(),
            up[0].x[0],
            down[0].x[0],
            up[0].p,
        )
    }

    pub fn example() -> Self {
        Self::from_spec(&MarketSpec::example()).expect("built-in market is binary")
    }

    /// `r + (mu - r) b - sigma^2 b^2 / 2`.
    pub fn diffusion_growth(&self, b: f64) -> f64 {
        self.r + (self.mu - self.r) * b - 0.5 * self.sigma * self.sigma * b * b
    }

    pub fn is_admissible(&self, b: f64) -> bool {
        1.0 + b * self.x_up > 0.0 && 1.0 + b * self.x_down > 0.0
    }

    fn require_admissible(&self, b: f64) -> Result<()> {
        if self.is_admissible(b) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "rule {b} is not admissible for jumps {{{}, {}}}",
                self.x_up, self.x_down
            )))
        }
    }
}

/// `Prob{V_t(b) > V_t(c) | N_t = n, U_t = u}` for `b != c`.
pub fn conditional_prob(
    n: u64,
    u: u64,
    t: f64,
    b: f64,
    c: f64,
    market: &BinaryJumpMarket,
) -> Result<f64> {
    if u > n {
        return Err(Error::InvalidArgument(format!(
            "up count {u} exceeds jump count {n}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be > 0")));
    }
    if b == c {
        return Err(Error::InvalidArgument(
            "conditional probability is defined for b != c only".into(),
        ));
    }
    market.require_admissible(b)?;
    market.require_admissible(c)?;
    Ok(conditional_prob_unchecked(n, u, t, b, c, market))
}

fn conditional_prob_unchecked(n: u64, u: u64, t: f64, b: f64, c: f64, m: &BinaryJumpMarket) -> f64 {
    let up_log = (b * m.x_up).ln_1p() - (c * m.x_up).ln_1p();
    let down_log = (b * m.x_down).ln_1p() - (c * m.x_down).ln_1p();
    let mean = u as f64 * up_log
        + (n - u) as f64 * down_log
        + (m.diffusion_growth(b) - m.diffusion_growth(c)) * t;
    let sd = m.sigma * (b - c).abs() * t.sqrt();
    if sd > 0.0 {
        normal_cdf(mean / sd)
    } else if mean > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Smallest jump count `n_max >= lambda t` whose Poisson upper tail
/// `P(N > n_max)` is provably below `tol`.
pub fn truncation_point(mean: f64, tol: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    let log_pmf = |k: u64| -mean + k as f64 * mean.ln() - libm::lgamma(k as f64 + 1.0);
    let mut n = mean.ceil() as u64;
    loop {
        // For k > mean the pmf ratios are bounded by mean / (n + 2), so the
        // tail beyond n is at most pmf(n + 1) / (1 - mean / (n + 2)).
        let q = mean / (n as f64 + 2.0);
        if q < 1.0 && log_pmf(n + 1).exp() / (1.0 - q) < tol {
            return n;
        }
        n += 1;
    }
}

/// `Prob{V_t(b) > V_t(c)}`.
///
/// The Poisson series is truncated where its tail is below `tol`. Ties are not
/// outperformance, so `t = 0` or `b = c` gives 0.
pub fn outperformance_probability(
    b: f64,
    c: f64,
    t: f64,
    market: &BinaryJumpMarket,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must be > 0"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must be finite and >= 0"
        )));
    }
    market.require_admissible(b)?;
    market.require_admissible(c)?;
    if t == 0.0 || b == c {
        return Ok(0.0);
    }
    let n_max = truncation_point(market.lambda * t, tol);
    Ok(series(b, c, t, market, n_max))
}

/// The mixture sum up to `n_max` jumps, with weights in log space.
pub fn series(b: f64, c: f64, t: f64, market: &BinaryJumpMarket, n_max: u64) -> f64 {
    let mean = market.lambda * t;
    let ln_p = market.p_up.ln();
    let ln_q = (1.0 - market.p_up).ln();
    let mut total = 0.0;
    for n in 0..=n_max {
        let poisson = if mean > 0.0 {
            -mean + n as f64 * mean.ln()
        } else if n == 0 {
            0.0
        } else {
            break;
        };
        let mut inner = 0.0;
        for u in 0..=n {
            let d = n - u;
            let log_w = poisson - libm::lgamma(u as f64 + 1.0) - libm::lgamma(d as f64 + 1.0)
                + u as f64 * ln_p
                + d as f64 * ln_q;
            inner += log_w.exp() * conditional_prob_unchecked(n, u, t, b, c, market);
        }
        total += inner;
    }
    total
}

/// [`outperformance_probability`] over a grid of horizons, in parallel.
pub fn outperformance_curve(
    b: f64,
    c: f64,
    t_grid: &[f64],
    market: &BinaryJumpMarket,
    tol: f64,
) -> Result<Vec<f64>> {
    t_grid
        .par_iter()
        .map(|&t| outperformance_probability(b, c, t, market, tol))
        .collect()
}
