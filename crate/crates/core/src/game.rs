//! The expected wealth-ratio game `E[V_t(b) / V_t(c)]`.
//!
//! The ratio equals `exp(pi(b, c) t)` with the payoff kernel
//! `pi(b, c) = grad G(c)'(b - c)`. The kernel is linear in `b` and convex in
//! `c`; its unique saddle point is `b = c = ` the Kelly rule, with value 0
//! (ratio 1).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::admissible::{admissible_interval, boundary_distance, require_admissible};
use crate::error::{check_len, Error, Result};
use crate::growth::{growth_gradient, solve_kelly, KellyOptions};
use crate::market::{serialize_vector, MarketSpec};

/// Tolerance on `|pi(b, b*)|` and on `-pi(b*, c)` for a passing report.
pub const SADDLE_TOLERANCE: f64 = 1e-9;

/// Grid endpoints are pulled toward the Kelly rule by this fraction of their
/// distance to it.
pub const GRID_SHRINK: f64 = 0.01;

const SAMPLING_SEED: u64 = 0x5ADD1E;

/// `pi(b, c)`, the compound growth rate of `E[V_t(b) / V_t(c)]`.
pub fn payoff_kernel(b: &DVector<f64>, c: &DVector<f64>, spec: &MarketSpec) -> Result<f64> {
    check_len("rule b", spec.n(), b.len())?;
    require_admissible(b, spec.jumps())?;
    let grad = growth_gradient(c, spec)?;
    Ok(grad.dot(&(b - c)))
}

/// `E[V_t(b) / V_t(c)] = exp(pi(b, c) t)`.
pub fn expected_wealth_ratio(
    b: &DVector<f64>,
    c: &DVector<f64>,
    t: f64,
    spec: &MarketSpec,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon t = {t} must be >= 0"
        )));
    }
    Ok((payoff_kernel(b, c, spec)? * t).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SaddleGrid {
    /// Evenly spaced single-stock grid over `[lower, upper]`.
    Interval {
        lower: f64,
        upper: f64,
        points: usize,
    },
    /// Random admissible rules around the Kelly rule.
    Sampled { points: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleReport {
    #[serde(serialize_with = "serialize_vector")]
    pub b_star: DVector<f64>,
    /// `max_b |pi(b, b*)|` over the grid.
    pub max_abs_pi_along_b: f64,
    /// `min_c pi(b*, c)` over the grid.
    pub min_pi_along_c: f64,
    /// Grid point attaining `min_pi_along_c`.
    #[serde(serialize_with = "serialize_vector")]
    pub argmin_c: DVector<f64>,
    /// Spacing of the single-stock grid; `None` for sampled grids.
    pub grid_step: Option<f64>,
    pub grid: SaddleGrid,
    pub passed: bool,
}

/// Checks numerically that the Kelly rule is a saddle point of `pi`: the row
/// `pi(., b*)` vanishes and the column `pi(b*, .)` is nonnegative.
///
/// Single-stock markets use an evenly spaced grid of `grid_points` rules over
/// the admissible interval, shrunk by [`GRID_SHRINK`]. Unbounded sides are
/// capped at the larger of 1, `|b*|` and the distance to the opposite finite
/// endpoint. Larger markets draw `10 * grid_points` admissible rules instead.
pub fn verify_saddle(spec: &MarketSpec, grid_points: usize) -> Result<SaddleReport> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(
            "saddle grid needs at least 2 points".into(),
        ));
    }
    let kelly = solve_kelly(spec, KellyOptions::default())?;
    let b_star = kelly.b_star;

    let (grid, desc, step) = if spec.n() == 1 {
        let (lower, upper) = interval_grid_bounds(spec, b_star[0])?;
        let step = (upper - lower) / (grid_points - 1) as f64;
        let grid: Vec<DVector<f64>> = (0..grid_points)
            .map(|i| DVector::from_element(1, lower + step * i as f64))
            .collect();
        (
            grid,
            SaddleGrid::Interval {
                lower,
                upper,
                points: grid_points,
            },
            Some(step),
        )
    } else {
        let points = 10 * grid_points;
        (
            sample_admissible(spec, &b_star, points, SAMPLING_SEED),
            SaddleGrid::Sampled {
                points,
                seed: SAMPLING_SEED,
            },
            None,
        )
    };

    let grad_star = growth_gradient(&b_star, spec)?;
    let mut max_abs = 0.0f64;
    let mut min_pi = f64::INFINITY;
    let mut argmin = b_star.clone();
    for point in &grid {
        max_abs = max_abs.max(grad_star.dot(&(point - &b_star)).abs());
        let along_c = payoff_kernel(&b_star, point, spec)?;
        if along_c < min_pi {
            min_pi = along_c;
            argmin = point.clone();
        }
    }
    Ok(SaddleReport {
        passed: max_abs <= SADDLE_TOLERANCE && min_pi >= -SADDLE_TOLERANCE,
        b_star,
        max_abs_pi_along_b: max_abs,
        min_pi_along_c: min_pi,
        argmin_c: argmin,
        grid_step: step,
        grid: desc,
    })
}

/// Endpoints of the single-stock saddle grid around `center`.
pub fn interval_grid_bounds(spec: &MarketSpec, center: f64) -> Result<(f64, f64)> {
    let interval = admissible_interval(spec.jumps())?;
    let span = |finite_other: f64| {
        let d = if finite_other.is_finite() {
            (center - finite_other).abs()
        } else {
            0.0
        };
        d.max(center.abs()).max(1.0)
    };
    let lower = if interval.lower.is_finite() {
        interval.lower + GRID_SHRINK * (center - interval.lower)
    } else {
        center - span(interval.upper)
    };
    let upper = if interval.upper.is_finite() {
        interval.upper - GRID_SHRINK * (interval.upper - center)
    } else {
        center + span(interval.lower)
    };
    Ok((lower, upper))
}

/// Deterministic admissible rules `center + s d`, with `d` uniform on the
/// sphere and `s` uniform up to 99% of the distance to the boundary (capped
/// at `1 + |center|_inf`).
pub fn sample_admissible(
    spec: &MarketSpec,
    center: &DVector<f64>,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 1.0 + center.amax();
    (0..count)
        .map(|_| {
            let mut d = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = d.norm();
            if norm > 0.0 {
                d /= norm;
            }
            let reach = (0.99 * boundary_distance(center, &d, spec.jumps())).min(cap);
            let u: f64 = rand::Rng::random(&mut rng);
            center + d * (u * reach)
        })
        .collect()
}

/// `M[i][j] = 100 pi(b_i, c_j)`, evaluated in parallel by row.
pub fn saddle_surface(
    spec: &MarketSpec,
    b_grid: &[DVector<f64>],
    c_grid: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let named = |axis: &str, i: usize, p: &DVector<f64>| {
        check_len("grid point", spec.n(), p.len())?;
        require_admissible(p, spec.jumps()).map_err(|e| {
            Error::InvalidArgument(format!(
                "grid point {axis}[{i}] = {:?} is not admissible: {e}",
                p.as_slice()
            ))
        })
    };
    for (i, b) in b_grid.iter().enumerate() {
        named("b", i, b)?;
    }
    for (j, c) in c_grid.iter().enumerate() {
        named("c", j, c)?;
    }
    let grads: Vec<DVector<f64>> = c_grid
        .par_iter()
        .map(|c| growth_gradient(c, spec))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = b_grid
        .par_iter()
        .map(|b| {
            grads
                .iter()
                .zip(c_grid)
                .map(|(g, c)| 100.0 * g.dot(&(b - c)))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(b_grid.len(), c_grid.len(), |i, j| {
        rows[i][j]
    }))
}
