//! Generators shared by the integration tests.

#![allow(dead_code)]

use jump_kelly::admissible::boundary_distance;
use jump_kelly::market::{DiffusionParams, JumpAtom, JumpModel, MarketSpec};
use jump_kelly::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

/// Correlation matrix from a random square factor: `A = L L' + 0.1 I`,
/// rescaled to unit diagonal.
pub fn correlation_from(factor: &[f64], n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_row_slice(n, n, factor);
    let a = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (a[(i, i)] * a[(j, j)]).sqrt())
}

/// Atoms whose `weights`-average is exactly zero, so zero lies inside their
/// convex hull and the support is arbitrage-free. Components stay within
/// `[-scale, scale]`.
pub fn centered_atoms(
    raw: &[Vec<f64>],
    weights: &[f64],
    probs: &[f64],
    scale: f64,
) -> Vec<JumpAtom> {
    let n = raw[0].len();
    let total: f64 = weights.iter().sum();
    let center: Vec<f64> = (0..n)
        .map(|i| raw.iter().zip(weights).map(|(y, w)| y[i] * w).sum::<f64>() / total)
        .collect();
    let centered: Vec<Vec<f64>> = raw
        .iter()
        .map(|y| y.iter().zip(&center).map(|(a, c)| a - c).collect())
        .collect();
    let biggest = centered
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let p_total: f64 = probs.iter().sum();
    centered
        .iter()
        .zip(probs)
        .map(|(x, p)| {
            let x: Vec<f64> = x.iter().map(|v| v * scale / biggest).collect();
            JumpAtom::new(&x, p / p_total)
        })
        .collect()
}

prop_compose! {
    fn market_of(n: usize)(
        mu in vec(-0.05..0.2f64, n),
        sigma in vec(0.05..0.4f64, n),
        factor in vec(-1.0..1.0f64, n * n),
        r in 0.0..0.05f64,
        lambda in 0.1..2.0f64,
        raw in vec(vec(-1.0..1.0f64, n), (n + 1)..(n + 4)),
        weights in vec(0.2..1.0f64, n + 3),
        probs in vec(0.1..1.0f64, n + 3),
        scale in 0.05..0.9f64,
    ) -> MarketSpec {
        let k = raw.len();
        let d = DiffusionParams::new(
            DVector::from_vec(mu),
            DVector::from_vec(sigma),
            correlation_from(&factor, n),
            r,
        )
        .unwrap();
        let atoms = centered_atoms(&raw, &weights[..k], &probs[..k], scale);
        MarketSpec::new(d, JumpModel::new(lambda, atoms)).unwrap()
    }
}

/// Random valid market with one to three stocks, correlated diffusion and a
/// finite arbitrage-free jump support.
pub fn valid_market() -> impl Strategy<Value = MarketSpec> {
    (1usize..=3).prop_flat_map(market_of)
}

pub fn valid_market_n(n: usize) -> impl Strategy<Value = MarketSpec> {
    market_of(n)
}

/// Point `frac` of the way from 0 to the admissible boundary along
/// `direction`, with unbounded directions capped at length 2.
pub fn admissible_point(spec: &MarketSpec, direction: &[f64], frac: f64) -> DVector<f64> {
    let mut d = DVector::from_column_slice(direction);
    let norm = d.norm();
    if norm < 1e-9 {
        return DVector::zeros(spec.n());
    }
    d /= norm;
    let zero = DVector::zeros(spec.n());
    let reach = boundary_distance(&zero, &d, spec.jumps()).min(2.0);
    d * (frac * reach)
}

/// `(direction, fraction)` pairs for [`admissible_point`], for up to three stocks.
pub fn direction_and_fraction(max_frac: f64) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (vec(-1.0..1.0f64, 3), 0.0..max_frac)
}

pub fn take(v: &[f64], n: usize) -> Vec<f64> {
    v[..n].to_vec()
}
