//! Non-bankruptable rules and the no-arbitrage certificate.
//!
//! A rule `b` survives every jump when `1 + b'x > 0` for all atoms `x` of the
//! jump support. The support only binds while jumps can actually occur: with
//! `lambda = 0` (or no atoms) every rule is admissible.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::market::JumpModel;

/// Absolute tolerance on `|sum_k w_k x_k|` when certifying that 0 lies in the
/// convex hull of the atoms.
pub const HULL_TOLERANCE: f64 = 1e-10;

/// Worst-case gross jump return `m(b) = min_x 1 + b'x` over the active support.
///
/// Returns `+inf` when jumps are inactive, since the minimum over an empty
/// support is unbounded.
pub fn safety_margin(b: &DVector<f64>, jumps: &JumpModel) -> Result<f64> {
    Ok(worst_atom(b, jumps)?.map_or(f64::INFINITY, |(_, m)| m))
}

pub fn is_admissible(b: &DVector<f64>, jumps: &JumpModel) -> bool {
    matches!(safety_margin(b, jumps), Ok(m) if m > 0.0)
}

/// Like [`safety_margin`] but fails with [`Error::Inadmissible`] naming the
/// worst atom when the margin is not positive.
pub fn require_admissible(b: &DVector<f64>, jumps: &JumpModel) -> Result<f64> {
    match worst_atom(b, jumps)? {
        None => Ok(f64::INFINITY),
        Some((_, m)) if m > 0.0 => Ok(m),
        Some((atom, gross_return)) => Err(Error::Inadmissible { atom, gross_return }),
    }
}

fn worst_atom(b: &DVector<f64>, jumps: &JumpModel) -> Result<Option<(usize, f64)>> {
    if !jumps.is_active() {
        if let Some(a) = jumps.atoms().first() {
            check_len("rule", a.x.len(), b.len())?;
        }
        return Ok(None);
    }
    let mut worst: Option<(usize, f64)> = None;
    for (k, atom) in jumps.atoms().iter().enumerate() {
        check_len("rule", atom.x.len(), b.len())?;
        let gross = 1.0 + b.dot(&atom.x);
        if worst.is_none_or(|(_, m)| gross < m) {
            worst = Some((k, gross));
        }
    }
    Ok(worst)
}

/// Largest `t` such that `b + s d` stays admissible for all `0 <= s < t`.
pub fn boundary_distance(b: &DVector<f64>, d: &DVector<f64>, jumps: &JumpModel) -> f64 {
    if !jumps.is_active() {
        return f64::INFINITY;
    }
    jumps
        .atoms()
        .iter()
        .filter_map(|a| {
            let slope = d.dot(&a.x);
            (slope < 0.0).then(|| (1.0 + b.dot(&a.x)) / -slope)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Open interval of admissible rules for a single stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleInterval {
    /// May be `-inf`.
    pub lower: f64,
    /// May be `+inf`.
    pub upper: f64,
}

impl AdmissibleInterval {
    pub fn contains(&self, b: f64) -> bool {
        self.lower < b && b < self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

/// `B = (-1/x_max, -1/x_min)` for a single stock, with an infinite endpoint
/// whenever all atoms are on one side of zero.
pub fn admissible_interval(jumps: &JumpModel) -> Result<AdmissibleInterval> {
    if let Some(a) = jumps.atoms().first() {
        if a.x.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "admissible interval needs a single stock, got n = {}",
                a.x.len()
            )));
        }
    }
    if jumps.atoms().is_empty() {
        if jumps.lambda() > 0.0 {
            return Err(Error::InvalidArgument("jump atom list is empty".into()));
        }
        return Ok(AdmissibleInterval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
    }
    if !jumps.is_active() {
        return Ok(AdmissibleInterval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
    }
    let xs = jumps.atoms().iter().map(|a| a.x[0]);
    let x_min = xs.clone().fold(f64::INFINITY, f64::min);
    let x_max = xs.fold(f64::NEG_INFINITY, f64::max);
    let lower = if x_max > 0.0 {
        -1.0 / x_max
    } else {
        f64::NEG_INFINITY
    };
    let upper = if x_min < 0.0 {
        -1.0 / x_min
    } else {
        f64::INFINITY
    };
    Ok(AdmissibleInterval { lower, upper })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "UPPERCASE")]
pub enum NoArbitrageStatus {
    /// `0 = sum_k weights[k] x_k` with `weights` on the simplex.
    Pass { weights: Vec<f64>, residual: f64 },
    /// Every atom has `direction' x_k >= worst_case_return > 0`, so levering
    /// up along `direction` earns a riskless profit on each jump.
    Fail {
        direction: Vec<f64>,
        worst_case_return: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoArbitrageReport {
    #[serde(flatten)]
    pub status: NoArbitrageStatus,
    pub criterion: &'static str,
}

impl NoArbitrageReport {
    pub fn passed(&self) -> bool {
        matches!(self.status, NoArbitrageStatus::Pass { .. })
    }
}

const CRITERION: &str = "max_b min_x b'x = 0 holds iff 0 lies in the convex hull of the atoms \
                         (separating hyperplane theorem for a finite support)";

/// Decides whether 0 lies in the convex hull of the jump atoms.
///
/// The minimum-norm point of the hull is found with Wolfe's algorithm. If it
/// is the origin its barycentric weights certify no-arbitrage; otherwise the
/// normalized minimum-norm point is a direction with strictly positive return
/// on every atom.
pub fn check_no_arbitrage(jumps: &JumpModel) -> NoArbitrageReport {
    let points: Vec<&DVector<f64>> = jumps.atoms().iter().map(|a| &a.x).collect();
    if points.is_empty() {
        return NoArbitrageReport {
            status: NoArbitrageStatus::Pass {
                weights: Vec::new(),
                residual: 0.0,
            },
            criterion: CRITERION,
        };
    }
    let weights = min_norm_point(&points);
    let n = points[0].len();
    let p = weights
        .iter()
        .zip(&points)
        .fold(DVector::zeros(n), |acc: DVector<f64>, (w, x)| acc + *x * *w);
    let residual = p.norm();
    let status = if residual <= HULL_TOLERANCE {
        NoArbitrageStatus::Pass { weights, residual }
    } else {
        let direction = p / residual;
        let worst = points
            .iter()
            .map(|x| direction.dot(x))
            .fold(f64::INFINITY, f64::min);
        NoArbitrageStatus::Fail {
            direction: direction.iter().copied().collect(),
            worst_case_return: worst,
        }
    };
    NoArbitrageReport {
        status,
        criterion: CRITERION,
    }
}

const WEIGHT_EPS: f64 = 1e-14;

/// Barycentric weights of the minimum-norm point of `conv(points)`.
fn min_norm_point(points: &[&DVector<f64>]) -> Vec<f64> {
    let m = points.len();
    let scale = points
        .iter()
        .map(|p| p.norm_squared())
        .fold(f64::MIN_POSITIVE, f64::max);

    let start = (0..m)
        .min_by(|&i, &j| {
            points[i]
                .norm_squared()
                .total_cmp(&points[j].norm_squared())
        })
        .expect("nonempty");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let combine = |active: &[usize], lambda: &[f64]| {
        active.iter().zip(lambda).fold(
            DVector::zeros(points[0].len()),
            |acc: DVector<f64>, (&i, &w)| acc + points[i] * w,
        )
    };
    let mut x = points[start].clone();

    for _ in 0..(100 * m + 100) {
        if x.norm() <= 0.1 * HULL_TOLERANCE {
            break;
        }
        let (j, xp) = (0..m)
            .map(|k| (k, x.dot(points[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if x.norm_squared() - xp <= 1e-15 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let Some(alpha) = affine_minimizer(points, &active) else {
                // Affinely dependent corral; drop the newest point.
                active.pop();
                lambda.pop();
                return expand(&active, &lambda, m);
            };
            if alpha.iter().all(|&a| a > WEIGHT_EPS) {
                lambda = alpha;
                x = combine(&active, &lambda);
                break;
            }
            let mut theta = 1.0;
            let mut blocking = 0;
            for (i, (&l, &a)) in lambda.iter().zip(&alpha).enumerate() {
                if a <= WEIGHT_EPS {
                    let t = if l - a > 0.0 { l / (l - a) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        blocking = i;
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            lambda[blocking] = 0.0;
            let mut i = 0;
            while i < active.len() {
                if lambda[i] <= WEIGHT_EPS {
                    active.remove(i);
                    lambda.remove(i);
                } else {
                    i += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
    }
    expand(&active, &lambda, m)
}

fn expand(active: &[usize], lambda: &[f64], m: usize) -> Vec<f64> {
    let mut w = vec![0.0; m];
    for (&i, &l) in active.iter().zip(lambda) {
        w[i] = l;
    }
    w
}

/// Weights `alpha` with `sum alpha = 1` minimizing `|sum alpha_i p_i|` over the
/// affine hull of the active points.
fn affine_minimizer(points: &[&DVector<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            kkt[(a, b)] = points[i].dot(points[j]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(k).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}
