//! Jump-diffusion market parameters.
//!
//! Each stock follows `dS_i/S_i = mu_i dt + sigma_i dW_i + x_i dN_t`, where the
//! Brownian motions have correlation matrix `rho`, `N_t` is a Poisson process
//! with intensity `lambda`, and the net jump returns `x` are drawn iid from a
//! finite list of atoms. A risk-free bond grows at rate `r`.

mod json;

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::admissible::{self, NoArbitrageStatus};
use crate::error::{check_len, Error, Result};

pub use json::{parse_market, MarketDocument};

/// Relative pivot tolerance used when checking positive definiteness.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams {
    mu: DVector<f64>,
    sigma: DVector<f64>,
    rho: DMatrix<f64>,
    r: f64,
}

impl DiffusionParams {
    /// Builds diffusion parameters from the arithmetic drift `mu`.
    ///
    /// Only shapes are checked here; numeric invariants are reported by
    /// [`MarketSpec::validate`].
    pub fn new(mu: DVector<f64>, sigma: DVector<f64>, rho: DMatrix<f64>, r: f64) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "market needs at least one stock".into(),
            ));
        }
        check_len("sigma", n, sigma.len())?;
        check_len("rho rows", n, rho.nrows())?;
        check_len("rho columns", n, rho.ncols())?;
        Ok(Self { mu, sigma, rho, r })
    }

    /// Builds diffusion parameters from the geometric drift `nu`, using
    /// `mu = nu + sigma^2 / 2`.
    pub fn from_geometric_drift(
        nu: DVector<f64>,
        sigma: DVector<f64>,
        rho: DMatrix<f64>,
        r: f64,
    ) -> Result<Self> {
        check_len("sigma", nu.len(), sigma.len())?;
        let mu = nu.zip_map(&sigma, |nu, s| nu + 0.5 * s * s);
        Self::new(mu, sigma, rho, r)
    }

    /// Single stock with unit correlation.
    pub fn single(mu: f64, sigma: f64, r: f64) -> Self {
        Self {
            mu: DVector::from_element(1, mu),
            sigma: DVector::from_element(1, sigma),
            rho: DMatrix::identity(1, 1),
            r,
        }
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Excess drift `mu - r 1`.
    pub fn excess_drift(&self) -> DVector<f64> {
        self.mu.add_scalar(-self.r)
    }

    /// All volatilities exactly zero: the market only moves on jumps.
    pub fn is_pure_jump(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }

    fn with_mu(&self, mu: DVector<f64>) -> Self {
        Self { mu, ..self.clone() }
    }
}

/// One point of the jump distribution: net returns `x` with probability `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpAtom {
    #[serde(serialize_with = "serialize_vector")]
    pub x: DVector<f64>,
    pub p: f64,
}

impl JumpAtom {
    pub fn new(x: &[f64], p: f64) -> Self {
        Self {
            x: DVector::from_column_slice(x),
            p,
        }
    }

    /// Counts as an upward jump when the summed net return is positive.
    pub fn is_up(&self) -> bool {
        self.x.sum() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    lambda: f64,
    atoms: Vec<JumpAtom>,
}

impl JumpModel {
    pub fn new(lambda: f64, atoms: Vec<JumpAtom>) -> Self {
        Self { lambda, atoms }
    }

    /// No jumps at all.
    pub fn none() -> Self {
        Self {
            lambda: 0.0,
            atoms: Vec::new(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn atoms(&self) -> &[JumpAtom] {
        &self.atoms
    }

    /// Expected net jump return `E[x]`.
    pub fn mean_return(&self, n: usize) -> DVector<f64> {
        self.atoms
            .iter()
            .fold(DVector::zeros(n), |acc, a| acc + &a.x * a.p)
    }

    /// Largest Euclidean norm over the atoms (0 for an empty support).
    pub fn max_atom_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.x.norm()).fold(0.0, f64::max)
    }

    /// Jumps contribute to the dynamics.
    pub fn is_active(&self) -> bool {
        self.lambda > 0.0 && !self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    diffusion: DiffusionParams,
    jumps: JumpModel,
    covariance: DMatrix<f64>,
}

impl MarketSpec {
    /// Assembles a market. Atom dimensions must match the number of stocks;
    /// everything else is checked by [`MarketSpec::validate`].
    pub fn new(diffusion: DiffusionParams, jumps: JumpModel) -> Result<Self> {
        let n = diffusion.n();
        for atom in &jumps.atoms {
            check_len("jump atom", n, atom.x.len())?;
        }
        let covariance = scaled_correlation(&diffusion.sigma, &diffusion.rho);
        Ok(Self {
            diffusion,
            jumps,
            covariance,
        })
    }

    /// Builds a market and rejects it unless [`MarketSpec::validate`] is clean.
    pub fn validated(diffusion: DiffusionParams, jumps: JumpModel) -> Result<Self> {
        let spec = Self::new(diffusion, jumps)?;
        let report = spec.validate();
        if report.is_valid() {
            Ok(spec)
        } else {
            Err(Error::InvalidMarket(report))
        }
    }

    /// Single stock with geometric drift 0.07, volatility 0.15, bond rate
    /// 0.03 and one jump per year that doubles or halves the price with
    /// equal probability.
    pub fn example() -> Self {
        let nu = 0.07;
        let sigma = 0.15;
        let diffusion = DiffusionParams::single(nu + 0.5 * sigma * sigma, sigma, 0.03);
        let jumps = JumpModel::new(
            1.0,
            vec![JumpAtom::new(&[1.0], 0.5), JumpAtom::new(&[-0.5], 0.5)],
        );
        Self::new(diffusion, jumps).expect("built-in market has consistent dimensions")
    }

    pub fn n(&self) -> usize {
        self.diffusion.n()
    }

    pub fn diffusion(&self) -> &DiffusionParams {
        &self.diffusion
    }

    pub fn jumps(&self) -> &JumpModel {
        &self.jumps
    }

    /// `Sigma_ij = rho_ij sigma_i sigma_j`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn with_jumps(&self, jumps: JumpModel) -> Result<Self> {
        Self::new(self.diffusion.clone(), jumps)
    }

    /// Same market with jumps switched off.
    pub fn without_jumps(&self) -> Self {
        Self {
            jumps: JumpModel::none(),
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            jumps: JumpModel::new(lambda, self.jumps.atoms.clone()),
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: DVector<f64>) -> Result<Self> {
        check_len("mu", self.n(), mu.len())?;
        Ok(Self {
            diffusion: self.diffusion.with_mu(mu),
            ..self.clone()
        })
    }

    /// Checks every structural invariant and collects all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        validate_diffusion(&self.diffusion, self.jumps.is_active(), &mut report);
        validate_jumps(&self.jumps, &mut report);

        // The arbitrage certificate is only meaningful on a well-formed support.
        if report.is_valid() && !self.jumps.atoms.is_empty() {
            let cert = admissible::check_no_arbitrage(&self.jumps);
            if let NoArbitrageStatus::Fail { direction, .. } = &cert.status {
                report.push(
                    ViolationKind::Arbitrage,
                    format!("jump support admits arbitrage along direction {direction:?}"),
                );
            }
        }
        report
    }
}

/// `Sigma_ij = rho_ij sigma_i sigma_j`, requiring every volatility to be positive.
pub fn covariance_matrix(sigma: &DVector<f64>, rho: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.len();
    check_len("rho rows", n, rho.nrows())?;
    check_len("rho columns", n, rho.ncols())?;
    if let Some((i, s)) = sigma.iter().enumerate().find(|(_, s)| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "volatility sigma[{i}] = {s} must be positive"
        )));
    }
    Ok(scaled_correlation(sigma, rho))
}

fn scaled_correlation(sigma: &DVector<f64>, rho: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.len();
    DMatrix::from_fn(n, n, |i, j| rho[(i, j)] * sigma[i] * sigma[j])
}

/// Symmetric positive definiteness via Cholesky, with every pivot required to
/// exceed [`PIVOT_TOLERANCE`] times the largest diagonal entry.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.nrows() == 0 {
        return false;
    }
    if !is_symmetric(m, SYMMETRY_TOLERANCE) {
        return false;
    }
    let max_diag = m
        .diagonal()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return false;
    }
    let floor = PIVOT_TOLERANCE * max_diag;
    match Cholesky::new(m.clone()) {
        Some(chol) => chol.l().diagonal().iter().all(|l| l * l > floor),
        None => false,
    }
}

fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

fn validate_diffusion(d: &DiffusionParams, jumps_active: bool, report: &mut ValidationReport) {
    let n = d.n();
    let finite =
        d.mu.iter()
            .chain(d.sigma.iter())
            .chain(d.rho.iter())
            .all(|v| v.is_finite())
            && d.r.is_finite();
    if !finite {
        report.push(
            ViolationKind::NonFinite,
            "diffusion parameters must be finite".into(),
        );
        return;
    }

    let pure_jump = d.is_pure_jump() && jumps_active;
    if !pure_jump {
        for (i, s) in d.sigma.iter().enumerate() {
            if *s <= 0.0 {
                report.push(
                    ViolationKind::NonPositiveVolatility,
                    format!("volatility sigma[{i}] = {s} must be positive"),
                );
            }
        }
    }

    let mut rho_ok = true;
    for i in 0..n {
        if d.rho[(i, i)] != 1.0 {
            rho_ok = false;
            report.push(
                ViolationKind::CorrelationDiagonal,
                format!(
                    "correlation diagonal rho[{i}][{i}] = {} must be 1",
                    d.rho[(i, i)]
                ),
            );
        }
        for j in 0..n {
            let v = d.rho[(i, j)];
            if !(-1.0..=1.0).contains(&v) {
                rho_ok = false;
                report.push(
                    ViolationKind::CorrelationOutOfRange,
                    format!("correlation out of range: rho[{i}][{j}] = {v}"),
                );
            }
        }
    }
    if !is_symmetric(&d.rho, SYMMETRY_TOLERANCE) {
        rho_ok = false;
        report.push(
            ViolationKind::CorrelationNotSymmetric,
            "correlation matrix must be symmetric".into(),
        );
    }

    let sigma_ok = !report.has(ViolationKind::NonPositiveVolatility);
    if rho_ok && sigma_ok && !pure_jump {
        let cov = scaled_correlation(&d.sigma, &d.rho);
        if !is_positive_definite(&cov) {
            report.push(
                ViolationKind::CovarianceNotPositiveDefinite,
                "covariance matrix is not positive definite".into(),
            );
        }
    }
}

fn validate_jumps(j: &JumpModel, report: &mut ValidationReport) {
    if !(j.lambda.is_finite() && j.lambda >= 0.0) {
        report.push(
            ViolationKind::NegativeIntensity,
            format!(
                "jump intensity lambda = {} must be finite and >= 0",
                j.lambda
            ),
        );
    }
    if j.atoms.is_empty() {
        if j.lambda > 0.0 {
            report.push(
                ViolationKind::EmptyAtoms,
                "jump atom list is empty but lambda > 0".into(),
            );
        }
        return;
    }
    let mut total = 0.0;
    for (k, atom) in j.atoms.iter().enumerate() {
        if !(atom.p > 0.0 && atom.p.is_finite()) {
            report.push(
                ViolationKind::NonPositiveProbability,
                format!("atom {k} has probability {} (must be > 0)", atom.p),
            );
        }
        total += atom.p;
        if atom.x.iter().any(|v| !v.is_finite()) {
            report.push(
                ViolationKind::NonFinite,
                format!("atom {k} has a non-finite return"),
            );
        } else if let Some((i, v)) = atom.x.iter().enumerate().find(|(_, v)| **v < -1.0) {
            report.push(
                ViolationKind::NetReturnBelowMinusOne,
                format!("net return below -1: atom {k} component {i} = {v}"),
            );
        }
    }
    if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        report.push(
            ViolationKind::ProbabilitySum,
            format!("atom probabilities sum to {total}, expected 1"),
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    NonPositiveVolatility,
    CorrelationDiagonal,
    CorrelationOutOfRange,
    CorrelationNotSymmetric,
    CovarianceNotPositiveDefinite,
    NegativeIntensity,
    EmptyAtoms,
    NonPositiveProbability,
    ProbabilitySum,
    NetReturnBelowMinusOne,
    Arbitrage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// Every invariant a market violates. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

pub(crate) fn serialize_vector<S: serde::Serializer>(
    v: &DVector<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}
