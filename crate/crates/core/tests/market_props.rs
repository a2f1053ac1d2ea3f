mod common;

use common::{correlation_from, valid_market};
use jump_kelly::market::{
    covariance_matrix, is_positive_definite, DiffusionParams, JumpAtom, JumpModel, MarketSpec,
    ViolationKind,
};
use jump_kelly::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

fn rebuild<F>(spec: &MarketSpec, edit: F) -> MarketSpec
where
    F: FnOnce(&mut DVector<f64>, &mut DVector<f64>, &mut DMatrix<f64>, &mut f64),
{
    let d = spec.diffusion();
    let (mut mu, mut sigma, mut rho, mut r) =
        (d.mu().clone(), d.sigma().clone(), d.rho().clone(), d.r());
    edit(&mut mu, &mut sigma, &mut rho, &mut r);
    MarketSpec::new(
        DiffusionParams::new(mu, sigma, rho, r).unwrap(),
        spec.jumps().clone(),
    )
    .unwrap()
}

fn with_atoms(spec: &MarketSpec, lambda: f64, atoms: Vec<JumpAtom>) -> MarketSpec {
    spec.with_jumps(JumpModel::new(lambda, atoms)).unwrap()
}

fn rejects(spec: &MarketSpec, kind: ViolationKind) -> bool {
    let report = spec.validate();
    !report.is_valid() && report.has(kind)
}

#[test]
fn example_market_is_valid() {
    let report = MarketSpec::example().validate();
    assert!(report.is_valid(), "{report}");
}

proptest! {
    #[test]
    fn covariance_is_spd_for_spd_correlation(
        n in 1usize..=4,
        factor in vec(-1.0..1.0f64, 16),
        sigma in vec(0.01..1.0f64, 4),
    ) {
        let rho = correlation_from(&factor[..n * n], n);
        let sigma = DVector::from_column_slice(&sigma[..n]);
        let cov = covariance_matrix(&sigma, &rho).unwrap();
        prop_assert!(cov.clone().cholesky().is_some());
        prop_assert!(is_positive_definite(&cov));
        for i in 0..n {
            prop_assert!((cov[(i, i)] - sigma[i] * sigma[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn generated_markets_validate(spec in valid_market()) {
        let report = spec.validate();
        prop_assert!(report.is_valid(), "{}", report);
    }

    #[test]
    fn single_invariant_mutations_are_rejected(spec in valid_market(), which in 0usize..2) {
        let n = spec.n();
        let i = which.min(n - 1);

        let m = rebuild(&spec, |mu, _, _, _| mu[i] = f64::NAN);
        prop_assert!(rejects(&m, ViolationKind::NonFinite));

        let m = rebuild(&spec, |_, sigma, _, _| sigma[i] = -0.1);
        prop_assert!(rejects(&m, ViolationKind::NonPositiveVolatility));

        let m = rebuild(&spec, |_, _, rho, _| rho[(i, i)] = 0.9);
        prop_assert!(rejects(&m, ViolationKind::CorrelationDiagonal));

        if n >= 2 {
            let m = rebuild(&spec, |_, _, rho, _| {
                rho[(0, 1)] = 1.5;
                rho[(1, 0)] = 1.5;
            });
            prop_assert!(rejects(&m, ViolationKind::CorrelationOutOfRange));

            let m = rebuild(&spec, |_, _, rho, _| rho[(0, 1)] = rho[(1, 0)] - 0.05 * rho[(1, 0)].signum());
            prop_assert!(rejects(&m, ViolationKind::CorrelationNotSymmetric));

            let m = rebuild(&spec, |_, _, rho, _| {
                rho[(0, 1)] = 1.0;
                rho[(1, 0)] = 1.0;
            });
            prop_assert!(rejects(&m, ViolationKind::CovarianceNotPositiveDefinite));
        }

        let atoms = spec.jumps().atoms().to_vec();
        let m = with_atoms(&spec, -0.5, atoms.clone());
        prop_assert!(rejects(&m, ViolationKind::NegativeIntensity));

        let m = with_atoms(&spec, 1.0, Vec::new());
        prop_assert!(rejects(&m, ViolationKind::EmptyAtoms));

        let mut a = atoms.clone();
        a[0].p = 0.0;
        prop_assert!(rejects(&with_atoms(&spec, 1.0, a), ViolationKind::NonPositiveProbability));

        let a: Vec<JumpAtom> = atoms.iter().map(|x| JumpAtom { p: x.p * 1.1, ..x.clone() }).collect();
        prop_assert!(rejects(&with_atoms(&spec, 1.0, a), ViolationKind::ProbabilitySum));

        let mut a = atoms.clone();
        a[0].x[i] = -1.5;
        prop_assert!(rejects(&with_atoms(&spec, 1.0, a), ViolationKind::NetReturnBelowMinusOne));

        let a: Vec<JumpAtom> = atoms
            .iter()
            .map(|x| JumpAtom { x: x.x.map(|v| v.abs() + 0.01), p: x.p })
            .collect();
        prop_assert!(rejects(&with_atoms(&spec, 1.0, a), ViolationKind::Arbitrage));
    }
}
