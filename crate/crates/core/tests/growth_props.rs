mod common;

use common::{admissible_point, direction_and_fraction, take, valid_market};
use jump_kelly::admissible::is_admissible;
use jump_kelly::growth::{
    growth_gradient, growth_hessian, growth_rate, solve_kelly, solve_kelly_from, KellyOptions,
};
use jump_kelly::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative deviation between an analytic vector and its central
/// difference estimate, relative to the analytic infinity norm (floored at 1e-3).
fn fd_gradient_error(b: &DVector<f64>, spec: &jump_kelly::market::MarketSpec) -> f64 {
    let g = growth_gradient(b, spec).unwrap();
    let h = 1e-6;
    let scale = g.amax().max(1e-3);
    (0..b.len())
        .map(|i| {
            let mut up = b.clone();
            let mut dn = b.clone();
            up[i] += h;
            dn[i] -= h;
            let fd =
                (growth_rate(&up, spec).unwrap() - growth_rate(&dn, spec).unwrap()) / (2.0 * h);
            (fd - g[i]).abs() / scale
        })
        .fold(0.0, f64::max)
}

fn fd_hessian_error(b: &DVector<f64>, spec: &jump_kelly::market::MarketSpec) -> f64 {
    let hess = growth_hessian(b, spec).unwrap();
    let h = 1e-6;
    let scale = hess.amax().max(1e-3);
    let n = b.len();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut up = b.clone();
        let mut dn = b.clone();
        up[j] += h;
        dn[j] -= h;
        let col =
            (growth_gradient(&up, spec).unwrap() - growth_gradient(&dn, spec).unwrap()) / (2.0 * h);
        for i in 0..n {
            worst = worst.max((col[i] - hess[(i, j)]).abs() / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_hessian_match_finite_differences(
        spec in valid_market(),
        (d, f) in direction_and_fraction(0.9),
    ) {
        let b = admissible_point(&spec, &take(&d, spec.n()), f);
        let eg = fd_gradient_error(&b, &spec);
        let eh = fd_hessian_error(&b, &spec);
        prop_assert!(eg <= 1e-6, "gradient error {eg}");
        prop_assert!(eh <= 1e-6, "hessian error {eh}");
    }

    #[test]
    fn growth_rate_is_concave(
        spec in valid_market(),
        (d1, f1) in direction_and_fraction(0.999),
        (d2, f2) in direction_and_fraction(0.999),
    ) {
        let n = spec.n();
        let b = admissible_point(&spec, &take(&d1, n), f1);
        let c = admissible_point(&spec, &take(&d2, n), f2);
        let mid = (&b + &c) * 0.5;
        let lhs = growth_rate(&mid, &spec).unwrap();
        let rhs = 0.5 * growth_rate(&b, &spec).unwrap() + 0.5 * growth_rate(&c, &spec).unwrap();
        prop_assert!(lhs >= rhs - 1e-12, "{lhs} < {rhs}");
    }

    #[test]
    fn hessian_is_negative_definite(spec in valid_market(), (d, f) in direction_and_fraction(0.99)) {
        let b = admissible_point(&spec, &take(&d, spec.n()), f);
        let neg = -growth_hessian(&b, &spec).unwrap();
        prop_assert!(neg.cholesky().is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kelly_rule_beats_nearby_rules(spec in valid_market(), seed in any::<u64>()) {
        let sol = solve_kelly(&spec, KellyOptions::default()).unwrap();
        let best = growth_rate(&sol.b_star, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checked = 0;
        while checked < 1000 {
            let dir: DVector<f64> = DVector::from_fn(spec.n(), |_, _| rng.random_range(-1.0..1.0));
            let delta = &dir * (0.1 * rng.random::<f64>() / dir.norm().max(1e-12));
            let b = &sol.b_star + delta;
            if !is_admissible(&b, spec.jumps()) {
                continue;
            }
            checked += 1;
            prop_assert!(best >= growth_rate(&b, &spec).unwrap());
        }
    }

    #[test]
    fn kelly_rule_is_the_first_order_fixed_point(spec in valid_market()) {
        let opts = KellyOptions::default();
        let sol = solve_kelly(&spec, opts).unwrap();
        let b = &sol.b_star;
        let d = spec.diffusion();
        let n = spec.n();
        // Sigma assembled entrywise, independent of the library's covariance.
        let sigma = DMatrix::from_fn(n, n, |i, j| d.rho()[(i, j)] * d.sigma()[i] * d.sigma()[j]);
        let mut rhs = DVector::from_fn(n, |i, _| d.mu()[i] - d.r());
        for atom in spec.jumps().atoms() {
            let gross = 1.0 + b.dot(&atom.x);
            rhs += &atom.x * (spec.jumps().lambda() * atom.p / gross);
        }
        let residual = (&sigma * b - &rhs).amax();
        prop_assert!(residual <= opts.tol * 1.01, "residual {residual}");
    }

    #[test]
    fn kelly_rule_does_not_depend_on_start(spec in valid_market(), starts in vec((vec(-1.0..1.0f64, 3), 0.0..0.95f64), 10)) {
        let reference = solve_kelly(&spec, KellyOptions::default()).unwrap().b_star;
        for (d, f) in starts {
            let start = admissible_point(&spec, &take(&d, spec.n()), f);
            let sol = solve_kelly_from(&spec, &start, KellyOptions::default()).unwrap();
            let diff = (&sol.b_star - &reference).amax();
            prop_assert!(diff <= 1e-7 * (1.0 + reference.amax()), "start {start:?}: diff {diff}");
        }
    }
}
