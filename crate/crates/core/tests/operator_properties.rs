mod common;

use std::sync::OnceLock;

use common::{admissible, families, fixed_point, len, point, tiny_coupled};
use proptest::prelude::*;
use vgnep::space::PrimalDualPoint;
use vgnep::splitting::DualUpdate;
use vgnep::LowerGame;

struct Family {
    name: &'static str,
    game: LowerGame,
    range: f64,
    star: PrimalDualPoint,
}

fn data() -> &'static [Family] {
    static DATA: OnceLock<Vec<Family>> = OnceLock::new();
    DATA.get_or_init(|| {
        families()
            .into_iter()
            .map(|(name, game, range)| {
                let star = fixed_point(&game);
                Family { name, game, range, star }
            })
            .collect()
    })
}

/// (family index, flat point, second flat point, α).
fn sample() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, f64)> {
    (0..3usize, 0.05..0.95f64).prop_flat_map(|(k, alpha)| {
        let f = &data()[k];
        let n = len(&f.game);
        let r = f.range;
        (
            Just(k),
            prop::collection::vec(-r..r, n),
            prop::collection::vec(-r..r, n),
            Just(alpha),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fbf_is_quasi_nonexpansive((k, a, _b, alpha) in sample()) {
        let f = &data()[k];
        let ctx = admissible(&f.game, alpha);
        let xi = point(&f.game, &a);
        let lhs = ctx.t_fbf(&xi).unwrap().distance(&f.star).unwrap();
        let rhs = xi.distance(&f.star).unwrap();
        prop_assert!(lhs <= rhs + 1e-10, "{}: {lhs} > {rhs}", f.name);
    }

    #[test]
    fn averaged_operator_attracts((k, a, _b, alpha) in sample()) {
        let f = &data()[k];
        let ctx = admissible(&f.game, alpha);
        let xi = point(&f.game, &a);
        let t = ctx.t_alpha(&xi).unwrap();
        let lhs = t.distance(&f.star).unwrap().powi(2);
        let rhs = xi.distance(&f.star).unwrap().powi(2)
            - (1.0 - alpha) / alpha * t.distance(&xi).unwrap().powi(2);
        prop_assert!(lhs <= rhs + 1e-8, "{}: {lhs} > {rhs}", f.name);
    }

    #[test]
    fn operator_a_is_monotone((k, a, b, _alpha) in sample()) {
        let f = &data()[k];
        let ctx = admissible(&f.game, 0.5);
        let (xi, eta) = (point(&f.game, &a), point(&f.game, &b));
        let da = ctx.operator_a(&xi).unwrap().sub(&ctx.operator_a(&eta).unwrap()).unwrap();
        prop_assert!(da.inner(&xi.sub(&eta).unwrap()).unwrap() >= -1e-10);
    }

    #[test]
    fn expanded_step_matches((k, a, _b, alpha) in sample(), literal in any::<bool>()) {
        let f = &data()[k];
        let mode = if literal { DualUpdate::Literal } else { DualUpdate::Corrected };
        let ctx = admissible(&f.game, alpha).with_dual_update(mode);
        let xi = point(&f.game, &a);
        let d = ctx.expanded_step(&xi).unwrap().distance(&ctx.safeguarded_t(&xi).unwrap()).unwrap();
        prop_assert!(d <= 1e-12, "{}: {d:e}", f.name);
    }

    #[test]
    fn fix_residual_is_lipschitz((k, a, b, alpha) in sample()) {
        let f = &data()[k];
        let ctx = admissible(&f.game, alpha);
        let xi = point(&f.game, &a);
        let delta = point(&f.game, &b).scaled(1e-3 / f.range);
        let moved = PrimalDualPoint::axpy(1.0, &delta, &xi).unwrap();
        let change = (ctx.fix_residual(&moved).unwrap() - ctx.fix_residual(&xi).unwrap()).abs();
        let bound = (2.0 + ctx.gamma() * ctx.kappa_a()) * delta.norm();
        prop_assert!(change <= bound + 1e-12, "{change} > {bound}");
    }
}

#[test]
fn fixed_points_are_shared() {
    for f in data() {
        for alpha in [0.25, 0.5, 0.75] {
            let ctx = admissible(&f.game, alpha);
            assert!(ctx.fix_residual(&f.star).unwrap() < 1e-10, "{}", f.name);
            assert!(ctx.t_fb(&f.star).unwrap().distance(&f.star).unwrap() < 1e-8, "{}", f.name);
            assert!(ctx.t_fbf(&f.star).unwrap().distance(&f.star).unwrap() < 1e-10, "{}", f.name);
            assert!(ctx.safeguarded_t(&f.star).unwrap().distance(&f.star).unwrap() < 1e-10);
        }
    }
}

#[test]
fn residual_is_positive_off_the_fixed_set() {
    let game = tiny_coupled();
    let ctx = admissible(&game, 0.5);
    let star = &data()[0].star;
    for k in 0..3 {
        let mut flat: Vec<f64> = star.x.as_slice().iter().chain(&star.u).copied().collect();
        flat[k] += 1.0;
        let off = point(&game, &flat);
        assert!(ctx.fix_residual(&off).unwrap() > 1e-3);
    }
}

#[test]
fn tiny_fixed_point_has_active_coupling() {
    let star = &data()[0].star;
    let sum: f64 = star.x.as_slice().iter().sum();
    assert!((sum - 0.5).abs() < 1e-10);
    assert!(star.u[0] > 0.0);
}
