use proptest::prelude::*;

use hip_core::elliptic::Conductivity;
use hip_core::forward::{differential, Exponent, ForwardModel, LinearizationBundle};
use hip_core::inversion::{gauss_newton_reconstruct, linear_invert, relative_error, InversionOptions};
use hip_core::mesh::{Grid, ScalarField};
use hip_core::presets::{bump, BoundaryPreset, SigmaPreset};
use hip_core::stability::{
    beta_of, linear_stability_sweep, plan_exponents, plan_exponents_with, plan_holds, validate_plan, PlanOptions,
    SweepOptions,
};

fn bump_bundle(n: usize, p: f64) -> LinearizationBundle {
    let g = Grid::new(n).unwrap();
    LinearizationBundle::new(
        SigmaPreset::standard_bump().build(g).unwrap(),
        &BoundaryPreset::LinearX.field(g),
        Exponent::new(p).unwrap(),
    )
    .unwrap()
}

#[test]
fn linear_round_trip_improves_as_regularization_vanishes() {
    let b = bump_bundle(64, 0.5);
    let g = b.sigma0().grid();
    let truth = bump(g, 0.1, 0.45, 0.5, 0.02).with_zero_boundary();
    let data = differential(&b, &truth).unwrap();
    let errors: Vec<f64> = [1e-4, 1e-6, 1e-8]
        .iter()
        .map(|&reg_lambda| {
            let opts = InversionOptions { reg_lambda, ..InversionOptions::default() };
            relative_error(&linear_invert(&b, &data, &opts).unwrap().h, &truth).unwrap()
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    assert!(errors[2] <= 5e-2, "{errors:?}");
}

#[test]
fn gauss_newton_misfit_never_increases() {
    let g = Grid::new(32).unwrap();
    let truth = SigmaPreset::standard_bump().build(g).unwrap();
    let model = ForwardModel::new(BoundaryPreset::Affine { a: 1.0, b: 0.3 }.field(g), Exponent::new(0.75).unwrap());
    let data = model.apply(&truth).unwrap();
    let opts = InversionOptions { damping: 0.5, ..InversionOptions::default() };
    let rec =
        gauss_newton_reconstruct(&Conductivity::constant(g, 1.0).unwrap(), &model, &data, &opts, Some(truth.field()))
            .unwrap();
    assert!(rec.log.len() > 2);
    assert!(rec.log.windows(2).all(|w| w[1].rel_misfit <= w[0].rel_misfit));
    assert!(rec.log.iter().all(|r| r.rel_error.is_some()));
}

#[test]
fn elliptic_sweep_constant_is_stable_under_refinement() {
    let plan = plan_exponents(0.5, Exponent::new(0.5).unwrap(), 2).unwrap();
    assert_eq!(plan.alpha1, 1.0);
    let c: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| {
            let opts = SweepOptions::from_plan(&plan, 16, 5, 6);
            linear_stability_sweep(&bump_bundle(n, 0.5), &opts).unwrap().c_star
        })
        .collect();
    assert!((c[1] / c[0] - 1.0).abs() <= 0.3, "{c:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn searched_plans_validate(theta in 1e-6f64..0.999, p in 0.01f64..=1.0) {
        let plan = plan_exponents(theta, Exponent::new(p).unwrap(), 2).unwrap();
        prop_assert!(plan_holds(&validate_plan(&plan)));
        prop_assert!(plan.mu < plan.beta.min(0.5));
        let back = hip_core::stability::ExponentPlan::from_key_values(&plan.to_key_values()).unwrap();
        prop_assert_eq!(back, plan);
    }

    #[test]
    fn beta_lies_between_mu_and_one(mu in 0.01f64..0.99, mu3 in 0.0f64..=1.0) {
        let beta = beta_of(mu, mu3).unwrap();
        prop_assert!(beta >= mu - 1e-15 && beta <= 1.0 + 1e-15);
    }

    #[test]
    fn admissible_overrides_validate(c in 0.05f64..0.7, theta in 0.05f64..0.95) {
        let opts = PlanOptions { alpha1: Some(c), ..PlanOptions::default() };
        let plan = plan_exponents_with(theta, Exponent::new(1.0).unwrap(), opts).unwrap();
        prop_assert!(plan_holds(&validate_plan(&plan)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn differential_is_homogeneous(scale in -5.0f64..5.0, x0 in 0.3f64..0.7, y0 in 0.3f64..0.7) {
        let b = bump_bundle(16, 0.5);
        let g = b.sigma0().grid();
        let h = bump(g, 1.0, x0, y0, 0.03).with_zero_boundary();
        let lhs = differential(&b, &h.scale(scale)).unwrap();
        let rhs = differential(&b, &h).unwrap().scale(scale);
        let tol = 1e-9 * rhs.max_abs().max(1e-12);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= tol);
    }

    #[test]
    fn constant_conductivity_data_is_constant(c in 0.2f64..5.0, p in 0.05f64..=1.0) {
        let g = Grid::new(12).unwrap();
        let model = ForwardModel::new(BoundaryPreset::LinearX.field(g), Exponent::new(p).unwrap());
        let data = model.apply(&Conductivity::constant(g, c).unwrap()).unwrap();
        let expect = ScalarField::constant(g, c);
        prop_assert!(data.sub(&expect).unwrap().max_abs() <= 1e-8 * c);
    }
}
