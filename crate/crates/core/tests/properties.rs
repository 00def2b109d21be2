//! Invariants over randomized inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use infomech::bayes::{entropy_conservation_audit, fisher_conservation_audit};
use infomech::estimators::{gauge_pde_residual, grid_entropy, info_state, EstimatorBudget};
use infomech::heatflow::gaussian_smooth;
use infomech::landscape::{Mode, ModeSet};
use infomech::spectral::{projected_statistic, SpectralFilter};
use infomech::suite::random_conjugate_model;
use infomech::{discretize, GaussianComponent, GaussianMixture, GridDensity, GridSpec};

fn bimodal(sep: f64, var: f64, w: f64) -> GaussianMixture {
    GaussianMixture::from_parts(
        vec![w, 1.0 - w],
        vec![vec![-sep / 2.0], vec![sep / 2.0]],
        vec![vec![vec![var]], vec![vec![var]]],
    )
    .unwrap()
}

fn grid(sep: f64, var: f64, w: f64) -> GridDensity {
    discretize(&bimodal(sep, var, w), &GridSpec::cube(1, 512, 24.0).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalization_ignores_positive_scale(c in 1e-6f64..1e6, sep in 0.0f64..6.0) {
        let d = grid(sep, 1.0, 0.5);
        let scaled: Vec<f64> = d.values().iter().map(|v| v * c).collect();
        let e = GridDensity::new(d.spec().clone(), scaled).unwrap().normalize().unwrap();
        for (a, b) in d.values().iter().zip(e.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn gaussian_potential_is_nonnegative_and_zero_when_isotropic(
        v in prop::collection::vec(0.05f64..20.0, 1..4), s in 0.1f64..5.0
    ) {
        let aniso = GaussianComponent::diagonal(vec![0.0; v.len()], &v).unwrap();
        let budget = EstimatorBudget::default();
        prop_assert!(info_state(&aniso, &budget).unwrap().phi >= -1e-12);
        let iso = GaussianComponent::isotropic(v.len(), s).unwrap();
        prop_assert!(info_state(&iso, &budget).unwrap().phi.abs() < 1e-12);
    }

    #[test]
    fn conjugate_audits_balance(seed in any::<u64>(), index in 0u64..1000) {
        let m = random_conjugate_model(seed, index).unwrap();
        prop_assert!(entropy_conservation_audit(&m).unwrap().residual.abs() <= 1e-10);
        prop_assert!(fisher_conservation_audit(&m).unwrap().residual.abs() <= 1e-10);
    }

    #[test]
    fn smoothing_is_a_semigroup_and_raises_entropy(s in 0.01f64..3.0, t in 0.01f64..3.0, sep in 0.0f64..6.0) {
        let d = grid(sep, 0.7, 0.4);
        let two = gaussian_smooth(&gaussian_smooth(&d, s).unwrap(), t).unwrap();
        let one = gaussian_smooth(&d, s + t).unwrap();
        let sup = two.values().iter().zip(one.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(sup < 1e-10, "sup {}", sup);
        prop_assert!(grid_entropy(&one) > grid_entropy(&d));
    }

    #[test]
    fn potential_is_scale_invariant(a in 0.05f64..20.0, sep in 0.0f64..8.0, w in 0.1f64..0.9) {
        let m = bimodal(sep, 0.8, w);
        let budget = EstimatorBudget { quad_rel_tol: 1e-12, ..EstimatorBudget::default() };
        let p = info_state(&m, &budget).unwrap().phi;
        let q = info_state(&m.rescale(a).unwrap(), &budget).unwrap().phi;
        prop_assert!((p - q).abs() < 1e-8, "{} vs {}", p, q);
    }

    #[test]
    fn potential_solves_gauge_equation(h in -5.0f64..5.0, j in 0.01f64..100.0, n in 1usize..6) {
        prop_assert!(gauge_pde_residual(h, j, n, 1e-4).unwrap() <= 1e-6);
    }

    #[test]
    fn zeroth_projection_is_entropy(sep in 0.0f64..8.0, var in 0.3f64..2.0, w in 0.1f64..0.9) {
        let d = grid(sep, var, w);
        let m0 = projected_statistic(&d, &SpectralFilter::new(0).unwrap()).unwrap();
        prop_assert!((m0 - grid_entropy(&d)).abs() <= 1e-9);
    }

    #[test]
    fn equal_wells_count_as_equal_modes(k in 1usize..12, curvature in 1.0f64..50.0) {
        let modes = (0..k)
            .map(|i| Mode::new(vec![i as f64], -1.0, &DMatrix::from_element(1, 1, curvature)))
            .collect();
        let set = ModeSet::new(modes, 200.0, 0.01, 0.01).unwrap();
        prop_assert_eq!(set.effective_count, k);
        for w in &set.weights {
            prop_assert!((w - 1.0 / k as f64).abs() < 1e-12);
        }
    }
}
