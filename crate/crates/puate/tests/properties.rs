use approx::assert_relative_eq;
use proptest::prelude::*;

use puate::casecontrol::{estimate_casecontrol, CaseControlData, CcNuisanceTable, CcScore};
use puate::censoring::{estimate_censoring, CensNuisanceTable, CensoringDataset};
use puate::crossfit::make_folds;
use puate::montecarlo::Histogram;
use puate::pu_nuisance::{density_ratio, g_from_observation};
use puate::regression::{fit_ols, DesignMatrix, FeatureMap, Matrix};
use puate::stats::{clip, mean, population_variance};
use puate::Method;

fn prob() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

prop_compose! {
    fn censoring_case(max_n: usize)(n in 4..max_n)(
        x in prop::collection::vec(-3.0..3.0f64, n),
        o in prop::collection::vec(any::<bool>(), n),
        y in prop::collection::vec(-10.0..10.0f64, n),
        mu_t in prop::collection::vec(-10.0..10.0f64, n),
        nu in prop::collection::vec(-10.0..10.0f64, n),
        pi1 in prop::collection::vec(prob(), n),
        g1 in prop::collection::vec(prob(), n),
        eps in 1e-4..0.2f64,
    ) -> (CensoringDataset, CensNuisanceTable) {
        let data = CensoringDataset::new(Matrix::from_column_slice(x.len(), 1, &x), o, y).unwrap();
        (data, CensNuisanceTable::from_values(mu_t, nu, pi1, g1, eps).unwrap())
    }
}

prop_compose! {
    fn casecontrol_case()(m in 2..40usize, l in 2..40usize)(
        xt in prop::collection::vec(-3.0..3.0f64, m),
        yt in prop::collection::vec(-10.0..10.0f64, m),
        xu in prop::collection::vec(-3.0..3.0f64, l),
        yu in prop::collection::vec(-10.0..10.0f64, l),
        t_mu in prop::collection::vec(-10.0..10.0f64, m),
        t_e in prop::collection::vec(prob(), m),
        u_mu_t in prop::collection::vec(-10.0..10.0f64, l),
        u_mu_u in prop::collection::vec(-10.0..10.0f64, l),
        u_e in prop::collection::vec(prob(), l),
        prior in 0.05..1.0f64,
    ) -> (CaseControlData, CcNuisanceTable) {
        let data = CaseControlData::new(
            Matrix::from_column_slice(xt.len(), 1, &xt),
            yt,
            Matrix::from_column_slice(xu.len(), 1, &xu),
            yu,
        )
        .unwrap();
        let nuis = CcNuisanceTable::from_values(t_mu, t_e, u_mu_t, u_mu_u, u_e, prior, 1e-3).unwrap();
        (data, nuis)
    }
}

proptest! {
    #[test]
    fn censoring_influence_mean_is_the_estimate((data, nuis) in censoring_case(60)) {
        for m in Method::ALL {
            let r = estimate_censoring(m, &data, &nuis, 0.9).unwrap();
            prop_assert!((mean(&r.influence) - r.tau_hat).abs() <= 1e-9 * (1.0 + r.tau_hat.abs()));
            prop_assert!(r.ci_lo <= r.tau_hat && r.tau_hat <= r.ci_hi);
        }
    }

    #[test]
    fn casecontrol_influence_mean_is_the_estimate((data, nuis) in casecontrol_case()) {
        for m in Method::ALL {
            for form in [CcScore::Derived, CcScore::Literal] {
                let r = estimate_casecontrol(m, &data, &nuis, form, 0.95).unwrap();
                prop_assert!((mean(&r.influence) - r.tau_hat).abs() <= 1e-9 * (1.0 + r.tau_hat.abs()));
                prop_assert!(r.ci_lo <= r.tau_hat && r.tau_hat <= r.ci_hi);
            }
        }
    }

    #[test]
    fn clipped_tables_stay_in_range(
        pi1 in prop::collection::vec(prob(), 1..30),
        eps in 1e-4..0.3f64,
    ) {
        let n = pi1.len();
        let g1: Vec<f64> = pi1.iter().map(|p| 1.0 - p).collect();
        let t = CensNuisanceTable::from_values(vec![0.0; n], vec![0.0; n], pi1.clone(), g1.clone(), eps).unwrap();
        for &v in t.pi1.iter().chain(&t.g1) {
            prop_assert!(v >= eps && v <= 1.0 - eps);
        }
        let moved = pi1.iter().chain(&g1).filter(|&&p| p < eps || p > 1.0 - eps).count();
        prop_assert_eq!(t.clip_count, moved);
    }

    #[test]
    fn clip_bounds(p in -2.0..2.0f64, lo in 0.0..0.4f64) {
        let (v, moved) = clip(p, lo, 1.0 - lo);
        prop_assert!((lo..=1.0 - lo).contains(&v));
        prop_assert_eq!(moved, v != p);
    }

    #[test]
    fn density_ratio_is_capped(e1 in 1e-9..1.0f64, prior in 0.01..1.0f64, eps in 1e-4..0.5f64) {
        let (r, capped) = density_ratio(e1, prior, eps);
        prop_assert!(r <= 1.0 / eps);
        if !capped {
            prop_assert!((r * e1 - prior).abs() <= 1e-12);
        }
    }

    #[test]
    fn propensity_pair_sums_to_one(pi1 in prob(), c in 0.01..1.0f64, eps in 1e-6..0.1f64) {
        let (g1, g0, _) = g_from_observation(pi1, c, eps);
        prop_assert!((g1 + g0 - 1.0).abs() <= 1e-15);
        prop_assert!(g1 >= eps && g1 <= 1.0 - eps);
    }

    #[test]
    fn folds_partition(n in 2..300usize, k in 2..10usize, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let f = make_folds(n, k, seed).unwrap();
        let mut seen = vec![0; n];
        for fold in 0..k {
            for i in f.members(fold) {
                seen[i] += 1;
            }
            prop_assert_eq!(f.members(fold).len() + f.complement(fold).len(), n);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = f.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn mse_decomposes(v in prop::collection::vec(-50.0..50.0f64, 1..200), tau0 in -5.0..5.0f64) {
        let mse = mean(&v.iter().map(|t| (t - tau0).powi(2)).collect::<Vec<_>>());
        let bias = mean(&v) - tau0;
        assert_relative_eq!(mse, bias * bias + population_variance(&v), max_relative = 1e-9, epsilon = 1e-9);
    }

    #[test]
    fn histogram_counts_all(v in prop::collection::vec(-1e3..1e3f64, 1..300), bins in 1..40usize) {
        let h = Histogram::from_values(&v, bins);
        prop_assert_eq!(h.counts.iter().sum::<usize>(), v.len());
        prop_assert_eq!(h.edges.len(), h.counts.len() + 1);
    }

    #[test]
    fn ols_residuals_are_orthogonal(
        rows in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -10.0..10.0f64), 8..60),
    ) {
        let n = rows.len();
        let x = Matrix::from_fn(n, 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let design = DesignMatrix::from_covariates(&x).unwrap();
        let fit = fit_ols(&design, &y, 0.0).unwrap();
        let z = design.values();
        for j in 0..z.ncols() {
            let dot: f64 = (0..n)
                .map(|i| {
                    let pred: f64 = (0..z.ncols()).map(|k| z[(i, k)] * fit.coefficients[k]).sum();
                    z[(i, j)] * (y[i] - pred)
                })
                .sum();
            let scale: f64 = (0..n).map(|i| z[(i, j)].abs() * y[i].abs()).sum::<f64>() + 1.0;
            prop_assert!(dot.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn feature_dimension_matches_expansion(p in 1..6usize, degree in 1..=3u8, inter in any::<bool>()) {
        let map = FeatureMap::Polynomial { degree, interactions: inter };
        let x = Matrix::from_fn(3, p, |i, j| (i + j) as f64);
        prop_assert_eq!(map.expand(&x).ncols(), map.output_dim(p));
    }
}
