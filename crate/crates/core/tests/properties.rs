mod oracles;

use mixlasso::harness::config::ExperimentConfig;
use mixlasso::harness::trial::{draw_trial, TrialContext, TrialDraw};
use mixlasso::lasso::{self, SolverOptions};
use mixlasso::linalg::{self, Matrix};
use mixlasso::proxy::{center_combination, proxy_center_combination, proxy_discrepancy};
use mixlasso::theory::constants::{compute_constants, theorem_rhs, ProblemSize};
use mixlasso::theory::events::{check_events, decomposition_norms};
use mixlasso::theory::TheoremParams;
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

fn draw(seed: u64, sigma_frak: f64, support: &str) -> TrialDraw {
    let cfg = ExperimentConfig::reference()
        .with_overrides(&[
            "mixture.n=40".to_string(),
            "mixture.p=150".to_string(),
            "mixture.k=10".to_string(),
            "mixture.s_star=4".to_string(),
            format!("truth.s={}", if support == "uniform" { 6 } else { 4 }),
            format!("truth.support={support}"),
            format!("mixture.sigma_frak={sigma_frak}"),
            "centers.source=gaussian".to_string(),
            "centers.redraw_per_trial=true".to_string(),
        ])
        .unwrap();
    let ctx = TrialContext::new(&cfg).unwrap();
    draw_trial(&ctx, ctx.trial_seed(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_norm_is_transpose_invariant(m in matrix(1..12, 1..12)) {
        let a = linalg::operator_norm(&m).unwrap();
        let b = linalg::operator_norm(&m.transpose()).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        prop_assert!(a + 1e-9 >= m.columns().map(linalg::norm2).fold(0.0, f64::max));
        prop_assert!(a <= m.frobenius() + 1e-9);
    }

    #[test]
    fn orthonormal_columns_have_zero_gram_deviation(
        (n, k) in (4usize..20).prop_flat_map(|n| (Just(n), 1..=n)),
        seed in any::<u64>(),
    ) {
        let mut r = mixlasso::rng::stream(seed);
        let c = mixlasso::mixture::orthonormal_centers(n, k, &mut r).unwrap();
        prop_assert!(linalg::gram_deviation(&c.centers).unwrap() <= 1e-10);
    }

    #[test]
    fn coherence_ignores_column_scaling(m in matrix(3..10, 2..8), scales in prop::collection::vec(0.1f64..10.0, 8)) {
        prop_assume!(m.columns().all(|c| linalg::norm2(c) > 1e-3));
        let mut scaled = m.clone();
        for (j, &f) in scales.iter().take(m.cols()).enumerate() {
            scaled.scaled_column(j, f);
        }
        let a = linalg::coherence(&m).unwrap();
        let b = linalg::coherence(&scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn rhs_is_monotone(
        s_star in 1usize..20, r in 0.0f64..1.0, lambda in 0.0f64..5.0, delta in 0.0f64..5.0,
        ce in 0.0f64..5.0, se in 0.0f64..5.0, bump in 0.0f64..1.0,
    ) {
        let base = theorem_rhs(s_star, r, lambda, delta, ce, se);
        prop_assert!(base >= 0.0);
        prop_assert!(theorem_rhs(s_star, r, lambda + bump, delta, ce, se) >= base);
        prop_assert!(theorem_rhs(s_star, r, lambda, delta + bump, ce, se) >= base);
        prop_assert!(theorem_rhs(s_star, r, lambda, delta, ce + bump, se) >= base);
        prop_assert!(theorem_rhs(s_star, r, lambda, delta, ce, se + bump) >= base);
        prop_assert!(theorem_rhs(s_star + 1, r, lambda, delta, ce, se) >= base);
    }

    #[test]
    fn delta_grows_with_cluster_spread(sf in 1e-6f64..1e-3, factor in 1.0f64..5.0) {
        let prm = TheoremParams::reference();
        let at = |sigma_frak| {
            let sz = ProblemSize { n: 200, p: 2000, s: 8, s_star: 8, sigma_frak };
            compute_constants(&sz, &prm).map(|k| k.delta_lower)
        };
        if let (Ok(a), Ok(b)) = (at(sf), at(sf * factor)) {
            prop_assert!(b >= a * (1.0 - 1e-12));
        }
    }

    #[test]
    fn proxy_preserves_cluster_sums(seed in 0u64..10_000, uniform in any::<bool>()) {
        let d = draw(seed, 1e-2, if uniform { "uniform" } else { "one_per_cluster" });
        let mut sums = std::collections::BTreeMap::<usize, f64>::new();
        for &j in &d.truth.support {
            *sums.entry(d.design.labels[j]).or_default() += d.truth.beta[j];
        }
        for (k, total) in sums {
            let rep = d.proxy.representative_of[&k];
            prop_assert!((d.proxy.beta_star[rep] - total).abs() <= 1e-12);
            prop_assert_eq!(d.design.labels[rep], k);
        }
        let a = center_combination(&d.centers, &d.design, &d.truth);
        let b = proxy_center_combination(&d.centers, &d.design, &d.proxy);
        prop_assert!(linalg::norm2(&linalg::sub(&a, &b)) <= 1e-10);
    }

    #[test]
    fn discrepancy_obeys_triangle_chain(seed in 0u64..10_000, sf in 0.0f64..0.05) {
        let d = draw(seed, sf, "uniform");
        let disc = proxy_discrepancy(&d.design.x, &d.truth.beta, &d.proxy.beta_star);
        let n = decomposition_norms(&d.centers, &d.design, &d.truth, &d.proxy);
        prop_assert!((disc - n.combined).abs() <= 1e-10 * (1.0 + disc));
        prop_assert!(disc <= n.a + n.b + n.a_star + n.b_star + 1e-12);
    }

    #[test]
    fn event_two_makes_compatibility_solvable(seed in 0u64..10_000, sf in 0.0f64..0.05) {
        let d = draw(seed, sf, "uniform");
        let rep = check_events(&d.centers, &d.design, &d.truth, &d.proxy, 0.3, &TheoremParams::reference());
        if rep.event_flags[1] {
            prop_assert!(rep.compatibility.is_some());
        }
    }

    #[test]
    fn orthonormal_lasso_is_soft_thresholding(
        (n, p) in (3usize..15).prop_flat_map(|n| (Just(n), 1..=n)),
        seed in any::<u64>(),
        lambda in 0.01f64..2.0,
    ) {
        let mut r = mixlasso::rng::stream(seed);
        let q = mixlasso::mixture::orthonormal_centers(n, p, &mut r).unwrap().centers;
        let y: Vec<f64> = (0..n).map(|i| ((seed >> (i % 60)) & 7) as f64 / 2.0 - 1.7).collect();
        let sol = lasso::solve(&q, &y, lambda, &SolverOptions::default()).unwrap();
        let proj = q.tr_matvec(&y);
        for (b, v) in sol.beta_hat.iter().zip(&proj) {
            prop_assert!((b - oracles::soft(*v, lambda)).abs() <= 1e-9);
        }
    }
}
