use hurst_core::coefficients::compute_kappa3;
use hurst_core::estimator::{
    apply_correction, estimate_h, estimate_h_corrected, ingest_series, CorrectionTable, TABLE_NODES,
};
use hurst_core::expansion::{build_expansion, Variant};
use hurst_core::kernels::{
    a_n_diagnostic, chain_sum, decay_constant, AnCounts, ChainSpec, KernelEvaluator,
};
use hurst_core::numeric::adaptive_simpson;
use hurst_core::{ExpansionCoefficients, HurstError, Kernel, Truncation};
use proptest::prelude::*;

fn h_grid_17() -> Vec<f64> {
    (0..17).map(|i| 0.1 + 0.05 * i as f64).collect()
}

proptest! {
    #[test]
    fn kernels_are_even(h in 0.01f64..0.99, j in -100i64..=100) {
        let e = KernelEvaluator::new(h).unwrap();
        prop_assert_eq!(e.rho_hat(j), e.rho_hat(-j));
        prop_assert_eq!(e.rho_tilde(j), e.rho_tilde(-j));
    }

    #[test]
    fn q_is_odd(z in -20.0f64..20.0) {
        let m = build_expansion(0.37, 1e-10).unwrap();
        prop_assert_eq!(m.q(-z), -m.q(z));
        prop_assert_eq!(m.q_z(-z), -m.q_z(z));
    }

    #[test]
    fn estimate_is_scale_free(
        samples in prop::collection::vec(-10.0f64..10.0, 2..40).prop_map(|mut v| {
            if v.len() % 2 == 0 { v.pop(); }
            v
        }).prop_filter("long enough", |v| v.len() >= 5),
    ) {
        let Ok(base) = estimate_h(&samples) else { return Ok(()); };
        for sigma in [1e-6, 1.0, 1e6] {
            let scaled: Vec<f64> = samples.iter().map(|x| x * sigma).collect();
            let r = estimate_h(&scaled).unwrap();
            prop_assert!((r.h_raw - base.h_raw).abs() <= 1e-12 * (1.0 + base.h_raw.abs()));
        }
    }

    #[test]
    fn clamp_is_consistent(samples in prop::collection::vec(-1e3f64..1e3, 5..=5).prop_flat_map(|head| {
        prop::collection::vec(-1e3f64..1e3, 0..30).prop_map(move |tail| {
            let mut v = head.clone();
            v.extend(tail);
            if v.len() % 2 == 0 { v.pop(); }
            v
        })
    })) {
        let Ok(r) = estimate_h(&samples) else { return Ok(()); };
        prop_assert!((0.0..=1.0).contains(&r.h_hat));
        prop_assert_eq!(r.clamped, !(0.0..=1.0).contains(&r.h_raw));
        prop_assert_eq!(r.h_hat, r.h_raw.clamp(0.0, 1.0));
    }
}

#[test]
fn rho_hat_at_zero() {
    for i in 1..100 {
        let h = i as f64 / 100.0;
        let r = KernelEvaluator::new(h).unwrap().rho_hat(0);
        assert!((r - (4.0 - 2f64.powf(2.0 * h))).abs() <= 4.0 * f64::EPSILON, "H={h}");
    }
}

#[test]
fn kernels_sum_to_zero() {
    for h in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let e = KernelEvaluator::new(h).unwrap();
        for big_n in [1000i64, 2000, 4000] {
            let bound = 10.0 * (big_n as f64).powf(2.0 * h - 3.0);
            let hat: f64 = (-big_n..=big_n).map(|j| e.rho_hat(j)).sum();
            let tilde: f64 = (-big_n..=big_n).map(|j| e.rho_tilde(j)).sum();
            assert!(hat.abs() < bound, "H={h} N={big_n}: {hat}");
            assert!(tilde.abs() < bound, "H={h} N={big_n}: {tilde}");
        }
    }
}

#[test]
fn kernels_decay_at_the_stated_rate() {
    for h in [0.2, 0.7, 0.9] {
        let e = KernelEvaluator::new(h).unwrap();
        let j = 10_000i64;
        let scale = (j as f64).powf(4.0 - 2.0 * h);
        for k in [Kernel::RhoHat, Kernel::RhoTilde] {
            let c = decay_constant(h, k).unwrap();
            let got = e.eval(k, j) * scale;
            assert!((got / c - 1.0).abs() < 0.01, "H={h} {k:?}: {got} vs {c}");
        }
    }
}

#[test]
fn lattice_sums_approach_the_chain_limit_monotonically() {
    for h in [0.3, 0.5, 0.7] {
        for k in [2usize, 3] {
            let spec = if k == 2 {
                ChainSpec::sum_of_squares(Kernel::RhoHat)
            } else {
                ChainSpec::kappa_1_11()
            };
            let limit = chain_sum(h, &spec, &Truncation::with_tol(1e-12)).unwrap().value;
            let errs: Vec<f64> = [256usize, 512, 1024, 2048]
                .iter()
                .map(|&n| {
                    let a = a_n_diagnostic(h, &vec![Kernel::RhoHat; k], &AnCounts::uniform(n, k)).unwrap();
                    (a - limit).abs()
                })
                .collect();
            for w in errs.windows(2) {
                assert!(w[1] <= 1.05 * w[0], "H={h} k={k}: {errs:?}");
            }
        }
    }
}

#[test]
fn coefficient_invariants_on_17_points() {
    let bound = 1.5 - 2f64.sqrt();
    for h in h_grid_17() {
        let c = ExpansionCoefficients::compute(h, 1e-10).unwrap();
        assert!(c.g_inf > 0.0, "H={h}");
        assert!(c.g_inf >= bound * c.sigma11, "H={h}: {} < {}", c.g_inf, bound * c.sigma11);
        assert_eq!(c.sigma22, c.sigma11 / 2.0);
        assert_eq!(c.kappa3.k2_22, c.kappa3.k1_11 / 4.0);
        assert_eq!(c.kappa4.k22_22, c.kappa4.k11_11 / 8.0);
        let t = c.t_mat;
        assert!(t[0][0] > 0.0 && t[0][0] * t[1][1] - t[0][1] * t[1][0] > 0.0, "H={h}: {t:?}");
    }
}

#[test]
fn halving_tol_stays_within_the_reported_error() {
    for h in [0.2, 0.5, 0.8, 0.9] {
        let coarse = ExpansionCoefficients::compute(h, 1e-7).unwrap();
        let fine = ExpansionCoefficients::compute(h, 5e-8).unwrap();
        for (a, b) in coarse.components().iter().zip(fine.components()) {
            let rel = (a - b).abs() / a.abs().max(1.0);
            assert!(rel <= coarse.tol.max(f64::EPSILON * 8.0), "H={h}: {a} vs {b}, reported {}", coarse.tol);
        }
    }
}

#[test]
fn tolerance_cap_is_reported() {
    let t = Truncation {
        tol: 1e-14,
        start_radius: 64,
        max_radius: 64,
    };
    let err = ExpansionCoefficients::compute_with(0.9, &t).unwrap_err();
    assert!(matches!(err, HurstError::ToleranceNotAchieved { .. }), "{err}");
    assert!(compute_kappa3(1.0, 1e-10).is_err());
}

fn quad<F: Fn(f64) -> f64>(f: F, v: f64) -> f64 {
    let r = 12.0 * v.sqrt();
    adaptive_simpson(f, -r, r, 1e-12)
}

#[test]
fn densities_integrate_to_one() {
    for h in [0.2, 0.5, 0.8] {
        let m = build_expansion(h, 1e-10).unwrap();
        for n in [16u64, 64, 256] {
            let plain = quad(|z| m.density_pn(n, z).unwrap(), m.v);
            assert!((plain - 1.0).abs() < 1e-10, "H={h} n={n}: {plain}");
            for b in [m.b_star, m.b_star_star, 1.3] {
                let shifted = quad(|z| m.density_pn_b(n, b, z).unwrap(), m.v);
                assert!((shifted - 1.0).abs() < 1e-10, "H={h} n={n} b={b}: {shifted}");
            }
        }
    }
}

#[test]
fn corrections_centre_mean_and_median() {
    for h in [0.2, 0.5, 0.8] {
        let m = build_expansion(h, 1e-10).unwrap();
        for n in [16u64, 64, 256] {
            let mean = quad(|z| z * m.density_pn_b(n, m.b_star, z).unwrap(), m.v);
            assert!(mean.abs() < 1e-9, "H={h} n={n}: mean {mean}");
            let cdf0 = m.cdf_pn(n, 0.0, Variant::Modified(m.b_star_star)).unwrap();
            assert!((cdf0 - 0.5).abs() < 1e-9, "H={h} n={n}: cdf {cdf0}");
            let r = 12.0 * m.v.sqrt();
            let lower = adaptive_simpson(|z| m.density_pn_b(n, m.b_star_star, z).unwrap(), -r, 0.0, 1e-13);
            assert!((lower - 0.5).abs() < 1e-9, "H={h} n={n}: quadrature {lower}");
        }
    }
}

/// On `(0, ∞)`, `pₙ − φ = n^{−1/2} φ(z) z (a₃z² + a₁)`, which has a positive
/// root exactly when `a₁a₃ < 0`.
#[test]
fn density_gap_sign_changes() {
    for h in h_grid_17() {
        let m = build_expansion(h, 1e-10).unwrap();
        let n = 64u64;
        let top = 8.0 * m.v.sqrt();
        let mut changes = 0;
        let mut prev = 0.0f64;
        for i in 1..=20_000 {
            let z = top * i as f64 / 20_000.0;
            let d = m.density_pn(n, z).unwrap() - m.phi(z);
            if d != 0.0 && prev != 0.0 && d.signum() != prev.signum() {
                changes += 1;
            }
            if d != 0.0 {
                prev = d;
            }
        }
        let root = (-m.a1 / m.a3).sqrt();
        let expected = if m.a1 * m.a3 < 0.0 && root < top { 1 } else { 0 };
        assert_eq!(changes, expected, "H={h}: a3={} a1={}", m.a3, m.a1);
    }
    let half = build_expansion(0.5, 1e-10).unwrap();
    assert!(half.a3 < 0.0 && half.a1 > 0.0);
}

#[test]
fn correction_table_interpolates_within_budget() {
    let table = CorrectionTable::shared().unwrap();
    assert_eq!(table.nodes.len(), TABLE_NODES);
    for h in [0.123, 0.287, 0.5123, 0.66, 0.871] {
        let m = build_expansion(h, 1e-10).unwrap();
        assert!((table.b_star_at(h) - m.b_star).abs() < 1e-4, "b* at {h}");
        assert!((table.b_star_star_at(h) - m.b_star_star).abs() < 1e-4, "b** at {h}");
    }
}

#[test]
fn zero_correction_is_the_plain_estimate() {
    let samples: Vec<f64> = (0..65).map(|i| ((i * 7919) % 31) as f64 / 7.0).collect();
    let plain = estimate_h(&samples).unwrap();
    let corrected = estimate_h_corrected(&samples, &|_h: f64| 0.0).unwrap();
    assert_eq!(corrected.h_b, Some(plain.h_hat));
    assert_eq!(apply_correction(&plain, &|_h: f64| 0.0).unwrap(), plain.h_hat);
}

#[test]
fn ingestion_row_counts_and_errors() {
    let rows = |k: usize| (0..k).map(|i| format!("{},{}\n", i, (i as f64).sin())).collect::<String>();
    assert_eq!(ingest_series(rows(129).as_bytes()).unwrap().len(), 129);
    assert_eq!(ingest_series(rows(130).as_bytes()).unwrap().len(), 129);
    assert_eq!(estimate_h(&ingest_series(rows(130).as_bytes()).unwrap()).unwrap().n, 64);
    let headed = format!("t,B\n{}", rows(9));
    assert_eq!(ingest_series(headed.as_bytes()).unwrap().len(), 9);

    let bad = "0,1\n1,2\n2,x\n3,4\n4,5\n";
    match ingest_series(bad.as_bytes()).unwrap_err() {
        HurstError::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
        e => panic!("unexpected {e}"),
    }
    assert!(matches!(ingest_series(rows(4).as_bytes()), Err(HurstError::TooShort(_))));
}
