use hurst_core::expansion::build_expansion;
use hurst_core::montecarlo::{compare_densities, run_mc, Estimator, Histogram};
use hurst_core::McConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn config(h: f64, n: usize, reps: usize, seed: u64) -> McConfig {
    McConfig {
        h,
        n,
        reps,
        seed,
        ..McConfig::default()
    }
}

#[test]
fn report_is_identical_across_thread_counts() {
    let cfg = config(0.3, 48, 4_001, 17);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_mc(&cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
}

#[test]
fn small_runs_account_for_all_mass() {
    for (h, n) in [(0.1, 4), (0.5, 8), (0.95, 16)] {
        let r = run_mc(&config(h, n, 100, 1)).unwrap();
        let total = r.atom0 + r.atom1 + r.overflow_low + r.overflow_high + r.hist.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12, "H={h}: {total}");
        let d = r.distances;
        assert!(d.l1_normal >= 0.0 && d.l1_expansion >= 0.0 && d.ks_normal >= 0.0 && d.ks_expansion >= 0.0);
        assert_eq!(r.density_csv().lines().count(), r.hist.len() + 1);
        assert!(r.svg().starts_with("<svg"));
    }
}

#[test]
fn atoms_shrink_as_n_doubles() {
    for h in [0.3, 0.5] {
        let mass = |n| {
            let r = run_mc(&McConfig {
                variants: vec![Estimator::Plain],
                ..config(h, n, 100_000, 2)
            })
            .unwrap();
            let p = r.atom0 + r.atom1;
            (p, (p * (1.0 - p) / 1e5).sqrt())
        };
        let mut prev = mass(8);
        for n in [16, 32] {
            let next = mass(n);
            let se = (prev.1.powi(2) + next.1.powi(2)).sqrt();
            assert!(prev.0 - next.0 > 2.0 * se, "H={h} n={n}: {prev:?} -> {next:?}");
            prev = next;
        }
    }
}

#[test]
fn normal_samples_give_vanishing_normal_distance() {
    let m = build_expansion(0.5, 1e-10).unwrap();
    let reps = 2_000_000;
    let z_range = 5.0 * m.v.sqrt();
    let mut hist = Histogram::new(81, z_range, reps, -1e9, 1e9);
    let normal = Normal::new(0.0, m.v.sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..reps {
        hist.add(normal.sample(&mut rng));
    }
    let d = compare_densities(&hist, &m, 64).unwrap();
    assert!(d.l1_normal < 0.01, "{d:?}");
    assert!(d.ks_normal < 0.002, "{d:?}");
    assert!(d.l1_normal < d.l1_expansion);
}

/// Raw third moment of `√n(Ĥ − H)` against `n^{−1/2}(15a₃v³ + 3a₁v²)`.
#[test]
fn third_moment_matches_the_expansion_at_n_64() {
    let r = run_mc(&McConfig {
        variants: vec![Estimator::Plain],
        ..config(0.5, 64, 1_000_000, 7)
    })
    .unwrap();
    let plain = r.variant(Estimator::Plain).unwrap();
    let m = build_expansion(0.5, 1e-10).unwrap();
    let predicted = (15.0 * m.a3 * m.v.powi(3) + 3.0 * m.a1 * m.v.powi(2)) / 8.0;
    let (got, se) = (plain.sample.third_moment, plain.sample.third_moment_se);
    println!(
        "third moment: clamped {got:.5} ± {se:.5}, unclamped {:.5} ± {:.5}, predicted {predicted:.5}",
        r.unclamped.third_moment, r.unclamped.third_moment_se
    );
    assert!((got - predicted).abs() < 4.0 * se, "{got} ± {se} vs {predicted}");
}
