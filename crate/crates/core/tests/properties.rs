use exactq_core::coupling::{build_coupling, check_coupled, sample_backward_via_coupling};
use exactq_core::oracles::{ks_distance, lindley_from_steps, mean_ci};
use exactq_core::partition::{threshold, RecordLaw};
use exactq_core::proposals::Tally;
use exactq_core::sampler::check_identities;
use exactq_core::{AlgorithmParams, BetaMode, CenteredPareto, FiniteLattice, LatticeLaw, ParetoLattice, Sampler};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy() -> (FiniteLattice, AlgorithmParams) {
    let law = FiniteLattice::new(1.0, 0, &[0.4, 0.4, 0.0, 0.2]).unwrap();
    let p = AlgorithmParams::new(1.25, 2.0, 1.1, 5.0, 4.0, 0.45, BetaMode::FiniteVariance).unwrap();
    (law, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pareto_tail_is_monotone(ap in 2.1f64..8.0, c in 0.2f64..20.0, t in -5.0f64..500.0, dt in 0.0f64..50.0) {
        let law = ParetoLattice::lattice_pareto(ap, c, 0.1).unwrap();
        let (a, b) = (law.tail(t), law.tail(t + dt));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn finite_lattice_is_centered(ps in prop::collection::vec(0.01f64..1.0, 2..8), span in 0.1f64..3.0) {
        let total: f64 = ps.iter().sum();
        let probs: Vec<f64> = ps.iter().map(|p| p / total).collect();
        let law = FiniteLattice::new(span, -2, &probs).unwrap();
        let mean: f64 = law.atoms().map(|(v, p)| v * p).sum();
        prop_assert!(mean.abs() < 1e-9 * span * probs.len() as f64);
    }

    #[test]
    fn lindley_equals_reflected_walk(ys in prop::collection::vec(-3.0f64..3.0, 0..200)) {
        let w = lindley_from_steps(&ys);
        let (mut s, mut lo) = (0.0f64, 0.0f64);
        for (y, wn) in ys.iter().zip(&w) {
            s += y;
            lo = lo.min(s);
            prop_assert!(*wn >= 0.0);
            prop_assert!((wn - (s - lo)).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_is_symmetric(a in prop::collection::vec(-10.0f64..10.0, 1..100), b in prop::collection::vec(-10.0f64..10.0, 1..100)) {
        let (x, y) = (ks_distance(&a, &b).unwrap(), ks_distance(&b, &a).unwrap());
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert!((0.0..=1.0).contains(&x.statistic));
        prop_assert!((0.0..=1.0).contains(&x.p_value));
        prop_assert_eq!(ks_distance(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn mean_ci_brackets_mean(xs in prop::collection::vec(-1e3f64..1e3, 2..100)) {
        let ci = mean_ci(&xs).unwrap();
        prop_assert!(ci.lower <= ci.mean && ci.mean <= ci.upper);
    }

    #[test]
    fn record_law_is_a_distribution(alpha in 1.1f64..6.0, m in 1.0f64..500.0, mu in 0.05f64..2.0, k in 1u32..40) {
        let r = RecordLaw::new(alpha, m, mu).unwrap();
        prop_assert!(r.cdf(k) <= r.cdf(k + 1) + 1e-15);
        prop_assert!((r.cdf(k) + r.survival(k) - 1.0).abs() < 1e-12);
        prop_assert!(r.pmf(k + 1).unwrap() >= 0.0);
    }

    #[test]
    fn thresholds_increase(mu in 0.05f64..2.0, m in 1.0f64..500.0, delta in 0.05f64..0.5, j in 0.0f64..1e6) {
        prop_assert!(threshold(mu, m, delta, j) < threshold(mu, m, delta, j + 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_samples_satisfy_identities(seed in any::<u64>(), n in 0usize..40) {
        let (law, p) = toy();
        let mut s = Sampler::new(&law, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = s.sample_backward_sequence(n, &mut rng, &mut Tally::default()).unwrap();
        prop_assert!(b.horizon() >= n);
        let r = check_identities(&b, &p);
        prop_assert_eq!(r.violations, 0, "{:?}", r.first_violation);
        if let Some(k) = b.first_idle() {
            prop_assert_eq!(b.maxima[k], 0.0);
            prop_assert!(b.maxima[..k].iter().all(|m| *m > 0.0));
        }
    }

    #[test]
    fn coupled_walk_is_dominated(seed in any::<u64>(), n in 0usize..20) {
        let target = CenteredPareto::new(7.0, 3.0).unwrap();
        let c = build_coupling(&target, 0.1, 1.0).unwrap();
        let p = AlgorithmParams::new(c.mu_prime, 16.0, 1.1, 4.0, 1.7, 0.38, BetaMode::FiniteVariance).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_backward_via_coupling(&c, &p, n, &mut rng, &mut Tally::default()).unwrap();
        prop_assert_eq!(check_coupled(&s, 1.0).violations, 0);
        prop_assert!(s.stop >= n);
    }
}
