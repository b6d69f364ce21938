use hdx_core::agreement::{
    corrupt, dl_distribution, perfect_ensemble, rejection, sts_t_expansion, surprise, up2k_distribution, Compare,
    CorruptMode, EvalMode,
};
use hdx_core::io::{ensemble_from_json, ensemble_to_json};
use hdx_core::stav::hdx_stav;
use hdx_core::Complex;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn arb_assignment(n: usize) -> impl Strategy<Value = (u32, Vec<u32>)> {
    (2u32..5).prop_flat_map(move |q| (Just(q), prop::collection::vec(0..q, n)))
}

fn arb_mode() -> impl Strategy<Value = CorruptMode> {
    prop_oneof![Just(CorruptMode::FlipOne), Just(CorruptMode::ResampleSet)]
}

fn exact(sts: &hdx_core::stav::StsDistribution, f: &hdx_core::agreement::Ensemble, compare: Compare) -> f64 {
    rejection(sts, f, EvalMode::Exact, compare).unwrap().epsilon
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perfect_ensembles_are_never_rejected((q, g) in arb_assignment(9)) {
        let c = Complex::complete(9, 5).unwrap();
        let hdx = hdx_stav(&c, 5, 1).unwrap().sts_distribution();
        for sts in [dl_distribution(&c, 3, 1).unwrap(), up2k_distribution(&c, 2, Some(0)).unwrap(), hdx] {
            let f = perfect_ensemble(&sts.s_sets, &g, q).unwrap();
            for compare in [Compare::SampledT, Compare::FullIntersection] {
                prop_assert_eq!(exact(&sts, &f, compare), 0.0);
                let mc = rejection(&sts, &f, EvalMode::MonteCarlo { samples: 500, seed: 3 }, compare).unwrap();
                prop_assert_eq!(mc.epsilon, 0.0);
            }
        }
    }

    #[test]
    fn rejection_ignores_alphabet_relabeling(
        (q, g) in arb_assignment(9),
        alpha in 0.0f64..1.0,
        mode in arb_mode(),
        seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        let c = Complex::complete(9, 5).unwrap();
        let sts = dl_distribution(&c, 3, 1).unwrap();
        let f = corrupt(&perfect_ensemble(&sts.s_sets, &g, q).unwrap(), alpha, mode, seed).unwrap();
        let mut perm: Vec<u32> = (0..q).collect();
        perm.shuffle(&mut StdRng::seed_from_u64(perm_seed));
        let h = f.relabel(&perm);
        for compare in [Compare::SampledT, Compare::FullIntersection] {
            prop_assert!((exact(&sts, &f, compare) - exact(&sts, &h, compare)).abs() < 1e-12);
        }
    }

    #[test]
    fn surprise_is_a_probability((q, g) in arb_assignment(9), alpha in 0.0f64..1.0, mode in arb_mode(), seed in any::<u64>()) {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        let f = corrupt(&perfect_ensemble(&x.s_sets, &g, q).unwrap(), alpha, mode, seed).unwrap();
        let xi = surprise(&x, &f).unwrap();
        prop_assert!((0.0..=1.0).contains(&xi.value));
        if exact(&x.sts_distribution(), &f, Compare::SampledT) == 0.0 {
            prop_assert_eq!(xi.value, 0.0);
        }
    }

    #[test]
    fn weak_test_never_exceeds_full_comparison((q, g) in arb_assignment(9), alpha in 0.0f64..1.0, mode in arb_mode(), seed in any::<u64>()) {
        let c = Complex::complete(9, 5).unwrap();
        let sts = dl_distribution(&c, 3, 1).unwrap();
        let f = corrupt(&perfect_ensemble(&sts.s_sets, &g, q).unwrap(), alpha, mode, seed).unwrap();
        prop_assert!(exact(&sts, &f, Compare::SampledT) <= exact(&sts, &f, Compare::FullIntersection) + 1e-12);
    }

    #[test]
    fn sandwich_between_independent_and_expanding_tests((q, g) in arb_assignment(9), alpha in 0.01f64..0.8, mode in arb_mode(), seed in any::<u64>()) {
        let c = Complex::complete(9, 5).unwrap();
        let d1 = dl_distribution(&c, 2, 0).unwrap();
        let d2 = up2k_distribution(&c, 2, Some(0)).unwrap();
        let f = corrupt(&perfect_ensemble(&d1.s_sets, &g, q).unwrap(), alpha, mode, seed).unwrap();
        let (e1, e2) = (exact(&d1, &f, Compare::SampledT), exact(&d2, &f, Compare::SampledT));
        prop_assert!(e1 / 6.0 <= e2 + 1e-12 && e2 <= 6.0 * e1 + 1e-12, "{e1} {e2}");
    }

    #[test]
    fn ensembles_roundtrip_through_json((q, g) in arb_assignment(7), alpha in 0.0f64..1.0, seed in any::<u64>()) {
        let c = Complex::complete(7, 4).unwrap();
        let sts = dl_distribution(&c, 2, 0).unwrap();
        let f = corrupt(&perfect_ensemble(&sts.s_sets, &g, q).unwrap(), alpha, CorruptMode::ResampleSet, seed).unwrap();
        let back = ensemble_from_json(&ensemble_to_json(&f)).unwrap();
        prop_assert_eq!(back.sets, f.sets);
        prop_assert_eq!(back.values, f.values);
    }
}

#[test]
fn monte_carlo_tracks_exact() {
    let c = Complex::complete(9, 5).unwrap();
    let sts = dl_distribution(&c, 3, 1).unwrap();
    let g: Vec<u32> = (0..9).map(|v| v % 2).collect();
    for seed in 0..5 {
        let f = corrupt(&perfect_ensemble(&sts.s_sets, &g, 2).unwrap(), 0.3, CorruptMode::ResampleSet, seed).unwrap();
        let e = exact(&sts, &f, Compare::SampledT);
        let mc = rejection(&sts, &f, EvalMode::MonteCarlo { samples: 20_000, seed: 40 + seed }, Compare::SampledT).unwrap();
        let se = mc.std_error;
        assert!((mc.epsilon - e).abs() <= 5.0 * se + 1e-9, "{} vs {e} (se {se})", mc.epsilon);
        let again = rejection(&sts, &f, EvalMode::MonteCarlo { samples: 20_000, seed: 40 + seed }, Compare::SampledT).unwrap();
        assert_eq!(mc.epsilon, again.epsilon);
    }
}

#[test]
fn expanding_test_has_the_johnson_gap() {
    let c = Complex::complete(9, 5).unwrap();
    let lam = sts_t_expansion(&up2k_distribution(&c, 2, Some(0)).unwrap()).unwrap();
    assert!((lam - 1.0 / 3.0).abs() < 1e-10);
}
