use hdx_core::complex::binomial;
use hdx_core::spectra::square_spectrum;
use hdx_core::walks::{
    complement_walk, containment_operator, down_operator, fixed_union_walk, non_lazy_upper_walk, up_operator,
    MarkovOperator,
};
use hdx_core::Complex;
use proptest::prelude::*;

mod common;
use common::random_complex;

fn same(a: &MarkovOperator, b: &MarkovOperator) -> bool {
    let (x, y) = (a.joint.to_dense(), b.joint.to_dense());
    x.len() == y.len() && x.iter().zip(&y).all(|(r, s)| r.len() == s.len() && r.iter().zip(s).all(|(p, q)| (p - q).abs() < 1e-12))
}

fn stochastic(op: &MarkovOperator) -> bool {
    op.row_sum_residual() < 1e-10 && op.apply(&vec![1.0; op.n_target()]).iter().all(|x| (x - 1.0).abs() < 1e-10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operators_are_stochastic_and_reversible(seed in any::<u64>(), n in 6usize..9, d in 2usize..4) {
        let c = random_complex(seed, n, d);
        for k in 0..d {
            let up = up_operator(&c, k).unwrap();
            let down = down_operator(&c, k).unwrap();
            prop_assert!(stochastic(&up) && stochastic(&down));
            prop_assert!(same(&up.reverse(), &down));
            let low = non_lazy_upper_walk(&c, k).unwrap();
            prop_assert!(stochastic(&low));
            prop_assert!(low.reversibility_residual() < 1e-14);
        }
        for k in 1..=d {
            for l in -1..k as isize {
                prop_assert!(stochastic(&containment_operator(&c, k, l).unwrap()));
            }
        }
    }

    #[test]
    fn complement_walk_adjoint(seed in any::<u64>(), n in 6usize..9, d in 2usize..4) {
        let c = random_complex(seed, n, d);
        for l1 in 0..d {
            for l2 in 0..d - l1 {
                let ab = complement_walk(&c, l1, l2).unwrap();
                let ba = complement_walk(&c, l2, l1).unwrap();
                prop_assert!(stochastic(&ab));
                prop_assert!(same(&ab.reverse(), &ba));
                if l1 == l2 {
                    prop_assert!(ab.reversibility_residual() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fixed_union_special_cases(seed in any::<u64>(), n in 6usize..9) {
        let c = random_complex(seed, n, 4);
        for l in 0..=1usize {
            prop_assert!(same(&fixed_union_walk(&c, l, l + 1).unwrap(), &complement_walk(&c, l, l).unwrap()));
            prop_assert!(same(&fixed_union_walk(&c, l, 1).unwrap(), &non_lazy_upper_walk(&c, l).unwrap()));
        }
    }

    #[test]
    fn kneser_spectrum_on_complete_complexes(n in 6usize..13, l in 0usize..3) {
        let m = l + 1;
        prop_assume!(2 * m <= n);
        let d = 2 * l + 1;
        prop_assume!(d < n);
        let c = Complex::complete(n, d).unwrap();
        let measured = square_spectrum(&complement_walk(&c, l, l).unwrap()).unwrap().two_sided();
        // Kneser graph K(n, m) eigenvalues (−1)^i C(n−m−i, m−i), degree C(n−m, m)
        let deg = binomial(n - m, m);
        let expected = (1..=m).map(|i| binomial(n - m - i, m - i) / deg).fold(0.0, f64::max);
        prop_assert!((measured - expected).abs() < 1e-9, "n={n} l={l}: {measured} vs {expected}");
    }
}
