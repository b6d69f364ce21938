use hdx_core::grassmann::{grassmann_stav, rank, Field, Flavor, GrassmannPoset, Subspace};
use proptest::prelude::*;

/// Number of k-dimensional subspaces of F_q^n by counting ordered bases.
fn count_subspaces(n: u32, k: u32, q: u128) -> u128 {
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= q.pow(n) - q.pow(i);
        den *= q.pow(k) - q.pow(i);
    }
    num / den
}

fn random_rows(field: &Field, n: usize, k: usize, seed: &[u8]) -> Vec<Vec<u8>> {
    let q = field.q() as u8;
    (0..k).map(|i| (0..n).map(|j| seed[(i * n + j) % seed.len()] % q).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn level_sizes_match_counts(q in prop::sample::select(vec![2usize, 3, 4, 5]), n in 2usize..5) {
        let lin = GrassmannPoset::new(q, n, n - 1, Flavor::Linear).unwrap();
        for k in 0..n {
            prop_assert_eq!(lin.level(k).unwrap().len() as u128, count_subspaces(n as u32, k as u32 + 1, q as u128));
        }
        let aff = GrassmannPoset::new(q, n, n, Flavor::Affine).unwrap();
        for k in 0..=n.min(2) {
            let cosets = (q as u128).pow((n - k) as u32);
            prop_assert_eq!(aff.level(k).unwrap().len() as u128, cosets * count_subspaces(n as u32, k as u32, q as u128));
        }
    }

    #[test]
    fn canonical_form_ignores_the_basis(
        q in prop::sample::select(vec![2usize, 3, 4, 5, 7]),
        n in 2usize..6,
        seed in prop::collection::vec(any::<u8>(), 36),
        mix in prop::collection::vec(any::<u8>(), 36),
    ) {
        let f = Field::new(q).unwrap();
        let k = 1 + seed[0] as usize % n;
        let rows = random_rows(&f, n, k, &seed);
        let r = rank(&f, rows.clone());
        prop_assume!(r == k);
        // random square mixing matrix, kept only when invertible
        let m = random_rows(&f, k, k, &mix);
        prop_assume!(rank(&f, m.clone()) == k);
        let mixed: Vec<Vec<u8>> = m
            .iter()
            .map(|coef| {
                (0..n).fold(vec![0u8; n], |mut acc, j| {
                    for (c, row) in coef.iter().zip(&rows) {
                        acc[j] = f.add(acc[j], f.mul(*c, row[j]));
                    }
                    acc
                })
            })
            .collect();
        let a = Subspace::linear(&f, n, rows.clone()).unwrap();
        let b = Subspace::linear(&f, n, mixed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.contains(&f, &b) && b.contains(&f, &a));

        let point: Vec<u8> = (0..n).map(|j| mix[j] % q as u8).collect();
        let shifted: Vec<u8> = point.iter().zip(&rows[0]).map(|(&x, &y)| f.add(x, y)).collect();
        let x = Subspace::affine(&f, n, rows.clone(), point).unwrap();
        let y = Subspace::affine(&f, n, rows, shifted).unwrap();
        prop_assert_eq!(x, y);
    }
}

#[test]
fn linear_stav_invariants() {
    let p = GrassmannPoset::new(2, 7, 6, Flavor::Linear).unwrap();
    let x = grassmann_stav(&p, 6, 1).unwrap();
    let r = x.check_invariants();
    assert!(r.holds(), "{:?}", r.first_failure());
    assert_eq!(x.n_points, 127);
}
