use hdx_core::complex::binomial;
use hdx_core::{Complex, Face};
use proptest::prelude::*;

mod common;
use common::combinations;

fn arb_complex() -> impl Strategy<Value = Complex> {
    (5usize..9, 1usize..4)
        .prop_flat_map(|(n, d)| {
            let tops = binomial(n, d + 1) as usize;
            (Just(n), Just(d), prop::collection::vec((any::<bool>(), 0.1f64..3.0), tops))
        })
        .prop_map(|(n, d, picks)| {
            let all: Vec<Vec<u32>> = combinations(n, d + 1);
            let mut tops: Vec<(Face, f64)> = Vec::new();
            let mut covered = vec![false; n];
            for (f, (keep, w)) in all.iter().zip(&picks) {
                if *keep {
                    f.iter().for_each(|&v| covered[v as usize] = true);
                    tops.push((Face::from_sorted(f.clone()), *w));
                }
            }
            for v in 0..n {
                if !covered[v] {
                    let (f, w) = all.iter().zip(&picks).find(|(f, _)| f.contains(&(v as u32))).unwrap();
                    f.iter().for_each(|&u| covered[u as usize] = true);
                    tops.push((Face::from_sorted(f.clone()), w.1));
                }
            }
            Complex::build_from_top_faces(n, tops).unwrap()
        })
}

fn tops_in_original_ids(c: &Complex, map: &[u32]) -> Vec<(Vec<u32>, f64)> {
    let mut t: Vec<(Vec<u32>, f64)> = c
        .top_faces()
        .into_iter()
        .map(|(f, w)| {
            let mut v: Vec<u32> = f.iter().map(|&x| map[x as usize]).collect();
            v.sort_unstable();
            (v, w)
        })
        .collect();
    let total: f64 = t.iter().map(|x| x.1).sum();
    t.iter_mut().for_each(|x| x.1 /= total);
    t.sort_by(|a, b| a.0.cmp(&b.0));
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn levels_are_probability_distributions(c in arb_complex()) {
        for k in -1..=c.dim() {
            let total: f64 = c.level(k).measure.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "level {k} sums to {total}");
        }
    }

    #[test]
    fn measures_descend_through_the_chain(c in arb_complex()) {
        for k in 0..c.dim() {
            let lo = c.level(k);
            let hi = c.level(k + 1);
            let mut pushed = vec![0.0; lo.len()];
            for (f, m) in hi.faces.iter().zip(&hi.measure) {
                for sub in f.subfaces(f.len() - 1) {
                    pushed[lo.position(&sub).unwrap()] += m / f.len() as f64;
                }
            }
            for (a, b) in pushed.iter().zip(&lo.measure) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn links_compose(c in arb_complex(), pick in any::<prop::sample::Index>(), pick2 in any::<prop::sample::Index>()) {
        prop_assume!(c.dim() >= 2);
        let top = c.level(c.dim()).faces[pick.index(c.level(c.dim()).len())].clone();
        let s = Face::from_sorted(vec![top.verts()[0]]);
        let (ls, map_s) = c.link_with_map(&s).unwrap();
        let rest: Vec<u32> = top.verts()[1..].to_vec();
        let t_orig = rest[pick2.index(rest.len())];
        let t_local = map_s.iter().position(|&v| v == t_orig).unwrap() as u32;
        let (lst, map_st) = ls.link_with_map(&Face::from_sorted(vec![t_local])).unwrap();
        let composed: Vec<u32> = map_st.iter().map(|&v| map_s[v as usize]).collect();
        let (direct, map_d) = c.link_with_map(&s.union(&Face::from_sorted(vec![t_orig]))).unwrap();
        let a = tops_in_original_ids(&lst, &composed);
        let b = tops_in_original_ids(&direct, &map_d);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.0, &y.0);
            prop_assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn partite_tops_are_transversal(sizes in prop::collection::vec(1usize..4, 2..5)) {
        let c = Complex::partite_complete(&sizes).unwrap();
        let col = c.coloring().unwrap();
        for (f, _) in c.top_faces() {
            let mut cs: Vec<usize> = f.iter().map(|&v| col[v as usize]).collect();
            cs.sort_unstable();
            prop_assert_eq!(cs, (0..sizes.len()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn complete_levels_match_explicit_construction() {
    let sym = Complex::complete(7, 3).unwrap();
    let tops = combinations(7, 4).into_iter().map(|f| (Face::from_sorted(f), 1.0)).collect();
    let exp = Complex::build_from_top_faces(7, tops).unwrap();
    for k in -1..=3 {
        let (a, b) = (sym.level(k), exp.level(k));
        assert_eq!(a.faces, b.faces);
        for (x, y) in a.measure.iter().zip(&b.measure) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
