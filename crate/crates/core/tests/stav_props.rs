use hdx_core::spectra::bipartite_norm;
use hdx_core::stav::{
    derive_graph, goodness_check, hdx_stav, neighborhood_stav, partite_ij_stav, GoodnessConfig, GraphKind, HdxStav,
    NeighborhoodMode, StavInstance, INVARIANT_TOL,
};
use hdx_core::walks::containment_operator;
use hdx_core::Complex;
use proptest::prelude::*;

mod common;
use common::random_complex;

fn t_lower_values(x: &StavInstance) -> Vec<f64> {
    (0..x.t_sets.len()).map(|t| bipartite_norm(&derive_graph(x, GraphKind::TLower(t)).unwrap().op).unwrap().lambda_bip).collect()
}

fn check_graph_marginals(x: &StavInstance, kind: GraphKind) {
    let g = derive_graph(x, kind).unwrap();
    let rows = g.op.joint.row_sums();
    let cols = g.op.joint.col_sums();
    for (a, b) in rows.iter().zip(&g.op.source_measure) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in cols.iter().zip(&g.op.target_measure) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((rows.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hdx_builder_invariants_on_weighted_complexes(seed in any::<u64>(), n in 7usize..9) {
        let c = random_complex(seed, n, 4);
        let x = hdx_stav(&c, 4, 1).unwrap();
        let r = x.check_invariants();
        // the v-marginal follows the vertex measure, which is uniform only on regular complexes
        prop_assert!((r.total_mass - 1.0).abs() <= INVARIANT_TOL);
        prop_assert!(r.conditional_independence_residual <= INVARIANT_TOL);
        prop_assert!(r.sts_symmetry_residual <= INVARIANT_TOL);
        prop_assert!(r.sts_marginal_residual <= INVARIANT_TOL);
        prop_assert!(r.vasa_symmetry_residual <= INVARIANT_TOL);
        prop_assert!(r.vasa_marginal_residual <= INVARIANT_TOL);
        prop_assert_eq!(r.support_violations, 0);
        let mu0 = c.level(0);
        let mut pv = vec![0.0; n];
        for e in &x.d_stav {
            pv[e.3 as usize] += e.4;
        }
        for (a, b) in pv.iter().zip(&mu0.measure) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_builders_satisfy_every_invariant(n in 7usize..10, l in 1usize..3) {
        let d = 2 * l + 2;
        prop_assume!(d < n);
        let c = Complex::complete(n, d).unwrap();
        let x = hdx_stav(&c, d, l).unwrap();
        prop_assert!(x.check_invariants().holds(), "{:?}", x.check_invariants().first_failure());
        prop_assert!(HdxStav::new(&c, d, l).unwrap().check_invariants().unwrap().holds());
    }

    #[test]
    fn t_lower_depends_only_on_l(seed in any::<u64>(), n in 7usize..9) {
        let c = random_complex(seed, n, 4);
        let x = hdx_stav(&c, 4, 1).unwrap();
        for v in t_lower_values(&x) {
            prop_assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn goodness_is_monotone_in_gamma(g1 in 0.01f64..1.0, g2 in 0.01f64..1.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let c = Complex::complete(9, 5).unwrap();
        let h = HdxStav::new(&c, 5, 1).unwrap();
        let a = h.goodness_check(GoodnessConfig::new(lo, 1.0)).unwrap();
        let b = h.goodness_check(GoodnessConfig::new(hi, 1.0)).unwrap();
        prop_assert!(!a.pass() || b.pass());
        prop_assert_eq!(a.inferred_gamma, b.inferred_gamma);
        prop_assert_eq!(a.pass(), lo + 1e-12 >= a.inferred_gamma);
    }
}

#[test]
fn t_lower_matches_the_simplex_containment_graph() {
    for l in 2..=3 {
        let d = 2 * l + 2;
        let c = Complex::complete(d + 2, d).unwrap();
        let x = hdx_stav(&c, d, l).unwrap();
        // vertices of an l-simplex against its (l−1)-faces
        let simplex = Complex::complete(l + 1, l).unwrap();
        let oracle = bipartite_norm(&containment_operator(&simplex, l - 1, 0).unwrap()).unwrap().lambda_bip;
        assert!((oracle - 1.0 / l as f64).abs() < 1e-10);
        for v in t_lower_values(&x) {
            assert!((v - oracle).abs() < 1e-10);
        }
    }
}

#[test]
fn derived_graphs_have_consistent_marginals() {
    let c = Complex::complete(9, 5).unwrap();
    let x = hdx_stav(&c, 5, 1).unwrap();
    check_graph_marginals(&x, GraphKind::Reach);
    check_graph_marginals(&x, GraphKind::StsA(0));
    check_graph_marginals(&x, GraphKind::VasaV(0));
    check_graph_marginals(&x, GraphKind::VasA(0));
    check_graph_marginals(&x, GraphKind::TLower(0));
    let v = x.index().reach[0][0];
    check_graph_marginals(&x, GraphKind::StsAv(0, v));
}

#[test]
fn other_builders_satisfy_the_invariants() {
    let p = Complex::partite_complete(&[2; 9]).unwrap();
    let x = partite_ij_stav(&p, &[0], &[1], 8).unwrap();
    assert!(x.check_invariants().holds(), "{:?}", x.check_invariants().first_failure());
    let c = Complex::complete(9, 5).unwrap();
    for mode in [NeighborhoodMode::Independent, NeighborhoodMode::Complement] {
        let x = neighborhood_stav(&c, 1, 1, mode).unwrap();
        assert!(x.check_invariants().holds(), "{mode:?}: {:?}", x.check_invariants().first_failure());
    }
}

#[test]
fn tabulated_and_link_goodness_agree() {
    let c = Complex::complete(9, 5).unwrap();
    let cfg = GoodnessConfig::new(0.4, 1.0);
    let fast = HdxStav::new(&c, 5, 1).unwrap().goodness_check(cfg).unwrap();
    let slow = goodness_check(&hdx_stav(&c, 5, 1).unwrap(), cfg).unwrap();
    assert_eq!(fast.pass(), slow.pass());
    assert!((fast.a3a_max_lambda - slow.a3a_max_lambda).abs() < 1e-9);
    assert!((fast.a2b_max_lambda - slow.a2b_max_lambda).abs() < 1e-9);
}
