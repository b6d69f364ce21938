//! Measure-weighted spectra of walks and numeric checks of the expansion inequalities.

use std::collections::{HashMap, HashSet};

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use serde::{Deserialize, Serialize};

use crate::complex::{Complex, Face};
use crate::error::{Error, Result};
use crate::walks::{self, Csr, MarkovOperator};

pub const DENSE_LIMIT: usize = 5000;
const DENSE_SVD_ENTRIES: usize = 4_000_000;
const LANCZOS_STEPS: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Iterative,
}

/// For square operators lambda2/lambda_min are the extreme nontrivial eigenvalues and
/// lambda_bip = max(|lambda2|, |lambda_min|). For bipartite operators lambda_bip is the second
/// singular value and lambda2 = lambda_bip, lambda_min = −lambda_bip (the double-cover spectrum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda2: f64,
    pub lambda_min: f64,
    pub lambda_bip: f64,
    pub method: Method,
    pub residual: f64,
}

impl SpectralReport {
    pub fn two_sided(&self) -> f64 {
        self.lambda2.abs().max(self.lambda_min.abs())
    }
}

pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
}

fn sqrt_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// D^{1/2} P D^{-1/2} for a square operator, as a sparse symmetric-in-theory matrix.
fn symmetrized(op: &MarkovOperator) -> Csr {
    let sp = sqrt_vec(&op.source_measure);
    let sq = sqrt_vec(&op.target_measure);
    let mut m = op.joint.clone();
    for r in 0..m.n_rows {
        for p in m.indptr[r]..m.indptr[r + 1] {
            let c = m.indices[p] as usize;
            m.data[p] /= sp[r] * sq[c];
        }
    }
    m
}

fn dense_of(m: &Csr) -> Mat<f64> {
    let mut a = Mat::<f64>::zeros(m.n_rows, m.n_cols);
    for r in 0..m.n_rows {
        for (c, v) in m.row(r) {
            a[(r, c)] += v;
        }
    }
    a
}

pub fn square_spectrum(op: &MarkovOperator) -> Result<SpectralReport> {
    let method = if op.n_source() <= DENSE_LIMIT { Method::Dense } else { Method::Iterative };
    square_spectrum_with(op, method)
}

pub fn square_spectrum_with(op: &MarkovOperator, method: Method) -> Result<SpectralReport> {
    if !op.square || op.n_source() != op.n_target() {
        return Err(Error::NotSquare);
    }
    let resid = op.reversibility_residual() / op.source_measure.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let s = symmetrized(op);
    let asym = sym_residual(&s);
    if asym > 1e-8 {
        return Err(Error::NotReversible(asym.max(resid)));
    }
    let n = op.n_source();
    if n <= 1 {
        return Ok(SpectralReport { lambda2: 0.0, lambda_min: 0.0, lambda_bip: 0.0, method: Method::Dense, residual: asym });
    }
    match method {
        Method::Dense => {
            let mut ev = sym_eigenvalues(&dense_of(&s))?;
            // the constant direction carries the top eigenvalue 1
            ev.pop();
            let l2 = *ev.last().unwrap();
            let lmin = ev[0];
            Ok(SpectralReport { lambda2: l2, lambda_min: lmin, lambda_bip: l2.abs().max(lmin.abs()), method, residual: asym })
        }
        Method::Iterative => {
            let root = sqrt_vec(&op.source_measure);
            let (hi, lo, res) = lanczos_extremes(n, |x, y| csr_mul(&s, x, y), &[root], 7)?;
            Ok(SpectralReport { lambda2: hi, lambda_min: lo, lambda_bip: hi.abs().max(lo.abs()), method, residual: res.max(asym) })
        }
    }
}

fn sym_residual(s: &Csr) -> f64 {
    let t = s.transpose();
    let mut r = 0.0f64;
    for u in 0..s.n_rows {
        for (v, x) in s.row(u) {
            r = r.max((x - t.get(u, v)).abs());
        }
    }
    r
}

fn csr_mul(m: &Csr, x: &[f64], y: &mut [f64]) {
    for r in 0..m.n_rows {
        y[r] = m.row(r).map(|(c, v)| v * x[c]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Extreme eigenvalues of a symmetric operator restricted to the orthogonal complement of
/// `deflate`, by Lanczos with full reorthogonalization. Returns (max, min, residual bound).
pub fn lanczos_extremes(
    n: usize,
    matvec: impl Fn(&[f64], &mut [f64]),
    deflate: &[Vec<f64>],
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let defl: Vec<Vec<f64>> = deflate
        .iter()
        .map(|d| {
            let mut d = d.clone();
            normalize(&mut d);
            d
        })
        .collect();
    let project = |w: &mut [f64]| {
        for d in &defl {
            let c = dot(d, w);
            w.iter_mut().zip(d).for_each(|(x, y)| *x -= c * y);
        }
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    project(&mut q);
    if normalize(&mut q) == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let steps = LANCZOS_STEPS.min(n.saturating_sub(defl.len())).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    for j in 0..steps {
        matvec(&basis[j], &mut w);
        project(&mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            project(&mut w);
        }
        let b = dot(&w, &w).sqrt();
        beta.push(b);
        if b < 1e-13 || j + 1 == steps {
            break;
        }
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let mut t = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..m).map(|i| evd.S()[i]).collect();
    let last_beta = beta[m - 1];
    let res_of = |i: usize| (last_beta * evd.U()[(m - 1, i)]).abs();
    Ok((vals[m - 1], vals[0], res_of(m - 1).max(res_of(0))))
}

/// Second singular value of the measure-symmetrized bipartite operator.
pub fn bipartite_norm(op: &MarkovOperator) -> Result<SpectralReport> {
    let rs = op.joint.row_sums();
    let cs = op.joint.col_sums();
    let incons = rs
        .iter()
        .zip(&op.source_measure)
        .chain(cs.iter().zip(&op.target_measure))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if incons > 1e-10 {
        return Err(Error::InconsistentMarginals(incons));
    }
    let (nr, nc) = (op.n_source(), op.n_target());
    let sp = sqrt_vec(&op.source_measure);
    let sq = sqrt_vec(&op.target_measure);
    let mut m = op.joint.clone();
    for r in 0..nr {
        for p in m.indptr[r]..m.indptr[r + 1] {
            let c = m.indices[p] as usize;
            m.data[p] /= sp[r] * sq[c];
        }
    }
    let report = |s: f64, method: Method, residual: f64| SpectralReport {
        lambda2: s,
        lambda_min: -s,
        lambda_bip: s,
        method,
        residual,
    };
    if nr.min(nc) <= 1 {
        return Ok(report(0.0, Method::Dense, 0.0));
    }
    if nr * nc <= DENSE_SVD_ENTRIES {
        let mut a = dense_of(&m);
        for r in 0..nr {
            for c in 0..nc {
                a[(r, c)] -= sp[r] * sq[c];
            }
        }
        let sv = a.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        return Ok(report(sv[0], Method::Dense, 0.0));
    }
    if nr.min(nc) <= DENSE_LIMIT {
        let (small, root, mm) = if nr <= nc { (nr, &sp, m.transpose()) } else { (nc, &sq, m.clone()) };
        // mm has the small side as columns; accumulate Σ_rows M(row, u) M(row, u')
        let mut g = Mat::<f64>::zeros(small, small);
        for r in 0..mm.n_rows {
            let entries: Vec<(usize, f64)> = mm.row(r).collect();
            for &(u, x) in &entries {
                for &(v, y) in &entries {
                    g[(u, v)] += x * y;
                }
            }
        }
        for u in 0..small {
            for v in 0..small {
                g[(u, v)] -= root[u] * root[v];
            }
        }
        let ev = sym_eigenvalues(&g)?;
        let top = ev.last().copied().unwrap_or(0.0).max(0.0);
        return Ok(report(top.sqrt(), Method::Dense, ev[0].min(0.0).abs()));
    }
    let mt = m.transpose();
    let (hi, _, res) = lanczos_extremes(
        nc,
        |x, y| {
            let mut t = vec![0.0; nr];
            csr_mul(&m, x, &mut t);
            let c = dot(&sp, &t);
            t.iter_mut().zip(&sp).for_each(|(a, b)| *a -= c * b);
            csr_mul(&mt, &t, y);
        },
        &[sq.clone()],
        11,
    )?;
    Ok(report(hi.max(0.0).sqrt(), Method::Iterative, res))
}

/// Max over links of the link's underlying-graph expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkExpansion {
    pub value: f64,
    pub worst_face: Vec<u32>,
    pub disconnected_links: usize,
    pub links_checked: usize,
}

pub fn link_expansion(c: &Complex, two_sided: bool) -> Result<LinkExpansion> {
    if c.dim() < 1 {
        return Err(Error::LevelOutOfRange { k: 1, d: c.dim() });
    }
    let d = c.dim();
    let mut out = LinkExpansion { value: 0.0, worst_face: vec![], disconnected_links: 0, links_checked: 0 };
    for k in -1..=(d - 2) {
        let graphs: Vec<(Face, Vec<(u32, u32, f64)>)> = if c.is_complete() {
            let s = Face::from_sorted((0..(k + 1) as u32).collect());
            let edges = c
                .level(k + 2)
                .faces
                .iter()
                .filter(|u| s.is_subset_of(u))
                .map(|u| {
                    let e = u.minus(&s);
                    (e[0], e[1], 1.0)
                })
                .collect();
            vec![(s, edges)]
        } else {
            let top = c.level(k + 2);
            let mut g: HashMap<Face, Vec<(u32, u32, f64)>> = HashMap::new();
            for (u, &m) in top.faces.iter().zip(&top.measure) {
                for s in u.subfaces((k + 1) as usize) {
                    let e = u.minus(&s);
                    g.entry(s).or_default().push((e[0], e[1], m));
                }
            }
            let mut g: Vec<_> = g.into_iter().collect();
            g.sort_by(|a, b| a.0.cmp(&b.0));
            g
        };
        for (s, edges) in graphs {
            let r = graph_spectrum(&edges)?;
            out.links_checked += 1;
            if r.lambda2 > 1.0 - 1e-9 {
                out.disconnected_links += 1;
            }
            let v = if two_sided { r.two_sided() } else { r.lambda2 };
            if v > out.value || out.worst_face.is_empty() && out.links_checked == 1 {
                out.value = out.value.max(v);
                out.worst_face = s.to_vec();
            }
        }
    }
    Ok(out)
}

/// Square walk on an undirected weighted edge list (vertex ids arbitrary).
pub fn graph_operator(edges: &[(u32, u32, f64)]) -> Result<(MarkovOperator, Vec<u32>)> {
    let mut verts: Vec<u32> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
    verts.sort_unstable();
    verts.dedup();
    let id: HashMap<u32, u32> = verts.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    let mut trips = Vec::with_capacity(2 * edges.len());
    for &(a, b, w) in edges {
        trips.push((id[&a], id[&b], w / 2.0));
        trips.push((id[&b], id[&a], w / 2.0));
    }
    Ok((MarkovOperator::from_joint(verts.len(), verts.len(), true, trips)?, verts))
}

fn graph_spectrum(edges: &[(u32, u32, f64)]) -> Result<SpectralReport> {
    let (op, _) = graph_operator(edges)?;
    square_spectrum(&op)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> BoundCheck {
        BoundCheck { lhs, rhs, pass: lhs <= rhs + 1e-9 }
    }
}

/// λ(comp_{l1,l2}) against (l1+1)(l2+1)·λ with λ the measured two-sided link expansion.
pub fn verify_complement_bound(c: &Complex, l1: usize, l2: usize) -> Result<BoundCheck> {
    let op = walks::complement_walk(c, l1, l2)?;
    let lhs = bipartite_norm(&op)?.lambda_bip;
    let lam = link_expansion(c, true)?.value;
    Ok(BoundCheck::new(lhs, ((l1 + 1) * (l2 + 1)) as f64 * lam))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColoredCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub measured_one_sided: f64,
    pub derived_lambda: f64,
    pub pass: bool,
}

/// The hypothesis is a λ/((d+1)λ+1) one-sided link expander with λ < 1/2; λ is recovered
/// from the measured λ' as λ'/(1 − (d+1)λ').
pub fn verify_colored_bound(c: &Complex, i_colors: &[usize], j_colors: &[usize]) -> Result<ColoredCheck> {
    if c.coloring().is_none() {
        return Err(Error::NotPartite);
    }
    if i_colors.iter().any(|x| j_colors.contains(x)) {
        return Err(Error::OverlappingColors);
    }
    let measured = link_expansion(c, false)?.value;
    let dp1 = (c.d() + 1) as f64;
    if measured >= 1.0 / dp1 {
        return Err(Error::NotApplicable(format!("one-sided link expansion {measured} >= 1/(d+1)")));
    }
    let lam = measured / (1.0 - dp1 * measured);
    if lam >= 0.5 {
        return Err(Error::NotApplicable(format!("derived lambda {lam} >= 1/2")));
    }
    let (op, _, _) = walks::colored_walk(c, i_colors, j_colors)?;
    let lhs = bipartite_norm(&op)?.lambda_bip;
    let rhs = (i_colors.len() * j_colors.len()) as f64 * lam;
    Ok(ColoredCheck { lhs, rhs, measured_one_sided: measured, derived_lambda: lam, pass: lhs <= rhs + 1e-9 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TricklingCheck {
    pub lhs: f64,
    pub eta: f64,
    pub lambda_12: f64,
    pub lambda_13: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// For a 2-dimensional 3-partite complex with colors 0, 1, 2.
pub fn verify_trickling(y: &Complex) -> Result<TricklingCheck> {
    let col = y.coloring().ok_or(Error::NotPartite)?;
    if y.dim() != 2 {
        return Err(Error::ParameterRange("trickling needs a 2-dimensional 3-partite complex".into()));
    }
    let mut eta = 0.0f64;
    for v in (0..y.n_vertices() as u32).filter(|&v| col[v as usize] == 0) {
        let link = y.link(&Face::from_sorted(vec![v]))?;
        let (op, _, _) = walks::colored_walk(&link, &[0], &[1])?;
        eta = eta.max(bipartite_norm(&op)?.lambda_bip);
    }
    let lam = |i: usize, j: usize| -> Result<f64> {
        let (op, _, _) = walks::colored_walk(y, &[i], &[j])?;
        Ok(bipartite_norm(&op)?.lambda_bip)
    };
    let (l12, l13, l23) = (lam(0, 1)?, lam(0, 2)?, lam(1, 2)?);
    let rhs = eta + l12 * l13;
    Ok(TricklingCheck { lhs: l23, eta, lambda_12: l12, lambda_13: l13, rhs, pass: l23 <= rhs + 1e-9 })
}

/// ‖A − L‖ in the measure-weighted norm, A the fixed-union walk and L the lower walk to X(l−j).
pub fn verify_fixed_union_bound(c: &Complex, l: usize, j: usize) -> Result<BoundCheck> {
    let a = walks::fixed_union_walk(c, l, j)?;
    let lw = walks::lower_walk(c, l, l as isize - j as isize)?;
    let lhs = operator_difference_norm(&a, &lw)?;
    let lam = link_expansion(c, true)?.value;
    Ok(BoundCheck::new(lhs, (j * j) as f64 * lam))
}

/// Spectral norm of D^{1/2}(P_a − P_b)D^{-1/2} for two walks reversible w.r.t. the same measure.
pub fn operator_difference_norm(a: &MarkovOperator, b: &MarkovOperator) -> Result<f64> {
    if a.n_source() != b.n_source() || !a.square || !b.square {
        return Err(Error::NotSquare);
    }
    let n = a.n_source();
    if n > DENSE_LIMIT {
        return Err(Error::SizeCap { what: "operator difference".into(), need: n, cap: DENSE_LIMIT });
    }
    let mut m = dense_of(&symmetrized(a));
    let sb = symmetrized(b);
    for r in 0..n {
        for (c, v) in sb.row(r) {
            m[(r, c)] -= v;
        }
    }
    let ev = sym_eigenvalues(&m)?;
    Ok(ev[0].abs().max(ev[n - 1].abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentCheck {
    pub lhs: f64,
    pub sqrt_term: f64,
    pub link_lambda: f64,
    pub gross_violation: bool,
}

/// λ(D_{k+1,k}) against sqrt((k+1)/(k+2)); flags only lhs > sqrt + 10·k·λ.
pub fn verify_containment_bound(c: &Complex, k: usize) -> Result<ContainmentCheck> {
    let op = walks::down_operator(c, k)?;
    let lhs = bipartite_norm(&op)?.lambda_bip;
    let lam = link_expansion(c, true)?.value;
    let sqrt_term = ((k + 1) as f64 / (k + 2) as f64).sqrt();
    Ok(ContainmentCheck { lhs, sqrt_term, link_lambda: lam, gross_violation: lhs > sqrt_term + 10.0 * k as f64 * lam + 1e-9 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub measured: f64,
    pub predicted: f64,
    pub multinomial: f64,
    pub deviation: f64,
    pub bound_rhs: f64,
    pub lambda: f64,
    pub empirical_constant: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// F(A_1..A_m) ⊆ X(k), k = Σ(j_i+1) − 1. Sets from different indices must be vertex-disjoint.
pub fn mixing_check(c: &Complex, sets: &[(usize, Vec<Face>)]) -> Result<MixingReport> {
    if sets.is_empty() {
        return Err(Error::HypothesisViolated("no sets".into()));
    }
    for (i, (ji, ai)) in sets.iter().enumerate() {
        if let Some(f) = ai.iter().find(|f| f.len() != ji + 1) {
            return Err(Error::HypothesisViolated(format!("{:?} is not in X({ji})", f.verts())));
        }
        for (jj, aj) in sets.iter().skip(i + 1) {
            let _ = jj;
            for s in ai {
                if let Some(t) = aj.iter().find(|t| !s.is_disjoint(t)) {
                    return Err(Error::HypothesisViolated(format!("{:?} meets {:?}", s.verts(), t.verts())));
                }
            }
        }
    }
    let k = sets.iter().map(|(j, _)| j + 1).sum::<usize>() - 1;
    if k as isize > c.dim() {
        return Err(Error::HypothesisViolated(format!("k = {k} exceeds dimension {}", c.dim())));
    }
    let lookup: Vec<HashSet<&Face>> = sets.iter().map(|(_, a)| a.iter().collect()).collect();
    let level = c.level(k as isize);
    let mut measured = 0.0;
    for (u, &m) in level.faces.iter().zip(&level.measure) {
        if sets.iter().zip(&lookup).all(|((j, _), set)| u.subfaces(j + 1).any(|s| set.contains(&s))) {
            measured += m;
        }
    }
    let probs: Vec<f64> = sets.iter().map(|(_, a)| a.iter().map(|f| c.measure_of(f)).sum()).collect();
    let product: f64 = probs.iter().product();
    let multinomial = factorial(k + 1) / sets.iter().map(|(j, _)| factorial(j + 1)).product::<f64>();
    let lambda = link_expansion(c, true)?.value;
    let deviation = (measured - multinomial * product).abs();
    let bound_rhs = lambda * product.powf(1.0 / sets.len() as f64);
    Ok(MixingReport {
        measured,
        predicted: product,
        multinomial,
        deviation,
        bound_rhs,
        lambda,
        empirical_constant: if bound_rhs > 0.0 { deviation / bound_rhs } else { 0.0 },
    })
}

/// Colored sets A_i ⊆ X[I_i] with pairwise disjoint color sets. Probabilities are conditional on
/// the color classes; the F probability is conditional on X[I_1 ⊔ … ⊔ I_m].
pub fn partite_mixing_check(c: &Complex, sets: &[(Vec<usize>, Vec<Face>)]) -> Result<MixingReport> {
    let col = c.coloring().ok_or(Error::NotPartite)?;
    let mut all: Vec<usize> = Vec::new();
    for (cs, a) in sets {
        if cs.iter().any(|x| all.contains(x)) {
            return Err(Error::OverlappingColors);
        }
        all.extend(cs);
        let mut want = cs.clone();
        want.sort_unstable();
        for f in a {
            let mut fc: Vec<usize> = f.iter().map(|&v| col[v as usize]).collect();
            fc.sort_unstable();
            if fc != want {
                return Err(Error::HypothesisViolated(format!("{:?} is not colored {:?}", f.verts(), cs)));
            }
        }
    }
    let mut probs = Vec::new();
    for (cs, a) in sets {
        let (faces, meas) = c.colored_level(cs)?;
        let set: HashSet<&Face> = a.iter().collect();
        probs.push(faces.iter().zip(&meas).filter(|(f, _)| set.contains(f)).map(|x| x.1).sum::<f64>());
    }
    let (uf, um) = c.colored_level(&all)?;
    let lookup: Vec<HashSet<&Face>> = sets.iter().map(|(_, a)| a.iter().collect()).collect();
    let mut measured = 0.0;
    for (u, &m) in uf.iter().zip(&um) {
        if sets.iter().zip(&lookup).all(|((cs, _), set)| {
            let part = Face::from_sorted(u.iter().copied().filter(|&v| cs.contains(&col[v as usize])).collect());
            set.contains(&part)
        }) {
            measured += m;
        }
    }
    let product: f64 = probs.iter().product();
    let lambda = link_expansion(c, false)?.value;
    let deviation = (measured - product).abs();
    let bound_rhs = lambda * product.powf(1.0 / sets.len() as f64);
    Ok(MixingReport {
        measured,
        predicted: product,
        multinomial: 1.0,
        deviation,
        bound_rhs,
        lambda,
        empirical_constant: if bound_rhs > 0.0 { deviation / bound_rhs } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerCheck {
    pub pr_t: f64,
    pub bound: f64,
    pub lambda: f64,
    pub pass: bool,
}

/// T = left vertices whose view of S ⊆ right deviates from Pr[S] by more than c.
pub fn sampler_check(g: &MarkovOperator, s: &[usize], c: f64) -> Result<SamplerCheck> {
    if !(c > 0.0) {
        return Err(Error::ParameterRange("threshold must be positive".into()));
    }
    let lambda = bipartite_norm(g)?.lambda_bip;
    let mut in_s = vec![false; g.n_target()];
    s.iter().for_each(|&x| in_s[x] = true);
    let pr_s: f64 = s.iter().map(|&x| g.target_measure[x]).sum();
    let mut pr_t = 0.0;
    for u in 0..g.n_source() {
        let view: f64 = g.joint.row(u).filter(|(v, _)| in_s[*v]).map(|x| x.1).sum::<f64>() / g.source_measure[u];
        if (view - pr_s).abs() > c {
            pr_t += g.source_measure[u];
        }
    }
    let bound = lambda * lambda / (c * c) * pr_s;
    Ok(SamplerCheck { pr_t, bound, lambda, pass: pr_t <= bound + 1e-9 })
}

/// Smallest δ for which the sampler lemma certifies the δ-sampling property of a graph with
/// bipartite expansion λ: the complement of T deviates by at least 2Pr[C]/3, so
/// Pr[L∖T] ≤ 9λ²/(4δ), which is at most 2/3 once δ ≥ 27λ²/8.
pub fn sampler_delta_min(lambda: f64) -> f64 {
    27.0 * lambda * lambda / 8.0
}

/// Random checks of the δ-sampling property: for C ⊆ right with Pr[C] ≥ δ, the left set
/// T = {u : Pr[v ∈ C | u] ≥ δ/3} must have Pr[T] ≥ 1/3. Returns the number of failing C.
pub fn sampling_spot_checks(g: &MarkovOperator, delta: f64, checks: usize, rng: &mut impl Rng) -> usize {
    let nr = g.n_target();
    let rows: Vec<Vec<(usize, f64)>> = (0..g.n_source()).map(|u| g.joint.row(u).collect()).collect();
    let mut order: Vec<usize> = (0..nr).collect();
    let mut in_c = vec![false; nr];
    let mut failures = 0;
    for i in 0..checks {
        in_c.iter_mut().for_each(|x| *x = false);
        let mut mass = 0.0;
        if i % 2 == 0 {
            // minimal random sets are the hardest
            for j in (1..nr).rev() {
                order.swap(j, rng.gen_range(0..=j));
            }
            for &v in &order {
                if mass >= delta {
                    break;
                }
                in_c[v] = true;
                mass += g.target_measure[v];
            }
        } else {
            let p: f64 = rng.gen_range(delta.min(1.0)..=1.0);
            for v in 0..nr {
                if rng.gen::<f64>() < p {
                    in_c[v] = true;
                    mass += g.target_measure[v];
                }
            }
        }
        if mass < delta - 1e-12 {
            continue;
        }
        let pr_t: f64 = rows
            .iter()
            .enumerate()
            .filter(|(u, row)| {
                let hit: f64 = row.iter().filter(|(v, _)| in_c[*v]).map(|x| x.1).sum();
                hit / g.source_measure[*u] >= delta / 3.0 - 1e-12
            })
            .map(|(u, _)| g.source_measure[u])
            .sum();
        if pr_t < 1.0 / 3.0 - 1e-12 {
            failures += 1;
        }
    }
    failures
}

/// Bipartite expansion from the columns of an unnormalized joint: each item lists the
/// (left vertex, weight) entries of one right vertex. The Gram matrix on the left side
/// is accumulated without materializing the right side.
pub fn bipartite_norm_from_columns<I>(n_left: usize, columns: I) -> Result<f64>
where
    I: IntoIterator<Item = Vec<(usize, f64)>>,
{
    let mut k = Mat::<f64>::zeros(n_left, n_left);
    let mut pi = vec![0.0; n_left];
    let mut total = 0.0;
    for col in columns {
        let sigma: f64 = col.iter().map(|x| x.1).sum();
        if sigma <= 0.0 {
            continue;
        }
        total += sigma;
        for &(u, x) in &col {
            pi[u] += x;
            for &(v, y) in &col {
                k[(u, v)] += x * y / sigma;
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::EmptyWalk);
    }
    let live: Vec<usize> = (0..n_left).filter(|&u| pi[u] > 0.0).collect();
    let m = live.len();
    if m <= 1 {
        return Ok(0.0);
    }
    let mut g = Mat::<f64>::zeros(m, m);
    for (i, &u) in live.iter().enumerate() {
        for (j, &v) in live.iter().enumerate() {
            g[(i, j)] = k[(u, v)] / (pi[u] * pi[v]).sqrt() - (pi[u] * pi[v]).sqrt() / total;
        }
    }
    let ev = sym_eigenvalues(&g)?;
    Ok(ev[m - 1].max(0.0).sqrt())
}

/// Part labels: 0 = A, 1 = B, 2 = C. For bipartite graphs, `left` labels the source side and
/// `right` the target side and probabilities are over the whole vertex set (each side weight 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmostCutCheck {
    pub pr_a: f64,
    pub pr_b: f64,
    pub pr_c: f64,
    pub cut_ab: f64,
    pub lambda: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn almost_cut_check(g: &MarkovOperator, parts: &[u8]) -> Result<AlmostCutCheck> {
    if !g.square {
        return Err(Error::NotSquare);
    }
    let lambda = square_spectrum(g)?.two_sided();
    let pr = |p: u8| -> f64 { (0..g.n_source()).filter(|&u| parts[u] == p).map(|u| g.source_measure[u]).sum() };
    let (a, b, cc) = (pr(0), pr(1), pr(2));
    if a > b + 1e-15 {
        return Err(Error::OrderingViolated { a, b });
    }
    let mut cut = 0.0;
    for u in (0..g.n_source()).filter(|&u| parts[u] == 0) {
        cut += g.joint.row(u).filter(|(v, _)| parts[*v] == 1).map(|x| x.1).sum::<f64>();
    }
    let rhs = if b > 0.0 && lambda < 1.0 { (cut + lambda * cc) / ((1.0 - lambda) * b) } else { f64::INFINITY };
    Ok(AlmostCutCheck { pr_a: a, pr_b: b, pr_c: cc, cut_ab: cut, lambda, rhs, pass: a <= rhs + 1e-9 })
}

pub fn almost_cut_bipartite_check(g: &MarkovOperator, left: &[u8], right: &[u8]) -> Result<AlmostCutCheck> {
    let lambda = bipartite_norm(g)?.lambda_bip;
    if lambda >= 0.5 {
        return Err(Error::NotApplicable(format!("bipartite lambda {lambda} >= 1/2")));
    }
    let side = |m: &[f64], lab: &[u8], p: u8| -> f64 { m.iter().zip(lab).filter(|x| *x.1 == p).map(|x| x.0).sum() };
    let pr = |p: u8| (side(&g.source_measure, left, p) + side(&g.target_measure, right, p)) / 2.0;
    let (a, b, cc) = (pr(0), pr(1), pr(2));
    if a > b + 1e-15 {
        return Err(Error::OrderingViolated { a, b });
    }
    let mut cut = 0.0;
    for u in 0..g.n_source() {
        for (v, p) in g.joint.row(u) {
            if (left[u] == 0 && right[v] == 1) || (left[u] == 1 && right[v] == 0) {
                cut += p;
            }
        }
    }
    let rhs = if b > 0.0 { (cut + 4.0 * lambda * cc) / (2.0 * (1.0 - 2.0 * lambda) * b) } else { f64::INFINITY };
    Ok(AlmostCutCheck { pr_a: a, pr_b: b, pr_c: cc, cut_ab: cut, lambda, rhs, pass: a <= rhs + 1e-9 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeExpansion {
    pub phi: f64,
    pub lambda2: f64,
    pub cheeger_lower: f64,
    pub cheeger_upper: f64,
    pub sandwich_holds: bool,
    pub exact: bool,
}

pub const EDGE_EXPANSION_MAX_VERTICES: usize = 24;

/// Φ(G) = min over 0 < Pr[S] ≤ 1/2 of Pr[E(S, S^c)]/Pr[S], by Gray-code enumeration.
pub fn edge_expansion_exact(g: &MarkovOperator) -> Result<EdgeExpansion> {
    if !g.square {
        return Err(Error::NotSquare);
    }
    let n = g.n_source();
    if n > EDGE_EXPANSION_MAX_VERTICES {
        return Err(Error::TooLarge(n));
    }
    let lambda2 = square_spectrum(g)?.lambda2;
    let dense = g.joint.to_dense();
    let pi = &g.source_measure;
    let mut in_s = vec![false; n];
    let (mut ps, mut cut) = (0.0f64, 0.0f64);
    let mut phi = f64::INFINITY;
    for i in 1u64..(1u64 << n) {
        let v = i.trailing_zeros() as usize;
        // flipping v changes the cut by its edges to the other side minus edges to its own side
        let (mut to_s, mut to_out) = (0.0, 0.0);
        for w in 0..n {
            if w == v {
                continue;
            }
            if in_s[w] {
                to_s += dense[v][w] + dense[w][v];
            } else {
                to_out += dense[v][w] + dense[w][v];
            }
        }
        if in_s[v] {
            in_s[v] = false;
            ps -= pi[v];
            cut += to_s / 2.0 - to_out / 2.0;
        } else {
            in_s[v] = true;
            ps += pi[v];
            cut += to_out / 2.0 - to_s / 2.0;
        }
        if ps > 1e-15 && ps <= 0.5 + 1e-12 {
            phi = phi.min(cut.max(0.0) / ps);
        }
    }
    if !phi.is_finite() {
        phi = 0.0;
    }
    let cheeger_lower = (1.0 - lambda2) / 2.0;
    let cheeger_upper = (2.0 * (1.0 - lambda2)).max(0.0).sqrt();
    Ok(EdgeExpansion {
        phi,
        lambda2,
        cheeger_lower,
        cheeger_upper,
        sandwich_holds: cheeger_lower <= phi + 1e-9 && phi <= cheeger_upper + 1e-9,
        exact: true,
    })
}

/// Exact Φ when small enough, otherwise the Cheeger lower bound (1 − λ2)/2.
pub fn edge_expansion_or_cheeger(g: &MarkovOperator) -> Result<EdgeExpansion> {
    if g.n_source() <= EDGE_EXPANSION_MAX_VERTICES {
        return edge_expansion_exact(g);
    }
    let lambda2 = square_spectrum(g)?.lambda2;
    let lo = (1.0 - lambda2) / 2.0;
    Ok(EdgeExpansion {
        phi: lo,
        lambda2,
        cheeger_lower: lo,
        cheeger_upper: (2.0 * (1.0 - lambda2)).max(0.0).sqrt(),
        sandwich_holds: true,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub cross: f64,
    pub hypothesis: bool,
    pub max_part: f64,
    pub pass: bool,
}

/// If (1/2)·Σ_i Pr[E(B_i, B_i^c)] < c/2 then some part has Pr[B_i] ≥ 1/2.
pub fn partition_property_check(g: &MarkovOperator, labels: &[usize], c: f64) -> Result<PartitionCheck> {
    if !g.square {
        return Err(Error::NotSquare);
    }
    let parts = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut mass = vec![0.0; parts];
    let mut out = 0.0;
    for u in 0..g.n_source() {
        mass[labels[u]] += g.source_measure[u];
        out += g.joint.row(u).filter(|(v, _)| labels[*v] != labels[u]).map(|x| x.1).sum::<f64>();
    }
    let cross = out / 2.0;
    let hypothesis = cross < c / 2.0;
    let max_part = mass.iter().cloned().fold(0.0, f64::max);
    Ok(PartitionCheck { cross, hypothesis, max_part, pass: !hypothesis || max_part >= 0.5 - 1e-12 })
}

/// Closed-form sizes used by several checks.
pub fn complete_link_expansion(n: usize, d: usize) -> f64 {
    1.0 / (n - d) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::*;

    fn complete_graph(n: usize) -> MarkovOperator {
        let mut e = Vec::new();
        for a in 0..n as u32 {
            for b in a + 1..n as u32 {
                e.push((a, b, 1.0));
            }
        }
        graph_operator(&e).unwrap().0
    }

    #[test]
    fn complete_graph_spectrum() {
        for n in [3usize, 5, 9] {
            let r = square_spectrum(&complete_graph(n)).unwrap();
            assert!((r.lambda2 + 1.0 / (n - 1) as f64).abs() < 1e-12);
            assert!((r.two_sided() - 1.0 / (n - 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_lambda2_one() {
        let op = MarkovOperator::from_joint(4, 4, true, (0..4).map(|i| (i, i, 0.25)).collect()).unwrap();
        assert!((square_spectrum(&op).unwrap().lambda2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_walk_psd() {
        let c = Complex::complete(7, 3).unwrap();
        let r = square_spectrum(&lower_walk(&c, 2, 0).unwrap()).unwrap();
        assert!(r.lambda_min > -1e-10);
    }

    #[test]
    fn dense_and_iterative_agree() {
        let c = Complex::complete(9, 3).unwrap();
        let op = complement_walk(&c, 1, 1).unwrap();
        let d = square_spectrum_with(&op, Method::Dense).unwrap();
        let i = square_spectrum_with(&op, Method::Iterative).unwrap();
        assert!((d.lambda2 - i.lambda2).abs() < 1e-7, "{d:?} {i:?}");
        assert!((d.lambda_min - i.lambda_min).abs() < 1e-7);
    }

    #[test]
    fn complete_bipartite_is_zero() {
        let c = Complex::partite_complete(&[3, 4]).unwrap();
        let (op, _, _) = colored_walk(&c, &[0], &[1]).unwrap();
        assert!(bipartite_norm(&op).unwrap().lambda_bip < 1e-12);
    }

    #[test]
    fn bipartite_reverse_symmetric() {
        let c = Complex::complete(8, 4).unwrap();
        let op = containment_operator(&c, 3, 0).unwrap();
        let a = bipartite_norm(&op).unwrap().lambda_bip;
        let b = bipartite_norm(&op.reverse()).unwrap().lambda_bip;
        assert!((a - b).abs() < 1e-10);
        // vertex vs k-face containment on the complete complex: sqrt(1/(k+1)) up to o(1)
        let c = Complex::complete(20, 4).unwrap();
        let op = containment_operator(&c, 4, 0).unwrap();
        let s = bipartite_norm(&op).unwrap().lambda_bip;
        assert!(s <= (1.0f64 / 5.0).sqrt() + 0.05, "{s}");
    }

    #[test]
    fn gram_and_iterative_bipartite_paths() {
        let c = Complex::complete(14, 5).unwrap();
        let op = containment_operator(&c, 5, 0).unwrap();
        assert!(op.n_source() * op.n_target() > DENSE_SVD_ENTRIES / 100);
        let gram = bipartite_norm(&op).unwrap();
        let direct = {
            let c = Complex::complete(14, 5).unwrap();
            let big = containment_operator(&c, 5, 0).unwrap();
            let t = big.reverse();
            let walk = t.then(&big);
            let mut w = walk.clone();
            w.square = true;
            square_spectrum(&w).unwrap().lambda2.sqrt()
        };
        assert!((gram.lambda_bip - direct).abs() < 1e-7);
    }

    #[test]
    fn link_expansion_complete() {
        for (n, d) in [(6usize, 2usize), (7, 3), (8, 2)] {
            let c = Complex::complete(n, d).unwrap();
            let v = link_expansion(&c, true).unwrap().value;
            assert!((v - 1.0 / (n - d) as f64).abs() < 1e-12);
            let e = Complex::build_from_top_faces(n, c.top_faces()).unwrap();
            assert!((link_expansion(&e, true).unwrap().value - v).abs() < 1e-12);
        }
        let c = Complex::partite_complete(&[3, 3]).unwrap();
        assert!(link_expansion(&c, false).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn complement_bound_small() {
        let c = Complex::complete(12, 3).unwrap();
        let r = verify_complement_bound(&c, 0, 0).unwrap();
        assert!((r.lhs - 1.0 / 11.0).abs() < 1e-12 && r.pass);
        let s = Complex::complete(5, 4).unwrap();
        assert!(verify_complement_bound(&s, 1, 1).unwrap().pass);
    }

    #[test]
    fn trickling_complete_partite() {
        let c = Complex::partite_complete(&[3, 3, 3]).unwrap();
        let r = verify_trickling(&c).unwrap();
        assert!(r.lhs < 1e-10 && r.eta < 1e-10 && r.pass);
    }

    #[test]
    fn fixed_union_top_case_is_complement() {
        let c = Complex::complete(9, 4).unwrap();
        let r = verify_fixed_union_bound(&c, 1, 2).unwrap();
        let comp = bipartite_norm(&complement_walk(&c, 1, 1).unwrap()).unwrap().lambda_bip;
        assert!((r.lhs - comp).abs() < 1e-10);
    }

    #[test]
    fn mixing_full_sets_and_eml() {
        let c = Complex::complete(8, 3).unwrap();
        let l0 = c.level(0);
        let a: Vec<Face> = l0.faces[..3].to_vec();
        let b: Vec<Face> = l0.faces[3..].to_vec();
        let r = mixing_check(&c, &[(0, a.clone()), (0, b.clone())]).unwrap();
        // classical EML on the complete graph
        let (pa, pb): (f64, f64) = (3.0 / 8.0, 5.0 / 8.0);
        let bound = (1.0 / 7.0) * (pa * pb * (1.0 - pa) * (1.0 - pb)).sqrt();
        assert!((r.measured / 2.0 - pa * pb).abs() <= bound + 1e-12);
        assert!(mixing_check(&c, &[(0, a.clone()), (0, a)]).is_err());
        let full = mixing_check(&c, &[(2, c.level(2).faces.clone())]).unwrap();
        assert!(full.deviation < 1e-12);
    }

    #[test]
    fn partite_mixing_full() {
        let c = Complex::partite_complete(&[3, 3, 3]).unwrap();
        let (f0, _) = c.colored_level(&[0]).unwrap();
        let (f12, _) = c.colored_level(&[1, 2]).unwrap();
        let r = partite_mixing_check(&c, &[(vec![0], f0), (vec![1, 2], f12)]).unwrap();
        assert!(r.deviation < 1e-12);
    }

    #[test]
    fn sampler_trivial_cases() {
        let c = Complex::partite_complete(&[3, 4]).unwrap();
        let (op, _, _) = colored_walk(&c, &[0], &[1]).unwrap();
        let r = sampler_check(&op, &[0, 1], 0.1).unwrap();
        assert!(r.pr_t == 0.0 && r.pass);
        let r = sampler_check(&op, &[0, 1, 2, 3], 0.1).unwrap();
        assert!(r.pr_t == 0.0);
    }

    #[test]
    fn almost_cut_square() {
        let g = complete_graph(6);
        let r = almost_cut_check(&g, &[0, 0, 1, 1, 1, 1]).unwrap();
        assert!(r.pass);
        let r = almost_cut_check(&g, &[2, 2, 1, 1, 1, 1]).unwrap();
        assert!(r.pr_a == 0.0 && r.pass);
        assert!(matches!(almost_cut_check(&g, &[0, 0, 0, 1, 1, 2]), Err(Error::OrderingViolated { .. })));
    }

    #[test]
    fn almost_cut_bipartite_one_side_instance() {
        // A and B both on one side of a complete bipartite graph: the stated inequality fails
        let c = Complex::partite_complete(&[4, 4]).unwrap();
        let (op, _, _) = colored_walk(&c, &[0], &[1]).unwrap();
        let r = almost_cut_bipartite_check(&op, &[0, 0, 1, 1], &[2, 2, 2, 2]).unwrap();
        assert!(!r.pass, "{r:?}");
    }

    #[test]
    fn edge_expansion_k4() {
        let g = complete_graph(4);
        let r = edge_expansion_exact(&g).unwrap();
        // S of two vertices: 2 of 3 steps leave
        assert!((r.phi - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.sandwich_holds);
        let disc = graph_operator(&[(0, 1, 1.0), (2, 3, 1.0)]).unwrap().0;
        assert_eq!(edge_expansion_exact(&disc).unwrap().phi, 0.0);
    }

    #[test]
    fn partition_trivial() {
        let g = complete_graph(5);
        assert!(partition_property_check(&g, &[0; 5], 0.5).unwrap().pass);
        let r = partition_property_check(&g, &[0, 1, 2, 3, 4], 0.5).unwrap();
        assert!(!r.hypothesis && r.pass);
    }
}
