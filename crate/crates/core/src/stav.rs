//! STAV structures: set, test-face, anchor and vertex layers with their three joint distributions.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::complex::{binomial, is_sorted_subset, Complex, Face};
use crate::error::{Error, Result};
use crate::spectra::{self, bipartite_norm, square_spectrum};
use crate::walks::{self, MarkovOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StavKind {
    Hdx,
    PartiteIj,
    Neighborhood,
    Grassmann,
    Custom,
}

/// Test distribution over (s1, t, s2), self-contained with its own layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StsDistribution {
    pub s_sets: Vec<Vec<u32>>,
    pub t_sets: Vec<Vec<u32>>,
    pub entries: Vec<(u32, u32, u32, f64)>,
}

/// Layers are point sets over V = 0..n_points. Joint tables are sparse and sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StavInstance {
    pub kind: StavKind,
    pub n_points: usize,
    pub s_sets: Vec<Vec<u32>>,
    pub t_sets: Vec<Vec<u32>>,
    pub a_sets: Vec<Vec<u32>>,
    /// (s, t, a, v, p)
    pub d_stav: Vec<(u32, u32, u32, u32, f64)>,
    /// (s1, t, s2, p)
    pub sts: Vec<(u32, u32, u32, f64)>,
    /// (v, a1, s, a2, p)
    pub vasa: Option<Vec<(u32, u32, u32, u32, f64)>>,
    /// V when it is a proper subset of the points
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_points: Option<Vec<u32>>,
    #[serde(skip)]
    index: OnceLock<Arc<StavIndex>>,
}

#[derive(Debug, Default)]
pub struct StavIndex {
    pub d_by_s: Vec<Vec<u32>>,
    pub d_by_t: Vec<Vec<u32>>,
    pub d_by_a: Vec<Vec<u32>>,
    pub sts_by_t: Vec<Vec<u32>>,
    pub vasa_by_v: Vec<Vec<u32>>,
    pub vasa_by_a1: Vec<Vec<u32>>,
    /// t ⊇ a as point sets
    pub t_of_a: Vec<Vec<u32>>,
    /// sorted neighbors of a in the reach graph
    pub reach: Vec<Vec<u32>>,
    pub s_measure: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub total_mass: f64,
    pub v_uniform_residual: f64,
    pub conditional_independence_residual: f64,
    pub sts_symmetry_residual: f64,
    pub sts_marginal_residual: f64,
    pub vasa_symmetry_residual: f64,
    pub vasa_marginal_residual: f64,
    pub zero_probability_elements: usize,
    pub support_violations: usize,
}

pub const INVARIANT_TOL: f64 = 1e-9;

impl InvariantReport {
    pub fn holds(&self) -> bool {
        (self.total_mass - 1.0).abs() <= INVARIANT_TOL
            && self.v_uniform_residual <= INVARIANT_TOL
            && self.conditional_independence_residual <= INVARIANT_TOL
            && self.sts_symmetry_residual <= INVARIANT_TOL
            && self.sts_marginal_residual <= INVARIANT_TOL
            && self.vasa_symmetry_residual <= INVARIANT_TOL
            && self.vasa_marginal_residual <= INVARIANT_TOL
            && self.zero_probability_elements == 0
            && self.support_violations == 0
    }

    pub fn first_failure(&self) -> Option<String> {
        let checks = [
            ("total mass", (self.total_mass - 1.0).abs()),
            ("uniform v-marginal", self.v_uniform_residual),
            ("conditional independence of (a,v) from s", self.conditional_independence_residual),
            ("sts symmetry", self.sts_symmetry_residual),
            ("sts (s,t) marginal", self.sts_marginal_residual),
            ("vasa symmetry", self.vasa_symmetry_residual),
            ("vasa (v,a,s) marginal", self.vasa_marginal_residual),
        ];
        for (name, r) in checks {
            if r > INVARIANT_TOL {
                return Some(format!("{name} residual {r:e}"));
            }
        }
        if self.zero_probability_elements > 0 {
            return Some(format!("{} layer elements have probability zero", self.zero_probability_elements));
        }
        if self.support_violations > 0 {
            return Some(format!("{} table entries violate containment", self.support_violations));
        }
        None
    }
}

fn max_abs_diff<K: std::hash::Hash + Eq>(a: &HashMap<K, f64>, b: &HashMap<K, f64>) -> f64 {
    let mut r = 0.0f64;
    for (k, x) in a {
        r = r.max((x - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, y) in b {
        if !a.contains_key(k) {
            r = r.max(y.abs());
        }
    }
    r
}

impl StavInstance {
    pub fn new(
        kind: StavKind,
        n_points: usize,
        s_sets: Vec<Vec<u32>>,
        t_sets: Vec<Vec<u32>>,
        a_sets: Vec<Vec<u32>>,
        d_stav: Vec<(u32, u32, u32, u32, f64)>,
        sts: Vec<(u32, u32, u32, f64)>,
        vasa: Option<Vec<(u32, u32, u32, u32, f64)>>,
    ) -> StavInstance {
        StavInstance { kind, n_points, s_sets, t_sets, a_sets, d_stav, sts, vasa, v_points: None, index: OnceLock::new() }
    }

    pub fn with_v_points(mut self, v: Vec<u32>) -> StavInstance {
        self.v_points = Some(v);
        self
    }

    pub fn v_layer(&self) -> Vec<u32> {
        match &self.v_points {
            Some(v) => v.clone(),
            None => (0..self.n_points as u32).collect(),
        }
    }

    /// Loader entry point: rejects any instance whose invariants fail.
    pub fn validated(self) -> Result<StavInstance> {
        self.check_shape()?;
        let r = self.check_invariants();
        match r.first_failure() {
            Some(msg) => Err(Error::InvalidStav(msg)),
            None => Ok(self),
        }
    }

    fn check_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidStav(m));
        for (name, layer) in [("s", &self.s_sets), ("t", &self.t_sets), ("a", &self.a_sets)] {
            for set in layer.iter() {
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!("{name} set {set:?} not strictly increasing"));
                }
                if set.iter().any(|&v| v as usize >= self.n_points) {
                    return bad(format!("{name} set {set:?} has a point outside 0..{}", self.n_points));
                }
            }
        }
        if let Some(vp) = &self.v_points {
            if vp.windows(2).any(|w| w[0] >= w[1]) || vp.iter().any(|&v| v as usize >= self.n_points) {
                return bad("v_points must be increasing and inside the point range".into());
            }
        }
        let (ns, nt, na, nv) = (self.s_sets.len(), self.t_sets.len(), self.a_sets.len(), self.n_points);
        for &(s, t, a, v, p) in &self.d_stav {
            if s as usize >= ns || t as usize >= nt || a as usize >= na || v as usize >= nv || !(p >= 0.0) {
                return bad(format!("d_stav entry ({s},{t},{a},{v},{p}) out of range"));
            }
        }
        for &(s1, t, s2, p) in &self.sts {
            if s1 as usize >= ns || s2 as usize >= ns || t as usize >= nt || !(p >= 0.0) {
                return bad(format!("sts entry ({s1},{t},{s2},{p}) out of range"));
            }
        }
        if let Some(vasa) = &self.vasa {
            for &(v, a1, s, a2, p) in vasa {
                if v as usize >= nv || a1 as usize >= na || a2 as usize >= na || s as usize >= ns || !(p >= 0.0) {
                    return bad(format!("vasa entry ({v},{a1},{s},{a2},{p}) out of range"));
                }
            }
        }
        Ok(())
    }

    pub fn index(&self) -> Arc<StavIndex> {
        self.index.get_or_init(|| Arc::new(self.build_index())).clone()
    }

    fn build_index(&self) -> StavIndex {
        let (ns, nt, na, nv) = (self.s_sets.len(), self.t_sets.len(), self.a_sets.len(), self.n_points);
        let mut ix = StavIndex {
            d_by_s: vec![Vec::new(); ns],
            d_by_t: vec![Vec::new(); nt],
            d_by_a: vec![Vec::new(); na],
            sts_by_t: vec![Vec::new(); nt],
            vasa_by_v: vec![Vec::new(); nv],
            vasa_by_a1: vec![Vec::new(); na],
            t_of_a: vec![Vec::new(); na],
            reach: vec![Vec::new(); na],
            s_measure: vec![0.0; ns],
        };
        for (i, &(s, t, a, v, p)) in self.d_stav.iter().enumerate() {
            ix.d_by_s[s as usize].push(i as u32);
            ix.d_by_t[t as usize].push(i as u32);
            ix.d_by_a[a as usize].push(i as u32);
            ix.s_measure[s as usize] += p;
            if p > 0.0 {
                ix.reach[a as usize].push(v);
            }
        }
        for r in ix.reach.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        for (i, e) in self.sts.iter().enumerate() {
            ix.sts_by_t[e.1 as usize].push(i as u32);
        }
        if let Some(vasa) = &self.vasa {
            for (i, e) in vasa.iter().enumerate() {
                ix.vasa_by_v[e.0 as usize].push(i as u32);
                ix.vasa_by_a1[e.1 as usize].push(i as u32);
            }
        }
        let mut by_first: HashMap<u32, Vec<u32>> = HashMap::new();
        for (i, a) in self.a_sets.iter().enumerate() {
            if let Some(&p) = a.first() {
                by_first.entry(p).or_default().push(i as u32);
            }
        }
        for (ti, t) in self.t_sets.iter().enumerate() {
            for p in t {
                if let Some(list) = by_first.get(p) {
                    for &a in list {
                        if is_sorted_subset(&self.a_sets[a as usize], t) {
                            ix.t_of_a[a as usize].push(ti as u32);
                        }
                    }
                }
            }
        }
        ix
    }

    pub fn sts_distribution(&self) -> StsDistribution {
        StsDistribution { s_sets: self.s_sets.clone(), t_sets: self.t_sets.clone(), entries: self.sts.clone() }
    }

    /// Exact summation of every marginal and symmetry condition.
    pub fn check_invariants(&self) -> InvariantReport {
        let total_mass: f64 = self.d_stav.iter().map(|e| e.4).sum();
        let mut pv = vec![0.0; self.n_points];
        let mut ps = vec![0.0; self.s_sets.len()];
        let mut pt = vec![0.0; self.t_sets.len()];
        let mut pa = vec![0.0; self.a_sets.len()];
        let mut pst: HashMap<(u32, u32), f64> = HashMap::new();
        let mut ptav: HashMap<(u32, u32, u32), f64> = HashMap::new();
        let mut pvas: HashMap<(u32, u32, u32), f64> = HashMap::new();
        let mut support_violations = 0;
        for &(s, t, a, v, p) in &self.d_stav {
            pv[v as usize] += p;
            ps[s as usize] += p;
            pt[t as usize] += p;
            pa[a as usize] += p;
            *pst.entry((s, t)).or_default() += p;
            *ptav.entry((t, a, v)).or_default() += p;
            *pvas.entry((v, a, s)).or_default() += p;
            let (tset, aset) = (&self.t_sets[t as usize], &self.a_sets[a as usize]);
            if !is_sorted_subset(tset, &self.s_sets[s as usize])
                || !is_sorted_subset(aset, tset)
                || tset.binary_search(&v).is_err()
                || aset.binary_search(&v).is_ok()
            {
                support_violations += 1;
            }
        }
        let v_layer = self.v_layer();
        let uniform = total_mass / v_layer.len().max(1) as f64;
        let v_uniform_residual = v_layer.iter().map(|&v| (pv[v as usize] - uniform).abs()).fold(0.0, f64::max);
        let outside: f64 = (0..self.n_points as u32).filter(|v| v_layer.binary_search(v).is_err()).map(|v| pv[v as usize]).sum();
        if outside > 0.0 {
            support_violations += 1;
        }
        let mut ci = 0.0f64;
        for &(s, t, a, v, p) in &self.d_stav {
            let lhs = p / pst[&(s, t)];
            let rhs = ptav[&(t, a, v)] / pt[t as usize];
            ci = ci.max((lhs - rhs).abs());
        }
        let mut sts_fwd: HashMap<(u32, u32, u32), f64> = HashMap::new();
        let mut sts_marg: HashMap<(u32, u32), f64> = HashMap::new();
        for &(s1, t, s2, p) in &self.sts {
            *sts_fwd.entry((s1, t, s2)).or_default() += p;
            *sts_marg.entry((s1, t)).or_default() += p;
            let tset = &self.t_sets[t as usize];
            if !is_sorted_subset(tset, &self.s_sets[s1 as usize]) || !is_sorted_subset(tset, &self.s_sets[s2 as usize]) {
                support_violations += 1;
            }
        }
        let sts_rev: HashMap<(u32, u32, u32), f64> = sts_fwd.iter().map(|(&(a, t, b), &p)| ((b, t, a), p)).collect();
        let sts_symmetry_residual = max_abs_diff(&sts_fwd, &sts_rev);
        let sts_marginal_residual = max_abs_diff(&sts_marg, &pst);
        let (mut vasa_symmetry_residual, mut vasa_marginal_residual) = (0.0, 0.0);
        if let Some(vasa) = &self.vasa {
            let mut fwd: HashMap<(u32, u32, u32, u32), f64> = HashMap::new();
            let mut marg: HashMap<(u32, u32, u32), f64> = HashMap::new();
            for &(v, a1, s, a2, p) in vasa {
                *fwd.entry((v, a1, s, a2)).or_default() += p;
                *marg.entry((v, a1, s)).or_default() += p;
                let sset = &self.s_sets[s as usize];
                if sset.binary_search(&v).is_err()
                    || !is_sorted_subset(&self.a_sets[a1 as usize], sset)
                    || !is_sorted_subset(&self.a_sets[a2 as usize], sset)
                {
                    support_violations += 1;
                }
            }
            let rev: HashMap<(u32, u32, u32, u32), f64> =
                fwd.iter().map(|(&(v, a1, s, a2), &p)| ((v, a2, s, a1), p)).collect();
            vasa_symmetry_residual = max_abs_diff(&fwd, &rev);
            vasa_marginal_residual = max_abs_diff(&marg, &pvas);
        }
        let pv: Vec<f64> = v_layer.iter().map(|&v| pv[v as usize]).collect();
        let zero_probability_elements = pv.iter().chain(&ps).chain(&pt).chain(&pa).filter(|&&x| !(x > 0.0)).count();
        InvariantReport {
            total_mass,
            v_uniform_residual,
            conditional_independence_residual: ci,
            sts_symmetry_residual,
            sts_marginal_residual,
            vasa_symmetry_residual,
            vasa_marginal_residual,
            zero_probability_elements,
            support_violations,
        }
    }
}

fn faces_to_sets(faces: &[Face]) -> Vec<Vec<u32>> {
    faces.iter().map(|f| f.to_vec()).collect()
}

pub(crate) fn check_cap(what: &str, need: f64) -> Result<()> {
    caps::check(what, need, caps::table_cap())
}

/// Pairs each t with the list of (s, joint weight) and returns the independent-pair STS.
pub(crate) fn independent_sts(groups: &[Vec<(u32, f64)>]) -> Vec<(u32, u32, u32, f64)> {
    let mut out = Vec::new();
    for (t, g) in groups.iter().enumerate() {
        let pt: f64 = g.iter().map(|x| x.1).sum();
        if pt <= 0.0 {
            continue;
        }
        for &(s1, w1) in g {
            for &(s2, w2) in g {
                out.push((s1, t as u32, s2, w1 * w2 / pt));
            }
        }
    }
    out
}

/// S = X(d), T = X(l), A = X(l−1), V = X(0); t uniform in s, split uniformly into a ⊔ {v};
/// STS draws s1, s2 ⊇ t independently; VASA draws disjoint a1, a2, v inside s.
pub fn hdx_stav(c: &Complex, d: usize, l: usize) -> Result<StavInstance> {
    if l < 1 || 2 * l + 2 > d || d as isize > c.dim() {
        return Err(Error::ParameterRange(format!("hdx STAV needs 1 <= l, 2l+2 <= d <= dim; got d={d}, l={l}")));
    }
    let ns = c.level_size(d as isize) as f64;
    let sub = binomial(d + 1, l + 1);
    check_cap("d_stav entries", ns * sub * (l + 1) as f64)?;
    check_cap("vasa entries", ns * binomial(d + 1, l) * binomial(d + 1 - l, l) * (d + 1 - 2 * l) as f64)?;
    let sl = c.level(d as isize);
    let tl = c.level(l as isize);
    let al = c.level(l as isize - 1);
    let per_t = 1.0 / sub;
    let mut d_stav = Vec::new();
    let mut groups: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    let mut sts_size = 0.0;
    for (si, (s, &m)) in sl.faces.iter().zip(&sl.measure).enumerate() {
        for t in s.subfaces(l + 1) {
            let ti = tl.position(&t).unwrap();
            groups[ti].push((si as u32, m * per_t));
            for &v in t.iter() {
                let a = Face::from_sorted(t.iter().copied().filter(|&x| x != v).collect());
                let ai = al.position(&a).unwrap();
                d_stav.push((si as u32, ti as u32, ai as u32, v, m * per_t / (l + 1) as f64));
            }
        }
    }
    for g in &groups {
        sts_size += (g.len() * g.len()) as f64;
    }
    check_cap("sts entries", sts_size)?;
    let sts = independent_sts(&groups);
    let mut vasa = Vec::new();
    for (si, (s, &m)) in sl.faces.iter().zip(&sl.measure).enumerate() {
        let mut local = Vec::new();
        for a1 in s.subfaces(l) {
            let rest = s.minus(&a1);
            for a2 in rest.subfaces(l) {
                for &v in rest.minus(&a2).iter() {
                    local.push((v, al.position(&a1).unwrap() as u32, al.position(&a2).unwrap() as u32));
                }
            }
        }
        let p = m / local.len() as f64;
        vasa.extend(local.into_iter().map(|(v, a1, a2)| (v, a1, si as u32, a2, p)));
    }
    Ok(StavInstance::new(
        StavKind::Hdx,
        c.n_vertices(),
        faces_to_sets(&sl.faces),
        faces_to_sets(&tl.faces),
        faces_to_sets(&al.faces),
        d_stav,
        sts,
        Some(vasa),
    ))
}

fn color_parts(c: &Complex, i_colors: &[usize], j_colors: &[usize], k: usize) -> Result<usize> {
    let _ = c.coloring().ok_or(Error::NotPartite)?;
    let l = i_colors.len();
    if l == 0 || j_colors.len() != l {
        return Err(Error::ColorSize(format!("|I| = {l}, |J| = {} must be equal and positive", j_colors.len())));
    }
    if i_colors.iter().any(|x| j_colors.contains(x)) {
        return Err(Error::OverlappingColors);
    }
    let d = c.d();
    if i_colors.iter().chain(j_colors).any(|&x| x > d) {
        return Err(Error::ColorSize(format!("colors must lie in [0, {d}]")));
    }
    if k < 4 * l + 4 || k > d {
        return Err(Error::ParameterRange(format!("partite STAV needs 4l+4 <= k <= d; got k={k}, l={l}")));
    }
    Ok(l)
}

/// The I,J-STAV of a partite complex. S = k-faces whose colors contain I ⊔ J; t is the I-part
/// or the J-part of s plus one vertex of another color; VASA takes a1, a2 as the I- and J-parts.
pub fn partite_ij_stav(c: &Complex, i_colors: &[usize], j_colors: &[usize], k: usize) -> Result<StavInstance> {
    let l = color_parts(c, i_colors, j_colors, k)?;
    let col = c.coloring().unwrap();
    let kl = c.level(k as isize);
    check_cap("d_stav entries", kl.len() as f64 * 2.0 * (k + 1) as f64)?;
    let mut s_sets = Vec::new();
    let mut s_w = Vec::new();
    for (s, &m) in kl.faces.iter().zip(&kl.measure) {
        let cs: Vec<usize> = s.iter().map(|&v| col[v as usize]).collect();
        if i_colors.iter().chain(j_colors).all(|x| cs.contains(x)) {
            s_sets.push(s.to_vec());
            s_w.push(m);
        }
    }
    if s_sets.is_empty() {
        return Err(Error::EmptyWalk);
    }
    let total: f64 = s_w.iter().sum();
    let mut t_ids: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut a_ids: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut t_sets = Vec::new();
    let mut a_sets = Vec::new();
    let intern = |map: &mut HashMap<Vec<u32>, u32>, sets: &mut Vec<Vec<u32>>, f: Vec<u32>| -> u32 {
        if let Some(&i) = map.get(&f) {
            return i;
        }
        let i = sets.len() as u32;
        map.insert(f.clone(), i);
        sets.push(f);
        i
    };
    let mut d_stav = Vec::new();
    let mut vasa = Vec::new();
    let mut groups: HashMap<u32, Vec<(u32, f64)>> = HashMap::new();
    for (si, s) in s_sets.iter().enumerate() {
        let ps = s_w[si] / total;
        let part = |cols: &[usize]| -> Vec<u32> { s.iter().copied().filter(|&v| cols.contains(&col[v as usize])).collect() };
        let (ai_set, aj_set) = (part(i_colors), part(j_colors));
        let others: Vec<u32> =
            s.iter().copied().filter(|&v| !i_colors.contains(&col[v as usize]) && !j_colors.contains(&col[v as usize])).collect();
        let ai = intern(&mut a_ids, &mut a_sets, ai_set.clone());
        let aj = intern(&mut a_ids, &mut a_sets, aj_set.clone());
        let per = ps / (2 * others.len()) as f64;
        for &v in &others {
            for (a, aset) in [(ai, &ai_set), (aj, &aj_set)] {
                let mut t = aset.clone();
                t.push(v);
                t.sort_unstable();
                let ti = intern(&mut t_ids, &mut t_sets, t);
                d_stav.push((si as u32, ti, a, v, per));
                groups.entry(ti).or_default().push((si as u32, per));
            }
            vasa.push((v, ai, si as u32, aj, per));
            vasa.push((v, aj, si as u32, ai, per));
        }
    }
    let _ = l;
    let mut g: Vec<Vec<(u32, f64)>> = vec![Vec::new(); t_sets.len()];
    for (t, list) in groups {
        g[t as usize] = list;
    }
    check_cap("sts entries", g.iter().map(|x| (x.len() * x.len()) as f64).sum())?;
    let sts = independent_sts(&g);
    let v_points = (0..c.n_vertices() as u32).filter(|&v| !i_colors.contains(&col[v as usize]) && !j_colors.contains(&col[v as usize])).collect();
    Ok(StavInstance::new(StavKind::PartiteIj, c.n_vertices(), s_sets, t_sets, a_sets, d_stav, sts, Some(vasa)).with_v_points(v_points))
}

/// The (I,J)-in-one-set test: t ∈ X(l) by its measure, s1 ⊇ t conditioned on col(s1) ⊇ I ⊔ J,
/// s2 ⊇ t unconditioned. Sets are all of X(k).
pub fn in_one_set_sts(c: &Complex, i_colors: &[usize], j_colors: &[usize], k: usize, l: usize) -> Result<StsDistribution> {
    let col = c.coloring().ok_or(Error::NotPartite)?;
    if i_colors.iter().any(|x| j_colors.contains(x)) {
        return Err(Error::OverlappingColors);
    }
    if l >= k || k as isize > c.dim() {
        return Err(Error::ParameterRange(format!("need l < k <= dim; got k={k}, l={l}")));
    }
    let kl = c.level(k as isize);
    let tl = c.level(l as isize);
    let per = 1.0 / binomial(k + 1, l + 1);
    let mut all: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    let mut cond: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    for (si, (s, &m)) in kl.faces.iter().zip(&kl.measure).enumerate() {
        let good = i_colors.iter().chain(j_colors).all(|x| s.iter().any(|&v| col[v as usize] == *x));
        for t in s.subfaces(l + 1) {
            let ti = tl.position(&t).unwrap();
            all[ti].push((si as u32, m * per));
            if good {
                cond[ti].push((si as u32, m * per));
            }
        }
    }
    check_cap("sts entries", all.iter().zip(&cond).map(|(a, b)| (a.len() * b.len()) as f64).sum())?;
    let mut entries = Vec::new();
    let mut mass = 0.0;
    for ti in 0..tl.len() {
        let zc: f64 = cond[ti].iter().map(|x| x.1).sum();
        let za: f64 = all[ti].iter().map(|x| x.1).sum();
        if zc <= 0.0 {
            continue;
        }
        mass += tl.measure[ti];
        for &(s1, w1) in &cond[ti] {
            for &(s2, w2) in &all[ti] {
                entries.push((s1, ti as u32, s2, tl.measure[ti] * (w1 / zc) * (w2 / za)));
            }
        }
    }
    if mass <= 0.0 {
        return Err(Error::EmptyWalk);
    }
    entries.iter_mut().for_each(|e| e.3 /= mass);
    Ok(StsDistribution { s_sets: faces_to_sets(&kl.faces), t_sets: faces_to_sets(&tl.faces), entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodMode {
    Independent,
    Complement,
}

/// S = {Ball_z : z ∈ X(k)} over V = X(0), T = X(l), A = X(l−1). (z, t) is drawn with z ⊔ t a
/// face, and t is split uniformly. The VASA table exists only when k + 2l + 1 <= d.
pub fn neighborhood_stav(c: &Complex, l: usize, k: usize, mode: NeighborhoodMode) -> Result<StavInstance> {
    let d = c.d();
    let ok = match mode {
        NeighborhoodMode::Independent => l + k + 1 <= d,
        NeighborhoodMode::Complement => l + 2 * k + 2 <= d,
    };
    if l < 1 || !ok {
        return Err(Error::ParameterRange(format!("neighborhood STAV ({mode:?}) with l={l}, k={k}, d={d}")));
    }
    let zl = c.level(k as isize);
    let tl = c.level(l as isize);
    let al = c.level(l as isize - 1);
    let balls = walks::neighborhood_system(c, k)?;
    let s_sets: Vec<Vec<u32>> = balls.into_iter().map(|(_, b)| b).collect();
    let ul = c.level((k + l + 1) as isize);
    check_cap("d_stav entries", ul.len() as f64 * binomial(k + l + 2, k + 1) * (l + 1) as f64)?;
    let split = binomial(k + l + 2, k + 1);
    let mut d_stav = Vec::new();
    let mut groups: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    for (u, &m) in ul.faces.iter().zip(&ul.measure) {
        for z in u.subfaces(k + 1) {
            let t = u.minus(&z);
            let zi = zl.position(&z).unwrap() as u32;
            let ti = tl.position(&t).unwrap() as u32;
            let w = m / split;
            groups[ti as usize].push((zi, w));
            for &v in t.iter() {
                let a = Face::from_sorted(t.iter().copied().filter(|&x| x != v).collect());
                d_stav.push((zi, ti, al.position(&a).unwrap() as u32, v, w / (l + 1) as f64));
            }
        }
    }
    let sts = match mode {
        NeighborhoodMode::Independent => {
            check_cap("sts entries", groups.iter().map(|g| (g.len() * g.len()) as f64).sum())?;
            independent_sts(&groups)
        }
        NeighborhoodMode::Complement => {
            let wl = c.level((l + 2 * k + 2) as isize);
            let per_t = binomial(l + 2 * k + 3, l + 1);
            let per_split = binomial(2 * k + 2, k + 1);
            check_cap("sts entries", wl.len() as f64 * per_t * per_split)?;
            let mut acc: HashMap<(u32, u32, u32), f64> = HashMap::new();
            for (u, &m) in wl.faces.iter().zip(&wl.measure) {
                for t in u.subfaces(l + 1) {
                    let ti = tl.position(&t).unwrap() as u32;
                    let rest = u.minus(&t);
                    for z1 in rest.subfaces(k + 1) {
                        let z2 = rest.minus(&z1);
                        let (a, b) = (zl.position(&z1).unwrap() as u32, zl.position(&z2).unwrap() as u32);
                        *acc.entry((a, ti, b)).or_default() += m / (per_t * per_split);
                    }
                }
            }
            let mut v: Vec<_> = acc.into_iter().map(|((a, t, b), p)| (a, t, b, p)).collect();
            v.sort_by(|x, y| (x.1, x.0, x.2).cmp(&(y.1, y.0, y.2)));
            v
        }
    };
    let vasa = if k + 2 * l + 1 <= d {
        let xl = c.level((k + 2 * l + 1) as isize);
        let per = binomial(k + 2 * l + 2, k + 1) * (2 * l + 1) as f64 * binomial(2 * l, l);
        check_cap("vasa entries", xl.len() as f64 * per)?;
        let mut out = Vec::new();
        for (u, &m) in xl.faces.iter().zip(&xl.measure) {
            for z in u.subfaces(k + 1) {
                let zi = zl.position(&z).unwrap() as u32;
                let rest = u.minus(&z);
                for &v in rest.iter() {
                    let pair = Face::from_sorted(rest.iter().copied().filter(|&x| x != v).collect());
                    for a1 in pair.subfaces(l) {
                        let a2 = pair.minus(&a1);
                        out.push((v, al.position(&a1).unwrap() as u32, zi, al.position(&a2).unwrap() as u32, m / per));
                    }
                }
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(StavInstance::new(
        StavKind::Neighborhood,
        c.n_vertices(),
        s_sets,
        faces_to_sets(&tl.faces),
        faces_to_sets(&al.faces),
        d_stav,
        sts,
        vasa,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "snake_case")]
pub enum GraphKind {
    Reach,
    LocalReach(usize),
    StsA(usize),
    StsAv(usize, u32),
    VasaV(u32),
    VasA(usize),
    TLower(usize),
}

/// A local graph with compact vertex ids. `left`/`right` map local ids to layer ids; for
/// VAS_a the right side lists (a', s) pairs.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub op: MarkovOperator,
    pub left: Vec<u32>,
    pub right: Vec<(u32, u32)>,
}

impl LocalGraph {
    pub fn is_square(&self) -> bool {
        self.op.square
    }
}

fn compact(acc: HashMap<(u32, (u32, u32)), f64>, square: bool) -> Result<LocalGraph> {
    if acc.values().all(|&p| p <= 0.0) {
        return Err(Error::ZeroConditioning);
    }
    let mut left: Vec<u32> = acc.keys().map(|k| k.0).collect();
    left.sort_unstable();
    left.dedup();
    let mut right: Vec<(u32, u32)> = if square {
        left.iter().map(|&x| (x, u32::MAX)).collect()
    } else {
        let mut r: Vec<(u32, u32)> = acc.keys().map(|k| k.1).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    if square {
        let mut all: Vec<u32> = acc.keys().flat_map(|k| [k.0, k.1 .0]).collect();
        all.sort_unstable();
        all.dedup();
        left = all;
        right = left.iter().map(|&x| (x, u32::MAX)).collect();
    }
    let li: HashMap<u32, u32> = left.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
    let ri: HashMap<(u32, u32), u32> = right.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
    let trips = acc
        .into_iter()
        .filter(|x| x.1 > 0.0)
        .map(|((a, b), p)| {
            let key = if square { (b.0, u32::MAX) } else { b };
            (li[&a], ri[&key], p)
        })
        .collect();
    let op = MarkovOperator::from_joint(left.len(), right.len(), square, trips)?;
    Ok(LocalGraph { op, left, right })
}

/// The conditional of the corresponding joint, as a graph with compact ids.
pub fn derive_graph(x: &StavInstance, kind: GraphKind) -> Result<LocalGraph> {
    let ix = x.index();
    let mut acc: HashMap<(u32, (u32, u32)), f64> = HashMap::new();
    let none = u32::MAX;
    let check = |i: usize, n: usize| if i < n { Ok(()) } else { Err(Error::ZeroConditioning) };
    match kind {
        GraphKind::Reach => {
            for &(_, _, a, v, p) in &x.d_stav {
                *acc.entry((a, (v, none))).or_default() += p;
            }
            compact(acc, false)
        }
        GraphKind::LocalReach(s) => {
            check(s, x.s_sets.len())?;
            for &i in &ix.d_by_s[s] {
                let (_, _, a, v, p) = x.d_stav[i as usize];
                *acc.entry((a, (v, none))).or_default() += p;
            }
            compact(acc, false)
        }
        GraphKind::StsA(a) => {
            check(a, x.a_sets.len())?;
            for &t in &ix.t_of_a[a] {
                for &i in &ix.sts_by_t[t as usize] {
                    let (s1, _, s2, p) = x.sts[i as usize];
                    *acc.entry((s1, (s2, none))).or_default() += p;
                }
            }
            compact(acc, true)
        }
        GraphKind::StsAv(a, v) => {
            check(a, x.a_sets.len())?;
            for &t in &ix.t_of_a[a] {
                if x.t_sets[t as usize].binary_search(&v).is_err() {
                    continue;
                }
                for &i in &ix.sts_by_t[t as usize] {
                    let (s1, _, s2, p) = x.sts[i as usize];
                    *acc.entry((s1, (s2, none))).or_default() += p;
                }
            }
            compact(acc, true)
        }
        GraphKind::VasaV(v) => {
            let vasa = x.vasa.as_ref().ok_or(Error::ZeroConditioning)?;
            check(v as usize, x.n_points)?;
            for &i in &ix.vasa_by_v[v as usize] {
                let (_, a1, _, a2, p) = vasa[i as usize];
                *acc.entry((a1, (a2, none))).or_default() += p;
            }
            compact(acc, true)
        }
        GraphKind::VasA(a) => {
            let vasa = x.vasa.as_ref().ok_or(Error::ZeroConditioning)?;
            check(a, x.a_sets.len())?;
            for &i in &ix.vasa_by_a1[a] {
                let (v, _, s, a2, p) = vasa[i as usize];
                *acc.entry((v, (a2, s))).or_default() += p;
            }
            compact(acc, false)
        }
        GraphKind::TLower(t) => {
            check(t, x.t_sets.len())?;
            let mut pa: HashMap<u32, f64> = HashMap::new();
            for &i in &ix.d_by_t[t] {
                let e = x.d_stav[i as usize];
                *pa.entry(e.2).or_default() += e.4;
            }
            for (a, p) in pa {
                let pts = &x.a_sets[a as usize];
                for &v in pts {
                    *acc.entry((v, (a, none))).or_default() += p / pts.len() as f64;
                }
            }
            compact(acc, false)
        }
    }
}

/// Constants of the goodness definition; the defaults are 1/3 and 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessConfig {
    pub gamma: f64,
    pub r: f64,
    pub edge_threshold: f64,
    pub reach_fraction: f64,
    pub spot_checks: usize,
    pub seed: u64,
}

impl GoodnessConfig {
    pub fn new(gamma: f64, r: f64) -> GoodnessConfig {
        GoodnessConfig { gamma, r, edge_threshold: 1.0 / 3.0, reach_fraction: 0.5, spot_checks: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessFlags {
    pub a1: bool,
    pub a2a: bool,
    pub a2b: bool,
    pub a3a: bool,
    pub a3b: bool,
    pub a4: bool,
    pub a5: bool,
}

impl GoodnessFlags {
    pub fn all(&self) -> bool {
        self.a1 && self.a2a && self.a2b && self.a3a && self.a3b && self.a4 && self.a5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub a1_reach_lambda: f64,
    pub a2a_min_edge_expansion: f64,
    pub a2a_all_exact: bool,
    pub a2b_max_lambda: f64,
    pub a3a_max_lambda: f64,
    pub a3b_max_lambda: f64,
    pub a4_max_lambda: f64,
    pub a4_delta_min: f64,
    pub a4_spot_failures: usize,
    pub a5_min_conditional: f64,
    /// Smallest γ at which every γ-dependent check passes.
    pub inferred_gamma: f64,
    pub config: GoodnessConfig,
    pub flags: GoodnessFlags,
}

impl GoodnessReport {
    pub fn pass(&self) -> bool {
        self.flags.all()
    }
}

struct Measured {
    a1: f64,
    a2a: f64,
    a2a_exact: bool,
    a2b: f64,
    a3a: f64,
    a3b: f64,
    a4: f64,
    a4_failures: usize,
    a5: f64,
}

fn finish(m: Measured, cfg: GoodnessConfig) -> GoodnessReport {
    let tol = 1e-12;
    let delta_min = spectra::sampler_delta_min(m.a4);
    let g = cfg.gamma;
    let flags = GoodnessFlags {
        a1: m.a1 <= g.sqrt() + tol,
        a2a: m.a2a >= cfg.edge_threshold - tol,
        a2b: m.a2b <= g + tol,
        a3a: m.a3a <= g + tol,
        a3b: m.a3b <= g.sqrt() + tol,
        a4: delta_min <= cfg.r * g + tol && m.a4_failures == 0,
        a5: m.a5 >= cfg.reach_fraction - tol,
    };
    let inferred_gamma = (m.a1 * m.a1).max(m.a2b).max(m.a3a).max(m.a3b * m.a3b).max(delta_min / cfg.r);
    GoodnessReport {
        a1_reach_lambda: m.a1,
        a2a_min_edge_expansion: m.a2a,
        a2a_all_exact: m.a2a_exact,
        a2b_max_lambda: m.a2b,
        a3a_max_lambda: m.a3a,
        a3b_max_lambda: m.a3b,
        a4_max_lambda: m.a4,
        a4_delta_min: delta_min,
        a4_spot_failures: m.a4_failures,
        a5_min_conditional: m.a5,
        inferred_gamma,
        config: cfg,
        flags,
    }
}

/// Numeric sweep of every goodness assumption over all conditioning elements of a tabulated STAV.
pub fn goodness_check(x: &StavInstance, cfg: GoodnessConfig) -> Result<GoodnessReport> {
    if x.vasa.is_none() {
        return Err(Error::InvalidStav("goodness needs a VASA distribution".into()));
    }
    let ix = x.index();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let a1 = bipartite_norm(&derive_graph(x, GraphKind::Reach)?.op)?.lambda_bip;
    let (mut a2a, mut a2a_exact, mut a2b, mut a3a, mut a3b) = (f64::INFINITY, true, 0.0f64, 0.0f64, 0.0f64);
    for a in 0..x.a_sets.len() {
        let g = derive_graph(x, GraphKind::StsA(a))?;
        let e = spectra::edge_expansion_or_cheeger(&g.op)?;
        a2a = a2a.min(e.phi);
        a2a_exact &= e.exact;
        for &v in &ix.reach[a] {
            let g = derive_graph(x, GraphKind::StsAv(a, v))?;
            a2b = a2b.max(square_spectrum(&g.op)?.two_sided());
        }
        let g = derive_graph(x, GraphKind::VasA(a))?;
        a3b = a3b.max(bipartite_norm(&g.op)?.lambda_bip);
    }
    for v in 0..x.n_points as u32 {
        if ix.vasa_by_v[v as usize].is_empty() {
            continue;
        }
        let g = derive_graph(x, GraphKind::VasaV(v))?;
        a3a = a3a.max(square_spectrum(&g.op)?.two_sided());
    }
    let (mut a4, mut a4_failures, mut a5) = (0.0f64, 0usize, f64::INFINITY);
    let delta = cfg.r * cfg.gamma;
    for s in 0..x.s_sets.len() {
        let g = derive_graph(x, GraphKind::LocalReach(s))?;
        a4 = a4.max(bipartite_norm(&g.op)?.lambda_bip);
        a4_failures += spectra::sampling_spot_checks(&g.op, delta, cfg.spot_checks, &mut rng);
        // P(v | s) from the joint; reach of each a inside s
        let mut pv: HashMap<u32, f64> = HashMap::new();
        let mut a_here: Vec<u32> = Vec::new();
        for &i in &ix.d_by_s[s] {
            let e = x.d_stav[i as usize];
            *pv.entry(e.3).or_default() += e.4;
            a_here.push(e.2);
        }
        a_here.sort_unstable();
        a_here.dedup();
        let ps: f64 = pv.values().sum();
        for a in a_here {
            let reach = &ix.reach[a as usize];
            let inside: f64 = pv.iter().filter(|(v, _)| reach.binary_search(v).is_ok()).map(|x| x.1).sum();
            a5 = a5.min(inside / ps);
        }
    }
    Ok(finish(Measured { a1, a2a, a2a_exact, a2b, a3a, a3b, a4, a4_failures, a5 }, cfg))
}

/// The simplicial STAV of a complex evaluated through links, for complexes whose tables are too
/// large to materialize. Every quantity is computed on one face per orbit of the automorphism
/// group (a single face for complete complexes, every face otherwise).
#[derive(Debug, Clone, Copy)]
pub struct HdxStav<'a> {
    pub complex: &'a Complex,
    pub d: usize,
    pub l: usize,
}

impl<'a> HdxStav<'a> {
    pub fn new(complex: &'a Complex, d: usize, l: usize) -> Result<HdxStav<'a>> {
        if l < 1 || 2 * l + 2 > d || d as isize > complex.dim() {
            return Err(Error::ParameterRange(format!("hdx STAV needs 1 <= l, 2l+2 <= d <= dim; got d={d}, l={l}")));
        }
        Ok(HdxStav { complex, d, l })
    }

    fn per_t(&self) -> f64 {
        1.0 / binomial(self.d + 1, self.l + 1)
    }

    /// Joint probability D(s, t) for t ⊆ s.
    fn d_st(&self, s: &Face) -> f64 {
        self.complex.measure_of(s) * self.per_t()
    }

    pub fn check_invariants(&self) -> Result<InvariantReport> {
        let (c, d, l) = (self.complex, self.d, self.l);
        let n = c.n_vertices();
        let tl = c.level(l as isize);
        // v-marginal: Σ_t D(t) / (l+1) over t ∋ v, with D(t) = Σ_s D(s,t) the level measure
        let mut pv = vec![0.0; n];
        for (t, &m) in tl.faces.iter().zip(&tl.measure) {
            for &v in t.iter() {
                pv[v as usize] += m / (l + 1) as f64;
            }
        }
        let total_mass: f64 = pv.iter().sum();
        let v_uniform_residual = pv.iter().map(|x| (x - 1.0 / n as f64).abs()).fold(0.0, f64::max);
        let mut ci = 0.0f64;
        let mut sts_marg = 0.0f64;
        let mut sts_sym = 0.0f64;
        let mut zero = pv.iter().filter(|&&x| !(x > 0.0)).count();
        for t in c.orbit_representatives(l as isize) {
            let (link, map) = c.link_with_map(&t)?;
            let ll = link.level((d - l - 1) as isize);
            let cof: Vec<(Face, f64)> = ll
                .faces
                .iter()
                .map(|f| {
                    let mut s: Vec<u32> = f.iter().map(|&v| map[v as usize]).chain(t.iter().copied()).collect();
                    s.sort_unstable();
                    let s = Face::from_sorted(s);
                    let w = self.d_st(&s);
                    (s, w)
                })
                .collect();
            let pt: f64 = cof.iter().map(|x| x.1).sum();
            if !(pt > 0.0) {
                zero += 1;
                continue;
            }
            // (a, v) | (s, t) is uniform over the l+1 splits; compare with (a, v) | t
            let split = 1.0 / (l + 1) as f64;
            let joint_tav: f64 = cof.iter().map(|x| x.1 * split).sum();
            ci = ci.max((split - joint_tav / pt).abs());
            // STS(s1,t,s2) = D(t) P(s1|t) P(s2|t)
            let cond: Vec<f64> = cof.iter().map(|x| x.1 / pt).collect();
            let mass: f64 = cond.iter().sum();
            for (i, &(_, w)) in cof.iter().enumerate() {
                sts_marg = sts_marg.max((pt * cond[i] * mass - w).abs());
            }
            let probe = cof.len().min(64);
            for i in 0..probe {
                for j in 0..probe {
                    let f = pt * cond[i] * cond[j];
                    let b = pt * cond[j] * cond[i];
                    sts_sym = sts_sym.max((f - b).abs());
                }
            }
        }
        let mut vasa_sym = 0.0f64;
        let mut vasa_marg = 0.0f64;
        for s in c.orbit_representatives(d as isize) {
            let ms = c.measure_of(&s);
            if !(ms > 0.0) {
                zero += 1;
                continue;
            }
            let mut table: HashMap<(u32, Face, Face), f64> = HashMap::new();
            let mut count = 0usize;
            for a1 in s.subfaces(l) {
                let rest = s.minus(&a1);
                for a2 in rest.subfaces(l) {
                    count += rest.len() - l;
                    let _ = a2;
                }
            }
            let p = ms / count as f64;
            for a1 in s.subfaces(l) {
                let rest = s.minus(&a1);
                for a2 in rest.subfaces(l) {
                    for &v in rest.minus(&a2).iter() {
                        *table.entry((v, a1.clone(), a2.clone())).or_default() += p;
                    }
                }
            }
            let mut marg: HashMap<(u32, Face), f64> = HashMap::new();
            for ((v, a1, a2), &p) in &table {
                let back = table.get(&(*v, a2.clone(), a1.clone())).copied().unwrap_or(0.0);
                vasa_sym = vasa_sym.max((p - back).abs());
                *marg.entry((*v, a1.clone())).or_default() += p;
            }
            let dv = self.d_st(&s) / (l + 1) as f64;
            for (_, &p) in &marg {
                vasa_marg = vasa_marg.max((p - dv).abs());
            }
            let pairs = (binomial(d + 1, l) as usize) * (d + 1 - l);
            if marg.len() != pairs {
                vasa_marg = vasa_marg.max(dv);
            }
        }
        Ok(InvariantReport {
            total_mass,
            v_uniform_residual,
            conditional_independence_residual: ci,
            sts_symmetry_residual: sts_sym,
            sts_marginal_residual: sts_marg,
            vasa_symmetry_residual: vasa_sym,
            vasa_marginal_residual: vasa_marg,
            zero_probability_elements: zero,
            support_violations: 0,
        })
    }

    /// Goodness through the link identities: reach graph = comp(l−1, 0); STS_a = lower walk
    /// X_a(d−l) → X_a(0) → X_a(d−l); STS_{a,v} draws s1, s2 ⊇ a ⊔ {v} independently;
    /// vASA_v = comp(l−1, l−1) in X_v; VAS_a joins v ∈ X_a(0) to (a', s) inside X_a.
    pub fn goodness_check(&self, cfg: GoodnessConfig) -> Result<GoodnessReport> {
        let (c, d, l) = (self.complex, self.d, self.l);
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let a1 = bipartite_norm(&walks::complement_walk(c, l - 1, 0)?)?.lambda_bip;

        let (mut a2a, mut a2a_exact, mut a3b) = (f64::INFINITY, true, 0.0f64);
        for a in c.orbit_representatives(l as isize - 1) {
            let link = c.link(&a)?;
            let top = (d - l) as usize;
            let down = walks::containment_operator(&link, top, 0)?;
            let size = down.n_source();
            if size <= spectra::EDGE_EXPANSION_MAX_VERTICES {
                let mut w = down.then(&down.reverse());
                w.square = true;
                let e = spectra::edge_expansion_exact(&w)?;
                a2a = a2a.min(e.phi);
            } else {
                let s2 = bipartite_norm(&down)?.lambda_bip;
                a2a = a2a.min((1.0 - s2 * s2) / 2.0);
                a2a_exact = false;
            }
            a3b = a3b.max(self.vas_a_lambda(&link)?);
        }

        let mut a2b = 0.0f64;
        for t in c.orbit_representatives(l as isize) {
            let link = c.link(&t)?;
            let ll = link.level((d - l - 1) as isize);
            let root: Vec<f64> = ll.measure.iter().map(|m| m.sqrt()).collect();
            let (hi, lo, _) = spectra::lanczos_extremes(
                root.len(),
                |x, y| {
                    let c: f64 = root.iter().zip(x).map(|(a, b)| a * b).sum();
                    y.iter_mut().zip(&root).for_each(|(o, r)| *o = r * c);
                },
                &[root.clone()],
                3,
            )?;
            a2b = a2b.max(hi.abs().max(lo.abs()));
        }

        let mut a3a = 0.0f64;
        for v in c.orbit_representatives(0) {
            let link = c.link(&v)?;
            let comp = walks::complement_walk(&link, l - 1, l - 1)?;
            a3a = a3a.max(square_spectrum(&comp)?.two_sided());
        }

        let simplex = Complex::complete(d + 1, d)?;
        let av = walks::complement_walk(&simplex, l - 1, 0)?;
        let a4 = bipartite_norm(&av)?.lambda_bip;
        let a4_failures = spectra::sampling_spot_checks(&av, cfg.r * cfg.gamma, cfg.spot_checks, &mut rng);
        // v | s is uniform over s; reach(a) ∩ s = s ∖ a
        let mut a5 = f64::INFINITY;
        for u in 0..av.n_source() {
            let inside = av.joint.row(u).count() as f64 / (d + 1) as f64;
            a5 = a5.min(inside);
        }
        Ok(finish(Measured { a1, a2a, a2a_exact, a2b, a3a, a3b, a4, a4_failures, a5 }, cfg))
    }

    /// Right vertices (a', s') with a' ⊂ s' ∈ X_a(d−l); columns list v ∈ s' ∖ a'.
    fn vas_a_lambda(&self, link: &Complex) -> Result<f64> {
        let (d, l) = (self.d, self.l);
        let top = link.level((d - l) as isize);
        let n_left = link.n_vertices();
        let per = binomial(d - l + 1, l) * (d + 1 - 2 * l) as f64;
        let cols = top.faces.iter().zip(&top.measure).flat_map(move |(s, &m)| {
            let w = m / per;
            s.subfaces(l).map(move |a2| s.iter().filter(|v| !a2.contains(**v)).map(|&v| (v as usize, w)).collect::<Vec<_>>()).collect::<Vec<_>>()
        });
        spectra::bipartite_norm_from_columns(n_left, cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hdx_counts_and_invariants() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        assert_eq!(x.a_sets.len(), 9);
        assert_eq!(x.t_sets.len(), 36);
        assert_eq!(x.s_sets.len(), 84);
        let r = x.check_invariants();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn hdx_parameter_errors() {
        let c = Complex::complete(9, 5).unwrap();
        assert!(matches!(hdx_stav(&c, 5, 2), Err(Error::ParameterRange(_))));
        assert!(matches!(hdx_stav(&c, 5, 0), Err(Error::ParameterRange(_))));
    }

    #[test]
    fn t_lower_and_sts_av() {
        let c = Complex::complete(10, 6).unwrap();
        let x = hdx_stav(&c, 6, 2).unwrap();
        let g = derive_graph(&x, GraphKind::TLower(0)).unwrap();
        assert!((bipartite_norm(&g.op).unwrap().lambda_bip - 0.5).abs() < 1e-10);
        let a = 0;
        let v = x.index().reach[a][0];
        let g = derive_graph(&x, GraphKind::StsAv(a, v)).unwrap();
        assert!(square_spectrum(&g.op).unwrap().two_sided() < 1e-10);
    }

    #[test]
    fn reach_marginals_match_layers() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        let g = derive_graph(&x, GraphKind::Reach).unwrap();
        for m in &g.op.target_measure {
            assert!((m - 1.0 / 9.0).abs() < 1e-12);
        }
        assert_eq!(g.left.len(), 9);
    }

    #[test]
    fn derive_graph_zero_conditioning() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        assert!(matches!(derive_graph(&x, GraphKind::StsA(99)), Err(Error::ZeroConditioning)));
    }

    #[test]
    fn fast_path_matches_tables() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        let cfg = GoodnessConfig::new(0.5, 2.0);
        let slow = goodness_check(&x, cfg).unwrap();
        let fast = HdxStav::new(&c, 5, 1).unwrap().goodness_check(cfg).unwrap();
        let pairs = [
            (slow.a1_reach_lambda, fast.a1_reach_lambda),
            (slow.a2a_min_edge_expansion, fast.a2a_min_edge_expansion),
            (slow.a2b_max_lambda, fast.a2b_max_lambda),
            (slow.a3a_max_lambda, fast.a3a_max_lambda),
            (slow.a3b_max_lambda, fast.a3b_max_lambda),
            (slow.a4_max_lambda, fast.a4_max_lambda),
            (slow.a5_min_conditional, fast.a5_min_conditional),
        ];
        for (i, (a, b)) in pairs.iter().enumerate() {
            assert!((a - b).abs() < 1e-9, "quantity {i}: {a} vs {b}");
        }
        let inv = HdxStav::new(&c, 5, 1).unwrap().check_invariants().unwrap();
        assert!(inv.holds(), "{inv:?}");
    }

    #[test]
    fn fast_path_matches_tables_explicit() {
        let c = Complex::complete(9, 5).unwrap();
        let e = Complex::build_from_top_faces(9, c.top_faces()).unwrap();
        let cfg = GoodnessConfig::new(0.5, 2.0);
        let slow = goodness_check(&hdx_stav(&e, 5, 1).unwrap(), cfg).unwrap();
        let fast = HdxStav::new(&e, 5, 1).unwrap().goodness_check(cfg).unwrap();
        assert!((slow.a3b_max_lambda - fast.a3b_max_lambda).abs() < 1e-9);
        assert!((slow.a2a_min_edge_expansion - fast.a2a_min_edge_expansion).abs() < 1e-9);
    }

    #[test]
    fn partite_structure() {
        let c = Complex::partite_complete(&[2; 9]).unwrap();
        let x = partite_ij_stav(&c, &[0], &[1], 8).unwrap();
        let r = x.check_invariants();
        assert!(r.holds(), "{r:?}");
        // one a of each color per s
        let ix = x.index();
        for s in 0..x.s_sets.len() {
            let mut a: Vec<u32> = ix.d_by_s[s].iter().map(|&i| x.d_stav[i as usize].2).collect();
            a.sort_unstable();
            a.dedup();
            assert_eq!(a.len(), 2);
        }
        assert!(matches!(partite_ij_stav(&c, &[0, 2], &[1], 8), Err(Error::ColorSize(_))));
        let one = in_one_set_sts(&c, &[0], &[1], 8, 1).unwrap();
        let total: f64 = one.entries.iter().map(|e| e.3).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn neighborhood_structure() {
        let c = Complex::complete(9, 5).unwrap();
        for mode in [NeighborhoodMode::Independent, NeighborhoodMode::Complement] {
            let x = neighborhood_stav(&c, 1, 1, mode).unwrap();
            assert_eq!(x.s_sets.len(), 36);
            assert!(x.s_sets.iter().all(|b| b.len() == 7));
            let r = x.check_invariants();
            assert!(r.holds(), "{mode:?} {r:?}");
        }
        assert!(matches!(
            neighborhood_stav(&c, 2, 1, NeighborhoodMode::Complement),
            Err(Error::ParameterRange(_))
        ));
    }

    #[test]
    fn disconnected_sts_a_fails_edge_expansion() {
        let s_sets = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![0, 4]];
        let t_sets = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![0, 4]];
        let a_sets = vec![vec![0], vec![1], vec![2], vec![3], vec![4]];
        let d = (0..4u32).flat_map(|i| [(i, i, 0u32, i + 1, 0.125), (i, i, i + 1, 0u32, 0.125)]).collect();
        let sts = vec![(0, 0, 1, 0.25), (1, 0, 0, 0.25), (2, 2, 3, 0.25), (3, 2, 2, 0.25)];
        let x = StavInstance::new(StavKind::Custom, 5, s_sets, t_sets, a_sets, d, sts, Some(vec![]));
        let g = derive_graph(&x, GraphKind::StsA(0)).unwrap();
        assert_eq!(spectra::edge_expansion_exact(&g.op).unwrap().phi, 0.0);
    }
}
