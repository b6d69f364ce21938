//! Decoding an ensemble with small rejection to one global function.

use std::collections::{BTreeMap, HashMap};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agreement::{self, Compare, Ensemble, EvalMode};
use crate::complex::{is_sorted_subset, Complex};
use crate::error::{Error, Result};
use crate::stav::{self, goodness_check, GoodnessConfig, StavInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub tau_global: f64,
    pub tau_local: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { tau_global: 1.0 / 40.0, tau_local: 1.0 / 20.0 }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau_global && self.tau_global <= self.tau_local && self.tau_local < 1.0) {
            return Err(Error::ParameterRange(format!(
                "need 0 < tau_global <= tau_local < 1; got {} and {}",
                self.tau_global, self.tau_local
            )));
        }
        Ok(())
    }
}

fn plurality<K: Ord + Clone>(votes: HashMap<K, f64>) -> Option<K> {
    let mut best: Option<(K, f64)> = None;
    for (k, w) in votes {
        best = match best {
            None => Some((k, w)),
            Some((bk, bw)) => {
                if w > bw + 1e-15 || ((w - bw).abs() <= 1e-15 && k < bk) {
                    Some((k, w))
                } else {
                    Some((bk, bw))
                }
            }
        };
    }
    best.map(|b| b.0)
}

/// h_a for every a, as the restriction to a's sorted points.
pub fn local_popularity(x: &StavInstance, f: &Ensemble) -> Result<Vec<Vec<u32>>> {
    let ix = f.align(&x.s_sets)?;
    let index = x.index();
    let mut h = Vec::with_capacity(x.a_sets.len());
    for (a, list) in index.d_by_a.iter().enumerate() {
        let mut votes: HashMap<Vec<u32>, f64> = HashMap::new();
        for &e in list {
            let (s, _, _, _, p) = x.d_stav[e as usize];
            *votes.entry(f.restrict(ix[s as usize], &x.a_sets[a])).or_default() += p;
        }
        h.push(plurality(votes).ok_or(Error::OrphanA(a))?);
    }
    Ok(h)
}

/// g_a on reach(a): `g[a][j]` is the value at `index().reach[a][j]`, None when no s with
/// f_s|a = h_a contains that point.
pub fn reach_functions(x: &StavInstance, f: &Ensemble, h: &[Vec<u32>]) -> Result<Vec<Vec<Option<u32>>>> {
    let ix = f.align(&x.s_sets)?;
    let index = x.index();
    let mut g = Vec::with_capacity(x.a_sets.len());
    for (a, list) in index.d_by_a.iter().enumerate() {
        let reach = &index.reach[a];
        let mut votes: Vec<HashMap<u32, f64>> = vec![HashMap::new(); reach.len()];
        let mut agree: HashMap<u32, bool> = HashMap::new();
        for &e in list {
            let (s, _, _, v, p) = x.d_stav[e as usize];
            let ok = *agree.entry(s).or_insert_with(|| f.restrict(ix[s as usize], &x.a_sets[a]) == h[a]);
            if !ok {
                continue;
            }
            if let (Ok(j), Some(val)) = (reach.binary_search(&v), f.value_at(ix[s as usize], v)) {
                *votes[j].entry(val).or_default() += p;
            }
        }
        g.push(votes.into_iter().map(plurality).collect());
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSets {
    pub a_star: Vec<bool>,
    /// Pr[bad triple | a1 = a]
    pub bad_prob: Vec<f64>,
    /// for each point, the a that are locally but not globally bad
    pub local_only: Vec<Vec<u32>>,
}

impl BadSets {
    pub fn is_bad_for(&self, a: u32, v: u32) -> bool {
        self.a_star[a as usize] || self.local_only[v as usize].binary_search(&a).is_ok()
    }
}

pub fn bad_sets(x: &StavInstance, f: &Ensemble, h: &[Vec<u32>], cfg: &DecoderConfig) -> Result<BadSets> {
    cfg.validate()?;
    let vasa = x.vasa.as_ref().ok_or_else(|| Error::NotApplicable("the instance has no VASA distribution".into()))?;
    let ix = f.align(&x.s_sets)?;
    let mut agree: HashMap<(u32, u32), bool> = HashMap::new();
    let mut is_bad = |s: u32, a: u32| -> bool {
        !*agree.entry((s, a)).or_insert_with(|| f.restrict(ix[s as usize], &x.a_sets[a as usize]) == h[a as usize])
    };
    let n_a = x.a_sets.len();
    let mut by_a = vec![(0.0, 0.0); n_a];
    let mut by_va: BTreeMap<(u32, u32), (f64, f64)> = BTreeMap::new();
    for &(v, a1, s, a2, p) in vasa {
        let bad = if is_bad(s, a1) || is_bad(s, a2) { p } else { 0.0 };
        by_a[a1 as usize].0 += bad;
        by_a[a1 as usize].1 += p;
        let e = by_va.entry((v, a1)).or_default();
        e.0 += bad;
        e.1 += p;
    }
    let bad_prob: Vec<f64> = by_a.iter().map(|&(b, t)| if t > 0.0 { b / t } else { 0.0 }).collect();
    let a_star: Vec<bool> = bad_prob.iter().map(|&p| p >= cfg.tau_global).collect();
    let mut local_only = vec![Vec::new(); x.n_points];
    for ((v, a), (b, t)) in by_va {
        if t > 0.0 && b / t > cfg.tau_local && !a_star[a as usize] {
            local_only[v as usize].push(a);
        }
    }
    local_only.iter_mut().for_each(|l| l.sort_unstable());
    Ok(BadSets { a_star, bad_prob, local_only })
}

/// Empirical lemma quantities of one decoding run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// rejection probability of the instance's STS test
    pub epsilon: f64,
    /// E_a Pr_s[f_s|a ≠ h_a]
    pub h_disagreement: f64,
    /// E_a ε_a, with ε_a the STS rejection given t ⊇ a
    pub h_epsilon: f64,
    /// max over a of Pr_s[f_s|a ≠ h_a] / ε_a (0 when both vanish, infinite when only ε_a does)
    pub h_max_ratio: f64,
    /// Pr_{(s,a,v)}[f_s(v) ≠ g_a(v), f_s|a = h_a, a ∉ A*_v]
    pub g_lemma: f64,
    pub pr_a_star: f64,
    /// Pr_{(a,v)}[a ∈ A*_v, a ∉ A*]
    pub pr_local_only: f64,
    /// Pr_{(a,v)}[g_a(v) ≠ G(v), a ∉ A*_v]
    pub global_agreement: f64,
    /// Pr_{(s,a)}[f_s and G differ on s ∩ reach(a)]
    pub reach_disagreement: f64,
    /// Pr_s[f_s ≠ G|s]
    pub set_disagreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    /// G by point; None only outside the instance's V layer
    pub global: Vec<Option<u32>>,
    pub a_star: Vec<bool>,
    pub h: Vec<Vec<u32>>,
    pub g: Vec<Vec<Option<u32>>>,
    pub diagnostics: Diagnostics,
    /// points whose filtered vote set was empty
    pub fallback_points: Vec<u32>,
    /// goodness was not checked before decoding
    pub goodness_waived: bool,
}

impl DecodeOutput {
    /// G as a total map, with `fill` outside V.
    pub fn assignment(&self, fill: u32) -> Vec<u32> {
        self.global.iter().map(|g| g.unwrap_or(fill)).collect()
    }
}

pub fn global_decode(x: &StavInstance, f: &Ensemble, cfg: &DecoderConfig) -> Result<DecodeOutput> {
    cfg.validate()?;
    let ix = f.align(&x.s_sets)?;
    let index = x.index();
    let h = local_popularity(x, f)?;
    let g = reach_functions(x, f, &h)?;
    let bad = bad_sets(x, f, &h, cfg)?;

    let mut av: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut a_mass = vec![0.0; x.a_sets.len()];
    for &(_, _, a, v, p) in &x.d_stav {
        *av.entry((a, v)).or_default() += p;
        a_mass[a as usize] += p;
    }
    let g_at = |a: u32, v: u32| -> Option<u32> {
        let j = index.reach[a as usize].binary_search(&v).ok()?;
        g[a as usize][j]
    };

    let mut filtered: Vec<HashMap<u32, f64>> = vec![HashMap::new(); x.n_points];
    let mut unfiltered: Vec<HashMap<u32, f64>> = vec![HashMap::new(); x.n_points];
    for (&(a, v), &p) in &av {
        if let Some(val) = g_at(a, v) {
            *unfiltered[v as usize].entry(val).or_default() += p;
            if !bad.is_bad_for(a, v) {
                *filtered[v as usize].entry(val).or_default() += p;
            }
        }
    }
    let mut global = vec![None; x.n_points];
    let mut fallback_points = Vec::new();
    for v in x.v_layer() {
        let vi = v as usize;
        global[vi] = plurality(std::mem::take(&mut filtered[vi]));
        if global[vi].is_none() {
            fallback_points.push(v);
            global[vi] = plurality(std::mem::take(&mut unfiltered[vi]));
        }
    }

    let sts = x.sts_distribution();
    let epsilon = agreement::rejection(&sts, f, EvalMode::Exact, Compare::SampledT)?.epsilon;
    let total_a: f64 = a_mass.iter().sum();

    let mut h_disagreement = 0.0;
    let mut h_epsilon = 0.0;
    let mut h_max_ratio = 0.0f64;
    for (a, list) in index.d_by_a.iter().enumerate() {
        if a_mass[a] <= 0.0 {
            continue;
        }
        let mut off = 0.0;
        for &e in list {
            let (s, _, _, _, p) = x.d_stav[e as usize];
            if f.restrict(ix[s as usize], &x.a_sets[a]) != h[a] {
                off += p;
            }
        }
        let off = off / a_mass[a];
        let (mut rej, mut tot) = (0.0, 0.0);
        for &t in &index.t_of_a[a] {
            for &e in &index.sts_by_t[t as usize] {
                let (s1, t, s2, p) = x.sts[e as usize];
                tot += p;
                let tp = &x.t_sets[t as usize];
                if f.restrict(ix[s1 as usize], tp) != f.restrict(ix[s2 as usize], tp) {
                    rej += p;
                }
            }
        }
        let eps_a = if tot > 0.0 { rej / tot } else { 0.0 };
        let w = a_mass[a] / total_a;
        h_disagreement += w * off;
        h_epsilon += w * eps_a;
        let ratio = if off <= 0.0 { 0.0 } else if eps_a <= 0.0 { f64::INFINITY } else { off / eps_a };
        h_max_ratio = h_max_ratio.max(ratio);
    }

    let total_d: f64 = x.d_stav.iter().map(|e| e.4).sum();
    let mut g_lemma = 0.0;
    for &(s, _, a, v, p) in &x.d_stav {
        if bad.is_bad_for(a, v) {
            continue;
        }
        let si = ix[s as usize];
        if f.restrict(si, &x.a_sets[a as usize]) == h[a as usize] && f.value_at(si, v) != g_at(a, v) {
            g_lemma += p / total_d;
        }
    }
    let pr_a_star = (0..x.a_sets.len()).filter(|&a| bad.a_star[a]).map(|a| a_mass[a] / total_a).sum();
    let mut pr_local_only = 0.0;
    let mut global_agreement = 0.0;
    let total_av: f64 = av.values().sum();
    for (&(a, v), &p) in &av {
        let local = bad.local_only[v as usize].binary_search(&a).is_ok();
        if local {
            pr_local_only += p / total_av;
        }
        if !bad.is_bad_for(a, v) && g_at(a, v) != global[v as usize] {
            global_agreement += p / total_av;
        }
    }

    let mut sa: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for &(s, _, a, _, p) in &x.d_stav {
        *sa.entry((s, a)).or_default() += p;
    }
    let mut reach_disagreement = 0.0;
    for (&(s, a), &p) in &sa {
        let si = ix[s as usize];
        let differs = index.reach[a as usize]
            .iter()
            .filter(|&&v| x.s_sets[s as usize].binary_search(&v).is_ok())
            .any(|&v| f.value_at(si, v) != global[v as usize]);
        if differs {
            reach_disagreement += p / total_d;
        }
    }
    let set_disagreement = (0..x.s_sets.len())
        .filter(|&s| x.s_sets[s].iter().any(|&v| global[v as usize].is_some_and(|gv| f.value_at(ix[s], v) != Some(gv))))
        .map(|s| index.s_measure[s])
        .sum();

    Ok(DecodeOutput {
        global,
        a_star: bad.a_star,
        h,
        g,
        diagnostics: Diagnostics {
            epsilon,
            h_disagreement,
            h_epsilon,
            h_max_ratio,
            g_lemma,
            pr_a_star,
            pr_local_only,
            global_agreement,
            reach_disagreement,
            set_disagreement,
        },
        fallback_points,
        goodness_waived: true,
    })
}

/// Runs the goodness check first and refuses instances that fail it.
pub fn global_decode_checked(x: &StavInstance, f: &Ensemble, cfg: &DecoderConfig, gcfg: GoodnessConfig) -> Result<DecodeOutput> {
    let report = goodness_check(x, gcfg)?;
    if !report.pass() {
        return Err(Error::NotApplicable(format!("instance is not {}-good", gcfg.gamma)));
    }
    let mut out = global_decode(x, f, cfg)?;
    out.goodness_waived = false;
    Ok(out)
}

/// One entry of a (v, b, a, s) sampler.
pub type SubsetEntry = (u32, Vec<u32>, u32, u32, f64);

/// b = {v}.
pub fn singleton_sampler(x: &StavInstance) -> Vec<SubsetEntry> {
    x.d_stav.iter().map(|&(s, _, a, v, p)| (v, vec![v], a, s, p)).collect()
}

/// b = s \ a.
pub fn complement_sampler(x: &StavInstance) -> Vec<SubsetEntry> {
    x.d_stav
        .iter()
        .map(|&(s, _, a, v, p)| {
            let aset = &x.a_sets[a as usize];
            let b = x.s_sets[s as usize].iter().copied().filter(|p| aset.binary_search(p).is_err()).collect();
            (v, b, a, s, p)
        })
        .collect()
}

/// Pr[f_s|b and G|b differ on more than an r_gamma fraction of b].
pub fn subset_agreement(x: &StavInstance, f: &Ensemble, global: &[u32], sampler: &[SubsetEntry], r_gamma: f64) -> Result<f64> {
    let ix = f.align(&x.s_sets)?;
    let mut want: HashMap<(u32, u32, u32), f64> = HashMap::new();
    let total_d: f64 = x.d_stav.iter().map(|e| e.4).sum();
    for &(s, _, a, v, p) in &x.d_stav {
        *want.entry((v, a, s)).or_default() += p / total_d;
    }
    let total: f64 = sampler.iter().map(|e| e.4).sum();
    if !(total > 0.0) {
        return Err(Error::MarginalMismatch(1.0));
    }
    let mut got: HashMap<(u32, u32, u32), f64> = HashMap::new();
    for (v, b, a, s, p) in sampler {
        let ss = x.s_sets.get(*s as usize).ok_or(Error::MarginalMismatch(1.0))?;
        if !is_sorted_subset(b, ss) {
            return Err(Error::SupportMismatch(format!("b {b:?} is not inside s {ss:?}")));
        }
        *got.entry((*v, *a, *s)).or_default() += p / total;
    }
    let mut residual = 0.0f64;
    for (k, &w) in &want {
        residual = residual.max((w - got.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, &w) in &got {
        if !want.contains_key(k) {
            residual = residual.max(w);
        }
    }
    if residual > stav::INVARIANT_TOL {
        return Err(Error::MarginalMismatch(residual));
    }
    if let Some(&p) = f.sets.iter().flatten().find(|&&p| p as usize >= global.len()) {
        return Err(Error::PartialGlobal(p as usize, global.len()));
    }
    let mut out = 0.0;
    for (_, b, _, s, p) in sampler {
        if b.is_empty() {
            continue;
        }
        let vals = f.restrict(ix[*s as usize], b);
        let diff = b.iter().zip(&vals).filter(|(&q, &x)| global[q as usize] != x).count();
        if diff as f64 / b.len() as f64 > r_gamma {
            out += p / total;
        }
    }
    Ok(out)
}

/// Acceptance thresholds for a color tuple: rejection of each I,J-STAV at most
/// `reject_factor`·ε, surprise at most `surprise_factor`/l, in-one-set rejection at most
/// `one_set_factor`·ε, where ε is the rejection of the k,l-agreement test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartiteConfig {
    pub decoder: DecoderConfig,
    pub reject_factor: f64,
    pub surprise_factor: f64,
    pub one_set_factor: f64,
    pub tuples: usize,
    pub seed: u64,
}

impl Default for PartiteConfig {
    fn default() -> Self {
        PartiteConfig { decoder: DecoderConfig::default(), reject_factor: 4.0, surprise_factor: 1.0, one_set_factor: 4.0, tuples: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorTuple {
    pub i1: Vec<usize>,
    pub j1: Vec<usize>,
    pub i2: Vec<usize>,
    pub j2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartiteDecode {
    pub output: DecodeOutput,
    pub colors: ColorTuple,
    pub epsilon: f64,
    pub tuples_tried: usize,
}

fn ratio(x: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        x / bound
    } else if x > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Searches random disjoint color tuples (I1, J1, I2, J2), decodes the two I,J-STAVs of the first
/// acceptable tuple and glues them: G1 off the colors I1 ⊔ J1, G2 on them.
pub fn partite_decode(c: &Complex, k: usize, l: usize, f: &Ensemble, cfg: &PartiteConfig) -> Result<PartiteDecode> {
    cfg.decoder.validate()?;
    let d = c.d();
    let col = c.coloring().ok_or(Error::NotPartite)?;
    if l == 0 || k < 4 * l + 4 || k > d {
        return Err(Error::ParameterRange(format!("partite decoding needs l >= 1 and 4l+4 <= k <= d; got k={k}, l={l}")));
    }
    let dl = agreement::dl_distribution(c, k, l)?;
    let epsilon = agreement::rejection(&dl, f, EvalMode::Exact, Compare::SampledT)?.epsilon;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut colors: Vec<usize> = (0..=d).collect();
    let mut best = f64::INFINITY;
    for tried in 1..=cfg.tuples {
        colors.shuffle(&mut rng);
        let part = |i: usize| {
            let mut p = colors[i * l..(i + 1) * l].to_vec();
            p.sort_unstable();
            p
        };
        let tuple = ColorTuple { i1: part(0), j1: part(1), i2: part(2), j2: part(3) };
        let mut score = 0.0f64;
        let mut stavs = Vec::new();
        for (i, j) in [(&tuple.i1, &tuple.j1), (&tuple.i2, &tuple.j2)] {
            let x = stav::partite_ij_stav(c, i, j, k)?;
            let fx = f.restrict_to(&x.s_sets)?;
            let rej = agreement::rejection(&x.sts_distribution(), &fx, EvalMode::Exact, Compare::SampledT)?.epsilon;
            let xi = agreement::surprise(&x, &fx)?.value;
            let one = agreement::rejection(&stav::in_one_set_sts(c, i, j, k, l)?, f, EvalMode::Exact, Compare::SampledT)?.epsilon;
            score = score
                .max(ratio(rej, cfg.reject_factor * epsilon))
                .max(ratio(xi, cfg.surprise_factor / l as f64))
                .max(ratio(one, cfg.one_set_factor * epsilon));
            stavs.push((x, fx));
        }
        best = best.min(score);
        if score > 1.0 {
            continue;
        }
        let g1 = global_decode(&stavs[0].0, &stavs[0].1, &cfg.decoder)?;
        let g2 = global_decode(&stavs[1].0, &stavs[1].1, &cfg.decoder)?;
        let first: Vec<usize> = tuple.i1.iter().chain(&tuple.j1).copied().collect();
        let global: Vec<Option<u32>> =
            (0..c.n_vertices()).map(|v| if first.contains(&col[v]) { g2.global[v] } else { g1.global[v] }).collect();
        let mut output = g1;
        output.fallback_points.extend(g2.fallback_points);
        output.global = global;
        return Ok(PartiteDecode { output, colors: tuple, epsilon, tuples_tried: tried });
    }
    Err(Error::NoGoodColors(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{corrupt, perfect_ensemble, CorruptMode};
    use crate::stav::hdx_stav;
    use rand::Rng;

    fn plant(n: usize, q: u32, seed: u64) -> Vec<u32> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0..q)).collect()
    }

    #[test]
    fn exact_recovery_on_perfect() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        let g = plant(9, 3, 1);
        let f = perfect_ensemble(&x.s_sets, &g, 3).unwrap();
        let out = global_decode(&x, &f, &DecoderConfig::default()).unwrap();
        assert_eq!(out.assignment(0), g);
        assert!(out.a_star.iter().all(|&b| !b));
        assert!(out.fallback_points.is_empty());
        assert_eq!(out.diagnostics.epsilon, 0.0);
        for (a, h) in out.h.iter().enumerate() {
            assert_eq!(h, &x.a_sets[a].iter().map(|&v| g[v as usize]).collect::<Vec<_>>());
        }
    }

    #[test]
    fn single_set_popularity() {
        let x = StavInstance::new(
            stav::StavKind::Custom,
            2,
            vec![vec![0, 1]],
            vec![vec![0]],
            vec![vec![0]],
            vec![(0, 0, 0, 1, 1.0)],
            vec![(0, 0, 0, 1.0)],
            Some(vec![(1, 0, 0, 0, 1.0)]),
        );
        let f = Ensemble::new(2, vec![vec![0, 1]], vec![vec![1, 0]]).unwrap();
        assert_eq!(local_popularity(&x, &f).unwrap(), vec![vec![1]]);
        assert_eq!(reach_functions(&x, &f, &[vec![1]]).unwrap(), vec![vec![Some(0)]]);
    }

    #[test]
    fn ties_pick_smallest() {
        let mut v = HashMap::new();
        v.insert(vec![1u32, 0], 0.5);
        v.insert(vec![0u32, 1], 0.5);
        assert_eq!(plurality(v), Some(vec![0, 1]));
    }

    #[test]
    fn corrupted_decode_is_close_and_deterministic() {
        let c = Complex::complete(9, 5).unwrap();
        let x = hdx_stav(&c, 5, 1).unwrap();
        let g = plant(9, 2, 7);
        let f = corrupt(&perfect_ensemble(&x.s_sets, &g, 2).unwrap(), 0.1, CorruptMode::ResampleSet, 3).unwrap();
        let cfg = DecoderConfig::default();
        let a = global_decode(&x, &f, &cfg).unwrap();
        let b = global_decode(&x, &f, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignment(0), g);
        let d = a.diagnostics;
        assert!(d.set_disagreement <= 3.0 * d.epsilon);
        let perm = [1, 0];
        let r = global_decode(&x, &f.relabel(&perm), &cfg).unwrap();
        assert_eq!(r.assignment(0), g.iter().map(|&s| perm[s as usize]).collect::<Vec<_>>());
    }

    #[test]
    fn subset_agreement_readings() {
        let c = Complex::complete(8, 4).unwrap();
        let x = hdx_stav(&c, 4, 1).unwrap();
        let g = plant(8, 2, 2);
        let f = perfect_ensemble(&x.s_sets, &g, 2).unwrap();
        assert_eq!(subset_agreement(&x, &f, &g, &complement_sampler(&x), 0.0).unwrap(), 0.0);
        let h = corrupt(&f, 0.3, CorruptMode::FlipOne, 1).unwrap();
        let single = subset_agreement(&x, &h, &g, &singleton_sampler(&x), 0.0).unwrap();
        let total: f64 = x.d_stav.iter().map(|e| e.4).sum();
        let direct: f64 = x
            .d_stav
            .iter()
            .filter(|e| h.value_at(e.0 as usize, e.3) != Some(g[e.3 as usize]))
            .map(|e| e.4 / total)
            .sum();
        assert!((single - direct).abs() < 1e-12);
        let mut bad = singleton_sampler(&x);
        bad[0].4 *= 2.0;
        assert!(matches!(subset_agreement(&x, &h, &g, &bad, 0.0), Err(Error::MarginalMismatch(_))));
    }

    #[test]
    fn config_bounds() {
        assert!(DecoderConfig { tau_global: 0.1, tau_local: 0.05 }.validate().is_err());
        let d = DecoderConfig::default();
        assert_eq!((d.tau_global, d.tau_local), (0.025, 0.05));
    }

    #[test]
    fn partite_perfect_and_hopeless() {
        let c = Complex::partite_complete(&[2; 9]).unwrap();
        let g = plant(18, 2, 4);
        let sets: Vec<Vec<u32>> = c.level(8).faces.iter().map(|f| f.to_vec()).collect();
        let f = perfect_ensemble(&sets, &g, 2).unwrap();
        let out = partite_decode(&c, 8, 1, &f, &PartiteConfig::default()).unwrap();
        assert_eq!(out.tuples_tried, 1);
        assert_eq!(out.output.assignment(0), g);
        let h = corrupt(&f, 1.0, CorruptMode::ResampleSet, 5).unwrap();
        let strict = PartiteConfig { reject_factor: 0.01, one_set_factor: 0.01, tuples: 3, ..PartiteConfig::default() };
        assert!(matches!(partite_decode(&c, 8, 1, &h, &strict), Err(Error::NoGoodColors(_))));
    }
}
