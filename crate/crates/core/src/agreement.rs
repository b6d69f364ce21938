//! Ensembles of local functions and the agreement tests run on them.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::complex::{binomial, is_sorted_subset, Complex};
use crate::error::{Error, Result};
use crate::spectra::{bipartite_norm, square_spectrum};
use crate::stav::{self, derive_graph, GraphKind, NeighborhoodMode, StavInstance, StsDistribution};
use crate::walks::MarkovOperator;

/// One local function per set: `values[i][j]` is the symbol at point `sets[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleJson", into = "EnsembleJson")]
pub struct Ensemble {
    pub alphabet: u32,
    pub sets: Vec<Vec<u32>>,
    pub values: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct SetJson {
    s: Vec<u32>,
    values: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    alphabet: u32,
    sets: Vec<SetJson>,
}

impl TryFrom<EnsembleJson> for Ensemble {
    type Error = Error;
    fn try_from(j: EnsembleJson) -> Result<Ensemble> {
        let (sets, values) = j.sets.into_iter().map(|x| (x.s, x.values)).unzip();
        Ensemble::new(j.alphabet, sets, values)
    }
}

impl From<Ensemble> for EnsembleJson {
    fn from(e: Ensemble) -> EnsembleJson {
        EnsembleJson {
            alphabet: e.alphabet,
            sets: e.sets.into_iter().zip(e.values).map(|(s, values)| SetJson { s, values }).collect(),
        }
    }
}

impl Ensemble {
    pub fn new(alphabet: u32, sets: Vec<Vec<u32>>, values: Vec<Vec<u32>>) -> Result<Ensemble> {
        if alphabet == 0 {
            return Err(Error::ParameterRange("alphabet must be nonempty".into()));
        }
        if sets.len() != values.len() {
            return Err(Error::SupportMismatch(format!("{} sets but {} value lists", sets.len(), values.len())));
        }
        for (s, v) in sets.iter().zip(&values) {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::SupportMismatch(format!("set {s:?} is not strictly increasing")));
            }
            if s.len() != v.len() {
                return Err(Error::SupportMismatch(format!("set {s:?} has {} values", v.len())));
            }
            if let Some(x) = v.iter().find(|&&x| x >= alphabet) {
                return Err(Error::SupportMismatch(format!("symbol {x} outside alphabet of size {alphabet}")));
            }
        }
        Ok(Ensemble { alphabet, sets, values })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn value_at(&self, i: usize, point: u32) -> Option<u32> {
        self.sets[i].binary_search(&point).ok().map(|j| self.values[i][j])
    }

    /// f_{s_i} restricted to the sorted point list `pts` ⊆ s_i.
    pub fn restrict(&self, i: usize, pts: &[u32]) -> Vec<u32> {
        let (s, v) = (&self.sets[i], &self.values[i]);
        let mut out = Vec::with_capacity(pts.len());
        let mut j = 0;
        for &p in pts {
            while s[j] < p {
                j += 1;
            }
            out.push(v[j]);
        }
        out
    }

    /// Index of the local function for each set in `sets`.
    pub fn align(&self, sets: &[Vec<u32>]) -> Result<Vec<usize>> {
        if sets.len() == self.sets.len() && sets.iter().zip(&self.sets).all(|(a, b)| a == b) {
            return Ok((0..sets.len()).collect());
        }
        let map: HashMap<&[u32], usize> = self.sets.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        sets.iter()
            .map(|s| map.get(s.as_slice()).copied().ok_or_else(|| Error::SupportMismatch(format!("no local function for set {s:?}"))))
            .collect()
    }

    /// The sub-ensemble on `sets`, in that order.
    pub fn restrict_to(&self, sets: &[Vec<u32>]) -> Result<Ensemble> {
        let ix = self.align(sets)?;
        Ok(Ensemble { alphabet: self.alphabet, sets: sets.to_vec(), values: ix.iter().map(|&i| self.values[i].clone()).collect() })
    }

    /// Applies a permutation of Σ.
    pub fn relabel(&self, perm: &[u32]) -> Ensemble {
        let values = self.values.iter().map(|v| v.iter().map(|&x| perm[x as usize]).collect()).collect();
        Ensemble { alphabet: self.alphabet, sets: self.sets.clone(), values }
    }

    /// Normalized Hamming distance between f_{s_i} and g restricted to s_i.
    pub fn distance_to(&self, i: usize, g: &[u32]) -> f64 {
        let s = &self.sets[i];
        if s.is_empty() {
            return 0.0;
        }
        let diff = s.iter().zip(&self.values[i]).filter(|(&p, &x)| g[p as usize] != x).count();
        diff as f64 / s.len() as f64
    }
}

/// f_s = G restricted to s for every set.
pub fn perfect_ensemble(sets: &[Vec<u32>], g: &[u32], alphabet: u32) -> Result<Ensemble> {
    for s in sets {
        if let Some(&p) = s.iter().find(|&&p| p as usize >= g.len()) {
            return Err(Error::PartialGlobal(p as usize, g.len()));
        }
    }
    let values = sets.iter().map(|s| s.iter().map(|&p| g[p as usize]).collect()).collect();
    Ensemble::new(alphabet, sets.to_vec(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptMode {
    FlipOne,
    ResampleSet,
}

/// Each set independently, with probability alpha: change one coordinate to another symbol
/// (flip_one) or redraw every coordinate (resample_set).
pub fn corrupt(f: &Ensemble, alpha: f64, mode: CorruptMode, seed: u64) -> Result<Ensemble> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::ParameterRange(format!("alpha = {alpha} outside [0, 1]")));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = f.clone();
    for v in out.values.iter_mut() {
        if v.is_empty() || !rng.gen_bool(alpha) {
            continue;
        }
        match mode {
            CorruptMode::FlipOne => {
                if f.alphabet < 2 {
                    continue;
                }
                let j = rng.gen_range(0..v.len());
                let shift = rng.gen_range(1..f.alphabet);
                v[j] = (v[j] + shift) % f.alphabet;
            }
            CorruptMode::ResampleSet => {
                for x in v.iter_mut() {
                    *x = rng.gen_range(0..f.alphabet);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Which common part the test compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compare {
    #[default]
    SampledT,
    FullIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub epsilon: f64,
    pub exact: bool,
    pub samples: usize,
    pub std_error: f64,
    pub seed: Option<u64>,
    /// Rejection mass carried by each t (exact mode).
    pub per_t: Option<Vec<f64>>,
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn disagree(f: &Ensemble, ix: &[usize], sts: &StsDistribution, e: (u32, u32, u32), compare: Compare) -> bool {
    let (s1, t, s2) = (e.0 as usize, e.1 as usize, e.2 as usize);
    let (i, j) = (ix[s1], ix[s2]);
    if i == j {
        return false;
    }
    let pts = match compare {
        Compare::SampledT => sts.t_sets[t].clone(),
        Compare::FullIntersection => intersect(&sts.s_sets[s1], &sts.s_sets[s2]),
    };
    f.restrict(i, &pts) != f.restrict(j, &pts)
}

fn check_support(sts: &StsDistribution) -> Result<()> {
    for &(s1, t, s2, _) in &sts.entries {
        let ts = sts.t_sets.get(t as usize).ok_or_else(|| Error::SupportMismatch(format!("t index {t}")))?;
        for s in [s1, s2] {
            let ss = sts.s_sets.get(s as usize).ok_or_else(|| Error::SupportMismatch(format!("s index {s}")))?;
            if !is_sorted_subset(ts, ss) {
                return Err(Error::SupportMismatch(format!("t {ts:?} is not inside s {ss:?}")));
            }
        }
    }
    Ok(())
}

/// Probability that the test rejects f.
pub fn rejection(sts: &StsDistribution, f: &Ensemble, mode: EvalMode, compare: Compare) -> Result<TestResult> {
    check_support(sts)?;
    let ix = f.align(&sts.s_sets)?;
    let total: f64 = sts.entries.iter().map(|e| e.3).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyWalk);
    }
    match mode {
        EvalMode::Exact => {
            let mut per_t = vec![0.0; sts.t_sets.len()];
            for &(s1, t, s2, p) in &sts.entries {
                if p > 0.0 && disagree(f, &ix, sts, (s1, t, s2), compare) {
                    per_t[t as usize] += p / total;
                }
            }
            let epsilon = per_t.iter().sum::<f64>().clamp(0.0, 1.0);
            Ok(TestResult { epsilon, exact: true, samples: sts.entries.len(), std_error: 0.0, seed: None, per_t: Some(per_t) })
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::ParameterRange("Monte Carlo needs at least one sample".into()));
            }
            let dist = WeightedIndex::new(sts.entries.iter().map(|e| e.3)).map_err(|e| Error::SupportMismatch(e.to_string()))?;
            let mut rng = StdRng::seed_from_u64(seed);
            let mut hits = 0usize;
            for _ in 0..samples {
                let e = sts.entries[dist.sample(&mut rng)];
                if disagree(f, &ix, sts, (e.0, e.1, e.2), compare) {
                    hits += 1;
                }
            }
            let p = hits as f64 / samples as f64;
            let std_error = (p * (1.0 - p) / samples as f64).sqrt();
            Ok(TestResult { epsilon: p, exact: false, samples, std_error, seed: Some(seed), per_t: None })
        }
    }
}

/// Marginal of s1 over the distribution's set layer.
pub fn s_marginal(sts: &StsDistribution) -> Vec<f64> {
    let mut m = vec![0.0; sts.s_sets.len()];
    let total: f64 = sts.entries.iter().map(|e| e.3).sum();
    for e in &sts.entries {
        m[e.0 as usize] += e.3 / total;
    }
    m
}

/// Measure of the sets whose local function differs from g on more than a gamma fraction.
pub fn dist_gamma(f: &Ensemble, g: &[u32], gamma: f64, measure: &[f64]) -> Result<f64> {
    if measure.len() != f.len() {
        return Err(Error::SupportMismatch(format!("{} weights for {} sets", measure.len(), f.len())));
    }
    if let Some(p) = f.sets.iter().flatten().find(|&&p| p as usize >= g.len()) {
        return Err(Error::PartialGlobal(*p as usize, g.len()));
    }
    Ok((0..f.len()).filter(|&i| f.distance_to(i, g) > gamma).map(|i| measure[i]).sum())
}

pub const BRUTEFORCE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectDistance {
    pub distance: f64,
    pub argmin: Vec<u32>,
    pub candidates: usize,
}

/// Exact minimum of dist_gamma(f, G) over every global G on the points the sets cover.
pub fn dist_to_perfect_bruteforce(f: &Ensemble, gamma: f64, measure: &[f64]) -> Result<PerfectDistance> {
    let mut points: Vec<u32> = f.sets.iter().flatten().copied().collect();
    points.sort_unstable();
    points.dedup();
    let q = f.alphabet as usize;
    let count = (q as f64).powi(points.len() as i32);
    caps::check("global assignments", count, BRUTEFORCE_LIMIT as usize)?;
    let n = points.last().map_or(0, |&p| p as usize + 1);
    let mut g = vec![0u32; n];
    let mut best = PerfectDistance { distance: f64::INFINITY, argmin: g.clone(), candidates: count as usize };
    for code in 0..count as usize {
        let mut c = code;
        for &p in &points {
            g[p as usize] = (c % q) as u32;
            c /= q;
        }
        let d = dist_gamma(f, &g, gamma, measure)?;
        if d < best.distance {
            best.distance = d;
            best.argmin = g.clone();
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCheck {
    pub pass: bool,
    pub witness: Option<(u32, u32, u32)>,
    /// smallest relative distance among disagreeing labeled edges (1 when none disagree)
    pub min_distance: f64,
}

/// Every disagreement on a labeled edge (s1, t, s2) must have relative distance above delta.
pub fn delta_ensemble_check(sts: &StsDistribution, f: &Ensemble, delta: f64) -> Result<DeltaCheck> {
    let ix = f.align(&sts.s_sets)?;
    let mut out = DeltaCheck { pass: true, witness: None, min_distance: 1.0 };
    for &(s1, t, s2, p) in &sts.entries {
        if !(p > 0.0) {
            continue;
        }
        let pts = &sts.t_sets[t as usize];
        let (a, b) = (f.restrict(ix[s1 as usize], pts), f.restrict(ix[s2 as usize], pts));
        if a == b {
            continue;
        }
        let d = a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64 / pts.len() as f64;
        out.min_distance = out.min_distance.min(d);
        if d <= delta && out.pass {
            out.pass = false;
            out.witness = Some((s1, t, s2));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surprise {
    pub value: f64,
    pub p_disagree: f64,
    /// true when f never disagrees on t, in which case value is 0
    pub empty_conditioning: bool,
}

/// Pr[agree on a and differ at v | differ on t], with (s1, t, s2) from the STS table and (a, v) | t
/// from the STAV distribution.
pub fn surprise(x: &StavInstance, f: &Ensemble) -> Result<Surprise> {
    let ix = f.align(&x.s_sets)?;
    let index = x.index();
    let mut av_given_t: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); x.t_sets.len()];
    for (t, list) in index.d_by_t.iter().enumerate() {
        let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
        for &i in list {
            let e = x.d_stav[i as usize];
            *acc.entry((e.2, e.3)).or_default() += e.4;
        }
        let z: f64 = acc.values().sum();
        let mut v: Vec<_> = acc.into_iter().map(|((a, v), p)| (a, v, p / z)).collect();
        v.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
        av_given_t[t] = v;
    }
    let (mut num, mut den, mut total) = (0.0, 0.0, 0.0);
    for &(s1, t, s2, p) in &x.sts {
        total += p;
        let (i, j) = (ix[s1 as usize], ix[s2 as usize]);
        let tp = &x.t_sets[t as usize];
        if i == j || f.restrict(i, tp) == f.restrict(j, tp) {
            continue;
        }
        den += p;
        for &(a, v, q) in &av_given_t[t as usize] {
            let ap = &x.a_sets[a as usize];
            if f.restrict(i, ap) == f.restrict(j, ap) && f.value_at(i, v) != f.value_at(j, v) {
                num += p * q;
            }
        }
    }
    if den <= 0.0 {
        return Ok(Surprise { value: 0.0, p_disagree: 0.0, empty_conditioning: true });
    }
    Ok(Surprise { value: num / den, p_disagree: den / total, empty_conditioning: false })
}

/// Largest λ_bip over the T-lower graphs.
pub fn t_lower_expansion(x: &StavInstance) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in 0..x.t_sets.len() {
        let g = derive_graph(x, GraphKind::TLower(t))?;
        worst = worst.max(bipartite_norm(&g.op)?.lambda_bip);
    }
    Ok(worst)
}

/// The weak neighborhood tests: NID or NCD over balls, comparing on the sampled t.
pub fn weak_neighborhood_tests(
    c: &Complex,
    l: usize,
    k: usize,
    f: &Ensemble,
    mode: NeighborhoodMode,
    eval: EvalMode,
    compare: Compare,
) -> Result<TestResult> {
    let x = stav::neighborhood_stav(c, l, k, mode)?;
    rejection(&x.sts_distribution(), f, eval, compare)
}

/// The d,l-agreement distribution: t by the level measure, then s1, s2 ⊇ t independently.
pub fn dl_distribution(c: &Complex, d: usize, l: usize) -> Result<StsDistribution> {
    if l >= d || d as isize > c.dim() {
        return Err(Error::ParameterRange(format!("need l < d <= dim; got d={d}, l={l}")));
    }
    let sl = c.level(d as isize);
    let tl = c.level(l as isize);
    let per = 1.0 / binomial(d + 1, l + 1);
    let mut groups: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    for (si, (s, &m)) in sl.faces.iter().zip(&sl.measure).enumerate() {
        for t in s.subfaces(l + 1) {
            groups[tl.position(&t).unwrap()].push((si as u32, m * per));
        }
    }
    stav::check_cap("sts entries", groups.iter().map(|g| (g.len() * g.len()) as f64).sum())?;
    Ok(StsDistribution {
        s_sets: sl.faces.iter().map(|f| f.to_vec()).collect(),
        t_sets: tl.faces.iter().map(|f| f.to_vec()).collect(),
        entries: stav::independent_sts(&groups),
    })
}

/// r ∈ X(2k) by its measure, then s1, s2 ∈ X(k) inside r. With `t_level` a face t ⊂ r of that
/// level is drawn first and s1, s2 ⊇ t; without it t is s1 ∩ s2.
pub fn up2k_distribution(c: &Complex, k: usize, t_level: Option<usize>) -> Result<StsDistribution> {
    if k == 0 || 2 * k as isize > c.dim() {
        return Err(Error::ParameterRange(format!("UP_2k needs 1 <= k and 2k <= dim; got k={k}")));
    }
    if let Some(tl) = t_level {
        if tl >= k {
            return Err(Error::ParameterRange(format!("t level {tl} must be below k = {k}")));
        }
    }
    let rl = c.level(2 * k as isize);
    let sl = c.level(k as isize);
    let per_r = match t_level {
        Some(tl) => binomial(2 * k + 1, tl + 1) * binomial(2 * k - tl, k - tl).powi(2),
        None => binomial(2 * k + 1, k + 1).powi(2),
    };
    caps::check("sts entries", rl.len() as f64 * per_r, caps::table_cap())?;
    let mut t_ids: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut t_sets: Vec<Vec<u32>> = Vec::new();
    let mut acc: HashMap<(u32, u32, u32), f64> = HashMap::new();
    for (r, &m) in rl.faces.iter().zip(&rl.measure) {
        let w = m / per_r;
        let mut push = |s1: &[u32], t: Vec<u32>, s2: &[u32]| {
            let next = t_sets.len() as u32;
            let ti = *t_ids.entry(t.clone()).or_insert_with(|| {
                t_sets.push(t);
                next
            });
            let (a, b) = (sl.position_of(s1).unwrap() as u32, sl.position_of(s2).unwrap() as u32);
            *acc.entry((a, ti, b)).or_default() += w;
        };
        match t_level {
            Some(tl) => {
                for t in r.subfaces(tl + 1) {
                    let rest = r.minus(&t);
                    let ext: Vec<_> = rest.subfaces(k - tl).map(|e| e.union(&t)).collect();
                    for s1 in &ext {
                        for s2 in &ext {
                            push(s1, t.to_vec(), s2);
                        }
                    }
                }
            }
            None => {
                let subs: Vec<_> = r.subfaces(k + 1).collect();
                for s1 in &subs {
                    for s2 in &subs {
                        push(s1, intersect(s1, s2), s2);
                    }
                }
            }
        }
    }
    let mut entries: Vec<_> = acc.into_iter().map(|((a, t, b), p)| (a, t, b, p)).collect();
    entries.sort_by(|x, y| (x.1, x.0, x.2).cmp(&(y.1, y.0, y.2)));
    Ok(StsDistribution { s_sets: sl.faces.iter().map(|f| f.to_vec()).collect(), t_sets, entries })
}

/// Largest two-sided λ over the STS_t graphs (s1, s2 | t).
pub fn sts_t_expansion(sts: &StsDistribution) -> Result<f64> {
    let mut by_t: HashMap<u32, Vec<(u32, u32, f64)>> = HashMap::new();
    for &(a, t, b, p) in &sts.entries {
        by_t.entry(t).or_default().push((a, b, p));
    }
    let mut worst = 0.0f64;
    for (_, list) in by_t {
        let mut ids: Vec<u32> = list.iter().flat_map(|e| [e.0, e.1]).collect();
        ids.sort_unstable();
        ids.dedup();
        let pos: HashMap<u32, u32> = ids.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
        let trips = list.iter().map(|&(a, b, p)| (pos[&a], pos[&b], p)).collect();
        let op = MarkovOperator::from_joint(ids.len(), ids.len(), true, trips)?;
        worst = worst.max(square_spectrum(&op)?.two_sided());
    }
    Ok(worst)
}
