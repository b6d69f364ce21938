//! Weighted pure simplicial complexes with the chain-sampling face measure.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, OnceLock};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face(Vec<u32>);

impl Face {
    pub fn new(mut verts: Vec<u32>) -> Result<Face> {
        let before = verts.len();
        verts.sort_unstable();
        verts.dedup();
        if verts.len() != before {
            return Err(Error::UnsortedFace(verts));
        }
        Ok(Face(verts))
    }

    /// Caller guarantees strictly increasing input.
    pub fn from_sorted(verts: Vec<u32>) -> Face {
        debug_assert!(verts.windows(2).all(|w| w[0] < w[1]));
        Face(verts)
    }

    pub fn empty() -> Face {
        Face(Vec::new())
    }

    pub fn verts(&self) -> &[u32] {
        &self.0
    }

    pub fn into_verts(self) -> Vec<u32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> isize {
        self.0.len() as isize - 1
    }

    pub fn contains(&self, v: u32) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &Face) -> bool {
        is_sorted_subset(&self.0, &other.0)
    }

    pub fn is_disjoint(&self, other: &Face) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &Face) -> Face {
        let mut v: Vec<u32> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        Face(v)
    }

    pub fn minus(&self, other: &Face) -> Face {
        Face(self.0.iter().copied().filter(|x| !other.contains(*x)).collect())
    }

    pub fn intersection(&self, other: &Face) -> Face {
        Face(self.0.iter().copied().filter(|x| other.contains(*x)).collect())
    }

    /// All subfaces with `size` vertices, in lexicographic order.
    pub fn subfaces(&self, size: usize) -> impl Iterator<Item = Face> + '_ {
        self.0.iter().copied().combinations(size).map(Face)
    }
}

impl std::ops::Deref for Face {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

pub(crate) fn is_sorted_subset(small: &[u32], big: &[u32]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

pub fn binomial_u(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Faces of one dimension with their chain measure.
#[derive(Debug, Clone)]
pub struct LevelIndex {
    pub k: isize,
    pub faces: Vec<Face>,
    pub measure: Vec<f64>,
    index: HashMap<Face, usize>,
}

impl LevelIndex {
    pub(crate) fn new(k: isize, faces: Vec<Face>, measure: Vec<f64>) -> LevelIndex {
        let index = faces.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        LevelIndex { k, faces, measure, index }
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn position(&self, f: &Face) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn position_of(&self, verts: &[u32]) -> Option<usize> {
        self.index.get(&Face(verts.to_vec())).copied()
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Explicit(Vec<(Face, f64)>),
    /// All (d+1)-subsets of n vertices, uniform weights; never materialized up front.
    Complete,
}

/// Pure weighted simplicial complex.
#[derive(Debug, Clone)]
pub struct Complex {
    n_vertices: usize,
    dim: isize,
    coloring: Option<Vec<usize>>,
    repr: Repr,
    drift: f64,
    levels: Vec<OnceLock<Arc<LevelIndex>>>,
}

impl Complex {
    /// Validates and normalizes. Vertex ids must be dense `0..n_vertices`.
    pub fn build_from_top_faces(n_vertices: usize, tops: Vec<(Face, f64)>) -> Result<Complex> {
        Self::build(n_vertices, tops, None)
    }

    pub fn build_colored(
        n_vertices: usize,
        tops: Vec<(Face, f64)>,
        coloring: Vec<usize>,
    ) -> Result<Complex> {
        Self::build(n_vertices, tops, Some(coloring))
    }

    fn build(n: usize, tops: Vec<(Face, f64)>, coloring: Option<Vec<usize>>) -> Result<Complex> {
        if tops.is_empty() {
            return Err(Error::EmptyComplex);
        }
        let size = tops[0].0.len();
        let mut seen = HashSet::new();
        let mut used = vec![false; n];
        let mut total = 0.0;
        for (f, w) in &tops {
            if f.len() != size {
                return Err(Error::MixedDimension(size.saturating_sub(1), f.len().saturating_sub(1)));
            }
            if !f.windows(2).all(|p| p[0] < p[1]) {
                return Err(Error::UnsortedFace(f.to_vec()));
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::ZeroWeight(f.to_vec(), *w));
            }
            if !seen.insert(f.clone()) {
                return Err(Error::DuplicateTopFace(f.to_vec()));
            }
            for &v in f.iter() {
                if v as usize >= n {
                    return Err(Error::VertexOutOfRange(v, n));
                }
                used[v as usize] = true;
            }
            total += w;
        }
        if size > 0 {
            if let Some(v) = used.iter().position(|u| !u) {
                return Err(Error::IsolatedVertex(v as u32));
            }
        }
        let drift = (total - 1.0).abs();
        let tops: Vec<(Face, f64)> = tops.into_iter().map(|(f, w)| (f, w / total)).collect();
        let dim = size as isize - 1;
        if let Some(col) = &coloring {
            validate_coloring(col, n, dim, &tops)?;
        }
        Ok(Complex::assemble(n, dim, coloring, Repr::Explicit(tops), drift))
    }

    fn assemble(n: usize, dim: isize, coloring: Option<Vec<usize>>, repr: Repr, drift: f64) -> Complex {
        let levels = (0..(dim + 2).max(1)).map(|_| OnceLock::new()).collect();
        Complex { n_vertices: n, dim, coloring, repr, drift, levels }
    }

    /// All C(n, d+1) top faces with uniform weight; levels are enumerated on demand.
    pub fn complete(n: usize, d: usize) -> Result<Complex> {
        if n < d + 1 {
            return Err(Error::DimensionTooLarge { n, d });
        }
        Ok(Complex::assemble(n, d as isize, None, Repr::Complete, 0.0))
    }

    pub fn partite_complete(part_sizes: &[usize]) -> Result<Complex> {
        if part_sizes.is_empty() {
            return Err(Error::EmptyComplex);
        }
        if let Some(i) = part_sizes.iter().position(|&m| m == 0) {
            return Err(Error::EmptyPart(i));
        }
        let mut coloring = Vec::new();
        let mut parts = Vec::new();
        for (c, &m) in part_sizes.iter().enumerate() {
            let start = coloring.len() as u32;
            parts.push((start..start + m as u32).collect::<Vec<_>>());
            coloring.extend(std::iter::repeat(c).take(m));
        }
        let tops: Vec<(Face, f64)> = parts
            .iter()
            .map(|p| p.iter().copied())
            .multi_cartesian_product()
            .map(|v| (Face(v), 1.0))
            .collect();
        Complex::build_colored(coloring.len(), tops, coloring)
    }

    /// Independence complex of a graphic matroid truncated to forests of `truncation + 1` edges.
    /// Complex vertices are edge indices.
    pub fn graphic_matroid(edges: &[(usize, usize)], truncation: usize) -> Result<Complex> {
        let nv = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        let rank = forest_rank(nv, edges.iter().copied());
        if truncation + 1 > rank {
            return Err(Error::TruncationExceedsRank { truncation, rank });
        }
        let tops: Vec<(Face, f64)> = (0..edges.len() as u32)
            .combinations(truncation + 1)
            .filter(|c| forest_rank(nv, c.iter().map(|&i| edges[i as usize])) == c.len())
            .map(|c| (Face(c), 1.0))
            .collect();
        Complex::build_from_top_faces(edges.len(), tops)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Top dimension; −1 for the empty complex {∅}.
    pub fn dim(&self) -> isize {
        self.dim
    }

    /// Top dimension as an unsigned level; panics on the empty complex.
    pub fn d(&self) -> usize {
        assert!(self.dim >= 0, "empty complex has no nonnegative levels");
        self.dim as usize
    }

    pub fn coloring(&self) -> Option<&[usize]> {
        self.coloring.as_deref()
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.repr, Repr::Complete)
    }

    /// |1 − Σ weights| of the raw input, before renormalization.
    pub fn normalization_drift(&self) -> f64 {
        self.drift
    }

    pub fn color_of(&self, v: u32) -> Option<usize> {
        self.coloring.as_ref().map(|c| c[v as usize])
    }

    pub fn colors(&self, f: &[u32]) -> Option<Vec<usize>> {
        self.coloring.as_ref().map(|c| {
            let mut cs: Vec<usize> = f.iter().map(|&v| c[v as usize]).collect();
            cs.sort_unstable();
            cs
        })
    }

    /// Number of faces in X(k) without enumerating.
    pub fn level_size(&self, k: isize) -> usize {
        if k < -1 || k > self.dim {
            return 0;
        }
        match &self.repr {
            Repr::Complete => binomial_u(self.n_vertices, (k + 1) as usize),
            Repr::Explicit(_) => self.level(k).len(),
        }
    }

    /// X(k), cached after first use. k = −1 gives {∅}.
    pub fn level(&self, k: isize) -> Arc<LevelIndex> {
        assert!(k >= -1 && k <= self.dim, "level {k} out of range for dimension {}", self.dim);
        self.levels[(k + 1) as usize]
            .get_or_init(|| Arc::new(self.compute_level(k)))
            .clone()
    }

    pub fn try_level(&self, k: isize) -> Result<Arc<LevelIndex>> {
        if k < -1 || k > self.dim {
            return Err(Error::LevelOutOfRange { k, d: self.dim });
        }
        Ok(self.level(k))
    }

    pub fn top_faces(&self) -> Vec<(Face, f64)> {
        match &self.repr {
            Repr::Explicit(t) => t.clone(),
            Repr::Complete => {
                let l = self.level(self.dim);
                l.faces.iter().cloned().zip(l.measure.iter().copied()).collect()
            }
        }
    }

    fn compute_level(&self, k: isize) -> LevelIndex {
        let size = (k + 1) as usize;
        match &self.repr {
            Repr::Complete => {
                let faces: Vec<Face> =
                    (0..self.n_vertices as u32).combinations(size).map(Face).collect();
                let p = 1.0 / faces.len() as f64;
                let measure = vec![p; faces.len()];
                LevelIndex::new(k, faces, measure)
            }
            Repr::Explicit(tops) => {
                let c = binomial((self.dim + 1) as usize, size);
                let mut acc: HashMap<Face, f64> = HashMap::new();
                for (t, w) in tops {
                    for s in t.subfaces(size) {
                        *acc.entry(s).or_insert(0.0) += w / c;
                    }
                }
                let mut items: Vec<(Face, f64)> = acc.into_iter().collect();
                items.sort_by(|a, b| a.0.cmp(&b.0));
                let (faces, measure) = items.into_iter().unzip();
                LevelIndex::new(k, faces, measure)
            }
        }
    }

    pub fn measure_of(&self, f: &Face) -> f64 {
        match &self.repr {
            Repr::Complete => {
                if f.len() as isize - 1 <= self.dim && f.iter().all(|&v| (v as usize) < self.n_vertices) {
                    1.0 / binomial(self.n_vertices, f.len())
                } else {
                    0.0
                }
            }
            Repr::Explicit(_) => {
                let k = f.dim();
                if k > self.dim {
                    return 0.0;
                }
                let l = self.level(k);
                l.position(f).map(|i| l.measure[i]).unwrap_or(0.0)
            }
        }
    }

    pub fn is_face(&self, f: &Face) -> bool {
        f.dim() <= self.dim && self.measure_of(f) > 0.0 || f.is_empty()
    }

    /// Link of `s` with dense relabeled vertices, plus the map new id → old id.
    pub fn link_with_map(&self, s: &Face) -> Result<(Complex, Vec<u32>)> {
        if !self.is_face(s) {
            return Err(Error::NotAFace(s.to_vec()));
        }
        let link_dim = self.dim - s.len() as isize;
        match &self.repr {
            Repr::Complete => {
                let map: Vec<u32> =
                    (0..self.n_vertices as u32).filter(|v| !s.contains(*v)).collect();
                let c = if link_dim >= 0 {
                    Complex::assemble(map.len(), link_dim, None, Repr::Complete, 0.0)
                } else {
                    Complex::assemble(0, -1, None, Repr::Explicit(vec![(Face::empty(), 1.0)]), 0.0)
                };
                Ok((c, map))
            }
            Repr::Explicit(tops) => {
                let containing: Vec<(Face, f64)> = tops
                    .iter()
                    .filter(|(t, _)| s.is_subset_of(t))
                    .map(|(t, w)| (t.minus(s), *w))
                    .collect();
                let mut map: Vec<u32> =
                    containing.iter().flat_map(|(t, _)| t.iter().copied()).collect();
                map.sort_unstable();
                map.dedup();
                let relabel: HashMap<u32, u32> =
                    map.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
                let total: f64 = containing.iter().map(|x| x.1).sum();
                let new_tops: Vec<(Face, f64)> = containing
                    .into_iter()
                    .map(|(t, w)| (Face(t.iter().map(|v| relabel[v]).collect()), w / total))
                    .collect();
                let coloring = self.coloring.as_ref().map(|col| {
                    let removed: HashSet<usize> = s.iter().map(|&v| col[v as usize]).collect();
                    let remaining: Vec<usize> =
                        (0..=(self.dim as usize)).filter(|c| !removed.contains(c)).collect();
                    map.iter()
                        .map(|&v| remaining.iter().position(|&c| c == col[v as usize]).unwrap())
                        .collect::<Vec<_>>()
                });
                let c = Complex::assemble(map.len(), link_dim, coloring, Repr::Explicit(new_tops), 0.0);
                Ok((c, map))
            }
        }
    }

    pub fn link(&self, s: &Face) -> Result<Complex> {
        Ok(self.link_with_map(s)?.0)
    }

    /// Pure k-dimensional complex whose top distribution is the X(k) measure.
    pub fn skeleton(&self, k: usize) -> Result<Complex> {
        if k as isize > self.dim {
            return Err(Error::LevelOutOfRange { k: k as isize, d: self.dim });
        }
        if k as isize == self.dim {
            return Ok(self.clone());
        }
        match &self.repr {
            Repr::Complete => Ok(Complex::assemble(self.n_vertices, k as isize, None, Repr::Complete, 0.0)),
            Repr::Explicit(_) => {
                let l = self.level(k as isize);
                let tops = l.faces.iter().cloned().zip(l.measure.iter().copied()).collect();
                Ok(Complex::assemble(self.n_vertices, k as isize, self.coloring.clone(), Repr::Explicit(tops), 0.0))
            }
        }
    }

    /// Faces of X(k) whose color set is exactly `colors` (sorted), with measure conditioned on that class.
    pub fn colored_level(&self, colors: &[usize]) -> Result<(Vec<Face>, Vec<f64>)> {
        let col = self.coloring.as_ref().ok_or(Error::NotPartite)?;
        let mut want = colors.to_vec();
        want.sort_unstable();
        let k = want.len() as isize - 1;
        if k > self.dim {
            return Err(Error::LevelOutOfRange { k, d: self.dim });
        }
        let l = self.level(k);
        let mut faces = Vec::new();
        let mut measure = Vec::new();
        for (f, &m) in l.faces.iter().zip(&l.measure) {
            let mut cs: Vec<usize> = f.iter().map(|&v| col[v as usize]).collect();
            cs.sort_unstable();
            if cs == want {
                faces.push(f.clone());
                measure.push(m);
            }
        }
        let total: f64 = measure.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyWalk);
        }
        measure.iter_mut().for_each(|m| *m /= total);
        Ok((faces, measure))
    }

    /// Representative faces of X(k) for symmetric checks: one face for a complete complex,
    /// every face otherwise.
    pub fn orbit_representatives(&self, k: isize) -> Vec<Face> {
        match &self.repr {
            Repr::Complete => vec![Face((0..(k + 1) as u32).collect())],
            Repr::Explicit(_) => self.level(k).faces.clone(),
        }
    }

    /// Faces of X(k) containing `s`, as (face, measure) pairs.
    pub fn cofaces(&self, s: &Face, k: isize) -> Vec<(Face, f64)> {
        let l = self.level(k);
        l.faces
            .iter()
            .zip(&l.measure)
            .filter(|(f, _)| s.is_subset_of(f))
            .map(|(f, &m)| (f.clone(), m))
            .collect()
    }
}

fn validate_coloring(col: &[usize], n: usize, dim: isize, tops: &[(Face, f64)]) -> Result<()> {
    if col.len() != n {
        return Err(Error::InvalidColoring(format!("{} colors for {} vertices", col.len(), n)));
    }
    let parts = (dim + 1) as usize;
    if let Some(&c) = col.iter().find(|&&c| c >= parts) {
        return Err(Error::InvalidColoring(format!("color {c} outside [0, {dim}]")));
    }
    for (f, _) in tops {
        let mut seen = vec![false; parts];
        for &v in f.iter() {
            let c = col[v as usize];
            if seen[c] {
                return Err(Error::InvalidColoring(format!("face {:?} repeats color {c}", f.verts())));
            }
            seen[c] = true;
        }
    }
    Ok(())
}

fn forest_rank(nv: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut rank = 0;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            rank += 1;
        }
    }
    rank
}
