//! Random walks between face levels, stored as joint edge distributions.

use std::collections::HashMap;

use crate::complex::{binomial, Complex, Face};
use crate::error::{Error, Result};

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Duplicate (row, col) entries are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trips: Vec<(u32, u32, f64)>) -> Csr {
        trips.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut data: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Csr { n_rows, n_cols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().map(|&c| c as usize).zip(self.data[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[a..b].binary_search(&(j as u32)) {
            Ok(p) => self.data[a + p],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0u32; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let p = next[c];
                indices[p] = r as u32;
                data[p] = v;
                next[c] += 1;
            }
        }
        Csr { n_rows: self.n_cols, n_cols: self.n_rows, indptr: counts, indices, data }
    }

    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.n_cols, other.n_rows);
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![0.0f64; other.n_cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.n_rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                if acc[c] != 0.0 {
                    indices.push(c as u32);
                    data.push(acc[c]);
                }
                acc[c] = 0.0;
            }
            touched.clear();
            indptr[r + 1] = indices.len();
        }
        Csr { n_rows: self.n_rows, n_cols: other.n_cols, indptr, indices, data }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|x| x.1).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cols];
        for (c, v) in self.indices.iter().zip(&self.data) {
            s[*c as usize] += v;
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[r][c] = v;
            }
        }
        m
    }
}

/// A walk from a source level to a target level, held as the joint edge distribution
/// J(u, v) = Pr[source = u, target = v]. Transitions are J(u, v) / source_measure(u).
#[derive(Debug, Clone)]
pub struct MarkovOperator {
    pub joint: Csr,
    pub source_measure: Vec<f64>,
    pub target_measure: Vec<f64>,
    /// Source and target are the same indexed set.
    pub square: bool,
}

/// Bipartite graphs share the representation: left = source, right = target.
pub type BipartiteGraph = MarkovOperator;

impl MarkovOperator {
    /// Normalizes the total mass to 1; marginals become the side measures.
    pub fn from_joint(n_rows: usize, n_cols: usize, square: bool, trips: Vec<(u32, u32, f64)>) -> Result<Self> {
        let total: f64 = trips.iter().map(|t| t.2).sum();
        if !(total > 0.0) {
            return Err(Error::EmptyWalk);
        }
        let trips = trips.into_iter().filter(|t| t.2 != 0.0).map(|(r, c, v)| (r, c, v / total)).collect();
        let joint = Csr::from_triplets(n_rows, n_cols, trips);
        let source_measure = joint.row_sums();
        let target_measure = joint.col_sums();
        Ok(MarkovOperator { joint, source_measure, target_measure, square })
    }

    pub fn n_source(&self) -> usize {
        self.joint.n_rows
    }

    pub fn n_target(&self) -> usize {
        self.joint.n_cols
    }

    /// Row-stochastic transition matrix.
    pub fn transition(&self) -> Csr {
        let mut t = self.joint.clone();
        for r in 0..t.n_rows {
            let m = self.source_measure[r];
            for p in t.indptr[r]..t.indptr[r + 1] {
                t.data[p] /= m;
            }
        }
        t
    }

    pub fn prob(&self, u: usize, v: usize) -> f64 {
        self.joint.get(u, v) / self.source_measure[u]
    }

    pub fn reverse(&self) -> MarkovOperator {
        MarkovOperator {
            joint: self.joint.transpose(),
            source_measure: self.target_measure.clone(),
            target_measure: self.source_measure.clone(),
            square: self.square,
        }
    }

    /// (P f)(u) = E[f(v) | u].
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n_source())
            .map(|u| self.joint.row(u).map(|(v, p)| p * f[v]).sum::<f64>() / self.source_measure[u])
            .collect()
    }

    /// Walk self then other: joint(u, w) = Σ_v J1(u, v) P2(v → w).
    pub fn then(&self, other: &MarkovOperator) -> MarkovOperator {
        let joint = self.joint.matmul(&other.transition());
        let target_measure = joint.col_sums();
        MarkovOperator {
            source_measure: self.source_measure.clone(),
            target_measure,
            joint,
            square: false,
        }
    }

    pub fn row_sum_residual(&self) -> f64 {
        self.transition().row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |J(u, v) − J(v, u)|, meaningful for square operators.
    pub fn reversibility_residual(&self) -> f64 {
        let t = self.joint.transpose();
        let mut r = 0.0f64;
        for u in 0..self.n_source() {
            for (v, p) in self.joint.row(u) {
                r = r.max((p - t.get(u, v)).abs());
            }
        }
        r
    }

    pub fn to_csv(&self, row_labels: &[String], col_labels: &[String]) -> String {
        let t = self.transition();
        let mut out = String::from("row_face,col_face,prob\n");
        for u in 0..t.n_rows {
            for (v, p) in t.row(u) {
                out.push_str(&format!("\"{}\",\"{}\",{:.17e}\n", row_labels[u], col_labels[v], p));
            }
        }
        out
    }
}

fn check_level(c: &Complex, k: isize) -> Result<()> {
    if k < -1 || k > c.dim() {
        return Err(Error::LevelOutOfRange { k, d: c.dim() });
    }
    Ok(())
}

fn containment_joint(c: &Complex, k: usize, l: isize) -> Result<MarkovOperator> {
    check_level(c, k as isize)?;
    check_level(c, l)?;
    if l >= k as isize {
        return Err(Error::LevelOutOfRange { k: l, d: k as isize - 1 });
    }
    let big = c.level(k as isize);
    let small = c.level(l);
    let per = 1.0 / binomial(k + 1, (l + 1) as usize);
    let mut trips = Vec::with_capacity(big.len() * (binomial(k + 1, (l + 1) as usize) as usize));
    for (i, s) in big.faces.iter().enumerate() {
        for t in s.subfaces((l + 1) as usize) {
            let j = small.position(&t).expect("subface of a face is a face");
            trips.push((i as u32, j as u32, big.measure[i] * per));
        }
    }
    MarkovOperator::from_joint(big.len(), small.len(), false, trips)
}

/// X(k) → X(k+1), moving up proportionally to the measure.
pub fn up_operator(c: &Complex, k: usize) -> Result<MarkovOperator> {
    if k as isize >= c.dim() {
        return Err(Error::LevelOutOfRange { k: k as isize + 1, d: c.dim() });
    }
    Ok(containment_joint(c, k + 1, k as isize)?.reverse())
}

/// X(k+1) → X(k), uniform over the k+2 facets.
pub fn down_operator(c: &Complex, k: usize) -> Result<MarkovOperator> {
    if k as isize >= c.dim() {
        return Err(Error::LevelOutOfRange { k: k as isize + 1, d: c.dim() });
    }
    containment_joint(c, k + 1, k as isize)
}

/// D_{k,l}: X(k) → X(l), uniform over contained l-faces. l = −1 is allowed.
pub fn containment_operator(c: &Complex, k: usize, l: isize) -> Result<MarkovOperator> {
    containment_joint(c, k, l)
}

/// D_{k,l} as the product D_{k,k−1} ⋯ D_{l+1,l}.
pub fn containment_by_product(c: &Complex, k: usize, l: usize) -> Result<MarkovOperator> {
    if l >= k {
        return Err(Error::LevelOutOfRange { k: l as isize, d: k as isize - 1 });
    }
    let mut op = down_operator(c, k - 1)?;
    for m in (l..k - 1).rev() {
        op = op.then(&down_operator(c, m)?);
    }
    Ok(op)
}

/// X(k) → X(l) → X(k).
pub fn lower_walk(c: &Complex, k: usize, l: isize) -> Result<MarkovOperator> {
    let d = containment_operator(c, k, l)?;
    let mut op = d.then(&d.reverse());
    op.square = true;
    Ok(op)
}

/// X(k) → X(k+1) → a different k-face of the same (k+1)-face.
pub fn non_lazy_upper_walk(c: &Complex, k: usize) -> Result<MarkovOperator> {
    if k as isize >= c.dim() {
        return Err(Error::LevelOutOfRange { k: k as isize + 1, d: c.dim() });
    }
    let lvl = c.level(k as isize);
    let up = c.level(k as isize + 1);
    let mut trips = Vec::new();
    for (s, &m) in up.faces.iter().zip(&up.measure) {
        let subs: Vec<usize> = s.subfaces(k + 1).map(|t| lvl.position(&t).unwrap()).collect();
        let p = m / (subs.len() * (subs.len() - 1)) as f64;
        for &a in &subs {
            for &b in &subs {
                if a != b {
                    trips.push((a as u32, b as u32, p));
                }
            }
        }
    }
    MarkovOperator::from_joint(lvl.len(), lvl.len(), true, trips)
}

/// Edges between disjoint s ∈ X(l1), t ∈ X(l2) whose union is a face; the union face is
/// drawn by its measure and split uniformly.
pub fn complement_walk(c: &Complex, l1: usize, l2: usize) -> Result<MarkovOperator> {
    let u = l1 + l2 + 1;
    if u as isize > c.dim() {
        return Err(Error::LevelOutOfRange { k: u as isize, d: c.dim() });
    }
    let top = c.level(u as isize);
    let left = c.level(l1 as isize);
    let right = c.level(l2 as isize);
    let splits = binomial(u + 1, l1 + 1);
    let mut trips = Vec::with_capacity(top.len() * splits as usize);
    let mut rest = Vec::with_capacity(l2 + 1);
    for (f, &m) in top.faces.iter().zip(&top.measure) {
        for s in f.subfaces(l1 + 1) {
            rest.clear();
            rest.extend(f.iter().copied().filter(|v| !s.contains(*v)));
            let i = left.position(&s).unwrap();
            let j = right.position_of(&rest).unwrap();
            trips.push((i as u32, j as u32, m / splits));
        }
    }
    MarkovOperator::from_joint(left.len(), right.len(), l1 == l2, trips)
}

/// Colored walk X[I] → X[J] through X[I ⊔ J]. Returns the operator and both side face lists.
pub fn colored_walk(c: &Complex, i_colors: &[usize], j_colors: &[usize]) -> Result<(MarkovOperator, Vec<Face>, Vec<Face>)> {
    let col = c.coloring().ok_or(Error::NotPartite)?;
    if i_colors.is_empty() || j_colors.is_empty() {
        return Err(Error::ParameterRange("color sets must be nonempty".into()));
    }
    if i_colors.iter().any(|x| j_colors.contains(x)) {
        return Err(Error::OverlappingColors);
    }
    let union: Vec<usize> = i_colors.iter().chain(j_colors).copied().collect();
    let (lf, _) = c.colored_level(i_colors)?;
    let (rf, _) = c.colored_level(j_colors)?;
    let (uf, um) = c.colored_level(&union)?;
    let li: HashMap<&Face, usize> = lf.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let ri: HashMap<&Face, usize> = rf.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let mut trips = Vec::with_capacity(uf.len());
    for (u, &m) in uf.iter().zip(&um) {
        let s = Face::from_sorted(u.iter().copied().filter(|&v| i_colors.contains(&col[v as usize])).collect());
        let t = u.minus(&s);
        trips.push((li[&s] as u32, ri[&t] as u32, m));
    }
    let op = MarkovOperator::from_joint(lf.len(), rf.len(), false, trips)?;
    Ok((op, lf, rf))
}

/// Walk on X(l) through X(l+j) with |t ∩ t'| = l + 1 − j.
pub fn fixed_union_walk(c: &Complex, l: usize, j: usize) -> Result<MarkovOperator> {
    if j < 1 || j > l + 1 {
        return Err(Error::ParameterRange(format!("need 1 <= j <= l+1, got j={j}, l={l}")));
    }
    if (l + j + 1) as isize > c.dim() {
        return Err(Error::LevelOutOfRange { k: (l + j + 1) as isize, d: c.dim() });
    }
    let lvl = c.level(l as isize);
    let up = c.level((l + j) as isize);
    let per = 1.0 / (binomial(l + j + 1, l + 1) * binomial(l + 1, j));
    let mut trips = Vec::new();
    for (s, &m) in up.faces.iter().zip(&up.measure) {
        let subs: Vec<Face> = s.subfaces(l + 1).collect();
        let ids: Vec<usize> = subs.iter().map(|t| lvl.position(t).unwrap()).collect();
        for (a, ta) in subs.iter().enumerate() {
            for (b, tb) in subs.iter().enumerate() {
                if ta.intersection(tb).len() == l + 1 - j {
                    trips.push((ids[a] as u32, ids[b] as u32, m * per));
                }
            }
        }
    }
    MarkovOperator::from_joint(lvl.len(), lvl.len(), true, trips)
}

/// Ball_z = vertices of the link of z, for each z ∈ X(k).
pub fn neighborhood_system(c: &Complex, k: usize) -> Result<Vec<(Face, Vec<u32>)>> {
    if k as isize > c.dim() - 1 {
        return Err(Error::LevelOutOfRange { k: k as isize, d: c.dim() - 1 });
    }
    let lvl = c.level(k as isize);
    let edges = c.level(k as isize + 1);
    let mut balls: HashMap<&Face, Vec<u32>> = HashMap::new();
    for f in &edges.faces {
        for v in f.iter().copied() {
            let z = Face::from_sorted(f.iter().copied().filter(|&x| x != v).collect());
            let key = lvl.faces.get(lvl.position(&z).unwrap()).unwrap();
            balls.entry(key).or_default().push(v);
        }
    }
    Ok(lvl
        .faces
        .iter()
        .map(|z| {
            let mut b = balls.remove(z).unwrap_or_default();
            b.sort_unstable();
            b.dedup();
            (z.clone(), b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: &[u32]) -> Face {
        Face::new(v.to_vec()).unwrap()
    }

    #[test]
    fn up_from_vertices_of_simplex() {
        let c = Complex::build_from_top_faces(3, vec![(f(&[0, 1, 2]), 1.0)]).unwrap();
        let up = up_operator(&c, 0).unwrap();
        let t = up.transition();
        for r in 0..3 {
            let row: Vec<f64> = t.row(r).map(|x| x.1).collect();
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|p| (p - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn complete_up_rows() {
        let c = Complex::complete(5, 2).unwrap();
        let t = up_operator(&c, 0).unwrap().transition();
        for r in 0..5 {
            assert_eq!(t.row(r).count(), 4);
            assert!(t.row(r).all(|(_, p)| (p - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn down_rows_uniform() {
        let c = Complex::complete(6, 3).unwrap();
        let t = down_operator(&c, 1).unwrap().transition();
        for r in 0..t.n_rows {
            assert!(t.row(r).all(|(_, p)| (p - 1.0 / 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn containment_complete() {
        let c = Complex::complete(8, 4).unwrap();
        let t = containment_operator(&c, 4, 1).unwrap().transition();
        for r in 0..t.n_rows {
            assert_eq!(t.row(r).count(), 10);
        }
        let d = containment_operator(&c, 3, 2).unwrap();
        let e = down_operator(&c, 2).unwrap();
        assert_eq!(d.joint, e.joint);
    }

    #[test]
    fn complement_on_complete_is_complete_graph() {
        let c = Complex::complete(7, 2).unwrap();
        let t = complement_walk(&c, 0, 0).unwrap().transition();
        for r in 0..7 {
            assert_eq!(t.row(r).count(), 6);
            assert!(t.row(r).all(|(v, p)| v != r && (p - 1.0 / 6.0).abs() < 1e-12));
        }
    }

    #[test]
    fn colored_products() {
        let c = Complex::partite_complete(&[3, 3]).unwrap();
        let (op, l, r) = colored_walk(&c, &[0], &[1]).unwrap();
        assert_eq!((l.len(), r.len()), (3, 3));
        assert!(op.transition().data.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        let c = Complex::partite_complete(&[3, 3, 3]).unwrap();
        let (op, _, r) = colored_walk(&c, &[0], &[1, 2]).unwrap();
        assert_eq!(r.len(), 9);
        assert!(op.transition().data.iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-12));
        assert!(matches!(colored_walk(&c, &[0], &[0, 1]), Err(Error::OverlappingColors)));
        assert!(matches!(
            colored_walk(&Complex::complete(4, 2).unwrap(), &[0], &[1]),
            Err(Error::NotPartite)
        ));
    }

    #[test]
    fn fixed_union_special_cases() {
        let c = Complex::complete(8, 4).unwrap();
        let a = fixed_union_walk(&c, 1, 2).unwrap();
        let b = complement_walk(&c, 1, 1).unwrap();
        for r in 0..a.n_source() {
            for (v, p) in a.joint.row(r) {
                assert!((p - b.joint.get(r, v)).abs() < 1e-12);
            }
        }
        let a = fixed_union_walk(&c, 1, 1).unwrap();
        let b = non_lazy_upper_walk(&c, 1).unwrap();
        for r in 0..a.n_source() {
            for (v, p) in a.joint.row(r) {
                assert!((p - b.joint.get(r, v)).abs() < 1e-12);
            }
        }
        assert!(fixed_union_walk(&c, 1, 3).is_err());
    }

    #[test]
    fn balls() {
        let c = Complex::complete(6, 3).unwrap();
        let b = neighborhood_system(&c, 0).unwrap();
        assert_eq!(b[2].1, vec![0, 1, 3, 4, 5]);
        let s = Complex::build_from_top_faces(4, vec![(f(&[0, 1, 2, 3]), 1.0)]).unwrap();
        assert_eq!(neighborhood_system(&s, 0).unwrap()[0].1, vec![1, 2, 3]);
    }
}
