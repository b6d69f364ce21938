//! Linear and affine Grassmann posets over small finite fields.
//!
//! Level conventions differ by flavor: linear level k holds subspaces of dimension k+1, affine
//! level k holds affine subspaces of dimension k. Use [`level_dim`] and [`dim_level`] to convert.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{Error, Result};
use crate::stav::{self, StavInstance, StavKind, StsDistribution};
use crate::walks::MarkovOperator;

pub const MAX_N: usize = 12;
pub const MAX_POINTS: usize = 1_000_000;

/// F_q for q in {2, 3, 4, 5, 7, 8, 9}, elements encoded as 0..q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    q: usize,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

impl Field {
    pub fn new(q: usize) -> Result<Field> {
        // (p, e, low coefficients of a monic irreducible of degree e)
        let (p, e, modulus): (usize, usize, &[usize]) = match q {
            2 | 3 | 5 | 7 => (q, 1, &[]),
            4 => (2, 2, &[1, 1]),
            8 => (2, 3, &[1, 1, 0]),
            9 => (3, 2, &[1, 0]),
            _ => return Err(Error::InvalidField(q)),
        };
        let digits = |mut x: usize| -> Vec<usize> {
            (0..e)
                .map(|_| {
                    let d = x % p;
                    x /= p;
                    d
                })
                .collect()
        };
        let undigits = |v: &[usize]| -> u8 { v.iter().rev().fold(0, |acc, &d| acc * p + d) as u8 };
        let mut add = vec![0u8; q * q];
        let mut mul = vec![0u8; q * q];
        for a in 0..q {
            for b in 0..q {
                let (da, db) = (digits(a), digits(b));
                let s: Vec<usize> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a * q + b] = undigits(&s);
                let mut prod = vec![0usize; 2 * e];
                for i in 0..e {
                    for j in 0..e {
                        prod[i + j] = (prod[i + j] + da[i] * db[j]) % p;
                    }
                }
                for deg in (e..2 * e).rev() {
                    let c = prod[deg];
                    if c == 0 {
                        continue;
                    }
                    prod[deg] = 0;
                    for (i, &m) in modulus.iter().enumerate() {
                        prod[deg - e + i] = (prod[deg - e + i] + p * p - c * m % p) % p;
                    }
                }
                mul[a * q + b] = undigits(&prod[..e]);
            }
        }
        let neg = (0..q).map(|a| (0..q).find(|&b| add[a * q + b] == 0).unwrap() as u8).collect();
        let inv = (0..q).map(|a| if a == 0 { 0 } else { (1..q).find(|&b| mul[a * q + b] == 1).unwrap() as u8 }).collect();
        Ok(Field { q, add, mul, neg, inv })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn neg(&self, a: u8) -> u8 {
        self.neg[a as usize]
    }

    #[inline]
    pub fn sub(&self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn inv(&self, a: u8) -> u8 {
        self.inv[a as usize]
    }

    /// x += c·y
    fn axpy(&self, x: &mut [u8], c: u8, y: &[u8]) {
        if c == 0 {
            return;
        }
        for (a, &b) in x.iter_mut().zip(y) {
            *a = self.add(*a, self.mul(c, b));
        }
    }
}

/// Reduced row echelon form with the zero rows removed.
pub fn rref(f: &Field, mut rows: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] != 0) else { continue };
        rows.swap(r, p);
        let iv = f.inv(rows[r][col]);
        for x in rows[r].iter_mut() {
            *x = f.mul(*x, iv);
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[col] != 0 {
                let c = f.neg(row[col]);
                f.axpy(row, c, &pivot);
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

pub fn rank(f: &Field, rows: Vec<Vec<u8>>) -> usize {
    rref(f, rows).len()
}

fn pivot_of(row: &[u8]) -> usize {
    row.iter().position(|&x| x != 0).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Linear,
    Affine,
}

/// Dimension of the subspaces at level k.
pub fn level_dim(flavor: Flavor, k: usize) -> usize {
    match flavor {
        Flavor::Linear => k + 1,
        Flavor::Affine => k,
    }
}

/// Level holding subspaces of the given dimension; −1 for the zero space in the linear poset.
pub fn dim_level(flavor: Flavor, dim: usize) -> isize {
    match flavor {
        Flavor::Linear => dim as isize - 1,
        Flavor::Affine => dim as isize,
    }
}

/// Canonical form: RREF basis and, for affine spaces, an offset with zeros on the pivot columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subspace {
    pub flavor: Flavor,
    pub basis: Vec<Vec<u8>>,
    pub offset: Option<Vec<u8>>,
}

impl Subspace {
    pub fn linear(f: &Field, n: usize, rows: Vec<Vec<u8>>) -> Result<Subspace> {
        check_rows(f, n, &rows)?;
        Ok(Subspace { flavor: Flavor::Linear, basis: rref(f, rows), offset: None })
    }

    pub fn affine(f: &Field, n: usize, rows: Vec<Vec<u8>>, point: Vec<u8>) -> Result<Subspace> {
        check_rows(f, n, &rows)?;
        check_rows(f, n, std::slice::from_ref(&point))?;
        let basis = rref(f, rows);
        let offset = reduce(f, &basis, point);
        Ok(Subspace { flavor: Flavor::Affine, basis, offset: Some(offset) })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn level(&self) -> isize {
        dim_level(self.flavor, self.dim())
    }

    pub fn ambient(&self) -> usize {
        self.offset.as_ref().map(|o| o.len()).or_else(|| self.basis.first().map(|r| r.len())).unwrap_or(0)
    }

    /// Containment as subspaces (linear) or flats (affine).
    pub fn contains(&self, f: &Field, other: &Subspace) -> bool {
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        if let (Some(a), Some(b)) = (&self.offset, &other.offset) {
            rows.push(a.iter().zip(b).map(|(&x, &y)| f.sub(y, x)).collect());
        }
        rank(f, rows) == self.dim()
    }
}

fn check_rows(f: &Field, n: usize, rows: &[Vec<u8>]) -> Result<()> {
    if n == 0 || rows.iter().any(|r| r.len() != n || r.iter().any(|&x| x as usize >= f.q())) {
        return Err(Error::DimensionArithmetic(format!("vectors must have length {n} over F_{}", f.q())));
    }
    Ok(())
}

fn reduce(f: &Field, basis: &[Vec<u8>], mut v: Vec<u8>) -> Vec<u8> {
    for row in basis {
        let p = pivot_of(row);
        let c = f.neg(v[p]);
        f.axpy(&mut v, c, row);
    }
    v
}

/// Dimension of the smallest subspace (linear) or flat (affine) containing all inputs.
pub fn span_dim(f: &Field, parts: &[&Subspace]) -> usize {
    let mut rows: Vec<Vec<u8>> = parts.iter().flat_map(|s| s.basis.iter().cloned()).collect();
    if let Some(o0) = parts.first().and_then(|s| s.offset.as_ref()) {
        for s in &parts[1..] {
            let o = s.offset.as_ref().unwrap();
            rows.push(o.iter().zip(o0).map(|(&x, &y)| f.sub(x, y)).collect());
        }
    }
    if rows.is_empty() {
        return 0;
    }
    rank(f, rows)
}

pub fn gaussian_binomial(n: usize, k: usize, q: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let q = q as f64;
    let mut r = 1.0;
    for i in 0..k {
        r *= (q.powi((n - i) as i32) - 1.0) / (q.powi((i + 1) as i32) - 1.0);
    }
    r.round()
}

/// All m×n RREF matrices of rank m.
fn rref_matrices(f: &Field, n: usize, m: usize) -> Vec<Vec<Vec<u8>>> {
    let q = f.q();
    let mut out = Vec::new();
    for pivots in (0..n).combinations(m) {
        let free: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| ((pivots[i] + 1)..n).filter(|j| !pivots.contains(j)).map(move |j| (i, j)))
            .collect();
        let total = q.pow(free.len() as u32);
        for code in 0..total {
            let mut mat = vec![vec![0u8; n]; m];
            for (i, &p) in pivots.iter().enumerate() {
                mat[i][p] = 1;
            }
            let mut c = code;
            for &(i, j) in &free {
                mat[i][j] = (c % q) as u8;
                c /= q;
            }
            out.push(mat);
        }
    }
    out
}

/// Vectors vanishing on the pivot columns of `basis`.
fn offsets(f: &Field, n: usize, basis: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let q = f.q();
    let pivots: Vec<usize> = basis.iter().map(|r| pivot_of(r)).collect();
    let free: Vec<usize> = (0..n).filter(|j| !pivots.contains(j)).collect();
    (0..q.pow(free.len() as u32))
        .map(|code| {
            let mut v = vec![0u8; n];
            let mut c = code;
            for &j in &free {
                v[j] = (c % q) as u8;
                c /= q;
            }
            v
        })
        .collect()
}

fn combine(f: &Field, coeffs: &[u8], basis: &[Vec<u8>], n: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    for (&c, row) in coeffs.iter().zip(basis) {
        f.axpy(&mut v, c, row);
    }
    v
}

#[derive(Debug)]
pub struct GrassmannLevel {
    pub k: usize,
    pub subspaces: Vec<Subspace>,
    index: HashMap<Subspace, u32>,
}

impl GrassmannLevel {
    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn position(&self, s: &Subspace) -> Option<usize> {
        self.index.get(s).map(|&i| i as usize)
    }
}

#[derive(Debug)]
pub struct GrassmannPoset {
    field: Field,
    n: usize,
    d: usize,
    flavor: Flavor,
    levels: Vec<OnceLock<Arc<GrassmannLevel>>>,
    point_codes: OnceLock<HashMap<u64, u32>>,
}

impl GrassmannPoset {
    /// Subspaces of F_q^n up to level d.
    pub fn new(q: usize, n: usize, d: usize, flavor: Flavor) -> Result<GrassmannPoset> {
        let field = Field::new(q)?;
        if n == 0 || n > MAX_N {
            return Err(Error::ParameterRange(format!("ambient dimension must lie in 1..={MAX_N}, got {n}")));
        }
        caps::check("points of F_q^n", (q as f64).powi(n as i32), MAX_POINTS)?;
        if level_dim(flavor, d) > n {
            return Err(Error::DimensionTooLarge { n, d });
        }
        Ok(GrassmannPoset { field, n, d, flavor, levels: (0..=d).map(|_| OnceLock::new()).collect(), point_codes: OnceLock::new() })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn q(&self) -> usize {
        self.field.q()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// Closed-form size of level k.
    pub fn expected_level_size(&self, k: usize) -> f64 {
        let dim = level_dim(self.flavor, k);
        let g = gaussian_binomial(self.n, dim, self.q());
        match self.flavor {
            Flavor::Linear => g,
            Flavor::Affine => g * (self.q() as f64).powi((self.n - dim) as i32),
        }
    }

    pub fn level(&self, k: usize) -> Result<Arc<GrassmannLevel>> {
        if k > self.d {
            return Err(Error::LevelOutOfRange { k: k as isize, d: self.d as isize });
        }
        if let Some(l) = self.levels[k].get() {
            return Ok(l.clone());
        }
        caps::check(&format!("subspaces at level {k}"), self.expected_level_size(k), caps::level_cap())?;
        let dim = level_dim(self.flavor, k);
        let f = &self.field;
        let mut subspaces = Vec::new();
        for basis in rref_matrices(f, self.n, dim) {
            match self.flavor {
                Flavor::Linear => subspaces.push(Subspace { flavor: Flavor::Linear, basis, offset: None }),
                Flavor::Affine => {
                    for o in offsets(f, self.n, &basis) {
                        subspaces.push(Subspace { flavor: Flavor::Affine, basis: basis.clone(), offset: Some(o) });
                    }
                }
            }
        }
        let index = subspaces.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let level = Arc::new(GrassmannLevel { k, subspaces, index });
        Ok(self.levels[k].get_or_init(|| level).clone())
    }

    fn encode(&self, v: &[u8]) -> u64 {
        v.iter().fold(0u64, |acc, &x| acc * self.q() as u64 + x as u64)
    }

    fn point_codes(&self) -> Result<&HashMap<u64, u32>> {
        if let Some(m) = self.point_codes.get() {
            return Ok(m);
        }
        let l0 = self.level(0)?;
        let m = l0
            .subspaces
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let v = match self.flavor {
                    Flavor::Linear => &s.basis[0],
                    Flavor::Affine => s.offset.as_ref().unwrap(),
                };
                (self.encode(v), i as u32)
            })
            .collect();
        Ok(self.point_codes.get_or_init(|| m))
    }

    /// Level-0 ids of the points (affine) or lines (linear) of s, sorted.
    pub fn points_of(&self, s: &Subspace) -> Result<Vec<u32>> {
        let codes = self.point_codes()?;
        let f = &self.field;
        let q = self.q();
        let m = s.dim();
        let mut out = Vec::new();
        for code in 0..q.pow(m as u32) {
            let mut c = code;
            let coeffs: Vec<u8> = (0..m)
                .map(|_| {
                    let x = (c % q) as u8;
                    c /= q;
                    x
                })
                .collect();
            let v = match self.flavor {
                Flavor::Affine => {
                    let mut v = s.offset.clone().unwrap();
                    for (&a, row) in coeffs.iter().zip(&s.basis) {
                        f.axpy(&mut v, a, row);
                    }
                    v
                }
                Flavor::Linear => {
                    // leading nonzero coefficient 1 picks one generator per line
                    match coeffs.iter().position(|&x| x != 0) {
                        Some(i) if coeffs[i] == 1 => combine(f, &coeffs, &s.basis, self.n),
                        _ => continue,
                    }
                }
            };
            out.push(codes[&self.encode(&v)]);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Ids at level k of every member of that level contained in s.
    pub fn subspaces_within(&self, s: &Subspace, k: usize) -> Result<Vec<u32>> {
        let level = self.level(k)?;
        let f = &self.field;
        let (m, dim) = (s.dim(), level_dim(self.flavor, k));
        if dim > m {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for local in rref_matrices(f, m.max(1), dim) {
            let rows: Vec<Vec<u8>> = local.iter().map(|c| combine(f, c, &s.basis, self.n)).collect();
            let basis = rref(f, rows);
            match self.flavor {
                Flavor::Linear => {
                    let sub = Subspace { flavor: Flavor::Linear, basis, offset: None };
                    out.push(level.index[&sub]);
                }
                Flavor::Affine => {
                    let locals = if m == 0 { vec![vec![]] } else { offsets(f, m, &local) };
                    for lo in locals {
                        let mut p = s.offset.clone().unwrap();
                        for (&a, row) in lo.iter().zip(&s.basis) {
                            f.axpy(&mut p, a, row);
                        }
                        let sub = Subspace { flavor: Flavor::Affine, offset: Some(reduce(f, &basis, p)), basis: basis.clone() };
                        out.push(level.index[&sub]);
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Bipartite walk X(l) → X(k) along containment, uniform over containing pairs.
pub fn containment_walk(p: &GrassmannPoset, k: usize, l: usize) -> Result<MarkovOperator> {
    if l >= k || k > p.d() {
        return Err(Error::LevelOutOfRange { k: k as isize, d: p.d() as isize });
    }
    let big = p.level(k)?;
    let small = p.level(l)?;
    let mut trips = Vec::new();
    for (j, s) in big.subspaces.iter().enumerate() {
        for i in p.subspaces_within(s, l)? {
            trips.push((i, j as u32, 1.0));
        }
    }
    MarkovOperator::from_joint(small.len(), big.len(), false, trips)
}

/// Bound on λ of the 0,k containment walk.
pub fn containment_bound(q: usize, k: usize) -> f64 {
    (q as f64).powi(k as i32).sqrt().recip()
}

#[derive(Debug, Clone)]
pub struct ConditionedWalk {
    pub op: MarkovOperator,
    /// level ids of the left and right vertices
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// level of u0, −1 when unconditioned
    pub l3: isize,
}

/// The u0-conditioned l1,l2 complement walk: edges join v, w in general position with u0,
/// chosen uniformly. `None` gives the plain complement walk.
pub fn conditioned_complement_walk(p: &GrassmannPoset, l1: usize, l2: usize, u0: Option<&Subspace>) -> Result<ConditionedWalk> {
    if l1 > p.d() || l2 > p.d() {
        return Err(Error::LevelOutOfRange { k: l1.max(l2) as isize, d: p.d() as isize });
    }
    let l3 = match u0 {
        Some(u) => {
            if u.flavor != p.flavor() || u.ambient() != p.n() {
                return Err(Error::DimensionArithmetic("u0 lives in a different poset".into()));
            }
            u.level()
        }
        None => -1,
    };
    let n = p.n() as isize;
    let need = l1 as isize + l2 as isize + l3 + if p.flavor() == Flavor::Linear { 3 } else { 2 };
    if need > n {
        return Err(Error::DimensionArithmetic(format!("l1 + l2 + l3 = {} leaves no room in dimension {n}", l1 as isize + l2 as isize + l3)));
    }
    let f = p.field();
    let general = |parts: &[&Subspace]| -> bool {
        let dims: isize = parts.iter().map(|s| s.dim() as isize).sum();
        let extra = match p.flavor() {
            Flavor::Linear => 0,
            Flavor::Affine => parts.len() as isize - 1,
        };
        span_dim(f, parts) as isize == dims + extra
    };
    let filter = |k: usize| -> Result<Vec<u32>> {
        let level = p.level(k)?;
        Ok((0..level.len() as u32)
            .filter(|&i| match u0 {
                Some(u) => general(&[&level.subspaces[i as usize], u]),
                None => true,
            })
            .collect())
    };
    let (left, right) = (filter(l1)?, filter(l2)?);
    caps::check("complement walk pairs", left.len() as f64 * right.len() as f64, caps::table_cap())?;
    let (lv, rv) = (p.level(l1)?, p.level(l2)?);
    let mut trips = Vec::new();
    for (i, &a) in left.iter().enumerate() {
        let v = &lv.subspaces[a as usize];
        for (j, &b) in right.iter().enumerate() {
            let w = &rv.subspaces[b as usize];
            let ok = match u0 {
                Some(u) => general(&[v, w, u]),
                None => general(&[v, w]),
            };
            if ok {
                trips.push((i as u32, j as u32, 1.0));
            }
        }
    }
    let square = l1 == l2 && left == right;
    let op = MarkovOperator::from_joint(left.len(), right.len(), square, trips)?;
    Ok(ConditionedWalk { op, left, right, l3 })
}

/// Bound on λ_bip of the conditioned complement walk.
pub fn complement_bound(flavor: Flavor, q: usize, n: usize, l1: usize, l2: usize, l3: isize) -> f64 {
    let shift = match flavor {
        Flavor::Affine => 1,
        Flavor::Linear => 2,
    };
    let e = n as isize - l1 as isize - l2 as isize - l3 - shift;
    4.0 / (q as f64).powi(e as i32)
}

fn point_sets(p: &GrassmannPoset, k: usize) -> Result<Vec<Vec<u32>>> {
    p.level(k)?.subspaces.iter().map(|s| p.points_of(s)).collect()
}

/// For each t in X(l), the list of (s, D(s,t)) with s ⊇ t in X(d), s uniform and t | s uniform.
fn superset_groups(p: &GrassmannPoset, d: usize, l: usize) -> Result<Vec<Vec<(u32, f64)>>> {
    if l >= d || d > p.d() {
        return Err(Error::LevelOutOfRange { k: d as isize, d: p.d() as isize });
    }
    let sl = p.level(d)?;
    let tl = p.level(l)?;
    let mut groups: Vec<Vec<(u32, f64)>> = vec![Vec::new(); tl.len()];
    for (si, s) in sl.subspaces.iter().enumerate() {
        let ts = p.subspaces_within(s, l)?;
        let w = 1.0 / (sl.len() * ts.len()) as f64;
        for t in ts {
            groups[t as usize].push((si as u32, w));
        }
    }
    Ok(groups)
}

fn grassmann_sts(p: &GrassmannPoset, d: usize, l: usize) -> Result<StsDistribution> {
    let groups = superset_groups(p, d, l)?;
    stav::check_cap("sts entries", groups.iter().map(|g| (g.len() * g.len()) as f64).sum())?;
    Ok(StsDistribution { s_sets: point_sets(p, d)?, t_sets: point_sets(p, l)?, entries: stav::independent_sts(&groups) })
}

/// The affine d,l-distribution: t uniform in X(l), then s1, s2 ⊇ t independently.
pub fn agd_distribution(p: &GrassmannPoset, d: usize, l: usize) -> Result<StsDistribution> {
    if p.flavor() != Flavor::Affine {
        return Err(Error::ParameterRange("agd needs an affine poset".into()));
    }
    grassmann_sts(p, d, l)
}

/// The linear d,l-distribution over Y(l) and Y(d).
pub fn lgd_distribution(p: &GrassmannPoset, d: usize, l: usize) -> Result<StsDistribution> {
    if p.flavor() != Flavor::Linear {
        return Err(Error::ParameterRange("lgd needs a linear poset".into()));
    }
    grassmann_sts(p, d, l)
}

/// S = X(d), T = X(l), A = X(l−1), V = X(0) as point sets. (a, v) splits t: a is a
/// hyperplane of t and v ∈ t ∖ a. VASA takes a1, a2 in general position inside s and v outside
/// their span.
pub fn grassmann_stav(p: &GrassmannPoset, d: usize, l: usize) -> Result<StavInstance> {
    if l < 1 || 3 * l + 2 >= d || d > p.d() {
        return Err(Error::ParameterRange(format!("Grassmann STAV needs 1 <= l, 3l+2 < d <= {}; got d={d}, l={l}", p.d())));
    }
    let f = p.field();
    let sl = p.level(d)?;
    let tl = p.level(l)?;
    let al = p.level(l - 1)?;
    let vl = p.level(0)?;
    let s_sets = point_sets(p, d)?;
    let t_sets = point_sets(p, l)?;
    let a_sets = point_sets(p, l - 1)?;
    let mut splits: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
    let mut d_stav = Vec::new();
    for (si, s) in sl.subspaces.iter().enumerate() {
        let ts = p.subspaces_within(s, l)?;
        let ps = 1.0 / sl.len() as f64 / ts.len() as f64;
        for t in ts {
            if !splits.contains_key(&t) {
                let mut list = Vec::new();
                for a in p.subspaces_within(&tl.subspaces[t as usize], l - 1)? {
                    for &v in &t_sets[t as usize] {
                        if a_sets[a as usize].binary_search(&v).is_err() {
                            list.push((a, v));
                        }
                    }
                }
                splits.insert(t, list);
            }
            let list = &splits[&t];
            stav::check_cap("d_stav entries", (d_stav.len() + list.len()) as f64)?;
            let w = ps / list.len() as f64;
            d_stav.extend(list.iter().map(|&(a, v)| (si as u32, t, a, v, w)));
        }
    }
    let groups = superset_groups(p, d, l)?;
    stav::check_cap("sts entries", groups.iter().map(|g| (g.len() * g.len()) as f64).sum())?;
    let sts = stav::independent_sts(&groups);
    let a_dim = level_dim(p.flavor(), l - 1);
    let pair_dim = match p.flavor() {
        Flavor::Linear => 2 * a_dim,
        Flavor::Affine => 2 * a_dim + 1,
    };
    let mut vasa = Vec::new();
    for (si, s) in sl.subspaces.iter().enumerate() {
        let inner = p.subspaces_within(s, l - 1)?;
        let mut local = Vec::new();
        for &a1 in &inner {
            for &a2 in &inner {
                let (x, y) = (&al.subspaces[a1 as usize], &al.subspaces[a2 as usize]);
                if a1 == a2 || span_dim(f, &[x, y]) != pair_dim {
                    continue;
                }
                for &v in &s_sets[si] {
                    if span_dim(f, &[x, y, &vl.subspaces[v as usize]]) == pair_dim + 1 {
                        local.push((v, a1, a2));
                    }
                }
                stav::check_cap("vasa entries", (vasa.len() + local.len()) as f64)?;
            }
        }
        let w = 1.0 / sl.len() as f64 / local.len() as f64;
        vasa.extend(local.into_iter().map(|(v, a1, a2)| (v, a1, si as u32, a2, w)));
    }
    Ok(StavInstance::new(StavKind::Grassmann, vl.len(), s_sets, t_sets, a_sets, d_stav, sts, Some(vasa)))
}
