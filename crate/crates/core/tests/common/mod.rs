#![allow(dead_code)]

use hdx_core::{Complex, Face};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn combinations(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(start: u32, n: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n as u32, k, &mut Vec::new(), &mut out);
    out
}

/// Random weighted pure d-complex on n vertices with every vertex covered.
pub fn random_complex(seed: u64, n: usize, d: usize) -> Complex {
    let mut rng = StdRng::seed_from_u64(seed);
    let all = combinations(n, d + 1);
    let mut tops: Vec<(Face, f64)> = Vec::new();
    let mut covered = vec![false; n];
    for f in &all {
        if rng.gen_bool(0.6) {
            f.iter().for_each(|&v| covered[v as usize] = true);
            tops.push((Face::from_sorted(f.clone()), rng.gen_range(0.2..2.0)));
        }
    }
    for v in 0..n {
        if !covered[v] {
            let f = all.iter().find(|f| f.contains(&(v as u32)) && !tops.iter().any(|(t, _)| t.verts() == &f[..])).unwrap();
            f.iter().for_each(|&u| covered[u as usize] = true);
            tops.push((Face::from_sorted(f.clone()), 1.0));
        }
    }
    Complex::build_from_top_faces(n, tops).unwrap()
}
