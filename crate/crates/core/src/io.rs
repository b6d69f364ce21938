//! JSON formats for complexes, ensembles and STAV instances. Loaders validate before returning.

use serde::{Deserialize, Serialize};

use crate::agreement::Ensemble;
use crate::caps;
use crate::complex::{Complex, Face};
use crate::error::{Error, Result};
use crate::stav::StavInstance;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopFaceJson {
    pub verts: Vec<u32>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexJson {
    pub n_vertices: usize,
    pub d: usize,
    pub coloring: Option<Vec<usize>>,
    pub top_faces: Vec<TopFaceJson>,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Json(e.to_string())
}

pub fn complex_from_json(text: &str) -> Result<Complex> {
    let j: ComplexJson = serde_json::from_str(text).map_err(json_err)?;
    caps::check("vertices", j.n_vertices as f64, caps::level_cap())?;
    caps::check("top faces", j.top_faces.len() as f64, caps::level_cap())?;
    let mut tops = Vec::with_capacity(j.top_faces.len());
    for t in j.top_faces {
        if Some(t.verts.len()) != j.d.checked_add(1) {
            return Err(Error::MixedDimension(j.d, t.verts.len().saturating_sub(1)));
        }
        if t.verts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedFace(t.verts));
        }
        tops.push((Face::from_sorted(t.verts), t.weight));
    }
    match j.coloring {
        Some(col) => Complex::build_colored(j.n_vertices, tops, col),
        None => Complex::build_from_top_faces(j.n_vertices, tops),
    }
}

pub fn complex_to_json(c: &Complex) -> String {
    let j = ComplexJson {
        n_vertices: c.n_vertices(),
        d: c.d(),
        coloring: c.coloring().map(|x| x.to_vec()),
        top_faces: c.top_faces().into_iter().map(|(f, w)| TopFaceJson { verts: f.to_vec(), weight: w }).collect(),
    };
    serde_json::to_string(&j).expect("complex serializes")
}

pub fn ensemble_from_json(text: &str) -> Result<Ensemble> {
    serde_json::from_str(text).map_err(json_err)
}

pub fn ensemble_to_json(f: &Ensemble) -> String {
    serde_json::to_string(f).expect("ensemble serializes")
}

pub fn stav_from_json(text: &str) -> Result<StavInstance> {
    let x: StavInstance = serde_json::from_str(text).map_err(json_err)?;
    caps::check("points", x.n_points as f64, caps::level_cap())?;
    let rows = x.d_stav.len() + x.sts.len() + x.vasa.as_ref().map_or(0, |v| v.len());
    caps::check("table entries", rows as f64, caps::table_cap())?;
    x.validated()
}

pub fn stav_to_json(x: &StavInstance) -> String {
    serde_json::to_string(x).expect("stav serializes")
}
