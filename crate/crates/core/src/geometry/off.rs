//! Triangle-only subset of the OFF format: an `OFF` header line, a
//! `<nv> <nf> 0` counts line, `nv` vertex lines and `nf` lines `3 i j k`
//! with 0-based vertex indices.

use std::fmt::Write as _;
use std::path::Path;

use super::SurfaceMesh;
use crate::error::{BbemError, Result};
use crate::kernels::Vec3;

fn err(line: usize, msg: impl Into<String>) -> BbemError {
    BbemError::Import { line, msg: msg.into() }
}

pub fn read_off(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (n, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    if header != "OFF" {
        return Err(err(n, format!("expected \"OFF\", found {header:?}")));
    }
    let (n, counts) = lines.next().ok_or_else(|| err(n + 1, "missing counts line"))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| err(n, format!("bad count {t:?}"))))
        .collect::<Result<_>>()?;
    if counts.len() != 3 {
        return Err(err(n, "counts line must be \"<nv> <nf> 0\""));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| err(0, "unexpected end of file in vertex list"))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("bad coordinate {t:?}"))))
            .collect::<Result<_>>()?;
        if xs.len() != 3 || xs.iter().any(|x| !x.is_finite()) {
            return Err(err(n, "vertex lines need 3 finite coordinates"));
        }
        vertices.push(Vec3::new(xs[0], xs[1], xs[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| err(0, "unexpected end of file in face list"))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(n, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if ids.first() != Some(&3) || ids.len() != 4 {
            return Err(err(n, "only triangular faces (\"3 i j k\") are supported"));
        }
        if ids[1..].iter().any(|&i| i >= nv) {
            return Err(err(n, "face references a vertex out of range"));
        }
        triangles.push([ids[1], ids[2], ids[3]]);
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn read_off_file(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    read_off(&std::fs::read_to_string(path)?)
}

pub fn write_off(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}
