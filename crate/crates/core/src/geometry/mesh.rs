use std::collections::HashMap;

use crate::error::{BbemError, Result};
use crate::kernels::Vec3;

/// Largest icosphere refinement accepted by [`build_icosphere`] (81920 panels).
pub const MAX_ICOSPHERE_LEVEL: usize = 6;

/// A flat triangular panel with its derived data.
#[derive(Clone, Copy, Debug)]
pub struct Panel {
    pub vertices: [Vec3; 3],
    pub centroid: Vec3,
    pub normal: Vec3,
    pub area: f64,
}

impl Panel {
    pub fn from_vertices(vertices: [Vec3; 3]) -> Panel {
        let [a, b, c] = vertices;
        let cross = (b - a).cross(&(c - a));
        let twice = cross.norm();
        let normal = if twice > 0.0 { cross / twice } else { Vec3::zeros() };
        Panel { vertices, centroid: (a + b + c) / 3.0, normal, area: 0.5 * twice }
    }

    /// Longest edge.
    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.vertices;
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    /// Barycentric coordinates of the in-plane projection of `p`.
    pub fn barycentric(&self, p: &Vec3) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let v0 = b - a;
        let v1 = c - a;
        let v2 = p - a;
        let d00 = v0.dot(&v0);
        let d01 = v0.dot(&v1);
        let d11 = v1.dot(&v1);
        let d20 = v2.dot(&v0);
        let d21 = v2.dot(&v1);
        let den = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / den;
        let w = (d00 * d21 - d01 * d20) / den;
        [1.0 - v - w, v, w]
    }

    /// Closest point of the (closed) triangle to `p`.
    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        // Ericson, Real-Time Collision Detection, 5.1.5.
        let [a, b, c] = self.vertices;
        let ab = b - a;
        let ac = c - a;
        let ap = p - a;
        let d1 = ab.dot(&ap);
        let d2 = ac.dot(&ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return a;
        }
        let bp = p - b;
        let d3 = ab.dot(&bp);
        let d4 = ac.dot(&bp);
        if d3 >= 0.0 && d4 <= d3 {
            return b;
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            return a + ab * (d1 / (d1 - d3));
        }
        let cp = p - c;
        let d5 = ab.dot(&cp);
        let d6 = ac.dot(&cp);
        if d6 >= 0.0 && d5 <= d6 {
            return c;
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            return a + ac * (d2 / (d2 - d6));
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
        }
        let den = 1.0 / (va + vb + vc);
        a + ab * (vb * den) + ac * (vc * den)
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        (p - self.closest_point(p)).norm()
    }

    /// Solid angle subtended at `p` (Van Oosterom–Strackee), signed by orientation.
    pub fn solid_angle(&self, p: &Vec3) -> f64 {
        let a = self.vertices[0] - p;
        let b = self.vertices[1] - p;
        let c = self.vertices[2] - p;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        2.0 * num.atan2(den)
    }
}

/// Closed, consistently oriented triangulation with outward normals.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    panels: Vec<Panel>,
}

impl SurfaceMesh {
    /// Builds the mesh and validates closedness, orientation and panel areas.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<SurfaceMesh> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(BbemError::Mesh(format!("triangle {t} references a missing vertex")));
            }
        }
        let panels: Vec<Panel> = triangles
            .iter()
            .map(|t| Panel::from_vertices([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        let mesh = SurfaceMesh { vertices, triangles, panels };
        let scale = mesh.scale();
        for (index, p) in mesh.panels.iter().enumerate() {
            if !(p.area > 1e-14 * scale * scale) {
                return Err(BbemError::DegeneratePanel { index, area: p.area });
            }
        }
        mesh.check_closed()?;
        if mesh.enclosed_volume() < 0.0 {
            return Err(BbemError::Mesh("triangles are oriented inward".into()));
        }
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn panel(&self, i: usize) -> &Panel {
        &self.panels[i]
    }

    pub fn centroids(&self) -> Vec<Vec3> {
        self.panels.iter().map(|p| p.centroid).collect()
    }

    pub fn normals(&self) -> Vec<Vec3> {
        self.panels.iter().map(|p| p.normal).collect()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.panels.iter().map(|p| p.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.panels.iter().map(|p| p.area).sum()
    }

    /// Diagonal of the bounding box.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Largest distance between two vertices, bounded by the box diagonal.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn mean_panel_diameter(&self) -> f64 {
        self.panels.iter().map(|p| p.diameter()).sum::<f64>() / self.len() as f64
    }

    /// `Σ area·ν`, zero for a closed surface.
    pub fn flux_residual(&self) -> Vec3 {
        self.panels.iter().fold(Vec3::zeros(), |acc, p| acc + p.normal * p.area)
    }

    /// Volume enclosed, by the divergence theorem on `x/3`.
    pub fn enclosed_volume(&self) -> f64 {
        self.panels.iter().map(|p| p.centroid.dot(&p.normal) * p.area / 3.0).sum()
    }

    /// Every edge is shared by exactly two triangles traversing it in opposite directions.
    pub fn check_closed(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        for t in &self.triangles {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 {
                return Err(BbemError::Mesh(format!("edge ({a}, {b}) is traversed {n} times in the same direction")));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(BbemError::Mesh(format!("edge ({a}, {b}) has no opposite half-edge")));
            }
        }
        Ok(())
    }

    /// Winding number of the surface about `p` (1 inside, 0 outside).
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        self.panels.iter().map(|panel| panel.solid_angle(p)).sum::<f64>() / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.winding_number(p) > 0.5
    }

    /// Distance from `p` to the closest panel.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        self.panels.iter().map(|panel| panel.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Centroids pushed by `offset` along the normals (positive = outward).
    pub fn offset_points(&self, offset: f64) -> Vec<Vec3> {
        self.panels.iter().map(|p| p.centroid + p.normal * offset).collect()
    }
}

/// Icosahedron subdivided `level` times with vertices projected onto the sphere.
pub fn build_icosphere(level: usize, radius: f64) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(BbemError::Budget(format!(
            "icosphere level {level} exceeds the dense-assembly limit {MAX_ICOSPHERE_LEVEL}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(BbemError::Domain(format!("radius must be positive, got {radius}")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    SurfaceMesh::new(vertices, triangles)
}

/// Axis-aligned cube of side `side` centred at the origin; each face carries
/// `2·4^level` triangles.
pub fn build_cube(level: usize, side: f64) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(BbemError::Budget(format!("cube level {level} exceeds the dense-assembly limit")));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(BbemError::Domain(format!("side must be positive, got {side}")));
    }
    let m = 1usize << level;
    let h = side / m as f64;
    let half = side / 2.0;
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut vid = |ijk: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(ijk).or_insert_with(|| {
            vertices.push(Vec3::new(
                ijk[0] as f64 * h - half,
                ijk[1] as f64 * h - half,
                ijk[2] as f64 * h - half,
            ));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(12 * m * m);
    // (normal axis, side, u axis, v axis) with u × v pointing outward.
    let faces = [(0, m, 1, 2), (0, 0, 2, 1), (1, m, 2, 0), (1, 0, 0, 2), (2, m, 0, 1), (2, 0, 1, 0)];
    for &(axis, fixed, ua, va) in &faces {
        for i in 0..m {
            for j in 0..m {
                let corner = |di: usize, dj: usize| {
                    let mut ijk = [0usize; 3];
                    ijk[axis] = fixed;
                    ijk[ua] = i + di;
                    ijk[va] = j + dj;
                    ijk
                };
                let c00 = corner(0, 0);
                let c10 = corner(1, 0);
                let c11 = corner(1, 1);
                let c01 = corner(0, 1);
                let (a, b, c, d) = (
                    vid(c00, &mut vertices),
                    vid(c10, &mut vertices),
                    vid(c11, &mut vertices),
                    vid(c01, &mut vertices),
                );
                // Alternate the diagonal so the face triangulation has no preferred direction.
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
    }
    SurfaceMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn icosphere_counts() {
        let m = build_icosphere(0, 1.0).unwrap();
        assert_eq!(m.len(), 20);
        assert_eq!(m.vertices.len(), 12);
        for k in 1..=3 {
            assert_eq!(build_icosphere(k, 1.0).unwrap().len(), 20 * 4usize.pow(k as u32));
        }
        assert!(matches!(build_icosphere(7, 1.0), Err(BbemError::Budget(_))));
    }

    #[test]
    fn icosphere_area_and_normals() {
        let m = build_icosphere(4, 1.0).unwrap();
        assert!((m.total_area() - 4.0 * PI).abs() / (4.0 * PI) < 5e-3);
        for p in m.panels() {
            assert!(p.normal.dot(&p.centroid) > 0.0);
        }
        assert!(m.flux_residual().norm() <= 1e-12 * m.total_area());
        // Monotone convergence of area across levels.
        let errs: Vec<f64> = (1..=3).map(|k| (4.0 * PI - build_icosphere(k, 1.0).unwrap().total_area()).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn cube_counts_and_area() {
        let m = build_cube(0, 1.0).unwrap();
        assert_eq!(m.len(), 12);
        assert_relative_eq!(m.total_area(), 6.0, max_relative = 1e-14);
        for k in 1..=3 {
            let m = build_cube(k, 1.0).unwrap();
            assert_eq!(m.len(), 12 * 4usize.pow(k as u32));
            assert_relative_eq!(m.total_area(), 6.0, max_relative = 1e-13);
            assert!(m.flux_residual().norm() <= 1e-12 * 6.0);
            assert_relative_eq!(m.enclosed_volume(), 1.0, max_relative = 1e-13);
            for p in m.panels() {
                assert!(p.normal.dot(&p.centroid) > 0.0);
            }
        }
    }

    #[test]
    fn open_or_inverted_meshes_are_rejected() {
        let m = build_icosphere(0, 1.0).unwrap();
        let mut tris = m.triangles.clone();
        tris.pop();
        assert!(matches!(SurfaceMesh::new(m.vertices.clone(), tris), Err(BbemError::Mesh(_))));
        let flipped: Vec<[usize; 3]> = m.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        assert!(matches!(SurfaceMesh::new(m.vertices.clone(), flipped), Err(BbemError::Mesh(_))));
    }

    #[test]
    fn winding_number_inside_outside() {
        let m = build_cube(1, 2.0).unwrap();
        assert_relative_eq!(m.winding_number(&Vec3::new(0.1, -0.3, 0.2)), 1.0, epsilon = 1e-12);
        assert!(m.winding_number(&Vec3::new(1.5, 0.0, 0.0)).abs() < 1e-12);
        assert!(m.contains(&Vec3::zeros()));
    }

    #[test]
    fn closest_point_and_barycentric() {
        let p = Panel::from_vertices([Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]);
        assert_relative_eq!(p.closest_point(&Vec3::new(0.2, 0.3, 5.0)), Vec3::new(0.2, 0.3, 0.0));
        assert_relative_eq!(p.closest_point(&Vec3::new(-1.0, -1.0, 0.0)), Vec3::zeros());
        assert_relative_eq!(p.closest_point(&Vec3::new(1.0, 1.0, 0.0)), Vec3::new(0.5, 0.5, 0.0), epsilon = 1e-15);
        let b = p.barycentric(&Vec3::new(0.25, 0.5, 0.0));
        assert_relative_eq!(b[0], 0.25);
        assert_relative_eq!(b[1], 0.25);
        assert_relative_eq!(b[2], 0.5);
    }
}
