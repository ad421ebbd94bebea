//! Triangle quadrature: symmetric Gaussian rules for regular integrands and
//! polar (Duffy-type) rules for integrands singular or nearly singular at a
//! point of the panel.

use super::{Panel, SurfaceMesh};
use crate::error::{BbemError, Result};
use crate::kernels::Vec3;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            z = 0.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Symmetric rule on the reference triangle: barycentric nodes, weights summing to 1.
///
/// Orders 1, 3, 6, 12 are exact for polynomial degree 1, 2, 4, 6.
pub fn triangle_rule(order: usize) -> Result<Vec<([f64; 3], f64)>> {
    fn orbit3(a: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
        let b = 1.0 - 2.0 * a;
        out.push(([b, a, a], w));
        out.push(([a, b, a], w));
        out.push(([a, a, b], w));
    }
    fn orbit6(a: f64, b: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            out.push((p, w));
        }
    }
    let mut r = Vec::new();
    match order {
        1 => r.push(([1.0 / 3.0; 3], 1.0)),
        3 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut r),
        6 => {
            orbit3(0.445948490915965, 0.223381589678011, &mut r);
            orbit3(0.091576213509771, 0.109951743655322, &mut r);
        }
        12 => {
            orbit3(0.249286745170910, 0.116786275726379, &mut r);
            orbit3(0.063089014491502, 0.050844906370207, &mut r);
            orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374, &mut r);
        }
        _ => return Err(BbemError::UnsupportedOrder(order)),
    }
    let total: f64 = r.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut r {
        *w /= total;
    }
    Ok(r)
}

/// Nodes and weights (units of area) for every panel of a mesh.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub order: usize,
    pub per_panel: usize,
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl QuadratureSet {
    pub fn panel_points(&self, panel: usize) -> &[Vec3] {
        &self.points[panel * self.per_panel..(panel + 1) * self.per_panel]
    }

    pub fn panel_weights(&self, panel: usize) -> &[f64] {
        &self.weights[panel * self.per_panel..(panel + 1) * self.per_panel]
    }
}

pub fn panel_quadrature(mesh: &SurfaceMesh, order: usize) -> Result<QuadratureSet> {
    let rule = triangle_rule(order)?;
    let mut points = Vec::with_capacity(mesh.len() * rule.len());
    let mut weights = Vec::with_capacity(mesh.len() * rule.len());
    for p in mesh.panels() {
        let [a, b, c] = p.vertices;
        for (l, w) in &rule {
            points.push(a * l[0] + b * l[1] + c * l[2]);
            weights.push(w * p.area);
        }
    }
    Ok(QuadratureSet { order, per_panel: rule.len(), points, weights })
}

/// Quadrature nodes and weights on a single panel.
#[derive(Clone, Debug, Default)]
pub struct LocalRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl LocalRule {
    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Subintervals of `[0, 1]` refined geometrically towards `focus` down to width `scale`.
fn graded_segments(focus: f64, scale: f64) -> Vec<(f64, f64)> {
    const RATIO: f64 = 3.0;
    let scale = scale.max(1e-12);
    let mut out = Vec::new();
    let side = |len: f64, toward_right: bool, out: &mut Vec<(f64, f64)>| {
        if len <= 0.0 {
            return;
        }
        let mut cuts = vec![0.0];
        let mut s = scale;
        while s < len {
            cuts.push(s);
            s *= RATIO;
        }
        if cuts.len() > 1 && len < 1.5 * cuts[cuts.len() - 1] {
            cuts.pop();
        }
        cuts.push(len);
        for w in cuts.windows(2) {
            if toward_right {
                out.push((focus + w[0], focus + w[1]));
            } else {
                out.push((focus - w[1], focus - w[0]));
            }
        }
    };
    side(focus, false, &mut out);
    side(1.0 - focus, true, &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Polar rule centred at `center` (a point of the closed panel), graded in the
/// radial direction for a target at height `height` above `center`.
fn polar_rule(panel: &Panel, center: &Vec3, height: f64, n: usize) -> LocalRule {
    let (gx, gw) = gauss_legendre(n);
    let mut rule = LocalRule::default();
    let v = panel.vertices;
    for k in 0..3 {
        let a = v[k];
        let b = v[(k + 1) % 3];
        let sub_area2 = (a - center).cross(&(b - a)).norm();
        if sub_area2 <= 1e-14 * 2.0 * panel.area {
            continue;
        }
        let edge = b - a;
        let elen = edge.norm();
        let foot = ((center - a).dot(&edge) / (elen * elen)).clamp(0.0, 1.0);
        let edge_dist = sub_area2 / elen;
        let reach = (a - center).norm().max((b - center).norm());
        let ang = graded_segments(foot, (edge_dist.max(height) / elen).min(1.0));
        let rad = if height > 0.0 { graded_segments(0.0, height / reach) } else { vec![(0.0, 1.0)] };
        for &(v0, v1) in &ang {
            for (xv, wv) in gx.iter().zip(&gw) {
                let t = v0 + (v1 - v0) * xv;
                let dir = a - center + edge * t;
                for &(u0, u1) in &rad {
                    for (xu, wu) in gx.iter().zip(&gw) {
                        let u = u0 + (u1 - u0) * xu;
                        rule.points.push(center + dir * u);
                        rule.weights.push(wv * (v1 - v0) * wu * (u1 - u0) * u * sub_area2);
                    }
                }
            }
        }
    }
    rule
}

/// Rule for integrands with an integrable point singularity at `point`, which
/// must lie on the panel. The panel is split into sub-triangles at the point and
/// each is mapped from the unit square so the Jacobian cancels `1/r`.
pub fn duffy_singular_rule(panel: &Panel, point: &Vec3, order: usize) -> Result<LocalRule> {
    let tol = 1e-10 * panel.diameter();
    let d = panel.distance(point);
    if d > tol {
        return Err(BbemError::OffPanel(d));
    }
    let p = panel.closest_point(point);
    Ok(polar_rule(panel, &p, 0.0, order.max(1)))
}

/// Rule for a target close to (but not necessarily on) the panel; graded towards
/// the closest point of the panel.
pub fn near_singular_rule(panel: &Panel, target: &Vec3, order: usize) -> LocalRule {
    let p = panel.closest_point(target);
    let h = (target - p).norm();
    let h = if h <= 1e-12 * panel.diameter() { 0.0 } else { h };
    polar_rule(panel, &p, h, order.max(1))
}
