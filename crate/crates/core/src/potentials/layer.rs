//! Dense assembly of the boundary operators and direct evaluation of the layer
//! potentials away from the boundary.
//!
//! The double layer is oriented so that `W⁰c = -c` inside for constant `c`:
//! `(W h)_j(x) = -∫ S_{ijl}(x - y) ν_l(y) h_i(y) dσ_y`, with the matching
//! pressure `(Q^d h)(x) = -∫ Λ_{jl}(x, y) ν_l(y) h_j(y) dσ_y`.

use std::f64::consts::PI;
use std::ops::{AddAssign, Mul};

use faer::Mat;

use super::{BoundaryField, DenseOperator, OperatorKind};
use crate::error::{BbemError, Result};
use crate::exec::{map_indexed, Exec};
use crate::geometry::{duffy_singular_rule, near_singular_rule, Panel, QuadratureSet, SurfaceMesh};
use crate::kernels::{
    a_coefficients, stress_difference_at, velocity_difference, BrinkmanParams, Mat3, Vec3, SPHERE_AREA,
};

/// Quadrature controls shared by assembly and evaluation.
#[derive(Clone, Copy, Debug)]
pub struct LayerOptions {
    /// Panels closer than `near_factor × diameter` use the graded near-singular rule.
    pub near_factor: f64,
    /// Gauss–Legendre points per graded segment of the near-singular rule.
    pub near_order: usize,
    pub exec: Exec,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions { near_factor: 2.0, near_order: 8, exec: Exec::default() }
    }
}

fn check_mesh(mesh: &SurfaceMesh, quad: &QuadratureSet) -> Result<()> {
    if quad.points.len() != quad.per_panel * mesh.len() {
        return Err(BbemError::Mismatch(format!(
            "quadrature for {} panels used with a mesh of {}",
            quad.points.len() / quad.per_panel.max(1),
            mesh.len()
        )));
    }
    Ok(())
}

/// `G^α(r)`; zero at `r = 0`.
#[inline]
fn velocity_kernel(r: &Vec3, params: &BrinkmanParams) -> Mat3 {
    let d = r.norm();
    if d == 0.0 {
        return Mat3::zeros();
    }
    let (a1, a2) = if params.is_stokes() {
        (0.5, 0.5)
    } else {
        let (a1, a2, _, _) = a_coefficients(params.sqrt_alpha() * d);
        (a1, a2)
    };
    let c = 1.0 / (SPHERE_AREA * d);
    let xh = r / d;
    Mat3::from_fn(|j, k| c * (if j == k { a1 } else { 0.0 } + a2 * xh[j] * xh[k]))
}

#[inline]
fn pressure_kernel(r: &Vec3) -> Vec3 {
    let d = r.norm();
    if d == 0.0 {
        return Vec3::zeros();
    }
    r / (SPHERE_AREA * d * d * d)
}

/// Stokes double-layer kernel: maps `h(y)` to its contribution at `x`, `r = x - y`.
#[inline]
fn stokes_dl_kernel(r: &Vec3, nu: &Vec3) -> Mat3 {
    let d2 = r.norm_squared();
    if d2 == 0.0 {
        return Mat3::zeros();
    }
    let c = 3.0 * r.dot(nu) / (SPHERE_AREA * d2 * d2 * d2.sqrt());
    r * r.transpose() * c
}

/// Bounded difference between the Brinkman and Stokes double-layer kernels.
#[inline]
fn dl_difference_kernel(r: &Vec3, nu: &Vec3, params: &BrinkmanParams) -> Mat3 {
    if params.is_stokes() {
        return Mat3::zeros();
    }
    -stress_difference_at(r, params).contract_last(nu).transpose()
}

/// Double-layer pressure kernel: `p(x) = k · h(y)`.
#[inline]
fn dl_pressure_kernel(r: &Vec3, nu: &Vec3, params: &BrinkmanParams) -> Vec3 {
    // With d = y - x: -Λ(x,y)ν = -(−6 d (d·ν)/r⁵ + 2ν/r³ − α ν / r)/4π.
    let d = -r;
    let rn = d.norm();
    if rn == 0.0 {
        return Vec3::zeros();
    }
    let r3 = rn * rn * rn;
    let r5 = r3 * rn * rn;
    -(d * (-6.0 * d.dot(nu) / r5) + nu * (2.0 / r3 - params.alpha / rn)) / SPHERE_AREA
}

/// Traction of the single-layer kernel at `x` for the normal `n`: `t = k · g(y)`.
#[inline]
fn sl_traction_kernel(r: &Vec3, n: &Vec3, params: &BrinkmanParams) -> Mat3 {
    if r.norm() == 0.0 {
        return Mat3::zeros();
    }
    crate::kernels::stress_tensor_at(r, params).map(|s| s.contract_last(n)).unwrap_or_else(|_| Mat3::zeros())
}

/// Sums `f` over the regular or near-singular rule of panel `j` as seen from `x`.
fn integrate_panel<T, F>(mesh: &SurfaceMesh, quad: &QuadratureSet, j: usize, x: &Vec3, opts: &LayerOptions, zero: T, f: F) -> T
where
    T: AddAssign + Mul<f64, Output = T> + Copy,
    F: Fn(&Vec3) -> T,
{
    let p = mesh.panel(j);
    let mut acc = zero;
    if p.distance(x) < opts.near_factor * p.diameter() {
        let rule = near_singular_rule(p, x, opts.near_order);
        for (y, w) in rule.points.iter().zip(&rule.weights) {
            acc += f(y) * *w;
        }
    } else {
        for (y, w) in quad.panel_points(j).iter().zip(quad.panel_weights(j)) {
            acc += f(y) * *w;
        }
    }
    acc
}

/// Exact `∫_T G⁰(x - y) dσ_y` for a point `x` in the plane of a flat triangle.
/// Points off the plane are projected onto it.
pub fn stokeslet_panel_integral(panel: &Panel, x: &Vec3) -> Mat3 {
    let nrm = panel.normal;
    let v = panel.vertices;
    let xp = x - nrm * (x - v[0]).dot(&nrm);
    let tiny = 1e-14 * panel.diameter();
    let mut scalar = 0.0;
    let mut m = Mat3::zeros();
    for k in 0..3 {
        let a = v[k];
        let b = v[(k + 1) % 3];
        let e = (b - a).normalize();
        let foot = a + e * (xp - a).dot(&e);
        let dv = foot - xp;
        let d = dv.norm();
        if d < tiny {
            continue;
        }
        let nh = dv / d;
        let sigma = nrm.dot(&nh.cross(&e)).signum();
        let prim = |t: f64| {
            let rho = (d * d + t * t).sqrt();
            let ash = (t / d).asinh();
            (d * ash, d * t / rho, -d * d / rho, d * (ash - t / rho))
        };
        let (t1, t2) = ((a - foot).dot(&e), (b - foot).dot(&e));
        let (p1, p2) = (prim(t1), prim(t2));
        scalar += sigma * (p2.0 - p1.0);
        m += (nh * nh.transpose() * (p2.1 - p1.1)
            + (nh * e.transpose() + e * nh.transpose()) * (p2.2 - p1.2)
            + e * e.transpose() * (p2.3 - p1.3))
            * sigma;
    }
    (Mat3::identity() * scalar + m) / (8.0 * PI)
}

fn blocks_to_matrix(rows: Vec<Vec<Mat3>>) -> Mat<f64> {
    let n = rows.len();
    let mut a = Mat::<f64>::zeros(3 * n, 3 * n);
    for (i, row) in rows.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    a[(3 * i + r, 3 * j + c)] = b[(r, c)];
                }
            }
        }
    }
    a
}

/// Single-layer boundary operator `𝒱_α` collocated at the panel centroids.
pub fn assemble_single_layer(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<DenseOperator> {
    params.validate()?;
    check_mesh(mesh, quad)?;
    let n = mesh.len();
    let rows = map_indexed(opts.exec, n, |i| -> Result<Vec<Mat3>> {
        let pi = mesh.panel(i);
        let x = pi.centroid;
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            if j == i {
                let mut b = stokeslet_panel_integral(pi, &x);
                if !params.is_stokes() {
                    let rule = duffy_singular_rule(pi, &x, opts.near_order)?;
                    for (y, w) in rule.points.iter().zip(&rule.weights) {
                        b += velocity_difference(&(x - y), params) * *w;
                    }
                }
                row.push(b);
            } else {
                row.push(integrate_panel(mesh, quad, j, &x, opts, Mat3::zeros(), |y| velocity_kernel(&(x - y), params)));
            }
        }
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    DenseOperator::new(blocks_to_matrix(rows), OperatorKind::V, mesh.areas())
}

/// Local moment correction making the discrete Stokes double layer reproduce
/// rigid rotations (`K⁰r = -½r`) as it already reproduces translations.
///
/// `residual` column `a` is `Σ_j K⁰_ij (e_a × (c_j - c_i))`. The blocks of the
/// panels near `i` receive the minimum-norm change that cancels it while
/// leaving every row sum unchanged.
fn rotation_correction(mesh: &SurfaceMesh, i: usize, residual: &Mat3, row: &mut [Mat3]) {
    let pi = mesh.panel(i);
    let radius = 2.0 * pi.diameter();
    let near: Vec<(usize, Vec3)> = (0..mesh.len())
        .map(|j| (j, mesh.panel(j).centroid - pi.centroid))
        .filter(|(_, d)| d.norm() < radius)
        .collect();
    // Correction rows have the form p_j = μ + η × d_j; fit (μ, η) to the six constraints.
    let apply = |mu: &Vec3, eta: &Vec3| -> (Vec3, Vec3) {
        let mut sum = Vec3::zeros();
        let mut mom = Vec3::zeros();
        for (_, d) in &near {
            let p = mu + eta.cross(d);
            sum += p;
            mom += d.cross(&p);
        }
        (sum, mom)
    };
    let mut gram = nalgebra::Matrix6::<f64>::zeros();
    for c in 0..6 {
        let (mu, eta) = if c < 3 { (Vec3::ith(c, 1.0), Vec3::zeros()) } else { (Vec3::zeros(), Vec3::ith(c - 3, 1.0)) };
        let (s, m) = apply(&mu, &eta);
        for r in 0..3 {
            gram[(r, c)] = s[r];
            gram[(r + 3, c)] = m[r];
        }
    }
    let Some(lu) = gram.lu().try_inverse() else {
        return;
    };
    for r in 0..3 {
        let mut rhs = nalgebra::Vector6::<f64>::zeros();
        for a in 0..3 {
            rhs[3 + a] = -residual[(r, a)];
        }
        let sol = lu * rhs;
        let mu = Vec3::new(sol[0], sol[1], sol[2]);
        let eta = Vec3::new(sol[3], sol[4], sol[5]);
        for (j, d) in &near {
            let p = mu + eta.cross(d);
            for c in 0..3 {
                row[*j][(r, c)] += p[c];
            }
        }
    }
}

/// Double-layer boundary operator `K_α` (principal value of `W_α` on the boundary).
pub fn assemble_double_layer(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<DenseOperator> {
    params.validate()?;
    check_mesh(mesh, quad)?;
    let n = mesh.len();
    let stokes = params.is_stokes();
    let rows = map_indexed(opts.exec, n, |i| -> Result<Vec<Mat3>> {
        let pi = mesh.panel(i);
        let x = pi.centroid;
        let mut row = vec![Mat3::zeros(); n];
        let mut stokes_sum = Mat3::zeros();
        let mut rotation_residual = Mat3::zeros();
        for (j, block) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let nu = mesh.panel(j).normal;
            let pair = integrate_panel(mesh, quad, j, &x, opts, Pair::zero(), |y| {
                let r = x - y;
                let k0 = stokes_dl_kernel(&r, &nu);
                Pair(k0, if stokes { k0 } else { k0 + dl_difference_kernel(&r, &nu, params) })
            });
            stokes_sum += pair.0;
            let d = mesh.panel(j).centroid - x;
            for a in 0..3 {
                let col = pair.0 * Vec3::ith(a, 1.0).cross(&d);
                rotation_residual.set_column(a, &(rotation_residual.column(a) + col));
            }
            *block = pair.1;
        }
        rotation_correction(mesh, i, &rotation_residual, &mut row);
        let mut diag = row[i] + Mat3::identity() * -0.5 - stokes_sum;
        if !stokes {
            let rule = duffy_singular_rule(pi, &x, opts.near_order)?;
            for (y, w) in rule.points.iter().zip(&rule.weights) {
                diag += dl_difference_kernel(&(x - y), &pi.normal, params) * *w;
            }
        }
        row[i] = diag;
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    DenseOperator::new(blocks_to_matrix(rows), OperatorKind::K, mesh.areas())
}

/// `K*_α` as the transpose of `K_α` in the area-weighted pairing.
pub fn adjoint_double_layer(k: &DenseOperator, weights: &[f64]) -> Result<DenseOperator> {
    k.weighted_transpose(weights, OperatorKind::Kstar)
}

#[derive(Clone, Copy)]
struct Pair(Mat3, Mat3);

impl Pair {
    fn zero() -> Pair {
        Pair(Mat3::zeros(), Mat3::zeros())
    }
}

impl AddAssign for Pair {
    fn add_assign(&mut self, o: Pair) {
        self.0 += o.0;
        self.1 += o.1;
    }
}

impl Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, w: f64) -> Pair {
        Pair(self.0 * w, self.1 * w)
    }
}

#[derive(Clone, Copy)]
struct Scalar(f64);

impl AddAssign for Scalar {
    fn add_assign(&mut self, o: Scalar) {
        self.0 += o.0;
    }
}

impl Mul<f64> for Scalar {
    type Output = Scalar;
    fn mul(self, w: f64) -> Scalar {
        Scalar(self.0 * w)
    }
}

/// Rejects evaluation points lying on the boundary (closer than `1e-6 × scale`).
pub fn check_off_boundary(mesh: &SurfaceMesh, points: &[Vec3]) -> Result<()> {
    let tol = 1e-6 * mesh.scale();
    for (index, p) in points.iter().enumerate() {
        let distance = mesh.distance_to(p);
        if distance < tol {
            return Err(BbemError::OnBoundary { index, distance });
        }
    }
    Ok(())
}

fn check_density(mesh: &SurfaceMesh, density: &BoundaryField) -> Result<()> {
    if density.len() != mesh.len() {
        return Err(BbemError::Mismatch(format!("density on {} panels for a mesh of {}", density.len(), mesh.len())));
    }
    Ok(())
}

/// Evaluates `Σ_j ∫_j f(x, y, j) dσ_y` at every point.
fn eval_sum<T, F>(mesh: &SurfaceMesh, quad: &QuadratureSet, points: &[Vec3], opts: &LayerOptions, zero: T, f: F) -> Result<Vec<T>>
where
    T: AddAssign + Mul<f64, Output = T> + Copy + Send + Sync,
    F: Fn(&Vec3, &Vec3, usize) -> T + Sync + Send,
{
    check_mesh(mesh, quad)?;
    check_off_boundary(mesh, points)?;
    Ok(map_indexed(opts.exec, points.len(), |k| {
        let x = points[k];
        let mut acc = zero;
        for j in 0..mesh.len() {
            acc += integrate_panel(mesh, quad, j, &x, opts, zero, |y| f(&x, y, j));
        }
        acc
    }))
}

/// Single-layer velocity `V_α g` at points off the boundary.
pub fn eval_single_layer(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &BoundaryField,
    points: &[Vec3],
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<Vec<Vec3>> {
    params.validate()?;
    check_density(mesh, density)?;
    eval_sum(mesh, quad, points, opts, Vec3::zeros(), |x, y, j| velocity_kernel(&(x - y), params) * density.values[j])
}

/// Dense `3M × 3N` matrix of `V_α` from panel densities to velocities at `M`
/// off-boundary points, for repeated evaluation at fixed points.
pub fn single_layer_eval_matrix(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    points: &[Vec3],
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<Mat<f64>> {
    params.validate()?;
    check_mesh(mesh, quad)?;
    check_off_boundary(mesh, points)?;
    let n = mesh.len();
    let rows = map_indexed(opts.exec, points.len(), |k| {
        let x = points[k];
        (0..n)
            .map(|j| integrate_panel(mesh, quad, j, &x, opts, Mat3::zeros(), |y| velocity_kernel(&(x - y), params)))
            .collect::<Vec<_>>()
    });
    let mut a = Mat::<f64>::zeros(3 * points.len(), 3 * n);
    for (k, row) in rows.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    a[(3 * k + r, 3 * j + c)] = b[(r, c)];
                }
            }
        }
    }
    Ok(a)
}

/// Single-layer pressure `Q^s g`.
pub fn eval_single_layer_pressure(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &BoundaryField,
    points: &[Vec3],
    opts: &LayerOptions,
) -> Result<Vec<f64>> {
    check_density(mesh, density)?;
    let s = eval_sum(mesh, quad, points, opts, Scalar(0.0), |x, y, j| Scalar(pressure_kernel(&(x - y)).dot(&density.values[j])))?;
    Ok(s.into_iter().map(|v| v.0).collect())
}

/// Traction `σ(V_α g, Q^s g) n` at points off the boundary, one normal per point.
pub fn eval_single_layer_traction(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &BoundaryField,
    points: &[Vec3],
    normals: &[Vec3],
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<Vec<Vec3>> {
    params.validate()?;
    check_density(mesh, density)?;
    if normals.len() != points.len() {
        return Err(BbemError::Mismatch(format!("{} normals for {} points", normals.len(), points.len())));
    }
    let index: std::collections::HashMap<[u64; 3], usize> =
        points.iter().enumerate().map(|(k, p)| ([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()], k)).collect();
    eval_sum(mesh, quad, points, opts, Vec3::zeros(), |x, y, j| {
        let n = normals[index[&[x.x.to_bits(), x.y.to_bits(), x.z.to_bits()]]];
        sl_traction_kernel(&(x - y), &n, params) * density.values[j]
    })
}

/// Double-layer velocity `W_α h`.
pub fn eval_double_layer(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &BoundaryField,
    points: &[Vec3],
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<Vec<Vec3>> {
    params.validate()?;
    check_density(mesh, density)?;
    let normals = mesh.normals();
    eval_sum(mesh, quad, points, opts, Vec3::zeros(), |x, y, j| {
        let r = x - y;
        (stokes_dl_kernel(&r, &normals[j]) + dl_difference_kernel(&r, &normals[j], params)) * density.values[j]
    })
}

/// Double-layer pressure `Q^d_α h`.
pub fn eval_double_layer_pressure(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &BoundaryField,
    points: &[Vec3],
    params: &BrinkmanParams,
    opts: &LayerOptions,
) -> Result<Vec<f64>> {
    params.validate()?;
    check_density(mesh, density)?;
    let normals = mesh.normals();
    let s = eval_sum(mesh, quad, points, opts, Scalar(0.0), |x, y, j| {
        Scalar(dl_pressure_kernel(&(x - y), &normals[j], params).dot(&density.values[j]))
    })?;
    Ok(s.into_iter().map(|v| v.0).collect())
}

/// Harmonic single layer `V_Δ φ(x) = -∫ φ(y) / (4π|x - y|) dσ_y` for a scalar density.
pub fn eval_harmonic_single_layer(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    density: &[f64],
    points: &[Vec3],
    opts: &LayerOptions,
) -> Result<Vec<f64>> {
    if density.len() != mesh.len() {
        return Err(BbemError::Mismatch(format!("density on {} panels for a mesh of {}", density.len(), mesh.len())));
    }
    let s = eval_sum(mesh, quad, points, opts, Scalar(0.0), |x, y, j| {
        let d = (x - y).norm();
        Scalar(if d > 0.0 { -density[j] / (SPHERE_AREA * d) } else { 0.0 })
    })?;
    Ok(s.into_iter().map(|v| v.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_icosphere, panel_quadrature};
    use approx::assert_relative_eq;

    #[test]
    fn analytic_stokeslet_panel_matches_duffy() {
        let p = Panel::from_vertices([Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.1, 0.2), Vec3::new(0.3, 0.9, -0.1)]);
        for x in [p.centroid, p.vertices[0] * 0.6 + p.vertices[1] * 0.3 + p.vertices[2] * 0.1] {
            let exact = stokeslet_panel_integral(&p, &x);
            let rule = duffy_singular_rule(&p, &x, 16).unwrap();
            let mut num = Mat3::zeros();
            for (y, w) in rule.points.iter().zip(&rule.weights) {
                num += velocity_kernel(&(x - y), &BrinkmanParams::stokes()) * *w;
            }
            assert!((exact - num).abs().max() < 1e-10 * exact.abs().max(), "{exact} vs {num}");
        }
        // In-plane point outside the triangle: compare with the graded rule.
        let x = p.vertices[1] * 1.3 - p.vertices[0] * 0.3;
        let exact = stokeslet_panel_integral(&p, &x);
        let rule = near_singular_rule(&p, &x, 16);
        let mut num = Mat3::zeros();
        for (y, w) in rule.points.iter().zip(&rule.weights) {
            num += velocity_kernel(&(x - y), &BrinkmanParams::stokes()) * *w;
        }
        assert!((exact - num).abs().max() < 1e-9 * exact.abs().max());
    }

    #[test]
    fn single_layer_stokes_path_and_symmetry() {
        let m = build_icosphere(1, 1.0).unwrap();
        let q = panel_quadrature(&m, 6).unwrap();
        let opts = LayerOptions::default();
        let v = assemble_single_layer(&m, &q, &BrinkmanParams::stokes(), &opts).unwrap();
        let v0 = assemble_single_layer(&m, &q, &BrinkmanParams::brinkman(0.0), &opts).unwrap();
        assert_eq!(v.matrix, v0.matrix);
        let va = assemble_single_layer(&m, &q, &BrinkmanParams::brinkman(1.0), &opts).unwrap();
        let u = BoundaryField::from_fn(&m, |c, _| Vec3::new(c.y, c.z * c.x, 1.0));
        let w = BoundaryField::from_fn(&m, |c, _| Vec3::new(c.x * c.x, -c.z, c.y));
        let a = va.apply(&u).unwrap().pairing(&w).unwrap();
        let b = u.pairing(&va.apply(&w).unwrap()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-3);
    }

    #[test]
    fn double_layer_constant_identity_and_transpose() {
        let m = build_icosphere(1, 1.0).unwrap();
        let q = panel_quadrature(&m, 6).unwrap();
        let opts = LayerOptions::default();
        let k = assemble_double_layer(&m, &q, &BrinkmanParams::stokes(), &opts).unwrap();
        let c = BoundaryField::from_fn(&m, |_, _| Vec3::new(0.3, -1.0, 2.0));
        let kc = k.apply(&c).unwrap();
        for (a, b) in kc.values.iter().zip(&c.values) {
            assert!((a + b * 0.5).norm() < 1e-12);
        }
        let ks = adjoint_double_layer(&k, &m.areas()).unwrap();
        let back = adjoint_double_layer(&ks, &m.areas()).unwrap();
        assert!((&back.matrix - &k.matrix).norm_max() < 1e-13);
    }

    #[test]
    fn interior_double_layer_of_constant() {
        let m = build_icosphere(2, 1.0).unwrap();
        let q = panel_quadrature(&m, 6).unwrap();
        let c = BoundaryField::from_fn(&m, |_, _| Vec3::new(1.0, 2.0, -0.5));
        let pts = [Vec3::new(0.1, 0.2, -0.3), Vec3::new(0.0, 0.0, 0.9)];
        let u = eval_double_layer(&m, &q, &c, &pts, &BrinkmanParams::stokes(), &LayerOptions::default()).unwrap();
        for v in &u {
            assert!((v + c.values[0]).norm() < 1e-2 * c.values[0].norm(), "{v}");
        }
        let outside = eval_double_layer(&m, &q, &c, &[Vec3::new(0.0, 0.0, 1.5)], &BrinkmanParams::stokes(), &LayerOptions::default()).unwrap();
        assert!(outside[0].norm() < 1e-2);
        assert!(matches!(
            eval_double_layer(&m, &q, &c, &[m.panel(3).centroid], &BrinkmanParams::stokes(), &LayerOptions::default()),
            Err(BbemError::OnBoundary { .. })
        ));
    }
}
