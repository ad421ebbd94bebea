//! Fundamental solutions of the Brinkman (and Stokes) system in R^3.
//!
//! Sign convention: `(Δ - α) G^α - ∇Π = -δ I` and `div G^α = 0`, so the
//! Stokes tensor is `G⁰(x) = (I/|x| + x xᵀ/|x|³) / 8π`.
//!
//! The Brinkman tensor is written as
//! `G^α(x) = (δ_jk A₁(z)/|x| + x̂_j x̂_k A₂(z)/|x|) / 4π` with `z = √α |x|`,
//! where `A₁`, `A₂` are the half-integer Bessel reductions
//! `A₁(z) = e^{-z}(1 + 1/z + 1/z²) - 1/z²` and
//! `A₂(z) = 3/z² - e^{-z}(1 + 3/z + 3/z²)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{BbemError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Area of the unit sphere in R^3.
pub const SPHERE_AREA: f64 = 4.0 * std::f64::consts::PI;

/// Below this argument the Taylor expansions of `A₁`, `A₂` are used.
pub const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: usize = 18;

/// Physical constants of the Darcy–Forchheimer–Brinkman system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrinkmanParams {
    /// Viscous damping, units of 1/length².
    pub alpha: f64,
    /// Forchheimer coefficient, units of 1/length.
    #[serde(default)]
    pub beta: f64,
}

impl BrinkmanParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = BrinkmanParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn stokes() -> Self {
        BrinkmanParams { alpha: 0.0, beta: 0.0 }
    }

    pub fn brinkman(alpha: f64) -> Self {
        BrinkmanParams { alpha, beta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(BbemError::Domain(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(BbemError::Domain(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn sqrt_alpha(&self) -> f64 {
        self.alpha.sqrt()
    }

    pub fn is_stokes(&self) -> bool {
        self.alpha == 0.0
    }
}

/// Rank-3 tensor `T[i][j][l]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tensor3(pub [[[f64; 3]; 3]; 3]);

impl Tensor3 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.0[i][j][l]
    }

    /// Contracts the last index with `v`: `M[i][j] = Σ_l T[i][j][l] v_l`.
    pub fn contract_last(&self, v: &Vec3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..3).map(|l| self.0[i][j][l] * v[l]).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    out.0[i][j][l] -= other.0[i][j][l];
                }
            }
        }
        out
    }
}

/// All kernel tensors at one argument pair.
#[derive(Clone, Copy, Debug)]
pub struct KernelTensor {
    pub velocity: Mat3,
    pub pressure: Vec3,
    pub stress: Tensor3,
    pub pressure_tensor: Mat3,
}

#[inline]
fn taylor_coeff_a1(k: usize) -> f64 {
    // (-1)^k [1/k! - 1/(k+1)! + 1/(k+2)!]
    let kf = fact(k);
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (1.0 / kf - 1.0 / (kf * (k as f64 + 1.0)) + 1.0 / (kf * (k as f64 + 1.0) * (k as f64 + 2.0)))
}

#[inline]
fn taylor_coeff_a2(k: usize) -> f64 {
    // -(-1)^k [1/k! - 3/(k+1)! + 3/(k+2)!]
    let kf = fact(k);
    let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
    sign * (1.0 / kf - 3.0 / (kf * (k as f64 + 1.0)) + 3.0 / (kf * (k as f64 + 1.0) * (k as f64 + 2.0)))
}

fn fact(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Evaluates `Σ_{k ≥ skip} c_k z^{k-skip}` and its derivative.
fn series(z: f64, skip: usize, coeff: fn(usize) -> f64) -> (f64, f64) {
    let mut val = 0.0;
    let mut der = 0.0;
    for k in (skip..skip + SERIES_TERMS).rev() {
        let p = k - skip;
        val = val * z + coeff(k);
        if p >= 1 {
            der = der * z + p as f64 * coeff(k);
        }
    }
    (val, der)
}

fn check_arg(z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(BbemError::Domain(format!("Bessel-reduction argument must be finite and >= 0, got {z}")));
    }
    Ok(())
}

/// `(A₁(z), A₂(z), A₁'(z), A₂'(z))`, finite for every `z >= 0`.
pub fn a_coefficients(z: f64) -> (f64, f64, f64, f64) {
    if z < SERIES_CUTOFF {
        let (a1, d1) = series(z, 0, taylor_coeff_a1);
        let (a2, d2) = series(z, 0, taylor_coeff_a2);
        return (a1, a2, d1, d2);
    }
    let e = (-z).exp();
    let iz = 1.0 / z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let a1 = e * (1.0 + iz + iz2) - iz2;
    let a2 = 3.0 * iz2 - e * (1.0 + 3.0 * iz + 3.0 * iz2);
    let d1 = -e * (1.0 + iz + 2.0 * iz2 + 2.0 * iz3) + 2.0 * iz3;
    let d2 = -6.0 * iz3 + e * (1.0 + 3.0 * iz + 6.0 * iz2 + 6.0 * iz3);
    (a1, a2, d1, d2)
}

/// `(E₁, E₂, E₁', E₂')` with `E₁ = (A₁ - ½)/z` and `E₂ = (A₂ - ½)/z²`.
///
/// Both are bounded at `z = 0` (`E₁(0) = -2/3`, `E₂(0) = -1/8`); they carry the
/// Brinkman-minus-Stokes difference kernels without cancellation.
pub fn e_coefficients(z: f64) -> (f64, f64, f64, f64) {
    if z < SERIES_CUTOFF {
        let (e1, d1) = series(z, 1, taylor_coeff_a1);
        let (e2, d2) = series(z, 2, taylor_coeff_a2);
        return (e1, e2, d1, d2);
    }
    let (a1, a2, da1, da2) = a_coefficients(z);
    let e1 = (a1 - 0.5) / z;
    let e2 = (a2 - 0.5) / (z * z);
    let d1 = (da1 - e1) / z;
    let d2 = (da2 - 2.0 * z * e2) / (z * z);
    (e1, e2, d1, d2)
}

/// `A₁(z)`; the `z → 0⁺` limit is `1/2`.
pub fn a1(z: f64) -> Result<f64> {
    check_arg(z)?;
    Ok(a_coefficients(z).0)
}

/// `A₂(z)`; the `z → 0⁺` limit is `1/2`.
pub fn a2(z: f64) -> Result<f64> {
    check_arg(z)?;
    Ok(a_coefficients(z).1)
}

#[inline]
fn split(x: &Vec3) -> Result<(f64, Vec3)> {
    let r = x.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(BbemError::Singularity);
    }
    Ok((r, x / r))
}

#[inline]
fn velocity_from(r: f64, xh: &Vec3, a1: f64, a2: f64) -> Mat3 {
    let c = 1.0 / (SPHERE_AREA * r);
    Mat3::from_fn(|j, k| c * (if j == k { a1 } else { 0.0 } + xh[j] * xh[k] * a2))
}

/// Velocity tensor `G^α(x)`; exactly the Stokeslet when `alpha == 0`.
pub fn brinkman_velocity_tensor(x: &Vec3, params: &BrinkmanParams) -> Result<Mat3> {
    let (r, xh) = split(x)?;
    if params.is_stokes() {
        return Ok(velocity_from(r, &xh, 0.5, 0.5));
    }
    let (a1, a2, _, _) = a_coefficients(params.sqrt_alpha() * r);
    Ok(velocity_from(r, &xh, a1, a2))
}

/// Stokeslet `G⁰(x)`.
pub fn stokes_velocity_tensor(x: &Vec3) -> Result<Mat3> {
    brinkman_velocity_tensor(x, &BrinkmanParams::stokes())
}

/// Pressure vector `Π(x) = x / (4π|x|³)`, independent of `α`.
pub fn pressure_vector(x: &Vec3) -> Result<Vec3> {
    let (r, _) = split(x)?;
    Ok(x / (SPHERE_AREA * r * r * r))
}

/// Gradient `T[l][j][k] = ∂_l G^α_jk(x)`.
pub fn brinkman_velocity_gradient(x: &Vec3, params: &BrinkmanParams) -> Result<Tensor3> {
    let (r, xh) = split(x)?;
    let (a1, a2, za1, za2) = if params.is_stokes() {
        (0.5, 0.5, 0.0, 0.0)
    } else {
        let z = params.sqrt_alpha() * r;
        let (a1, a2, d1, d2) = a_coefficients(z);
        (a1, a2, z * d1, z * d2)
    };
    let c = 1.0 / (SPHERE_AREA * r * r);
    let p = za1 - a1;
    let q = za2 - 3.0 * a2;
    let mut t = Tensor3::default();
    for l in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let djk = if j == k { 1.0 } else { 0.0 };
                let djl = if j == l { 1.0 } else { 0.0 };
                let dkl = if k == l { 1.0 } else { 0.0 };
                t.0[l][j][k] =
                    c * (p * xh[l] * djk + q * xh[l] * xh[j] * xh[k] + a2 * (djl * xh[k] + dkl * xh[j]));
            }
        }
    }
    Ok(t)
}

fn stress_from(pi: &Vec3, grad: &Tensor3) -> Tensor3 {
    let mut s = Tensor3::default();
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let dil = if i == l { 1.0 } else { 0.0 };
                s.0[i][j][l] = -pi[j] * dil + grad.0[l][i][j] + grad.0[i][l][j];
            }
        }
    }
    s
}

/// Stress tensor `S^α_{ijl}` as a function of the difference `r = x - y`:
/// the stress at `x` of the `j`-th fundamental flow centred at `y`.
pub fn stress_tensor_at(r: &Vec3, params: &BrinkmanParams) -> Result<Tensor3> {
    let pi = pressure_vector(r)?;
    let grad = brinkman_velocity_gradient(r, params)?;
    Ok(stress_from(&pi, &grad))
}

/// `S^α_{ijl}(x, y) = -Π_j δ_il + ∂_l G^α_ij + ∂_i G^α_lj`, derivatives in `x`.
pub fn brinkman_stress_tensor(x: &Vec3, y: &Vec3, params: &BrinkmanParams) -> Result<Tensor3> {
    stress_tensor_at(&(x - y), params)
}

/// Pressure tensor `Λ^α_ik(x, y)`.
pub fn brinkman_pressure_tensor(x: &Vec3, y: &Vec3, params: &BrinkmanParams) -> Result<Mat3> {
    let d = y - x;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(BbemError::Singularity);
    }
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    Ok(Mat3::from_fn(|i, k| {
        let dik = if i == k { 1.0 } else { 0.0 };
        (-6.0 * d[i] * d[k] / r5 + 2.0 * dik / r3 - params.alpha * dik / r) / SPHERE_AREA
    }))
}

/// Laplace fundamental solution `-1/(4π|x|)`.
pub fn harmonic_kernel(x: &Vec3) -> Result<f64> {
    let (r, _) = split(x)?;
    Ok(-1.0 / (SPHERE_AREA * r))
}

/// All four kernel tensors at `(x, y)`.
pub fn kernel_tensor(x: &Vec3, y: &Vec3, params: &BrinkmanParams) -> Result<KernelTensor> {
    let r = x - y;
    Ok(KernelTensor {
        velocity: brinkman_velocity_tensor(&r, params)?,
        pressure: pressure_vector(&r)?,
        stress: stress_tensor_at(&r, params)?,
        pressure_tensor: brinkman_pressure_tensor(x, y, params)?,
    })
}

/// Difference `G^α(x) - G⁰(x)`, continuous at the origin with value `-(√α/6π) I`.
pub fn velocity_difference(x: &Vec3, params: &BrinkmanParams) -> Mat3 {
    if params.is_stokes() {
        return Mat3::zeros();
    }
    let s = params.sqrt_alpha();
    let r = x.norm();
    let (e1, e2, _, _) = e_coefficients(s * r);
    let c = s / SPHERE_AREA;
    if r == 0.0 {
        return Mat3::identity() * (c * e1);
    }
    let xh = x / r;
    let z = s * r;
    Mat3::from_fn(|j, k| c * (if j == k { e1 } else { 0.0 } + xh[j] * xh[k] * z * e2))
}

/// Limit of `G^α - G⁰` at coincident points.
pub fn velocity_difference_limit(params: &BrinkmanParams) -> Mat3 {
    Mat3::identity() * (-params.sqrt_alpha() / (6.0 * std::f64::consts::PI))
}

/// Gradient of `G^α - G⁰`, `T[l][j][k] = ∂_l (G^α - G⁰)_jk`. Bounded near the
/// origin; returns zero at `x = 0` where the limit is direction dependent.
pub fn velocity_difference_gradient(x: &Vec3, params: &BrinkmanParams) -> Tensor3 {
    let mut t = Tensor3::default();
    let r = x.norm();
    if params.is_stokes() || r == 0.0 {
        return t;
    }
    let xh = x / r;
    let z = params.sqrt_alpha() * r;
    let (_, e2, de1, de2) = e_coefficients(z);
    let c = params.alpha / SPHERE_AREA;
    let q = z * de2 - e2;
    for l in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let djk = if j == k { 1.0 } else { 0.0 };
                let djl = if j == l { 1.0 } else { 0.0 };
                let dkl = if k == l { 1.0 } else { 0.0 };
                t.0[l][j][k] =
                    c * (de1 * xh[l] * djk + q * xh[l] * xh[j] * xh[k] + e2 * (djl * xh[k] + dkl * xh[j]));
            }
        }
    }
    t
}

/// Difference stress `S^α - S⁰` at `r = x - y` (the pressure parts cancel).
pub fn stress_difference_at(r: &Vec3, params: &BrinkmanParams) -> Tensor3 {
    let grad = velocity_difference_gradient(r, params);
    stress_from(&Vec3::zeros(), &grad)
}
