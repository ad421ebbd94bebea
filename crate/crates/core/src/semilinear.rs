//! Picard iteration for the mixed problem of the semilinear
//! Darcy–Forchheimer–Brinkman system `Δu - αu - β|u|u - ∇π = f`, with
//! empirical estimates of the smallness constants that guarantee contraction.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BbemError, Result};
use crate::geometry::{PatchLabel, PatchLabeling, SurfaceMesh, VolumeGrid};
use crate::kernels::{BrinkmanParams, Vec3};
use crate::linalg;
use crate::potentials::{boundary_data_from_plan, single_layer_eval_matrix, BoundaryField, NewtonianPlan, VolumeField};
use crate::solvers::{BoundaryOperators, Forcing, MixedSolver, Representation, SolutionHandle, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Stop once the grid-L² difference of successive iterates is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation factor in `(0, 1]`; 1 is the plain fixed-point map.
    #[serde(default = "one")]
    pub damping: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { tol: 1e-8, max_iter: 20, damping: 1.0 }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BbemError::Config { path: "picard".into(), msg: msg.into() });
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Empirical stand-ins for the constants of the contraction argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemilinearConstants {
    /// Largest observed gain of the linear solution map `(f, h₀, g₀) ↦ u`.
    #[serde(rename = "C_est")]
    pub c_est: f64,
    /// Largest observed `‖|v|w‖ / (‖v‖ ‖w‖)` on the grid.
    pub c1prime_est: f64,
    #[serde(rename = "C2_est")]
    pub c2_est: f64,
    /// `3 / (16 C₂ C²)`; `None` when `β = 0` (no smallness needed).
    pub zeta_est: Option<f64>,
    /// `1 / (4 C₂ C)`; `None` when `β = 0`.
    pub eta_est: Option<f64>,
}

impl SemilinearConstants {
    pub fn from_estimates(c_est: f64, c1prime_est: f64, beta: f64) -> SemilinearConstants {
        let c2_est = c1prime_est * beta;
        let finite = |v: f64| v.is_finite().then_some(v);
        SemilinearConstants {
            c_est,
            c1prime_est,
            c2_est,
            zeta_est: finite(3.0 / (16.0 * c2_est * c_est * c_est)),
            eta_est: finite(1.0 / (4.0 * c2_est * c_est)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Grid-L² norms of successive differences `‖v_{k+1} - v_k‖`.
    pub iterates: Vec<f64>,
    /// Grid-L² norms of the iterates themselves.
    pub iterate_norms: Vec<f64>,
    pub measured_ratio: f64,
    #[serde(rename = "C_est")]
    pub c_est: f64,
    pub c1prime_est: f64,
    pub zeta_est: Option<f64>,
    pub eta_est: Option<f64>,
    pub converged: bool,
    pub ball_respected: bool,
}

/// The linear mixed Poisson solution map `A(f, h₀, g₀)` sampled on a volume
/// grid, with every operator that does not depend on the data precomputed.
pub struct SolutionMap {
    pub ops: BoundaryOperators,
    pub solver: MixedSolver,
    pub grid: VolumeGrid,
    boundary_plan: NewtonianPlan,
    grid_plan: NewtonianPlan,
    eval: Mat<f64>,
}

/// One application of the map.
pub struct MapOutput {
    pub velocity: VolumeField,
    pub density: BoundaryField,
}

impl SolutionMap {
    pub fn new(
        mesh: &SurfaceMesh,
        labeling: &PatchLabeling,
        grid: &VolumeGrid,
        params: &BrinkmanParams,
        opts: &SolverOptions,
    ) -> Result<SolutionMap> {
        let ops = BoundaryOperators::new(mesh, params, opts)?;
        let solver = MixedSolver::new(&ops, labeling)?;
        let boundary_plan = NewtonianPlan::new(grid, &mesh.centroids(), params, &opts.newtonian, true)?;
        let grid_plan = NewtonianPlan::new(grid, &grid.centers, params, &opts.newtonian, false)?;
        let eval = single_layer_eval_matrix(mesh, &ops.quad, &grid.centers, params, &opts.layer)?;
        Ok(SolutionMap { ops, solver, grid: grid.clone(), boundary_plan, grid_plan, eval })
    }

    pub fn params(&self) -> &BrinkmanParams {
        &self.ops.params
    }

    pub fn labeling(&self) -> &PatchLabeling {
        &self.solver.labeling
    }

    pub fn apply(&self, f: &VolumeField, h0: &BoundaryField, g0: &BoundaryField) -> Result<MapOutput> {
        let mesh = &self.ops.mesh;
        let forced = !f.is_zero();
        let (h, g) = if forced {
            let (trace, traction) = boundary_data_from_plan(&self.boundary_plan, &self.grid, f, mesh)?;
            (h0.combine(1.0, &trace, -1.0)?, g0.combine(1.0, &traction, -1.0)?)
        } else {
            (h0.clone(), g0.clone())
        };
        let (psi, _) = self.solver.solve_data(&h, &g)?;
        let layer = linalg::matvec(&self.eval, &psi);
        let mut u: Vec<Vec3> = layer.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        if forced {
            for (a, b) in u.iter_mut().zip(self.grid_plan.velocity(&self.grid, f)?) {
                *a += b;
            }
        }
        Ok(MapOutput { velocity: VolumeField::new(&self.grid, u)?, density: BoundaryField::from_flat(&psi, mesh.areas())? })
    }

    /// `√(‖f‖² + ‖h₀|_{S_D}‖² + ‖g₀|_{S_N}‖²)` in the discrete L² norms.
    pub fn data_norm(&self, f: &VolumeField, h0: &BoundaryField, g0: &BoundaryField) -> f64 {
        let lab = self.labeling();
        let h = h0.masked(|i| lab.is(i, PatchLabel::Dirichlet)).norm();
        let g = g0.masked(|i| lab.is(i, PatchLabel::Neumann)).norm();
        (f.l2_norm(&self.grid).powi(2) + h * h + g * g).sqrt()
    }

    fn handle(&self, density: BoundaryField, forcing: VolumeField) -> SolutionHandle {
        SolutionHandle {
            representation: Representation::WithNewtonian,
            layer: Representation::MixedSingleLayer,
            density,
            mesh: self.ops.mesh.clone(),
            quad: self.ops.quad.clone(),
            params: self.ops.params,
            forcing: Some(Forcing { grid: self.grid.clone(), f: forcing }),
            layer_opts: self.ops.opts.layer,
            newtonian_opts: self.ops.opts.newtonian,
        }
    }
}

/// `β |v| v` pointwise.
pub fn forchheimer_term(v: &VolumeField, beta: f64) -> VolumeField {
    VolumeField { values: v.values.iter().map(|x| x * (beta * x.norm())).collect() }
}

fn difference_norm(a: &VolumeField, b: &VolumeField, grid: &VolumeGrid) -> f64 {
    let d: Vec<Vec3> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    grid.l2_norm(&d)
}

/// Largest ratio of successive differences, ignoring differences already at
/// rounding level relative to the iterate.
fn measured_ratio(diffs: &[f64], norms: &[f64]) -> f64 {
    let mut ratio: f64 = 0.0;
    for k in 1..diffs.len() {
        let floor = 1e-12 * norms[k].max(f64::MIN_POSITIVE);
        if diffs[k - 1] > floor {
            ratio = ratio.max(diffs[k] / diffs[k - 1]);
        }
    }
    ratio
}

/// Fixed-point iteration `v_{k+1} = A(f + β|v_k|v_k, h₀, g₀)` from `v₀ = 0`.
pub fn picard_solve(
    map: &SolutionMap,
    f: &VolumeField,
    h0: &BoundaryField,
    g0: &BoundaryField,
    config: &PicardConfig,
    constants: &SemilinearConstants,
) -> Result<(SolutionHandle, ContractionReport)> {
    config.validate()?;
    let grid = &map.grid;
    let beta = map.params().beta;
    let mut v = VolumeField::zeros(grid);
    let mut diffs: Vec<f64> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let mut growth = 0;
    let mut last: Option<(BoundaryField, VolumeField)> = None;
    let mut converged = false;
    for _ in 0..config.max_iter {
        let forcing = if beta == 0.0 {
            f.clone()
        } else {
            let fb = forchheimer_term(&v, beta);
            VolumeField { values: f.values.iter().zip(&fb.values).map(|(a, b)| a + b).collect() }
        };
        let out = map.apply(&forcing, h0, g0)?;
        let diff = difference_norm(&out.velocity, &v, grid) * config.damping;
        let next = VolumeField {
            values: v.values.iter().zip(&out.velocity.values).map(|(a, b)| a + (b - a) * config.damping).collect(),
        };
        if diffs.last().is_some_and(|&d| diff > d) {
            growth += 1;
        } else {
            growth = 0;
        }
        diffs.push(diff);
        norms.push(next.l2_norm(grid));
        v = next;
        last = Some((out.density, forcing));
        // With β = 0 the map does not depend on v, so its first value is the fixed point.
        if diff <= config.tol || (beta == 0.0 && config.damping == 1.0) {
            converged = true;
            break;
        }
        if growth >= 3 && diff > 10.0 * diffs[0] {
            break;
        }
    }
    let report = ContractionReport {
        measured_ratio: measured_ratio(&diffs, &norms),
        ball_respected: constants.eta_est.is_none_or(|eta| norms.iter().all(|&n| n <= eta)),
        iterates: diffs,
        iterate_norms: norms,
        c_est: constants.c_est,
        c1prime_est: constants.c1prime_est,
        zeta_est: constants.zeta_est,
        eta_est: constants.eta_est,
        converged,
    };
    if !converged {
        return Err(if growth >= 3 {
            BbemError::SmallnessViolated(Box::new(report))
        } else {
            BbemError::NotConverged(Box::new(report))
        });
    }
    let (density, forcing) = last.expect("at least one iteration ran");
    Ok((map.handle(density, forcing), report))
}

/// Smooth random field built from low-order trigonometric modes.
fn random_smooth(x: &Vec3, coeffs: &[[f64; 3]]) -> Vec3 {
    let modes = [
        1.0,
        x.x,
        x.y,
        x.z,
        (std::f64::consts::PI * x.x).sin(),
        (std::f64::consts::PI * x.y).cos(),
        (std::f64::consts::PI * x.z).sin() * x.x,
    ];
    let mut v = Vec3::zeros();
    for (m, c) in modes.iter().zip(coeffs) {
        v += Vec3::new(c[0], c[1], c[2]) * *m;
    }
    v
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..7).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

/// Estimates `C = ‖A‖` and `c₁′` from `samples` random smooth data tuples.
///
/// `C_est` is the largest gain `‖A x‖ / ‖x‖` observed over the samples and
/// over three power steps of the forcing-to-velocity map started from each
/// sampled forcing; `c1prime_est` is the largest `‖|v|w‖ / (‖v‖ ‖w‖)` over all
/// pairs of computed velocity fields.
pub fn estimate_constants(map: &SolutionMap, samples: usize, seed: u64) -> Result<SemilinearConstants> {
    if samples < 8 {
        return Err(BbemError::Config { path: "samples".into(), msg: "at least 8 samples are required".into() });
    }
    let grid = &map.grid;
    let mesh = &map.ops.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gain: f64 = 0.0;
    let mut fields: Vec<VolumeField> = Vec::new();
    for s in 0..samples {
        let (cf, ch, cg) = (random_coeffs(&mut rng), random_coeffs(&mut rng), random_coeffs(&mut rng));
        // Cycle through forcing-only, Dirichlet-only, Neumann-only and mixed tuples.
        let (wf, wh, wg) = match s % 4 {
            0 => (1.0, 0.0, 0.0),
            1 => (0.0, 1.0, 0.0),
            2 => (0.0, 0.0, 1.0),
            _ => (1.0, 1.0, 1.0),
        };
        let mut f = VolumeField::from_fn(grid, |x| random_smooth(x, &cf) * wf);
        let h0 = BoundaryField::from_fn(mesh, |x, _| random_smooth(x, &ch) * wh);
        let g0 = BoundaryField::from_fn(mesh, |x, _| random_smooth(x, &cg) * wg);
        let out = map.apply(&f, &h0, &g0)?;
        let n_in = map.data_norm(&f, &h0, &g0);
        if n_in > 0.0 {
            gain = gain.max(out.velocity.l2_norm(grid) / n_in);
        }
        fields.push(out.velocity.clone());
        if wf > 0.0 {
            let zero = BoundaryField::zeros(mesh);
            for _ in 0..3 {
                let n = f.l2_norm(grid);
                if n == 0.0 {
                    break;
                }
                let u = map.apply(&f, &zero, &zero)?.velocity;
                gain = gain.max(u.l2_norm(grid) / n);
                let un = u.l2_norm(grid);
                if un == 0.0 {
                    break;
                }
                f = u.scaled(n / un);
            }
        }
    }
    let mut c1: f64 = 0.0;
    for (i, v) in fields.iter().enumerate() {
        for w in &fields[i..] {
            let (nv, nw) = (v.l2_norm(grid), w.l2_norm(grid));
            if nv > 0.0 && nw > 0.0 {
                let prod: Vec<Vec3> = v.values.iter().zip(&w.values).map(|(a, b)| b * a.norm()).collect();
                c1 = c1.max(grid.l2_norm(&prod) / (nv * nw));
            }
        }
    }
    Ok(SemilinearConstants::from_estimates(gain, c1, map.params().beta))
}

/// Relative finite-difference residual of `Δu - αu - β|u|u - ∇π - f` at
/// interior grid cells, normalized by the RMS sizes of `f`, `Δu` and `αu`.
pub fn semilinear_residual(handle: &SolutionHandle, grid: &VolumeGrid, params: &BrinkmanParams, f: &VolumeField) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(BbemError::Mismatch(format!("forcing on {} cells, grid of {}", f.len(), grid.len())));
    }
    let cells = grid.interior_cells(3);
    let stride = (cells.len() / 64).max(1);
    let sample: Vec<usize> = cells.iter().copied().step_by(stride).collect();
    if sample.is_empty() {
        return Ok(0.0);
    }
    let h = grid.spacing;
    let offsets = [-2.0, -1.0, 1.0, 2.0];
    let mut points = Vec::with_capacity(13 * sample.len());
    for &c in &sample {
        let x = grid.centers[c];
        points.push(x);
        for a in 0..3 {
            for s in offsets {
                points.push(x + Vec3::ith(a, s * h));
            }
        }
    }
    let u = handle.velocity(&points)?;
    let p = handle.raw_pressure(&points)?;
    let (mut res, mut sf, mut slap, mut su) = (0.0, 0.0, 0.0, 0.0);
    for (s, &c) in sample.iter().enumerate() {
        let b = 13 * s;
        let at = |a: usize, k: usize| b + 1 + 4 * a + k;
        let mut lap = Vec3::zeros();
        let mut grad_p = Vec3::zeros();
        for a in 0..3 {
            lap += (-u[at(a, 0)] + u[at(a, 1)] * 16.0 - u[b] * 30.0 + u[at(a, 2)] * 16.0 - u[at(a, 3)]) / (12.0 * h * h);
            grad_p[a] = (p[at(a, 0)] - 8.0 * p[at(a, 1)] + 8.0 * p[at(a, 2)] - p[at(a, 3)]) / (12.0 * h);
        }
        let r = lap - u[b] * params.alpha - u[b] * (params.beta * u[b].norm()) - grad_p - f.values[c];
        res += r.norm_squared();
        sf += f.values[c].norm_squared();
        slap += lap.norm_squared();
        su += (u[b] * params.alpha).norm_squared();
    }
    let scale = sf.sqrt() + slap.sqrt() + su.sqrt();
    Ok(if scale == 0.0 { res.sqrt() } else { res.sqrt() / scale })
}
