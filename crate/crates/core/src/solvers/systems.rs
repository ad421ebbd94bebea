use std::time::Instant;

use faer::Mat;

use super::handle::{Representation, SolutionHandle};
use super::{BoundaryOperators, BvpKind, BvpSpec, Forcing, SolveReport, SolverOptions};
use crate::error::{BbemError, Result};
use crate::geometry::{PatchLabel, PatchLabeling};
use crate::kernels::BrinkmanParams;
use crate::linalg::{self, LuFactor, Svd};
use crate::potentials::{newtonian_boundary_data, BoundaryField, OperatorKind};

const POWER_ITERS: usize = 30;

/// `√w` per coefficient, panel-major.
fn sqrt_weights(weights: &[f64]) -> Vec<f64> {
    weights.iter().flat_map(|w| [w.sqrt(); 3]).collect()
}

/// `D^{1/2} A D^{-1/2}`: the matrix whose Euclidean geometry is the weighted pairing.
fn weighted(a: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)] / d[j])
}

fn scale(v: &[f64], d: &[f64]) -> Vec<f64> {
    v.iter().zip(d).map(|(x, s)| x * s).collect()
}

fn unscale(v: &[f64], d: &[f64]) -> Vec<f64> {
    v.iter().zip(d).map(|(x, s)| x / s).collect()
}

fn relative_residual(a: &Mat<f64>, x: &[f64], b: &[f64]) -> f64 {
    let bn = linalg::norm(b);
    if bn == 0.0 {
        return linalg::norm(x);
    }
    let ax = linalg::matvec(a, x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    linalg::norm(&r) / bn
}

fn require_positive_alpha(params: &BrinkmanParams, what: &str) -> Result<()> {
    if params.alpha <= 0.0 {
        return Err(BbemError::UnsupportedParameter(format!("{what} solves need alpha > 0, got {}", params.alpha)));
    }
    Ok(())
}

fn handle(
    ops: &BoundaryOperators,
    representation: Representation,
    density: Vec<f64>,
    forcing: Option<Forcing>,
) -> Result<SolutionHandle> {
    Ok(SolutionHandle {
        representation: if forcing.is_some() { Representation::WithNewtonian } else { representation },
        layer: representation,
        density: BoundaryField::from_flat(&density, ops.mesh.areas())?,
        mesh: ops.mesh.clone(),
        quad: ops.quad.clone(),
        params: ops.params,
        forcing,
        layer_opts: ops.opts.layer,
        newtonian_opts: ops.opts.newtonian,
    })
}

fn base_report(kind: BvpKind, ops: &BoundaryOperators) -> SolveReport {
    SolveReport { kind: kind.name().into(), alpha: ops.params.alpha, n_panels: ops.mesh.len(), ..Default::default() }
}

/// Interior Dirichlet problem through the double layer: `(-½I + K_α)φ = h₀`,
/// solved by truncated SVD in the area-weighted norm.
pub struct DirichletSolver {
    d: Vec<f64>,
    weighted: Mat<f64>,
    pub svd: Svd,
    /// Index of the singular mode removed as the `ν` defect, if one was found.
    pub defect: Option<usize>,
    /// Cosine between the smallest left singular vector and the weighted normal field.
    pub defect_cosine: f64,
    normal: BoundaryField,
    opts: SolverOptions,
}

impl DirichletSolver {
    pub fn new(ops: &BoundaryOperators) -> Result<DirichletSolver> {
        let d = sqrt_weights(&ops.mesh.areas());
        let a = ops.double_layer()?.shifted(-0.5, 1.0, OperatorKind::Custom);
        let weighted = weighted(&a.matrix, &d);
        let svd = Svd::new(&weighted)?;
        let n = svd.s.len();
        let normal = BoundaryField::normals(&ops.mesh);
        let nu = scale(&normal.to_flat(), &d);
        let nu_norm = linalg::norm(&nu);
        let defect_cosine = if n == 0 { 0.0 } else { linalg::dot(&svd.left_vector(n - 1), &nu).abs() / nu_norm };
        let defect = (defect_cosine >= ops.opts.defect_alignment).then_some(n - 1);
        let smax = svd.sigma_max();
        let kept_min = match defect {
            Some(k) if k > 0 => svd.s[k - 1],
            Some(_) => 0.0,
            None => svd.sigma_min(),
        };
        if smax == 0.0 || kept_min <= ops.opts.svd_cutoff * smax {
            return Err(BbemError::IllConditioned(format!(
                "double-layer system is singular beyond the normal defect (sigma {kept_min:e} vs max {smax:e})"
            )));
        }
        Ok(DirichletSolver { d, weighted, svd, defect, defect_cosine, normal, opts: ops.opts })
    }

    /// Smallest and second-smallest singular values of the weighted system.
    pub fn sigma_pair(&self) -> (f64, f64) {
        let n = self.svd.s.len();
        (self.svd.s[n - 1], if n > 1 { self.svd.s[n - 2] } else { f64::NAN })
    }

    /// Checks compatibility, projects out `ν` and returns `(φ, residual, warnings)`.
    pub fn solve_data(&self, h0: &BoundaryField) -> Result<(Vec<f64>, f64, Vec<String>)> {
        let hn = h0.norm();
        let ratio = if hn == 0.0 { 0.0 } else { h0.pairing(&self.normal)?.abs() / (hn * self.normal.norm()) };
        if ratio > self.opts.flux_tol {
            return Err(BbemError::FluxIncompatible { ratio, tol: self.opts.flux_tol });
        }
        let h = h0.project_out(&self.normal)?;
        let b = scale(&h.to_flat(), &self.d);
        let drop: Vec<usize> = self.defect.into_iter().collect();
        let (y, dropped) = self.svd.solve_truncated(&b, self.opts.svd_cutoff, &drop);
        let mut warnings = Vec::new();
        if self.defect.is_none() {
            warnings.push(format!("no singular mode aligned with the normal (cosine {:.3})", self.defect_cosine));
        }
        if dropped > drop.len() {
            warnings.push(format!("{} extra singular modes truncated", dropped - drop.len()));
        }
        // The dropped mode is the discrete cokernel; measure the residual of the
        // system actually solved, with that component of the data removed.
        let mut b_kept = b;
        if let Some(k) = self.defect {
            let u = self.svd.left_vector(k);
            let c = linalg::dot(&u, &b_kept);
            b_kept.iter_mut().zip(&u).for_each(|(bi, ui)| *bi -= c * ui);
        }
        let residual = relative_residual(&self.weighted, &y, &b_kept);
        Ok((unscale(&y, &self.d), residual, warnings))
    }
}

/// Interior Neumann problem through the single layer: `(½I + K*_α)ψ = g₀`.
pub struct NeumannSolver {
    d: Vec<f64>,
    weighted: Mat<f64>,
    lu: LuFactor,
}

impl NeumannSolver {
    pub fn new(ops: &BoundaryOperators) -> Result<NeumannSolver> {
        require_positive_alpha(&ops.params, "Neumann")?;
        let d = sqrt_weights(&ops.mesh.areas());
        let a = ops.adjoint_double_layer()?.shifted(0.5, 1.0, OperatorKind::Custom);
        let weighted = weighted(&a.matrix, &d);
        let lu = LuFactor::new(&weighted)?;
        Ok(NeumannSolver { d, weighted, lu })
    }

    pub fn solve_data(&self, g0: &BoundaryField) -> Result<(Vec<f64>, f64)> {
        let b = scale(&g0.to_flat(), &self.d);
        let y = self.lu.solve_checked(&b)?;
        let residual = relative_residual(&self.weighted, &y, &b);
        Ok((unscale(&y, &self.d), residual))
    }

    pub fn sigma_min(&self) -> f64 {
        self.lu.sigma_min(POWER_ITERS)
    }

    pub fn sigma_max(&self) -> f64 {
        linalg::sigma_max_estimate(&self.weighted, POWER_ITERS)
    }
}

/// Mixed problem through the single layer: rows on the Dirichlet patch come
/// from `𝒱_α`, rows on the Neumann patch from `½I + K*_α`.
pub struct MixedSolver {
    d: Vec<f64>,
    weighted: Mat<f64>,
    lu: LuFactor,
    pub labeling: PatchLabeling,
}

impl MixedSolver {
    pub fn new(ops: &BoundaryOperators, labeling: &PatchLabeling) -> Result<MixedSolver> {
        labeling.validate_mixed(ops.mesh.len())?;
        require_positive_alpha(&ops.params, "mixed")?;
        let v = &ops.single_layer()?.matrix;
        let ks = &ops.adjoint_double_layer()?.matrix;
        let n = v.nrows();
        let s = Mat::from_fn(n, n, |i, j| {
            if labeling.is(i / 3, PatchLabel::Dirichlet) {
                v[(i, j)]
            } else {
                ks[(i, j)] + if i == j { 0.5 } else { 0.0 }
            }
        });
        let d = sqrt_weights(&ops.mesh.areas());
        let weighted = weighted(&s, &d);
        let lu = LuFactor::new(&weighted)?;
        Ok(MixedSolver { d, weighted, lu, labeling: labeling.clone() })
    }

    /// Right-hand side: `h₀` on Dirichlet panels, `g₀` on Neumann panels.
    pub fn rhs(&self, h0: &BoundaryField, g0: &BoundaryField) -> Vec<f64> {
        let h = h0.to_flat();
        let g = g0.to_flat();
        (0..h.len()).map(|i| if self.labeling.is(i / 3, PatchLabel::Dirichlet) { h[i] } else { g[i] }).collect()
    }

    pub fn solve_data(&self, h0: &BoundaryField, g0: &BoundaryField) -> Result<(Vec<f64>, f64)> {
        if h0.len() != self.labeling.len() || g0.len() != self.labeling.len() {
            return Err(BbemError::Mismatch("mixed data and labeling sizes differ".into()));
        }
        let b = scale(&self.rhs(h0, g0), &self.d);
        let y = self.lu.solve_checked(&b)?;
        let residual = relative_residual(&self.weighted, &y, &b);
        Ok((unscale(&y, &self.d), residual))
    }

    pub fn sigma_min(&self) -> f64 {
        self.lu.sigma_min(POWER_ITERS)
    }

    pub fn sigma_max(&self) -> f64 {
        linalg::sigma_max_estimate(&self.weighted, POWER_ITERS)
    }
}

fn finish(mut report: SolveReport, start: Instant) -> SolveReport {
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

pub fn solve_dirichlet(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    let start = Instant::now();
    let ops = BoundaryOperators::new(&spec.mesh, &spec.params, opts)?;
    let h0 = spec.data(&spec.dirichlet, "Dirichlet")?;
    let solver = DirichletSolver::new(&ops)?;
    let (phi, residual, warnings) = solver.solve_data(&h0)?;
    let (smin, _) = solver.sigma_pair();
    let report = SolveReport {
        residual_l2: residual,
        sigma_min: Some(smin),
        sigma_max: Some(solver.svd.sigma_max()),
        warnings,
        ..base_report(BvpKind::Dirichlet, &ops)
    };
    Ok((handle(&ops, Representation::DoubleLayer, phi, None)?, finish(report, start)))
}

pub fn solve_neumann(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    let start = Instant::now();
    require_positive_alpha(&spec.params, "Neumann")?;
    let ops = BoundaryOperators::new(&spec.mesh, &spec.params, opts)?;
    let g0 = spec.data(&spec.neumann, "Neumann")?;
    let solver = NeumannSolver::new(&ops)?;
    let (psi, residual) = solver.solve_data(&g0)?;
    let report = SolveReport {
        residual_l2: residual,
        sigma_min: Some(solver.sigma_min()),
        sigma_max: Some(solver.sigma_max()),
        ..base_report(BvpKind::Neumann, &ops)
    };
    Ok((handle(&ops, Representation::SingleLayer, psi, None)?, finish(report, start)))
}

pub fn solve_mixed(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    let start = Instant::now();
    let labeling = spec
        .labeling
        .as_ref()
        .ok_or_else(|| BbemError::InvalidLabeling("mixed problem without a patch labeling".into()))?;
    labeling.validate_mixed(spec.mesh.len())?;
    require_positive_alpha(&spec.params, "mixed")?;
    let ops = BoundaryOperators::new(&spec.mesh, &spec.params, opts)?;
    let h0 = spec.data(&spec.dirichlet, "Dirichlet")?;
    let g0 = spec.data(&spec.neumann, "Neumann")?;
    let solver = MixedSolver::new(&ops, labeling)?;
    let (psi, residual) = solver.solve_data(&h0, &g0)?;
    let report = SolveReport {
        residual_l2: residual,
        sigma_min: Some(solver.sigma_min()),
        sigma_max: Some(solver.sigma_max()),
        ..base_report(BvpKind::Mixed, &ops)
    };
    Ok((handle(&ops, Representation::MixedSingleLayer, psi, None)?, finish(report, start)))
}

/// Forced problem: subtracts the Newtonian potential's boundary data, solves
/// the homogeneous problem of the same kind and adds the volume term back.
pub fn solve_poisson(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    let start = Instant::now();
    let forcing = spec
        .forcing
        .clone()
        .ok_or_else(|| BbemError::Mismatch("Poisson solve needs a volume forcing".into()))?;
    let (trace, traction) =
        newtonian_boundary_data(&forcing.grid, &forcing.f, &spec.mesh, &spec.params, &opts.newtonian)?;
    let mut shifted = spec.clone();
    shifted.forcing = None;
    if let Some(h) = &spec.dirichlet {
        shifted.dirichlet = Some(h.combine(1.0, &trace, -1.0)?);
    }
    if let Some(g) = &spec.neumann {
        shifted.neumann = Some(g.combine(1.0, &traction, -1.0)?);
    }
    let (mut h, report) = solve_homogeneous(&shifted, opts)?;
    h.representation = Representation::WithNewtonian;
    h.forcing = Some(forcing);
    Ok((h, finish(report, start)))
}

fn solve_homogeneous(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    match spec.kind {
        BvpKind::Dirichlet => solve_dirichlet(spec, opts),
        BvpKind::Neumann => solve_neumann(spec, opts),
        BvpKind::Mixed => solve_mixed(spec, opts),
    }
}

/// Dispatches on the problem kind, routing forced problems through [`solve_poisson`].
pub fn solve(spec: &BvpSpec, opts: &SolverOptions) -> Result<(SolutionHandle, SolveReport)> {
    if spec.forcing.is_some() {
        solve_poisson(spec, opts)
    } else {
        solve_homogeneous(spec, opts)
    }
}

/// The Neumann-to-Dirichlet map `Υ_α = 𝒱_α (½I + K*_α)⁻¹` restricted to
/// tractions supported on the Dirichlet patch, with output on the same patch.
pub struct NeumannToDirichlet {
    /// Dirichlet panels, in mesh order.
    pub panels: Vec<usize>,
    /// `3N_D × 3N_D` matrix acting on panel-major coefficients of the patch.
    pub matrix: Mat<f64>,
    weights: Vec<f64>,
    n_total: usize,
}

impl NeumannToDirichlet {
    /// Applies the map to the Dirichlet-patch values of `g`; the result is zero off the patch.
    pub fn apply(&self, g: &BoundaryField) -> Result<BoundaryField> {
        if g.len() != self.n_total {
            return Err(BbemError::Mismatch(format!("field on {} panels, mesh has {}", g.len(), self.n_total)));
        }
        let x: Vec<f64> = self.panels.iter().flat_map(|&p| [g.values[p].x, g.values[p].y, g.values[p].z]).collect();
        let y = linalg::matvec(&self.matrix, &x);
        let mut out = vec![0.0; 3 * self.n_total];
        for (k, &p) in self.panels.iter().enumerate() {
            out[3 * p..3 * p + 3].copy_from_slice(&y[3 * k..3 * k + 3]);
        }
        BoundaryField::from_flat(&out, g.weights.clone())
    }

    /// Singular values of the map in the area-weighted norm, descending.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let d = sqrt_weights(&self.weights);
        Ok(Svd::new(&weighted(&self.matrix, &d))?.s)
    }

    pub fn sigma_min(&self) -> Result<f64> {
        Ok(self.singular_values()?.last().copied().unwrap_or(0.0))
    }
}

pub fn neumann_to_dirichlet(ops: &BoundaryOperators, labeling: &PatchLabeling) -> Result<NeumannToDirichlet> {
    require_positive_alpha(&ops.params, "Neumann-to-Dirichlet")?;
    if labeling.len() != ops.mesh.len() {
        return Err(BbemError::InvalidLabeling(format!(
            "labeling has {} entries for {} panels",
            labeling.len(),
            ops.mesh.len()
        )));
    }
    let panels = labeling.indices(PatchLabel::Dirichlet);
    if panels.is_empty() {
        return Err(BbemError::InvalidLabeling("Dirichlet patch is empty".into()));
    }
    let n = 3 * ops.mesh.len();
    let nd = 3 * panels.len();
    let a = ops.adjoint_double_layer()?.shifted(0.5, 1.0, OperatorKind::Custom);
    let lu = LuFactor::new(&a.matrix)?;
    let rows: Vec<usize> = panels.iter().flat_map(|&p| [3 * p, 3 * p + 1, 3 * p + 2]).collect();
    let e = Mat::from_fn(n, nd, |i, j| if i == rows[j] { 1.0 } else { 0.0 });
    let x = lu.solve_mat(&e);
    let vx = &ops.single_layer()?.matrix * &x;
    let matrix = Mat::from_fn(nd, nd, |i, j| vx[(rows[i], j)]);
    let areas = ops.mesh.areas();
    Ok(NeumannToDirichlet { weights: panels.iter().map(|&p| areas[p]).collect(), panels, matrix, n_total: ops.mesh.len() })
}

/// Velocity trace of a single-layer solution, `𝒱_α ψ`.
pub fn single_layer_trace(ops: &BoundaryOperators, psi: &BoundaryField) -> Result<BoundaryField> {
    ops.single_layer()?.apply(psi)
}
