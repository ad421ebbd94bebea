//! End-to-end acceptance checks. Each criterion computes its reference values
//! here, independently of the library's verification suites, and prints one
//! pass/fail line. The process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use bbem_core::exec::with_threads;
use bbem_core::geometry::{
    build_cube, build_icosphere, build_volume_grid, label_patches, panel_quadrature, PatchLabel, PatchRule, SurfaceMesh,
    VolumeDomain, VolumeGrid,
};
use bbem_core::harness::{interior_points, run, verify_suite, RunConfig, DEFAULT_SEED};
use bbem_core::kernels::{
    brinkman_velocity_gradient, brinkman_velocity_tensor, pressure_vector, stress_tensor_at, BrinkmanParams, Mat3, Vec3,
};
use bbem_core::linalg::Svd;
use bbem_core::potentials::{
    eval_double_layer, eval_single_layer, eval_single_layer_traction, BoundaryField, NewtonianOptions, NewtonianPlan,
    VolumeField,
};
use bbem_core::semilinear::{estimate_constants, picard_solve, semilinear_residual, PicardConfig, SemilinearConstants, SolutionMap};
use bbem_core::solvers::{
    greens_identity_residual, neumann_to_dirichlet, solve, BoundaryOperators, BvpSpec, DirichletSolver, NeumannSolver,
    Representation, SolutionHandle, SolverOptions,
};
use bbem_core::Result;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const KERNEL_ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 4.0];
const KERNEL_POINTS: usize = 100;
const FD_STEP: f64 = 1e-3;
const PDE_RESIDUAL_TOL: f64 = 1e-5;
const DIVERGENCE_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-6;
const KERNEL_RUNTIME_S: f64 = 5.0;
// Criterion 2
const LIMIT_ALPHAS: [f64; 3] = [1e-2, 1e-4, 1e-6];
const LIMIT_SLOPE_TOL: f64 = 2e-2;
const ENVELOPE_RANGE: (f64, f64) = (0.5, 20.0);
const ENVELOPE_SAMPLES: usize = 200;
const ENVELOPE_SPREAD_MAX: f64 = 10.0;
// Criterion 3
const JUMP_TOL: f64 = 5e-2;
const JUMP_OFFSET: f64 = 0.2;
// Criterion 4
const INTERIOR_SIGMA_MAX: f64 = 1e-2;
const DEFECT_COSINE_MIN: f64 = 0.99;
const SIGMA_GAP_MIN: f64 = 10.0;
const EXTERIOR_FLOOR_DROP_MAX: f64 = 0.2;
const POWER_ITERATION_AGREEMENT: f64 = 1e-6;
// Criterion 5
const NORMAL_DEFECT_TOL: f64 = 5e-2;
// Criterion 6
const SOLVE_ERROR_TOL: f64 = 1e-2;
const SOLVE_RATIO_MIN: f64 = 2.0;
const SOLVE_SECONDS_MAX: f64 = 120.0;
// Criterion 7
const MIXED_ERROR_TOL: f64 = 5e-2;
// Criterion 8
const ROUTE_AGREEMENT_TOL: f64 = 1e-10;
// Criterion 9
const GREEN_TOL: f64 = 1e-2;
// Criterion 10
const NEWTONIAN_RESOLUTION: usize = 32;
const NEWTONIAN_RESIDUAL_TOL: f64 = 5e-2;
const BALL_VALUE_TOL: f64 = 1e-12;
// Criterion 11
const PICARD_LEVEL: usize = 2;
const PICARD_RESOLUTION: usize = 16;
const PICARD_DATA_FRACTION: f64 = 0.5;
const PICARD_RATIO_MAX: f64 = 0.6;
const SEMILINEAR_RESIDUAL_TOL: f64 = 1e-1;
const FIXED_POINT_TOL: f64 = 1e-6;
// Criterion 12
const THREAD_COUNTS: [usize; 2] = [1, 4];

const ALPHA: f64 = 1.0;
const SPHERE_SOURCE: [f64; 3] = [0.96, 1.2, 1.28];
const CUBE_SOURCE: [f64; 3] = [1.2, 0.9, 1.1];
const ERROR_POINTS: usize = 40;
const ERROR_MARGIN: f64 = 0.15;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn params() -> BrinkmanParams {
    BrinkmanParams::brinkman(ALPHA)
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

fn area_norm(values: impl Iterator<Item = Vec3>, areas: &[f64]) -> f64 {
    values.zip(areas).map(|(v, a)| a * v.norm_squared()).sum::<f64>().sqrt()
}

fn l2(values: &[Vec3]) -> f64 {
    values.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn relative_error(got: &[Vec3], exact: &[Vec3]) -> f64 {
    let d: Vec<Vec3> = got.iter().zip(exact).map(|(a, b)| a - b).collect();
    l2(&d) / l2(exact)
}

/// Velocity of the `column`-th fundamental flow centred at `source`.
fn point_force_velocity(x: &Vec3, source: &Vec3, column: usize) -> Vec3 {
    brinkman_velocity_tensor(&(x - source), &params()).unwrap().column(column).into()
}

fn point_force_traction(x: &Vec3, n: &Vec3, source: &Vec3, column: usize) -> Vec3 {
    let s = stress_tensor_at(&(x - source), &params()).unwrap();
    Vec3::from_fn(|i, _| (0..3).map(|l| s.get(i, column, l) * n[l]).sum())
}

fn exact_data(mesh: &SurfaceMesh, source: &Vec3) -> (BoundaryField, BoundaryField) {
    (
        BoundaryField::from_fn(mesh, |c, _| point_force_velocity(c, source, 0)),
        BoundaryField::from_fn(mesh, |c, n| point_force_traction(c, n, source, 0)),
    )
}

fn sphere(level: usize) -> SurfaceMesh {
    build_icosphere(level, 1.0).unwrap()
}

fn cube(level: usize) -> SurfaceMesh {
    build_cube(level, 1.0).unwrap()
}

fn top_face() -> PatchRule {
    PatchRule::CubeFaces { neumann_faces: vec!["+z".into()] }
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ")
}

/// Three seeded plane waves, smooth on every mesh.
fn smooth_density(seed: u64) -> impl Fn(&Vec3) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vec3, Vec3, f64)> = (0..3)
        .map(|_| {
            let a = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let k = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            (a, k, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    move |x| waves.iter().map(|(a, k, p)| a * (k.dot(x) + p).sin()).sum()
}

fn finite_difference_point(x: &Vec3, axis: usize, k: i32) -> Vec3 {
    x + Vec3::ith(axis, k as f64 * FD_STEP)
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut points = Vec::new();
    while points.len() < KERNEL_POINTS {
        let d = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        if d.norm() > 0.1 && d.norm() <= 1.0 {
            points.push(d.normalize() * rng.gen_range(0.5..2.0));
        }
    }
    let (mut residual, mut divergence, mut gradient) = (0.0f64, 0.0f64, 0.0f64);
    for &alpha in &KERNEL_ALPHAS {
        let p = BrinkmanParams::brinkman(alpha);
        for x in &points {
            let g = |y: &Vec3| brinkman_velocity_tensor(y, &p).unwrap();
            let g0 = g(x);
            let mut lap = Mat3::zeros();
            let mut grad_pi = Mat3::zeros(); // [a][k] = ∂_a Π_k
            let mut fd_grad = [Mat3::zeros(); 3];
            for a in 0..3 {
                let gs: Vec<Mat3> = [-2, -1, 1, 2].iter().map(|&k| g(&finite_difference_point(x, a, k))).collect();
                let ps: Vec<Vec3> = [-2, -1, 1, 2].iter().map(|&k| pressure_vector(&finite_difference_point(x, a, k)).unwrap()).collect();
                let h = FD_STEP;
                lap += (-gs[0] + gs[1] * 16.0 - g0 * 30.0 + gs[2] * 16.0 - gs[3]) / (12.0 * h * h);
                fd_grad[a] = (gs[0] - gs[1] * 8.0 + gs[2] * 8.0 - gs[3]) / (12.0 * h);
                let dp = (ps[0] - ps[1] * 8.0 + ps[2] * 8.0 - ps[3]) / (12.0 * h);
                for k in 0..3 {
                    grad_pi[(a, k)] = dp[k];
                }
            }
            let res = lap - g0 * alpha - grad_pi;
            residual = residual.max(max_abs(&res) / max_abs(&g0).max(1.0));
            let t = brinkman_velocity_gradient(x, &p)?;
            let scale = t.max_abs().max(1.0);
            for k in 0..3 {
                divergence = divergence.max((0..3).map(|i| t.get(i, i, k)).sum::<f64>().abs() / scale);
            }
            for (l, fd) in fd_grad.iter().enumerate() {
                for j in 0..3 {
                    for k in 0..3 {
                        gradient = gradient.max((t.get(l, j, k) - fd[(j, k)]).abs() / scale);
                    }
                }
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        residual <= PDE_RESIDUAL_TOL && divergence <= DIVERGENCE_TOL && gradient <= GRADIENT_TOL && seconds < KERNEL_RUNTIME_S,
        format!("pde residual {residual:.2e}, divergence {divergence:.2e}, gradient vs fd {gradient:.2e}, {seconds:.2} s"),
    )
}

fn criterion_2() -> Result<Outcome> {
    let e = Vec3::new(0.48, 0.6, 0.64);
    let stokes = brinkman_velocity_tensor(&e, &BrinkmanParams::stokes())?;
    let gaps: Vec<f64> = LIMIT_ALPHAS
        .iter()
        .map(|&a| Ok(max_abs(&(brinkman_velocity_tensor(&e, &BrinkmanParams::brinkman(a))? - stokes))))
        .collect::<Result<_>>()?;
    // G^α - G⁰ = -(√α / 6π) I + O(α) at unit distance.
    let slope = LIMIT_ALPHAS[1..]
        .iter()
        .zip(&gaps[1..])
        .map(|(a, g)| (g * 6.0 * PI / a.sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    let directions = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.6, 0.8), Vec3::new(1.0, -1.0, 1.0).normalize()];
    let mut spread: f64 = 0.0;
    for &alpha in &KERNEL_ALPHAS {
        let p = BrinkmanParams::brinkman(alpha);
        let mut ratios = Vec::new();
        for k in 0..ENVELOPE_SAMPLES {
            let t = k as f64 / (ENVELOPE_SAMPLES - 1) as f64;
            let r = ENVELOPE_RANGE.0 * (ENVELOPE_RANGE.1 / ENVELOPE_RANGE.0).powf(t);
            for d in &directions {
                let g = brinkman_velocity_tensor(&(d * r), &p)?;
                ratios.push(g.norm() * (1.0 + alpha * r * r) * r);
            }
        }
        let c = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(c / lo);
    }
    outcome(
        decreasing(&gaps) && slope <= LIMIT_SLOPE_TOL && spread <= ENVELOPE_SPREAD_MAX,
        format!("gaps {}, √α slope deviation {slope:.2e}, envelope spread {spread:.2}", fmt(&gaps)),
    )
}

/// `[c - δν, c - 2δν, c + δν, c + 2δν]` blocks and the extrapolated one-sided limits.
fn offset_points(mesh: &SurfaceMesh) -> Vec<Vec3> {
    let delta = JUMP_OFFSET * mesh.mean_panel_diameter();
    let (c, n) = (mesh.centroids(), mesh.normals());
    [-1.0, -2.0, 1.0, 2.0].iter().flat_map(|s| c.iter().zip(&n).map(move |(c, n)| c + n * (s * delta))).collect()
}

fn limits(samples: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = samples.len() / 4;
    let b = |k: usize| &samples[k * n..(k + 1) * n];
    let ext = |near: &[Vec3], far: &[Vec3]| near.iter().zip(far).map(|(a, b)| a * 2.0 - b).collect();
    (ext(b(0), b(1)), ext(b(2), b(3)))
}

fn criterion_3() -> Result<Outcome> {
    let field = smooth_density(DEFAULT_SEED);
    let opts = SolverOptions::default();
    let (mut sl, mut dl, mut tr) = (Vec::new(), Vec::new(), Vec::new());
    for level in [2, 3] {
        let mesh = sphere(level);
        let quad = panel_quadrature(&mesh, opts.quad_order)?;
        let g = BoundaryField::from_fn(&mesh, |c, _| field(c));
        let a = mesh.areas();
        let gn = area_norm(g.values.iter().copied(), &a);
        let pts = offset_points(&mesh);
        let normals: Vec<Vec3> = (0..4).flat_map(|_| mesh.normals()).collect();
        let (v_in, v_out) = limits(&eval_single_layer(&mesh, &quad, &g, &pts, &params(), &opts.layer)?);
        sl.push(area_norm(v_out.iter().zip(&v_in).map(|(o, i)| o - i), &a) / area_norm(v_in.iter().copied(), &a));
        let (w_in, w_out) = limits(&eval_double_layer(&mesh, &quad, &g, &pts, &params(), &opts.layer)?);
        dl.push(area_norm(w_out.iter().zip(&w_in).zip(&g.values).map(|((o, i), h)| o - i - h), &a) / gn);
        let (t_in, t_out) =
            limits(&eval_single_layer_traction(&mesh, &quad, &g, &pts, &normals, &params(), &opts.layer)?);
        tr.push(area_norm(t_in.iter().zip(&t_out).zip(&g.values).map(|((i, o), h)| i - o - h), &a) / gn);
    }
    let ok = |v: &[f64]| v[1] <= JUMP_TOL && decreasing(v);
    outcome(
        ok(&sl) && ok(&dl) && ok(&tr),
        format!("single-layer gap {}, double-layer jump {}, traction jump {} (levels 2, 3)", fmt(&sl), fmt(&dl), fmt(&tr)),
    )
}

struct SolveTiming {
    errors: Vec<f64>,
    seconds: Vec<f64>,
    residual: f64,
}

fn weighted_normals(mesh: &SurfaceMesh) -> Vec<f64> {
    mesh.normals().iter().zip(mesh.areas()).flat_map(|(n, a)| (n * a.sqrt()).iter().copied().collect::<Vec<_>>()).collect()
}

fn handle(ops: &BoundaryOperators, layer: Representation, density: Vec<f64>) -> Result<SolutionHandle> {
    Ok(SolutionHandle {
        representation: layer,
        layer,
        density: BoundaryField::from_flat(&density, ops.mesh.areas())?,
        mesh: ops.mesh.clone(),
        quad: ops.quad.clone(),
        params: ops.params,
        forcing: None,
        layer_opts: ops.opts.layer,
        newtonian_opts: ops.opts.newtonian,
    })
}

/// Criteria 4 and 6 share the level-3 factorizations, so they run together.
fn criteria_4_and_6() -> Result<(Outcome, Outcome)> {
    let source = Vec3::from(SPHERE_SOURCE);
    let opts = SolverOptions::default();
    let points = interior_points(&sphere(1), ERROR_POINTS, ERROR_MARGIN, DEFAULT_SEED)?;
    let exact: Vec<Vec3> = points.iter().map(|x| point_force_velocity(x, &source, 0)).collect();
    let mut dirichlet = SolveTiming { errors: vec![], seconds: vec![], residual: 0.0 };
    let mut neumann = SolveTiming { errors: vec![], seconds: vec![], residual: 0.0 };
    let mut floors = Vec::new();
    let mut floor_check = 0.0;
    let mut interior = (0.0, 0.0, 0.0);
    for level in [1, 2, 3] {
        let mesh = sphere(level);
        let (h0, g0) = exact_data(&mesh, &source);
        with_threads(1, || -> Result<()> {
            let start = Instant::now();
            let ops = BoundaryOperators::new(&mesh, &params(), &opts)?;
            let solver = DirichletSolver::new(&ops)?;
            let (phi, residual, _) = solver.solve_data(&h0)?;
            let u = handle(&ops, Representation::DoubleLayer, phi)?.velocity(&points)?;
            dirichlet.seconds.push(start.elapsed().as_secs_f64());
            dirichlet.errors.push(relative_error(&u, &exact));
            dirichlet.residual = residual;
            if level == 3 {
                let n = solver.svd.s.len();
                let nu = weighted_normals(&mesh);
                let left = solver.svd.left_vector(n - 1);
                let cosine = left.iter().zip(&nu).map(|(a, b)| a * b).sum::<f64>().abs()
                    / nu.iter().map(|v| v * v).sum::<f64>().sqrt();
                interior = (solver.svd.s[n - 1], solver.svd.s[n - 2], cosine);
            }
            Ok(())
        })?;
        with_threads(1, || -> Result<()> {
            let start = Instant::now();
            let ops = BoundaryOperators::new(&mesh, &params(), &opts)?;
            let solver = NeumannSolver::new(&ops)?;
            let (psi, residual) = solver.solve_data(&g0)?;
            let u = handle(&ops, Representation::SingleLayer, psi)?.velocity(&points)?;
            neumann.seconds.push(start.elapsed().as_secs_f64());
            neumann.errors.push(relative_error(&u, &exact));
            neumann.residual = residual;
            floors.push(solver.sigma_min());
            if level == 1 {
                // Full SVD of the area-weighted ½I + K* as a reference for the inverse power iteration.
                let k = &ops.adjoint_double_layer()?.matrix;
                let d: Vec<f64> = mesh.areas().iter().flat_map(|a| [a.sqrt(); 3]).collect();
                let m = Mat::from_fn(k.nrows(), k.ncols(), |i, j| d[i] * (k[(i, j)] + if i == j { 0.5 } else { 0.0 }) / d[j]);
                floor_check = (Svd::new(&m)?.sigma_min() / floors[0] - 1.0).abs();
            }
            Ok(())
        })?;
    }
    let (smin, s2, cosine) = interior;
    let drop = 1.0 - floors[2] / floors[0];
    let c4 = Outcome {
        passed: smin <= INTERIOR_SIGMA_MAX
            && cosine >= DEFECT_COSINE_MIN
            && s2 >= SIGMA_GAP_MIN * smin
            && floors.iter().all(|&f| f > 0.0)
            && drop <= EXTERIOR_FLOOR_DROP_MAX
            && floor_check <= POWER_ITERATION_AGREEMENT,
        detail: format!(
            "interior σ_min {smin:.2e}, σ₂/σ_min {:.1}, cosine {cosine:.5}; exterior σ_min {:.3e}/{:.3e}/{:.3e} (drop {:.1}%, svd check {floor_check:.1e})",
            s2 / smin,
            floors[0],
            floors[1],
            floors[2],
            100.0 * drop
        ),
    };
    let solve_ok = |t: &SolveTiming| {
        t.errors[2] <= SOLVE_ERROR_TOL
            && t.errors.windows(2).all(|w| w[0] / w[1] >= SOLVE_RATIO_MIN)
            && t.seconds[2] <= SOLVE_SECONDS_MAX
    };
    let c6 = Outcome {
        passed: solve_ok(&dirichlet) && solve_ok(&neumann),
        detail: format!(
            "dirichlet errors {} ({:.1} s at level 3, residual {:.1e}); neumann errors {} ({:.1} s, residual {:.1e})",
            fmt(&dirichlet.errors),
            dirichlet.seconds[2],
            dirichlet.residual,
            fmt(&neumann.errors),
            neumann.seconds[2],
            neumann.residual
        ),
    };
    Ok((c4, c6))
}

fn criterion_5() -> Result<Outcome> {
    let mut defects = Vec::new();
    for level in [2, 3] {
        let mesh = sphere(level);
        let ops = BoundaryOperators::new(&mesh, &params(), &SolverOptions::default())?;
        let v = &ops.single_layer()?.matrix;
        let nu: Vec<f64> = mesh.normals().iter().flat_map(|n| [n.x, n.y, n.z]).collect();
        let (mut signed, mut magnitude) = (vec![0.0; nu.len()], vec![0.0; nu.len()]);
        for j in 0..nu.len() {
            for i in 0..nu.len() {
                signed[i] += v[(i, j)] * nu[j];
                magnitude[i] += (v[(i, j)] * nu[j]).abs();
            }
        }
        let a = mesh.areas();
        let as_vec = |x: &[f64]| x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect::<Vec<_>>();
        defects.push(area_norm(as_vec(&signed).into_iter(), &a) / area_norm(as_vec(&magnitude).into_iter(), &a));
    }
    outcome(defects[0] <= NORMAL_DEFECT_TOL && decreasing(&defects), format!("relative ‖V ν‖ {} (levels 2, 3)", fmt(&defects)))
}

fn criterion_7() -> Result<Outcome> {
    let source = Vec3::from(CUBE_SOURCE);
    let points = interior_points(&cube(1), ERROR_POINTS, ERROR_MARGIN, DEFAULT_SEED)?;
    let exact: Vec<Vec3> = points.iter().map(|x| point_force_velocity(x, &source, 0)).collect();
    let mut errors = Vec::new();
    for level in [1, 2, 3] {
        let mesh = cube(level);
        let labeling = label_patches(&mesh, &top_face())?;
        let (h0, g0) = exact_data(&mesh, &source);
        let (h, _) = solve(&BvpSpec::mixed(mesh, labeling, params(), h0, g0), &SolverOptions::default())?;
        errors.push(relative_error(&h.velocity(&points)?, &exact));
    }
    outcome(errors[2] <= MIXED_ERROR_TOL && decreasing(&errors), format!("errors {}", fmt(&errors)))
}

fn criterion_8() -> Result<Outcome> {
    let field = smooth_density(DEFAULT_SEED ^ 0x8);
    let mut sigmas = Vec::new();
    let mut agreement: f64 = 0.0;
    for level in [1, 2, 3] {
        let mesh = cube(level);
        let labeling = label_patches(&mesh, &top_face())?;
        let ops = BoundaryOperators::new(&mesh, &params(), &SolverOptions::default())?;
        let ntd = neumann_to_dirichlet(&ops, &labeling)?;
        sigmas.push(ntd.sigma_min()?);
        if level <= 2 {
            let on_patch = |i: usize| labeling.is(i, PatchLabel::Dirichlet);
            let g = BoundaryField::from_fn(&mesh, |c, _| field(c)).masked(on_patch);
            let composed = ntd.apply(&g)?;
            let (psi, _) = NeumannSolver::new(&ops)?.solve_data(&g)?;
            let restricted = ops.single_layer()?.apply(&BoundaryField::from_flat(&psi, mesh.areas())?)?.masked(on_patch);
            agreement = agreement.max(composed.combine(1.0, &restricted, -1.0)?.norm() / restricted.norm());
        }
    }
    outcome(
        agreement <= ROUTE_AGREEMENT_TOL && sigmas.iter().all(|&s| s > 0.0),
        format!(
            "route agreement {agreement:.2e} (levels 1, 2); σ_min {:.3e}/{:.3e}/{:.3e}",
            sigmas[0], sigmas[1], sigmas[2]
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let source = Vec3::from(SPHERE_SOURCE);
    let points = interior_points(&sphere(1), 20, ERROR_MARGIN, DEFAULT_SEED)?;
    let exact: Vec<Vec3> = points.iter().map(|x| point_force_velocity(x, &source, 0)).collect();
    let opts = SolverOptions::default();
    let mut residuals = Vec::new();
    for level in [1, 2, 3] {
        let mesh = sphere(level);
        let quad = panel_quadrature(&mesh, opts.quad_order)?;
        let (h, t) = exact_data(&mesh, &source);
        let r = greens_identity_residual(&mesh, &quad, &h, &t, &params(), &points, &exact, &opts.layer)?;
        residuals.push(l2(&r) / l2(&exact));
    }
    outcome(residuals[2] <= GREEN_TOL && decreasing(&residuals), format!("residuals {}", fmt(&residuals)))
}

/// `∫_{|y|<R} G^α(y) dy · e = (1/3) ∫_0^R 4π r² tr G^α(r e₁) dr · e`, by Gauss–Legendre in r on `[0, R]`.
fn ball_reference(radius: f64, p: &BrinkmanParams) -> f64 {
    let (x, w) = bbem_core::geometry::gauss_legendre(40);
    let integral: f64 = x
        .iter()
        .zip(&w)
        .map(|(t, w)| {
            let r = radius * t;
            radius * w * r * r * brinkman_velocity_tensor(&Vec3::new(r, 0.0, 0.0), p).unwrap().trace()
        })
        .sum();
    4.0 * PI * integral / 3.0
}

fn newtonian_residual(grid: &VolumeGrid, f: &VolumeField, p: &BrinkmanParams) -> Result<f64> {
    let cells = grid.interior_cells(3);
    let sample: Vec<usize> = cells.iter().copied().step_by((cells.len() / 64).max(1)).collect();
    let h = grid.spacing;
    let mut points = Vec::new();
    for &c in &sample {
        points.push(grid.centers[c]);
        for a in 0..3 {
            for k in [-2.0, -1.0, 1.0, 2.0] {
                points.push(grid.centers[c] + Vec3::ith(a, k * h));
            }
        }
    }
    let plan = NewtonianPlan::new(grid, &points, p, &NewtonianOptions::default(), false)?;
    let (u, q) = (plan.velocity(grid, f)?, plan.pressure(grid, f)?);
    let (mut num, mut den) = (0.0, 0.0);
    for (s, &c) in sample.iter().enumerate() {
        let b = 13 * s;
        let at = |a: usize, k: usize| b + 1 + 4 * a + k;
        let mut r = -u[b] * p.alpha - f.values[c];
        for a in 0..3 {
            r += (-u[at(a, 0)] + u[at(a, 1)] * 16.0 - u[b] * 30.0 + u[at(a, 2)] * 16.0 - u[at(a, 3)]) / (12.0 * h * h);
            r[a] -= (q[at(a, 0)] - 8.0 * q[at(a, 1)] + 8.0 * q[at(a, 2)] - q[at(a, 3)]) / (12.0 * h);
        }
        num += r.norm_squared();
        den += f.values[c].norm_squared();
    }
    Ok((num / den).sqrt())
}

fn criterion_10() -> Result<Outcome> {
    let grid = build_volume_grid(&VolumeDomain::Cube { side: 1.0 }, NEWTONIAN_RESOLUTION)?;
    let f = VolumeField::from_fn(&grid, |x| Vec3::new((PI * x.x).cos() * x.y, (2.0 * x.z).sin(), x.x * x.y + 1.0));
    let residual = newtonian_residual(&grid, &f, &params())?;
    let side = 0.3;
    let cell = VolumeGrid::single_cell(Vec3::new(0.1, -0.2, 0.05), side);
    let fc = Vec3::new(0.3, -1.1, 0.7);
    let unforced = NewtonianOptions { refine_depth: 0, ..NewtonianOptions::default() };
    let radius = (3.0 * side * side * side / (4.0 * PI)).cbrt();
    let mut ball: f64 = 0.0;
    for p in [BrinkmanParams::stokes(), params(), BrinkmanParams::brinkman(25.0)] {
        let got = NewtonianPlan::new(&cell, &cell.centers, &p, &unforced, false)?.velocity(&cell, &VolumeField::from_fn(&cell, |_| fc))?[0];
        let expect = -fc * ball_reference(radius, &p);
        ball = ball.max((got - expect).norm() / expect.norm());
    }
    outcome(
        residual <= NEWTONIAN_RESIDUAL_TOL && ball <= BALL_VALUE_TOL,
        format!("fd residual {residual:.2e} at resolution {NEWTONIAN_RESOLUTION}, self-cell vs ball {ball:.1e}"),
    )
}

fn criterion_11() -> Result<Outcome> {
    let mesh = cube(PICARD_LEVEL);
    let labeling = label_patches(&mesh, &top_face())?;
    let grid = build_volume_grid(&VolumeDomain::Cube { side: 1.0 }, PICARD_RESOLUTION)?;
    let opts = SolverOptions::default();
    let nonlinear = BrinkmanParams::new(ALPHA, 1.0)?;
    let map = SolutionMap::new(&mesh, &labeling, &grid, &nonlinear, &opts)?;
    let constants = estimate_constants(&map, 8, DEFAULT_SEED)?;
    let (h0, g0) = exact_data(&mesh, &Vec3::from(CUBE_SOURCE));
    let f = VolumeField::from_fn(&grid, |x| Vec3::new(x.y.sin(), x.x * x.z, 1.0 - x.x * x.x));
    let zeta = constants.zeta_est.expect("β > 0");
    let s = PICARD_DATA_FRACTION * zeta / map.data_norm(&f, &h0, &g0);
    let (f, h0, g0) = (f.scaled(s), h0.scaled(s), g0.scaled(s));
    let config = PicardConfig::default();
    let (handle, report) = picard_solve(&map, &f, &h0, &g0, &config, &constants)?;
    let residual = semilinear_residual(&handle, &grid, &nonlinear, &f)?;
    // Independent fixed-point check: one more application of the map from the returned field.
    let v = VolumeField::new(&grid, handle.velocity(&grid.centers)?)?;
    let forcing = VolumeField {
        values: f.values.iter().zip(&v.values).map(|(a, u)| a + u * (nonlinear.beta * u.norm())).collect(),
    };
    let next = map.apply(&forcing, &h0, &g0)?.velocity;
    let d: Vec<Vec3> = next.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
    let fixed_point = grid.l2_norm(&d) / grid.l2_norm(&v.values);
    let linear_map = SolutionMap::new(&mesh, &labeling, &grid, &params(), &opts)?;
    let linear_constants = SemilinearConstants::from_estimates(constants.c_est, constants.c1prime_est, 0.0);
    let (_, linear) = picard_solve(&linear_map, &f, &h0, &g0, &config, &linear_constants)?;
    let iterations = report.iterates.len();
    outcome(
        report.converged
            && iterations <= config.max_iter
            && report.measured_ratio <= PICARD_RATIO_MAX
            && residual <= SEMILINEAR_RESIDUAL_TOL
            && fixed_point <= FIXED_POINT_TOL
            && linear.iterates.len() == 1,
        format!(
            "{iterations} iterations, ratio {:.2e}, residual {residual:.2e}, fixed-point defect {fixed_point:.1e}, β = 0 iterations {}",
            report.measured_ratio,
            linear.iterates.len()
        ),
    )
}

fn run_bytes(config: &RunConfig) -> Result<(String, Vec<u8>)> {
    let dir = tempfile::tempdir()?;
    let report = run(config, dir.path())?;
    Ok((serde_json::to_string(&report)?, std::fs::read(dir.path().join("fields.csv"))?))
}

fn criterion_12() -> Result<Outcome> {
    let neumann = RunConfig::from_json(
        r#"{"problem": "NEUMANN", "geometry": {"type": "icosphere", "level": 2}, "params": {"alpha": 1.0},
            "data": {"type": "manufactured", "source_point": [0.96, 1.2, 1.28], "column": 1}, "volume_resolution": 8}"#,
    )?;
    let mixed = RunConfig::from_json(
        r#"{"problem": "MIXED", "geometry": {"type": "cube", "level": 1}, "params": {"alpha": 1.0},
            "patches": {"type": "cube_faces", "neumann_faces": ["+z"]},
            "data": {"type": "catalog", "name": "shear"},
            "forcing": {"name": "smooth", "scale": 1.0}, "volume_resolution": 8}"#,
    )?;
    let mut runs = Vec::new();
    for threads in THREAD_COUNTS.iter().chain(&THREAD_COUNTS) {
        runs.push(with_threads(*threads, || -> Result<_> {
            let suites = ["kernels", "green"].iter().map(|s| Ok(verify_suite(s, DEFAULT_SEED)?.numeric_json())).collect::<Result<Vec<_>>>()?;
            Ok((suites, run_bytes(&neumann)?, run_bytes(&mixed)?))
        })?);
    }
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    outcome(identical, format!("{} runs over threads {:?} (kernels, green, solve NEUMANN, solve MIXED+forcing)", runs.len(), THREAD_COUNTS))
}

fn report(id: usize, name: &str, result: Result<Outcome>, failures: &mut Vec<usize>) {
    let (passed, detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if !passed {
        failures.push(id);
    }
    println!("criterion {id:>2} {:<4} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
}

fn main() {
    let start = Instant::now();
    let mut failures = Vec::new();
    report(1, "kernel identities", criterion_1(), &mut failures);
    report(2, "Stokes limit and decay", criterion_2(), &mut failures);
    report(3, "jump relations", criterion_3(), &mut failures);
    let (c4, c6) = match criteria_4_and_6() {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(bbem_core::BbemError::Mismatch(e.to_string())), Err(e)),
    };
    report(4, "null space and invertibility", c4, &mut failures);
    report(5, "single layer of the normal", criterion_5(), &mut failures);
    report(6, "manufactured Dirichlet/Neumann", c6, &mut failures);
    report(7, "mixed problem on the cube", criterion_7(), &mut failures);
    report(8, "Neumann-to-Dirichlet consistency", criterion_8(), &mut failures);
    report(9, "Green identity", criterion_9(), &mut failures);
    report(10, "Newtonian potential", criterion_10(), &mut failures);
    report(11, "semilinear Picard", criterion_11(), &mut failures);
    report(12, "determinism", criterion_12(), &mut failures);
    println!("acceptance: {} of 12 passed in {:.0} s", 12 - failures.len(), start.elapsed().as_secs_f64());
    if !failures.is_empty() {
        eprintln!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
