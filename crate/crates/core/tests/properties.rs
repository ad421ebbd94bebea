use approx::assert_relative_eq;
use bbem_core::geometry::{build_icosphere, read_off, write_off};
use bbem_core::harness::RunConfig;
use bbem_core::kernels::{brinkman_velocity_tensor, pressure_vector, BrinkmanParams, Vec3};
use bbem_core::potentials::BoundaryField;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec3> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
        .prop_filter("away from the pole", |p| p.norm() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kernel_is_symmetric_and_even(x in point(), alpha in 0.0..10.0f64) {
        let p = BrinkmanParams::brinkman(alpha);
        let g = brinkman_velocity_tensor(&x, &p).unwrap();
        let gm = brinkman_velocity_tensor(&-x, &p).unwrap();
        prop_assert!((g - g.transpose()).norm() <= 1e-14 * g.norm());
        prop_assert!((g - gm).norm() <= 1e-14 * g.norm());
    }

    #[test]
    fn stokes_kernel_is_homogeneous(x in point(), s in 0.1..10.0f64) {
        let p = BrinkmanParams::stokes();
        let g = brinkman_velocity_tensor(&x, &p).unwrap();
        let gs = brinkman_velocity_tensor(&(x * s), &p).unwrap();
        prop_assert!((gs * s - g).norm() <= 1e-13 * g.norm());
        let pi = pressure_vector(&x).unwrap();
        let pis = pressure_vector(&(x * s)).unwrap();
        prop_assert!((pis * (s * s) - pi).norm() <= 1e-13 * pi.norm());
    }

    #[test]
    fn kernel_trace_is_a_yukawa_potential(x in point(), alpha in 0.01..10.0f64) {
        // Tracing the kernel equation gives (Δ−α) tr G = −2δ.
        let g = brinkman_velocity_tensor(&x, &BrinkmanParams::brinkman(alpha)).unwrap();
        let r = x.norm();
        let expect = 2.0 * (-(alpha.sqrt()) * r).exp() / (4.0 * std::f64::consts::PI * r);
        prop_assert!((g.trace() - expect).abs() <= 1e-10 * expect.max(1e-300) + 1e-14);
    }

    #[test]
    fn pairing_is_bilinear(a in -5.0..5.0f64, b in -5.0..5.0f64, k in 0.5..3.0f64) {
        let mesh = build_icosphere(0, 1.0).unwrap();
        let f = BoundaryField::from_fn(&mesh, |c, _| Vec3::new((k * c.x).sin(), c.y, c.z * c.z));
        let g = BoundaryField::from_fn(&mesh, |_, n| n * k);
        let h = BoundaryField::from_fn(&mesh, |c, n| c.cross(n));
        let lhs = f.combine(a, &g, b).unwrap().pairing(&h).unwrap();
        let rhs = a * f.pairing(&h).unwrap() + b * g.pairing(&h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        prop_assert!(f.project_out(&g).unwrap().pairing(&g).unwrap().abs() <= 1e-12 * f.norm() * g.norm());
    }

    #[test]
    fn config_round_trips(alpha in 0.01..10.0f64, level in 0usize..3, seed in any::<u64>()) {
        let text = format!(
            r#"{{"problem": "NEUMANN", "geometry": {{"type": "cube", "level": {level}}},
                "params": {{"alpha": {alpha}}}, "data": {{"type": "catalog", "name": "translation"}}, "seed": {seed}}}"#
        );
        let config = RunConfig::from_json(&text).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&config).unwrap()).unwrap();
        prop_assert_eq!(config, again);
    }
}

#[test]
fn off_round_trip_preserves_geometry() {
    let mesh = build_icosphere(1, 1.5).unwrap();
    let back = read_off(&write_off(&mesh)).unwrap();
    assert_eq!(back.len(), mesh.len());
    assert_relative_eq!(back.total_area(), mesh.total_area(), max_relative = 1e-12);
    assert_relative_eq!(back.enclosed_volume(), mesh.enclosed_volume(), max_relative = 1e-12);
}
