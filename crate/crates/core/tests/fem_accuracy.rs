use std::f64::consts::PI;
use std::fmt::Write as _;

use splitfem::fem::{
    assemble_lumped_mass, assemble_stiffness, l2_norm, solve_dirichlet, smallest_laplacian_eigenvalue, NodalField,
};
use splitfem::hessian::{HessianConfig, HessianRecovery};
use splitfem::mesh::{
    compute_node_geometry, generate_eye_domain, generate_half_unit_disk, generate_regular_square, load_mesh,
    Triangulation,
};
use splitfem::problems::{
    lookup, monge_ampere_rhs, pucci_rhs, semilinear_rhs, ProblemKind, ProblemParams, ProblemSpec,
};

#[test]
fn poisson_error_is_second_order_sized() {
    let mesh = generate_regular_square(40).unwrap();
    let geo = compute_node_geometry(&mesh);
    let k = assemble_stiffness(&mesh);
    let m = assemble_lumped_mass(&mesh, &geo);
    let exact = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
    let f = NodalField::interpolate(&mesh, |p| 2.0 * PI * PI * exact(p));
    let load: NodalField = m.apply(&f).into();
    let u = solve_dirichlet(&k, &load, &NodalField::zeros(mesh.n_total()), &mesh).unwrap();
    let err = l2_norm(&u.difference(&NodalField::interpolate(&mesh, exact)), &geo);
    assert!((1e-4..=1e-2).contains(&err), "L2 error {err:e}");
}

#[test]
fn affine_data_is_reproduced_on_every_generator() {
    for mesh in [
        generate_regular_square(9).unwrap(),
        generate_half_unit_disk(7).unwrap(),
        generate_eye_domain(10).unwrap(),
    ] {
        let g = NodalField::interpolate(&mesh, |p| 1.5 - 0.25 * p[0] + 3.0 * p[1]);
        let u = solve_dirichlet(&assemble_stiffness(&mesh), &NodalField::zeros(mesh.n_total()), &g, &mesh).unwrap();
        assert!(u.difference(&g).iter().all(|e| e.abs() <= 1e-10));
    }
}

#[test]
fn disk_eigenvalue_matches_bessel_root() {
    // First zero of J0, scaled to radius 1/2.
    let j01 = 2.404_825_557_695_773;
    let want = (j01 / 0.5f64).powi(2);
    let got = smallest_laplacian_eigenvalue(&generate_half_unit_disk(20).unwrap()).unwrap();
    assert!((got - want).abs() <= 0.05 * want, "{got} vs {want}");
}

#[test]
fn square_eigenvalue_converges_monotonically() {
    // With lumped mass the operator is the five-point Laplacian, whose first
    // eigenvalue 8 sin²(πh/2)/h² lies below 2π² and increases as h shrinks.
    let limit = 2.0 * PI * PI;
    let mut prev = 0.0;
    for n in [10, 20, 40] {
        let h = 1.0 / n as f64;
        let got = smallest_laplacian_eigenvalue(&generate_regular_square(n).unwrap()).unwrap();
        let five_point = 8.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        assert!((got - five_point).abs() <= 1e-7 * five_point, "{got} vs {five_point}");
        assert!(got > prev && got < limit);
        prev = got;
    }
}

/// Writes `mesh` with nodes listed in reverse-interleaved order and loads it back.
fn reload_shuffled(mesh: &Triangulation, dir: &tempfile::TempDir) -> Triangulation {
    let n = mesh.n_total();
    let order: Vec<usize> = (0..n).map(|i| if i % 2 == 0 { n - 1 - i / 2 } else { i / 2 }).collect();
    let mut new_id = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new;
    }
    let mut text = format!("# shuffled\n{} {}\n", n, mesh.triangles().len());
    for &old in &order {
        let p = mesh.node(old);
        let _ = writeln!(text, "{:.17e} {:.17e} {}", p[0], p[1], u8::from(mesh.is_boundary(old)));
    }
    for t in mesh.triangles() {
        let _ = writeln!(text, "{} {} {}", new_id[t[1]], new_id[t[2]], new_id[t[0]]);
    }
    let path = dir.path().join("shuffled.mesh");
    std::fs::write(&path, text).unwrap();
    load_mesh(&path).unwrap()
}

#[test]
fn eigenvalue_ignores_node_order() {
    let dir = tempfile::tempdir().unwrap();
    for mesh in [generate_regular_square(12).unwrap(), generate_half_unit_disk(8).unwrap()] {
        let shuffled = reload_shuffled(&mesh, &dir);
        assert_eq!(shuffled.n_interior(), mesh.n_interior());
        let a = smallest_laplacian_eigenvalue(&mesh).unwrap();
        let b = smallest_laplacian_eigenvalue(&shuffled).unwrap();
        assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
        // External ids resolve back to the written positions.
        for j in 0..shuffled.n_total() {
            let p = shuffled.node(j);
            assert!(mesh.nodes().iter().any(|q| (q[0] - p[0]).abs() + (q[1] - p[1]).abs() < 1e-14));
        }
    }
}

/// Trapezoidal L2 norm of `K u / m - rhs(u)` over interior nodes for the
/// exact nodal solution.
fn exact_residual(spec: &ProblemSpec, mesh: &Triangulation) -> f64 {
    let geo = compute_node_geometry(mesh);
    let u = spec.exact_field(mesh).unwrap();
    let ku = assemble_stiffness(mesh).apply(&u);
    let rhs = match &spec.kind {
        ProblemKind::Semilinear { .. } => semilinear_rhs(&u, spec, mesh).unwrap(),
        kind => {
            let recovery = HessianRecovery::new(HessianConfig::regular(), mesh, &geo).unwrap();
            let hess = recovery.recover(&u, mesh, &geo).unwrap();
            if matches!(kind, ProblemKind::Pucci { .. }) {
                pucci_rhs(&hess, spec, mesh).unwrap()
            } else {
                monge_ampere_rhs(&hess, spec, mesh).unwrap().rhs
            }
        }
    };
    let r: Vec<f64> = (0..mesh.n_total())
        .map(|j| {
            if mesh.is_boundary(j) {
                0.0
            } else {
                3.0 * ku[j] / geo.support_area[j] - rhs[j]
            }
        })
        .collect();
    l2_norm(&r, &geo)
}

#[test]
fn exact_solutions_are_consistent_under_refinement() {
    let params = ProblemParams::default();
    for name in ["semilinear-cos", "ma-quadratic", "ma-exp", "ma-obstacle", "pucci-smooth"] {
        let spec = lookup(name, &params).unwrap();
        let r: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&n| exact_residual(&spec, &generate_regular_square(n).unwrap()))
            .collect();
        let roundoff = r.iter().all(|&x| x <= 1e-9);
        assert!(roundoff || r.windows(2).all(|w| w[1] < w[0]), "{name}: {r:?}");
    }
}
