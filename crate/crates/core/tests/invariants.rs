use proptest::prelude::*;

use splitfem::fem::{assemble_lumped_mass, assemble_stiffness, NodalField};
use splitfem::hessian::{hessian_pointwise, repair_boundary, tikhonov_regularize, HessianConfig, HessianField};
use splitfem::mesh::{
    compute_node_geometry, generate_eye_domain, generate_half_unit_disk, generate_regular_square, DomainTag,
    Triangulation,
};
use splitfem::problems::{lookup, pucci_rhs, ProblemKind, ProblemParams};
use splitfem::splitting::{run, substep_w, SplittingConfig};

/// Regular square with interior nodes moved by up to `shake` grid cells and
/// node ids shuffled by `perm_seed`.
fn shaken_square(n: usize, shake: f64, offsets: &[(f64, f64)], perm_seed: u64) -> Triangulation {
    let base = generate_regular_square(n).unwrap();
    let h = 1.0 / n as f64;
    let nodes: Vec<[f64; 2]> = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if base.is_boundary(j) {
                *p
            } else {
                let (dx, dy) = offsets[j % offsets.len()];
                [p[0] + shake * h * dx, p[1] + shake * h * dy]
            }
        })
        .collect();
    let order = permutation(nodes.len(), perm_seed);
    let mut new_id = vec![0; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new;
    }
    let shuffled: Vec<[f64; 2]> = order.iter().map(|&old| nodes[old]).collect();
    let tris = base.triangles().iter().map(|t| t.map(|j| new_id[j])).collect();
    Triangulation::from_raw(shuffled, tris, None, Some(h), DomainTag::External).unwrap()
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    let mut state = seed | 1;
    for i in (1..n).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        v.swap(i, (state % (i as u64 + 1)) as usize);
    }
    v
}

fn any_mesh() -> impl Strategy<Value = Triangulation> {
    prop_oneof![
        (2usize..12).prop_map(|n| generate_regular_square(n).unwrap()),
        (2usize..10).prop_map(|n| generate_half_unit_disk(n).unwrap()),
        (4usize..12).prop_map(|n| generate_eye_domain(n).unwrap()),
        (2usize..10, prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 1..20), any::<u64>())
            .prop_map(|(n, off, seed)| shaken_square(n, 1.0, &off, seed)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn support_areas_sum_to_three_times_area(mesh in any_mesh()) {
        let geo = compute_node_geometry(&mesh);
        let total: f64 = geo.support_area.iter().sum();
        let area: f64 = (0..mesh.triangles().len()).map(|t| mesh.triangle_area(t)).sum();
        prop_assert!((total - 3.0 * area).abs() <= 1e-12 * area.max(1.0));
    }

    #[test]
    fn interior_nodes_come_first(mesh in any_mesh()) {
        let ni = mesh.n_interior();
        for e in mesh.boundary_edges() {
            prop_assert!(e[0] >= ni && e[1] >= ni);
        }
        for j in 0..mesh.n_total() {
            prop_assert_eq!(mesh.is_boundary(j), j >= ni);
        }
    }

    #[test]
    fn lumped_mass_is_positive(mesh in any_mesh()) {
        let geo = compute_node_geometry(&mesh);
        let m = assemble_lumped_mass(&mesh, &geo);
        prop_assert!(m.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn stiffness_is_symmetric_semidefinite(
        mesh in any_mesh(),
        x in prop::collection::vec(-1.0f64..1.0, 200),
        y in prop::collection::vec(-1.0f64..1.0, 200),
    ) {
        let k = assemble_stiffness(&mesh);
        let n = mesh.n_total();
        let x: Vec<f64> = (0..n).map(|i| x[i % x.len()] + i as f64 * 1e-3).collect();
        let y: Vec<f64> = (0..n).map(|i| y[(i * 7) % y.len()]).collect();
        prop_assert!(k.bilinear(&x, &x) >= -1e-12);
        prop_assert!((k.bilinear(&x, &y) - k.bilinear(&y, &x)).abs() <= 1e-12);
        let ones = vec![1.0; n];
        prop_assert!(k.bilinear(&ones, &ones).abs() <= 1e-12);
    }

    #[test]
    fn refinement_halves_the_longest_edge(n in 2usize..40) {
        let (_, coarse) = generate_regular_square(n).unwrap().edge_length_range();
        let (_, fine) = generate_regular_square(2 * n).unwrap().edge_length_range();
        prop_assert!((coarse - 2.0 * fine).abs() <= 1e-14);
    }

    #[test]
    fn relaxation_step_stays_between_its_inputs(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
        tau in 1e-4f64..10.0,
        gamma in 1e-4f64..100.0,
    ) {
        let w: NodalField = pairs.iter().map(|p| p.0).collect::<Vec<_>>().into();
        let u: NodalField = pairs.iter().map(|p| p.1).collect::<Vec<_>>().into();
        let next = substep_w(&w, &u, tau, gamma);
        for i in 0..w.len() {
            let (lo, hi) = (w[i].min(u[i]), w[i].max(u[i]));
            prop_assert!(next[i] >= lo && next[i] <= hi);
        }
    }

    #[test]
    fn semilinear_source_is_lipschitz(
        l in 0.0f64..30.0,
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let params = ProblemParams { lipschitz: l, ..Default::default() };
        let spec = lookup("semilinear-cos", &params).unwrap();
        let ProblemKind::Semilinear { source, lipschitz } = &spec.kind else { unreachable!() };
        prop_assert_eq!(*lipschitz, l);
        let gap = (source([x, y], a) - source([x, y], b)).abs();
        prop_assert!(gap <= l * (a - b).abs() + 1e-12);
    }

    #[test]
    fn pucci_rhs_is_nonnegative(
        alpha in 1.0001f64..10.0,
        entries in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 16),
    ) {
        let mesh = generate_regular_square(3).unwrap();
        let n = mesh.n_total();
        let pick = |f: fn(&(f64, f64, f64)) -> f64| -> NodalField {
            (0..n).map(|j| f(&entries[j % entries.len()])).collect::<Vec<_>>().into()
        };
        let field = HessianField { d11: pick(|e| e.0), d12: pick(|e| e.1), d22: pick(|e| e.2) };
        let params = ProblemParams { alpha, ..Default::default() };
        let spec = lookup("pucci-smooth", &params).unwrap();
        let rhs = pucci_rhs(&field, &spec, &mesh).unwrap();
        prop_assert!(rhs.iter().all(|&v| v >= 0.0));
        for j in 0..n {
            let p = hessian_pointwise(&field, j);
            prop_assert!(p.lambda1 >= p.lambda2);
        }
    }

    #[test]
    fn constant_hessians_survive_repair_and_smoothing(
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        d in -5.0f64..5.0,
        n in 3usize..8,
    ) {
        for mesh in [generate_regular_square(2 * n).unwrap(), generate_half_unit_disk(n).unwrap()] {
            let geo = compute_node_geometry(&mesh);
            let c = HessianField::constant(mesh.n_total(), a, b, d);
            let repaired = repair_boundary(&c, &mesh, &geo).unwrap();
            let smoothed = tikhonov_regularize(&repaired, &HessianConfig::unstructured(mesh.h()), &mesh, &geo).unwrap();
            for (got, want) in smoothed.components().iter().zip([a, b, d]) {
                prop_assert!(got.iter().all(|v| (v - want).abs() <= 1e-8));
            }
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    let mesh = generate_half_unit_disk(8).unwrap();
    let geo = compute_node_geometry(&mesh);
    let spec = lookup("ma-singular", &ProblemParams::default()).unwrap();
    let config = SplittingConfig {
        hessian: HessianConfig::unstructured(mesh.h()),
        ..Default::default()
    };
    let a = run(&spec, &mesh, &geo, &config).unwrap();
    let b = run(&spec, &mesh, &geo, &config).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.u, b.u);
}

#[test]
fn increments_eventually_decrease() {
    let mesh = generate_regular_square(20).unwrap();
    let geo = compute_node_geometry(&mesh);
    let spec = lookup("semilinear-cos", &ProblemParams::default()).unwrap();
    let out = run(&spec, &mesh, &geo, &SplittingConfig::default()).unwrap();
    let inc: Vec<f64> = out.log.records.iter().map(|r| r.increment_l2).collect();
    assert!(inc.windows(2).skip(1).all(|w| w[1] < w[0]), "{inc:?}");
}
