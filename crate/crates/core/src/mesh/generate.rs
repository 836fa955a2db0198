//! Structured and mapped-structured meshes of the benchmark domains.

use std::f64::consts::PI;

use super::{signed_area, DomainTag, Point, Triangulation, DISK_CENTER, DISK_RADIUS};
use crate::error::{Error, Result};

/// Uniform grid of `(0,1)²` with `n` cells per side, every cell cut along
/// the `(i, j) -> (i+1, j+1)` diagonal. `h = 1/n`.
pub fn generate_regular_square(n: usize) -> Result<Triangulation> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "regular square needs at least 2 subdivisions, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut flags = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
            flags.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Triangulation::from_raw(nodes, triangles, Some(&flags), Some(h), DomainTag::UnitSquare)
}

/// Disk of radius 1/2 centered at (0.5, 0.5): a center node plus `n_radial`
/// concentric rings, ring `i` carrying `6i` equally spaced nodes. Adjacent
/// rings are stitched by a merge on angle. `h = 0.5 / n_radial`.
pub fn generate_half_unit_disk(n_radial: usize) -> Result<Triangulation> {
    if n_radial < 2 {
        return Err(Error::InvalidArgument(format!(
            "disk mesh needs at least 2 rings, got {n_radial}"
        )));
    }
    let mut nodes: Vec<Point> = vec![DISK_CENTER];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..=n_radial {
        let count = 6 * i;
        let r = if i == n_radial {
            DISK_RADIUS
        } else {
            DISK_RADIUS * i as f64 / n_radial as f64
        };
        let mut ring = Vec::with_capacity(count);
        for k in 0..count {
            let theta = 2.0 * PI * k as f64 / count as f64;
            ring.push(nodes.len());
            nodes.push([DISK_CENTER[0] + r * theta.cos(), DISK_CENTER[1] + r * theta.sin()]);
        }
        rings.push(ring);
    }

    let mut triangles = Vec::new();
    for w in rings.windows(2) {
        stitch(&nodes, &w[0], &w[1], true, &mut triangles);
    }
    let flags: Vec<bool> = (0..nodes.len())
        .map(|j| j >= nodes.len() - 6 * n_radial)
        .collect();
    Triangulation::from_raw(
        nodes,
        triangles,
        Some(&flags),
        Some(DISK_RADIUS / n_radial as f64),
        DomainTag::HalfUnitDisk,
    )
}

/// The eye-shaped region `-x1(1-x1) < x2 < x1(1-x1)`.
///
/// Columns sit at `x1 = i/n`; each column spans the vertical chord between
/// the two arcs and is split into roughly `chord / h` equal segments (the
/// cusp columns collapse to a single node). Neighboring columns are stitched
/// on their normalized height. `h = 1/n`.
pub fn generate_eye_domain(n: usize) -> Result<Triangulation> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "eye mesh needs at least 4 subdivisions, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let mut nodes: Vec<Point> = Vec::new();
    let mut flags: Vec<bool> = Vec::new();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x1 = i as f64 * h;
        if i == 0 || i == n {
            columns.push(vec![nodes.len()]);
            nodes.push([x1, 0.0]);
            flags.push(true);
            continue;
        }
        let half = x1 * (1.0 - x1);
        let segments = ((2.0 * half / h).round() as usize).max(2);
        let mut col = Vec::with_capacity(segments + 1);
        for k in 0..=segments {
            let x2 = if k == segments {
                half
            } else {
                -half + 2.0 * half * k as f64 / segments as f64
            };
            col.push(nodes.len());
            nodes.push([x1, x2]);
            flags.push(k == 0 || k == segments);
        }
        columns.push(col);
    }

    let mut triangles = Vec::new();
    for w in columns.windows(2) {
        stitch(&nodes, &w[0], &w[1], false, &mut triangles);
    }
    Triangulation::from_raw(nodes, triangles, Some(&flags), Some(h), DomainTag::EyeShaped)
}

/// Triangulates the band between two node chains by advancing along
/// whichever chain has the smaller next normalized parameter. Closed chains
/// (rings) are parametrized by `k / len` and wrap around.
fn stitch(nodes: &[Point], a: &[usize], b: &[usize], closed: bool, out: &mut Vec<[usize; 3]>) {
    let param = |k: usize, len: usize| -> f64 {
        if closed {
            k as f64 / len as f64
        } else if len == 1 {
            0.0
        } else {
            k as f64 / (len - 1) as f64
        }
    };
    let (steps_a, steps_b) = if closed {
        (if a.len() == 1 { 0 } else { a.len() }, b.len())
    } else {
        (a.len() - 1, b.len() - 1)
    };
    let at = |chain: &[usize], k: usize| chain[k % chain.len()];

    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < steps_a || ib < steps_b {
        let advance_b = if ia == steps_a {
            true
        } else if ib == steps_b {
            false
        } else {
            param(ib + 1, b.len()) <= param(ia + 1, a.len())
        };
        let tri = if advance_b {
            ib += 1;
            [at(a, ia), at(b, ib - 1), at(b, ib)]
        } else {
            ia += 1;
            [at(a, ia - 1), at(b, ib), at(a, ia)]
        };
        push_ccw(nodes, tri, out);
    }
}

fn push_ccw(nodes: &[Point], mut tri: [usize; 3], out: &mut Vec<[usize; 3]>) {
    if signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0 {
        tri.swap(1, 2);
    }
    out.push(tri);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_node_geometry;

    #[test]
    fn square_counts() {
        let m = generate_regular_square(2).unwrap();
        assert_eq!((m.n_total(), m.triangles().len(), m.n_interior()), (9, 8, 1));
        let m = generate_regular_square(10).unwrap();
        assert_eq!((m.n_total(), m.triangles().len()), (121, 200));
        assert!((m.h() - 0.1).abs() < 1e-15);
        assert!(generate_regular_square(1).is_err());
    }

    #[test]
    fn square_center_support() {
        let m = generate_regular_square(2).unwrap();
        let g = compute_node_geometry(&m);
        assert_eq!(m.node(0), [0.5, 0.5]);
        assert!((g.support_area[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = generate_half_unit_disk(2).unwrap();
        let g = compute_node_geometry(&m);
        assert_eq!(m.n_boundary(), 12);
        for j in m.n_interior()..m.n_total() {
            let p = m.node(j);
            let d = [p[0] - 0.5, p[1] - 0.5];
            assert!((d[0] * d[0] + d[1] * d[1] - 0.25).abs() < 1e-12);
            let n = g.normal(j);
            assert!((n[0] - 2.0 * d[0]).abs() < 1e-12 && (n[1] - 2.0 * d[1]).abs() < 1e-12);
        }
        assert!(generate_half_unit_disk(1).is_err());
    }

    #[test]
    fn disk_area_converges() {
        let m = generate_half_unit_disk(16).unwrap();
        let exact = PI / 4.0;
        assert!((m.total_area() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn eye_geometry() {
        let m = generate_eye_domain(32).unwrap();
        assert!((m.total_area() - 1.0 / 3.0).abs() * 3.0 < 0.01);
        let cusp = |p: Point| (0..m.n_total()).find(|&j| m.node(j) == p).unwrap();
        assert!(m.is_boundary(cusp([0.0, 0.0])));
        assert!(m.is_boundary(cusp([1.0, 0.0])));
        for j in m.n_interior()..m.n_total() {
            let [x1, x2] = m.node(j);
            assert!((x2.abs() - x1 * (1.0 - x1)).abs() < 1e-15);
        }
        let top = cusp([0.5, 0.25]);
        assert!(m.is_boundary(top));
        assert!(generate_eye_domain(3).is_err());
    }
}
