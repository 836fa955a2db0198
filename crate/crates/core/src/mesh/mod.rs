//! Conforming triangulations and the per-node geometry derived from them.
//!
//! Every [`Triangulation`] stores its nodes interior-first: indices
//! `0..n_interior` are interior nodes and `n_interior..n_total` are boundary
//! nodes, the latter walked loop by loop along the boundary.

mod generate;
mod io;

use std::collections::HashMap;
use std::fmt;

pub use generate::{generate_eye_domain, generate_half_unit_disk, generate_regular_square};
pub use io::{load_mesh, parse_mesh, write_mesh};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Center of the half-unit disk domain.
pub const DISK_CENTER: Point = [0.5, 0.5];
pub const DISK_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    UnitSquare,
    HalfUnitDisk,
    EyeShaped,
    External,
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainTag::UnitSquare => "unit-square",
            DomainTag::HalfUnitDisk => "half-unit-disk",
            DomainTag::EyeShaped => "eye-shaped",
            DomainTag::External => "external",
        };
        f.write_str(s)
    }
}

/// A validated, counterclockwise-oriented P1 triangulation.
#[derive(Debug, Clone)]
pub struct Triangulation {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    n_interior: usize,
    h: f64,
    domain_tag: DomainTag,
    /// Oriented boundary edges `(a, b)` with the domain on the left.
    boundary_edges: Vec<[usize; 2]>,
    /// `original_index[new] = old` node id from the source of the mesh.
    original_index: Vec<usize>,
}

impl Triangulation {
    /// Validates raw connectivity and reorders nodes interior-first.
    ///
    /// Clockwise triangles are repaired by swapping two vertices. When
    /// `boundary_flags` is given it must agree with the topological boundary.
    /// `h` defaults to the maximum edge length.
    pub fn from_raw(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary_flags: Option<&[bool]>,
        h: Option<f64>,
        domain_tag: DomainTag,
    ) -> Result<Self> {
        let n = nodes.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(flags) = boundary_flags {
            if flags.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} boundary flags for {} nodes",
                    flags.len(),
                    n
                )));
            }
        }
        if let Some((j, _)) = nodes
            .iter()
            .enumerate()
            .find(|(_, p)| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidMesh(format!("node {j} has non-finite coordinates")));
        }

        let mut used = vec![false; n];
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references node {v}, but the mesh has {n} nodes"
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex: {tri:?}")));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            let scale = edge_len(nodes[tri[0]], nodes[tri[1]])
                .max(edge_len(nodes[tri[1]], nodes[tri[2]]))
                .max(edge_len(nodes[tri[2]], nodes[tri[0]]));
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} {tri:?} is degenerate (signed area {area:e})"
                )));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(j) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidMesh(format!("node {j} is not used by any triangle")));
        }

        // Edge -> (count, oriented copy from the first triangle that saw it).
        let mut edges: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let entry = edges.entry((a.min(b), a.max(b))).or_insert((0, [a, b]));
                entry.0 += 1;
            }
        }
        let mut boundary_raw: Vec<[usize; 2]> = Vec::new();
        for (&(a, b), &(count, oriented)) in &edges {
            match count {
                1 => boundary_raw.push(oriented),
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) is shared by {count} triangles"
                    )))
                }
            }
        }
        boundary_raw.sort_unstable();
        if boundary_raw.is_empty() {
            return Err(Error::InvalidMesh("mesh has no boundary edges".into()));
        }

        let mut on_boundary = vec![false; n];
        for e in &boundary_raw {
            on_boundary[e[0]] = true;
            on_boundary[e[1]] = true;
        }
        if let Some(flags) = boundary_flags {
            if let Some(j) = (0..n).find(|&j| flags[j] != on_boundary[j]) {
                let (flagged, actual) = if flags[j] {
                    ("boundary", "interior")
                } else {
                    ("interior", "boundary")
                };
                return Err(Error::InvalidMesh(format!(
                    "node {j} is flagged {flagged} but is topologically {actual}"
                )));
            }
        }

        let order = interior_first_order(n, &on_boundary, &boundary_raw);
        let mut new_of_old = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            new_of_old[old] = new;
        }
        let n_interior = on_boundary.iter().filter(|&&b| !b).count();

        let nodes: Vec<Point> = order.iter().map(|&old| nodes[old]).collect();
        let triangles: Vec<[usize; 3]> = triangles
            .iter()
            .map(|t| [new_of_old[t[0]], new_of_old[t[1]], new_of_old[t[2]]])
            .collect();
        let boundary_edges: Vec<[usize; 2]> = boundary_raw
            .iter()
            .map(|e| [new_of_old[e[0]], new_of_old[e[1]]])
            .collect();

        let mut mesh = Triangulation {
            nodes,
            triangles,
            n_interior,
            h: 0.0,
            domain_tag,
            boundary_edges,
            original_index: order,
        };
        mesh.h = match h {
            Some(h) if h > 0.0 => h,
            Some(h) => return Err(Error::InvalidMesh(format!("mesh size h = {h} must be positive"))),
            None => mesh.edge_length_range().1,
        };
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> Point {
        self.nodes[j]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_total(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.nodes.len() - self.n_interior
    }

    pub fn is_boundary(&self, j: usize) -> bool {
        j >= self.n_interior
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain_tag(&self) -> DomainTag {
        self.domain_tag
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Node id in the source the mesh was built from (file order for loaded meshes).
    pub fn original_index(&self, j: usize) -> usize {
        self.original_index[j]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// `(min, max)` edge length over all triangle edges.
    pub fn edge_length_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for tri in &self.triangles {
            for e in 0..3 {
                let l = edge_len(self.nodes[tri[e]], self.nodes[tri[(e + 1) % 3]]);
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_len(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Interior nodes in their original order, then boundary nodes loop by loop.
fn interior_first_order(n: usize, on_boundary: &[bool], boundary_edges: &[[usize; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).filter(|&j| !on_boundary[j]).collect();

    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut pinched = false;
    for e in boundary_edges {
        if next.insert(e[0], e[1]).is_some() {
            pinched = true;
        }
    }
    if pinched {
        // Several loops touch at a vertex; fall back to index order.
        order.extend((0..n).filter(|&j| on_boundary[j]));
        return order;
    }

    let mut visited = vec![false; n];
    for start in 0..n {
        if !on_boundary[start] || visited[start] {
            continue;
        }
        let mut v = start;
        while !visited[v] {
            visited[v] = true;
            order.push(v);
            match next.get(&v) {
                Some(&w) => v = w,
                None => break,
            }
        }
    }
    order
}

/// Support areas and boundary normals of a [`Triangulation`].
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    /// `|θ_j|`: total area of the triangles incident to node `j`.
    pub support_area: Vec<f64>,
    /// Unit outward normal per boundary node, indexed by `j - n_interior`.
    pub boundary_normal: Vec<Point>,
    n_interior: usize,
}

impl NodeGeometry {
    /// Outward normal at boundary node `j`.
    pub fn normal(&self, j: usize) -> Point {
        self.boundary_normal[j - self.n_interior]
    }
}

/// Computes support areas and boundary normals.
///
/// Curved domains use their analytic normal. Polygonal boundaries use the
/// bisector of the unit normals of the boundary edges meeting at a node.
pub fn compute_node_geometry(mesh: &Triangulation) -> NodeGeometry {
    let n = mesh.n_total();
    let mut support_area = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for &v in tri {
            support_area[v] += area;
        }
    }

    let ni = mesh.n_interior();
    let mut acc = vec![[0.0f64; 2]; n - ni];
    for &[a, b] in mesh.boundary_edges() {
        let (pa, pb) = (mesh.node(a), mesh.node(b));
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = dx.hypot(dy);
        let en = [dy / len, -dx / len];
        for v in [a, b] {
            acc[v - ni][0] += en[0];
            acc[v - ni][1] += en[1];
        }
    }

    let boundary_normal = (ni..n)
        .map(|j| {
            let p = mesh.node(j);
            let raw = match mesh.domain_tag() {
                DomainTag::HalfUnitDisk => [p[0] - DISK_CENTER[0], p[1] - DISK_CENTER[1]],
                DomainTag::EyeShaped => eye_normal(p),
                DomainTag::UnitSquare | DomainTag::External => acc[j - ni],
            };
            normalize(raw)
        })
        .collect();

    NodeGeometry {
        support_area,
        boundary_normal,
        n_interior: ni,
    }
}

/// Gradient direction of the arcs `x2 = ±x1(1 - x1)`; the cusps get the axis direction.
fn eye_normal(p: Point) -> Point {
    if p[1].abs() < 1e-14 {
        return if p[0] < 0.5 { [-1.0, 0.0] } else { [1.0, 0.0] };
    }
    let slope = 2.0 * p[0] - 1.0;
    if p[1] > 0.0 {
        [slope, 1.0]
    } else {
        [slope, -1.0]
    }
}

fn normalize(v: Point) -> Point {
    let len = v[0].hypot(v[1]);
    [v[0] / len, v[1] / len]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> Triangulation {
        Triangulation::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            None,
            None,
            DomainTag::External,
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = single_triangle();
        assert_eq!(m.n_interior(), 0);
        assert_eq!(m.n_boundary(), 3);
        assert!((m.total_area() - 0.5).abs() < 1e-15);
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clockwise_triangles_are_flipped() {
        let m = Triangulation::from_raw(
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            vec![[0, 1, 2]],
            None,
            None,
            DomainTag::External,
        )
        .unwrap();
        assert!(m.triangle_area(0) > 0.0);
    }

    #[test]
    fn rejects_dangling_and_degenerate() {
        let err = Triangulation::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]],
            vec![[0, 1, 2]],
            None,
            None,
            DomainTag::External,
        )
        .unwrap_err();
        assert!(err.to_string().contains("node 3"), "{err}");

        let err = Triangulation::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            None,
            None,
            DomainTag::External,
        )
        .unwrap_err();
        assert!(err.to_string().contains("triangle 0"), "{err}");
    }

    #[test]
    fn rejects_flag_mismatch() {
        let err = Triangulation::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            Some(&[true, false, true]),
            None,
            DomainTag::External,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn square_normals() {
        let m = generate_regular_square(2).unwrap();
        let g = compute_node_geometry(&m);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for j in m.n_interior()..m.n_total() {
            let p = m.node(j);
            let n = g.normal(j);
            if p == [0.0, 0.0] {
                assert!((n[0] + s).abs() < 1e-15 && (n[1] + s).abs() < 1e-15);
            }
            if p == [0.5, 0.0] {
                assert!(n[0].abs() < 1e-15 && (n[1] + 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eye_cusp_normals() {
        assert_eq!(eye_normal([0.0, 0.0]), [-1.0, 0.0]);
        assert_eq!(eye_normal([1.0, 0.0]), [1.0, 0.0]);
        assert_eq!(normalize(eye_normal([0.5, 0.25])), [0.0, 1.0]);
    }
}
