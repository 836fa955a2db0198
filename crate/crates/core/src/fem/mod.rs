//! P1 finite-element operators with vertex (trapezoidal) quadrature.

mod solver;
mod sparse;

use std::ops::{Deref, DerefMut};

pub use solver::{conjugate_gradient, DirichletSolver, ProfileCholesky, SolverKind, SpdSolver, RESIDUAL_TARGET};
pub use sparse::SparseOperator;

use crate::error::{Error, Result};
use crate::mesh::{NodeGeometry, Point, Triangulation};

/// Nodal coefficients of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField {
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(n: usize) -> Self {
        NodalField { values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Triangulation, f: impl Fn(Point) -> f64) -> Self {
        NodalField {
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self - other`, entrywise.
    pub fn difference(&self, other: &NodalField) -> NodalField {
        assert_eq!(self.len(), other.len());
        NodalField {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(values: Vec<f64>) -> Self {
        NodalField { values }
    }
}

impl Deref for NodalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Area and constant basis-function gradients of triangle `t`, in vertex order.
pub fn p1_gradients(mesh: &Triangulation, t: usize) -> (f64, [[f64; 2]; 3]) {
    let tri = mesh.triangles()[t];
    let p = [mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2])];
    let area = mesh.triangle_area(t);
    let inv = 1.0 / (2.0 * area);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        g[k] = [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv];
    }
    (area, g)
}

/// `K_ab = ∫ ∇φ_a · ∇φ_b`, exact for P1.
pub fn assemble_stiffness(mesh: &Triangulation) -> SparseOperator {
    let mut t = Vec::with_capacity(9 * mesh.triangles().len());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let (area, g) = p1_gradients(mesh, k);
        for a in 0..3 {
            for b in 0..3 {
                t.push((tri[a], tri[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1])));
            }
        }
    }
    SparseOperator::from_triplets(mesh.n_total(), t)
}

/// Diagonal mass from vertex quadrature: `M_jj = |θ_j| / 3`.
pub fn assemble_lumped_mass(mesh: &Triangulation, geometry: &NodeGeometry) -> SparseOperator {
    debug_assert_eq!(geometry.support_area.len(), mesh.n_total());
    let diag: Vec<f64> = geometry.support_area.iter().map(|a| a / 3.0).collect();
    SparseOperator::from_diagonal(&diag)
}

/// Solves the interior rows of `A u = rhs` with `u = boundary_values` on the boundary.
pub fn solve_dirichlet(
    a: &SparseOperator,
    rhs: &NodalField,
    boundary_values: &NodalField,
    mesh: &Triangulation,
) -> Result<NodalField> {
    DirichletSolver::new(a, mesh, SolverKind::Direct)?.solve(rhs, boundary_values)
}

pub const EIGEN_TOL: f64 = 1e-8;
pub const EIGEN_MAX_ITER: usize = 1000;

/// Smallest eigenvalue of `K x = λ M x` on interior nodes by inverse iteration.
pub fn smallest_laplacian_eigenvalue(mesh: &Triangulation) -> Result<f64> {
    let geometry = crate::mesh::compute_node_geometry(mesh);
    let stiffness = assemble_stiffness(mesh);
    let ni = mesh.n_interior();
    if ni == 0 {
        return Err(Error::InvalidArgument("mesh has no interior nodes".into()));
    }
    let mass: Vec<f64> = geometry.support_area[..ni].iter().map(|a| a / 3.0).collect();
    let solver = SpdSolver::new(stiffness.leading_block(ni), SolverKind::Direct)?;
    inverse_iteration(&solver, &mass, EIGEN_TOL, EIGEN_MAX_ITER)
}

fn inverse_iteration(solver: &SpdSolver, mass: &[f64], tol: f64, max_iter: usize) -> Result<f64> {
    let n = mass.len();
    let m_norm = |x: &[f64]| x.iter().zip(mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
    let mut x = vec![1.0; n];
    let s = m_norm(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut lambda = f64::NAN;
    for _ in 0..max_iter {
        let mx: Vec<f64> = x.iter().zip(mass).map(|(v, m)| m * v).collect();
        let y = solver.solve(&mx)?;
        // With x M-normalized: y^T K y = y^T M x.
        let ymx: f64 = y.iter().zip(&mx).map(|(a, b)| a * b).sum();
        let ny = m_norm(&y);
        let next = ymx / (ny * ny);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::EigenNotConverged {
        iterations: max_iter,
        estimate: lambda,
        vector: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub linf: f64,
    pub h1_semi: f64,
}

/// Trapezoidal L², max-norm and H¹ seminorm of a P1 field.
pub fn field_norms(e: &NodalField, mesh: &Triangulation, geometry: &NodeGeometry) -> FieldNorms {
    let stiffness = assemble_stiffness(mesh);
    FieldNorms {
        l2: l2_norm(e, geometry),
        linf: linf_norm(e),
        h1_semi: stiffness.bilinear(e, e).max(0.0).sqrt(),
    }
}

/// `sqrt(Σ |θ_j|/3 · e_j²)`.
pub fn l2_norm(e: &[f64], geometry: &NodeGeometry) -> f64 {
    debug_assert_eq!(e.len(), geometry.support_area.len());
    e.iter()
        .zip(&geometry.support_area)
        .map(|(v, a)| a / 3.0 * v * v)
        .sum::<f64>()
        .sqrt()
}

pub fn linf_norm(e: &[f64]) -> f64 {
    e.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
