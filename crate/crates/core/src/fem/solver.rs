//! Symmetric positive definite solves: an envelope Cholesky factorization
//! under reverse Cuthill-McKee ordering, a Jacobi-preconditioned conjugate
//! gradient fallback, and the Dirichlet-constrained wrapper used by every
//! substep.

use std::collections::VecDeque;

use super::{NodalField, SparseOperator};
use crate::error::{Error, Result};
use crate::mesh::Triangulation;

/// Relative residual every solve aims for.
pub const RESIDUAL_TARGET: f64 = 1e-12;
/// Above this relative residual a solve is reported as failed.
const RESIDUAL_LIMIT: f64 = 1e-8;

/// `L L^T` factorization stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct ProfileCholesky {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl ProfileCholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (col, _) in a.row(old) {
                let j = inv[col];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; row_start[n]];
        for old in 0..n {
            let i = inv[old];
            for (col, v) in a.row(old) {
                let j = inv[col];
                if j <= i {
                    data[row_start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let ri = row_start[i];
            for j in fi..i {
                let fj = first[j];
                let rj = row_start[j];
                let k0 = fi.max(fj);
                let mut s = data[ri + j - fi];
                let li = &data[ri + k0 - fi..ri + j - fi];
                let lj = &data[rj + k0 - fj..rj + j - fj];
                s -= li.iter().zip(lj).map(|(x, y)| x * y).sum::<f64>();
                data[ri + j - fi] = s / data[rj + j - fj];
            }
            let diag_in = data[ri + i - fi];
            let d = diag_in - data[ri..ri + i - fi].iter().map(|x| x * x).sum::<f64>();
            if !(d > 1e-14 * diag_in.abs()) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at row {} during Cholesky factorization",
                    perm[i]
                )));
            }
            data[ri + i - fi] = d.sqrt();
        }
        Ok(ProfileCholesky {
            perm,
            first,
            row_start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let row = &self.data[ri..ri + i - fi];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.data[ri + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.row_start[i];
            y[i] /= self.data[ri + i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(&self.data[ri..ri + i - fi]) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn reverse_cuthill_mckee(a: &SparseOperator) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        let start = pseudo_peripheral(seed, &adj, &degree, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_unstable_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// A few rounds of the George-Liu search for a node of large eccentricity.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(current, adj, blocked);
        let ecc = *levels.iter().map(|(_, l)| l).max().unwrap_or(&0);
        if ecc <= best_ecc && best_ecc > 0 {
            break;
        }
        best_ecc = ecc;
        current = levels
            .iter()
            .filter(|&&(_, l)| l == ecc)
            .min_by_key(|&&(v, _)| (degree[v], v))
            .map(|&(v, _)| v)
            .unwrap();
    }
    current
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], blocked: &[bool]) -> Vec<(usize, usize)> {
    let mut seen = std::collections::HashSet::from([start]);
    let mut out = vec![(start, 0)];
    let mut k = 0;
    while k < out.len() {
        let (v, l) = out[k];
        for &w in &adj[v] {
            if !blocked[w] && seen.insert(w) {
                out.push((w, l + 1));
            }
        }
        k += 1;
    }
    out
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
pub fn conjugate_gradient(
    a: &SparseOperator,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let ax = a.apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if norm(&r) <= rel_tol * bnorm {
            return Ok(it);
        }
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(
                "conjugate gradient met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = norm(&r) / bnorm;
    if residual <= rel_tol {
        Ok(max_iter)
    } else {
        Err(Error::SolveFailed {
            residual,
            target: rel_tol,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    ConjugateGradient,
}

/// An SPD system solver that checks its residual and refines when needed.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: SparseOperator,
    factor: Option<ProfileCholesky>,
}

impl SpdSolver {
    pub fn new(matrix: SparseOperator, kind: SolverKind) -> Result<Self> {
        let factor = match kind {
            SolverKind::Direct => Some(ProfileCholesky::factor(&matrix)?),
            SolverKind::ConjugateGradient => {
                if let Some(i) = matrix.diagonal().iter().position(|&d| !(d > 0.0)) {
                    return Err(Error::Singular(format!("non-positive diagonal entry at row {i}")));
                }
                None
            }
        };
        Ok(SpdSolver { matrix, factor })
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let target = RESIDUAL_TARGET * bnorm;
        let Some(factor) = &self.factor else {
            let mut x = vec![0.0; b.len()];
            conjugate_gradient(&self.matrix, b, &mut x, RESIDUAL_TARGET, 20 * b.len() + 100)?;
            return Ok(x);
        };
        let mut x = factor.solve(b);
        let mut r = self.residual(b, &x);
        for _ in 0..3 {
            if norm(&r) <= target {
                return Ok(x);
            }
            let dx = factor.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            r = self.residual(b, &x);
        }
        let rel = norm(&r) / bnorm;
        if rel <= RESIDUAL_LIMIT {
            return Ok(x);
        }
        conjugate_gradient(&self.matrix, b, &mut x, RESIDUAL_TARGET, 20 * b.len() + 100)
            .or_else(|_| {
                let rel = norm(&self.residual(b, &x)) / bnorm;
                if rel <= RESIDUAL_LIMIT {
                    Ok(0)
                } else {
                    Err(Error::SolveFailed {
                        residual: rel,
                        target: RESIDUAL_TARGET,
                    })
                }
            })?;
        Ok(x)
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.matrix.apply(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    }
}

/// Solver for `A u = rhs` on interior rows with `u` pinned on the boundary.
///
/// The interior block is factorized once; each [`DirichletSolver::solve`]
/// only moves the boundary coupling to the right-hand side.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    n_interior: usize,
    n_total: usize,
    interior: SpdSolver,
    /// Rows `0..n_interior` of `A`, restricted to boundary columns.
    coupling: Vec<Vec<(usize, f64)>>,
}

impl DirichletSolver {
    pub fn new(a: &SparseOperator, mesh: &Triangulation, kind: SolverKind) -> Result<Self> {
        let ni = mesh.n_interior();
        let n = mesh.n_total();
        if a.dim() != n {
            return Err(Error::InvalidArgument(format!(
                "operator of dimension {} for a mesh with {n} nodes",
                a.dim()
            )));
        }
        if ni == 0 {
            return Err(Error::InvalidArgument("mesh has no interior nodes".into()));
        }
        let interior = SpdSolver::new(a.leading_block(ni), kind)?;
        let coupling = (0..ni)
            .map(|i| a.row(i).filter(|&(j, _)| j >= ni).collect())
            .collect();
        Ok(DirichletSolver {
            n_interior: ni,
            n_total: n,
            interior,
            coupling,
        })
    }

    pub fn interior_solver(&self) -> &SpdSolver {
        &self.interior
    }

    /// Only the interior entries of `rhs` and the boundary entries of `boundary` are read.
    pub fn solve(&self, rhs: &[f64], boundary: &[f64]) -> Result<NodalField> {
        assert_eq!(rhs.len(), self.n_total);
        assert_eq!(boundary.len(), self.n_total);
        let ni = self.n_interior;
        let b: Vec<f64> = (0..ni)
            .map(|i| rhs[i] - self.coupling[i].iter().map(|&(j, v)| v * boundary[j]).sum::<f64>())
            .collect();
        let xi = self.interior.solve(&b)?;
        let mut u = boundary.to_vec();
        u[..ni].copy_from_slice(&xi);
        Ok(NodalField::from(u))
    }
}
