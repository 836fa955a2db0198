//! Discrete Hessian of a P1 field.
//!
//! Interior values come from the integration-by-parts identity tested
//! against each interior hat function, with a lumped left-hand side so the
//! recovery is explicit. On unstructured meshes the boundary values are then
//! rebuilt from a zero-normal-derivative condition and all three components
//! are smoothed by solving `(εK + M) D̃ = M D`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{assemble_lumped_mass, assemble_stiffness, p1_gradients, NodalField, SolverKind, SpdSolver};
use crate::mesh::{NodeGeometry, Triangulation};

#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    pub d11: NodalField,
    pub d12: NodalField,
    pub d22: NodalField,
}

impl HessianField {
    pub fn zeros(n: usize) -> Self {
        HessianField {
            d11: NodalField::zeros(n),
            d12: NodalField::zeros(n),
            d22: NodalField::zeros(n),
        }
    }

    /// Same constant matrix at every node.
    pub fn constant(n: usize, d11: f64, d12: f64, d22: f64) -> Self {
        HessianField {
            d11: vec![d11; n].into(),
            d12: vec![d12; n].into(),
            d22: vec![d22; n].into(),
        }
    }

    pub fn len(&self) -> usize {
        self.d11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d11.is_empty()
    }

    pub fn components(&self) -> [&NodalField; 3] {
        [&self.d11, &self.d12, &self.d22]
    }

    fn map_components(&self, mut f: impl FnMut(&NodalField) -> Result<NodalField>) -> Result<Self> {
        Ok(HessianField {
            d11: f(&self.d11)?,
            d12: f(&self.d12)?,
            d22: f(&self.d22)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianConfig {
    /// Tikhonov smoothing parameter ε.
    pub epsilon: f64,
    pub boundary_repair: bool,
}

impl HessianConfig {
    /// Interior recovery only, for uniform meshes.
    pub fn regular() -> Self {
        HessianConfig {
            epsilon: 0.0,
            boundary_repair: false,
        }
    }

    /// Boundary repair plus smoothing with `ε = h²`.
    pub fn unstructured(h: f64) -> Self {
        HessianConfig {
            epsilon: h * h,
            boundary_repair: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Tikhonov parameter must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.epsilon == 0.0 && self.boundary_repair {
            return Err(Error::InvalidArgument(
                "boundary repair requires a positive Tikhonov parameter".into(),
            ));
        }
        Ok(())
    }
}

impl Default for HessianConfig {
    fn default() -> Self {
        HessianConfig::regular()
    }
}

/// Interior recovery; boundary entries are zero.
pub fn recover_interior(psi: &NodalField, mesh: &Triangulation, geometry: &NodeGeometry) -> HessianField {
    let grads: Vec<(f64, [[f64; 2]; 3])> = (0..mesh.triangles().len()).map(|t| p1_gradients(mesh, t)).collect();
    recover_interior_with(psi, mesh, geometry, &grads)
}

fn recover_interior_with(
    psi: &NodalField,
    mesh: &Triangulation,
    geometry: &NodeGeometry,
    grads: &[(f64, [[f64; 2]; 3])],
) -> HessianField {
    let n = mesh.n_total();
    let ni = mesh.n_interior();
    assert_eq!(psi.len(), n);
    let mut acc = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (tri, (area, g)) in mesh.triangles().iter().zip(grads) {
        let mut grad_psi = [0.0; 2];
        for k in 0..3 {
            grad_psi[0] += psi[tri[k]] * g[k][0];
            grad_psi[1] += psi[tri[k]] * g[k][1];
        }
        for k in 0..3 {
            let v = tri[k];
            if v >= ni {
                continue;
            }
            let gp = g[k];
            acc[0][v] += area * 2.0 * grad_psi[0] * gp[0];
            acc[1][v] += area * (grad_psi[0] * gp[1] + grad_psi[1] * gp[0]);
            acc[2][v] += area * 2.0 * grad_psi[1] * gp[1];
        }
    }
    for j in 0..ni {
        let scale = -1.5 / geometry.support_area[j];
        for c in &mut acc {
            c[j] *= scale;
        }
    }
    let [d11, d12, d22] = acc;
    HessianField {
        d11: d11.into(),
        d12: d12.into(),
        d22: d22.into(),
    }
}

/// Rebuilds boundary values so that the projected normal derivative vanishes
/// at every boundary node. Interior values are kept.
pub fn repair_boundary(field: &HessianField, mesh: &Triangulation, geometry: &NodeGeometry) -> Result<HessianField> {
    BoundaryRepair::new(mesh, geometry)?.apply(field)
}

/// Solves `(εK + M) D̃ = M D` for each component over all nodes.
pub fn tikhonov_regularize(
    field: &HessianField,
    config: &HessianConfig,
    mesh: &Triangulation,
    geometry: &NodeGeometry,
) -> Result<HessianField> {
    config.validate()?;
    match Smoother::new(config.epsilon, mesh, geometry)? {
        None => Ok(field.clone()),
        Some(s) => s.apply(field),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseHessian {
    pub laplacian: f64,
    pub determinant: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Trace, determinant and ordered eigenvalues of the recovered Hessian at `node`.
pub fn hessian_pointwise(field: &HessianField, node: usize) -> PointwiseHessian {
    let (a, b, c) = (field.d11[node], field.d12[node], field.d22[node]);
    let laplacian = a + c;
    let determinant = a * c - b * b;
    let root = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    PointwiseHessian {
        laplacian,
        determinant,
        lambda1: 0.5 * (laplacian + root),
        lambda2: 0.5 * (laplacian - root),
    }
}

/// Boundary system `B P_b = -C P_i` for the zero-Neumann repair, factorized once.
#[derive(Debug, Clone)]
struct BoundaryRepair {
    n_interior: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    coupling: Vec<Vec<(usize, f64)>>,
}

impl BoundaryRepair {
    fn new(mesh: &Triangulation, geometry: &NodeGeometry) -> Result<Self> {
        let ni = mesh.n_interior();
        let nb = mesh.n_boundary();
        let mut b = DMatrix::<f64>::zeros(nb, nb);
        let mut coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if tri.iter().all(|&v| v < ni) {
                continue;
            }
            let (area, g) = p1_gradients(mesh, t);
            for &k in tri.iter().filter(|&&k| k >= ni) {
                let n = geometry.normal(k);
                let scale = area / geometry.support_area[k];
                let row = k - ni;
                for (v, gv) in tri.iter().zip(&g) {
                    let coef = scale * (gv[0] * n[0] + gv[1] * n[1]);
                    if *v >= ni {
                        b[(row, v - ni)] += coef;
                    } else {
                        coupling[row].push((*v, coef));
                    }
                }
            }
        }

        let lu = match well_conditioned_lu(b.clone()) {
            Some(lu) => lu,
            None => {
                let shift = 1e-10 * b.diagonal().amax();
                let mut shifted = b;
                for i in 0..nb {
                    shifted[(i, i)] += shift;
                }
                well_conditioned_lu(shifted).ok_or_else(|| {
                    Error::Singular("boundary Neumann system is singular even after a diagonal shift".into())
                })?
            }
        };
        Ok(BoundaryRepair {
            n_interior: ni,
            lu,
            coupling,
        })
    }

    fn apply(&self, field: &HessianField) -> Result<HessianField> {
        field.map_components(|c| self.repair(c))
    }

    fn repair(&self, d: &NodalField) -> Result<NodalField> {
        let ni = self.n_interior;
        let rhs = DVector::from_iterator(
            self.coupling.len(),
            self.coupling
                .iter()
                .map(|row| -row.iter().map(|&(v, c)| c * d[v]).sum::<f64>()),
        );
        let p = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("boundary Neumann system".into()))?;
        let mut out = d.clone();
        out[ni..].copy_from_slice(p.as_slice());
        Ok(out)
    }
}

fn well_conditioned_lu(m: DMatrix<f64>) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = m.lu();
    let u = lu.u();
    let diag = u.diagonal();
    let hi = diag.amax();
    let lo = diag.amin();
    if !(hi > 0.0) || lo <= 1e-13 * hi {
        None
    } else {
        Some(lu)
    }
}

#[derive(Debug, Clone)]
struct Smoother {
    solver: SpdSolver,
    mass: Vec<f64>,
}

impl Smoother {
    fn new(epsilon: f64, mesh: &Triangulation, geometry: &NodeGeometry) -> Result<Option<Self>> {
        if epsilon == 0.0 {
            return Ok(None);
        }
        let mass = assemble_lumped_mass(mesh, geometry);
        let op = assemble_stiffness(mesh).combine(epsilon, &mass, 1.0);
        Ok(Some(Smoother {
            solver: SpdSolver::new(op, SolverKind::Direct)?,
            mass: mass.diagonal(),
        }))
    }

    fn apply(&self, field: &HessianField) -> Result<HessianField> {
        field.map_components(|c| {
            let rhs: Vec<f64> = c.iter().zip(&self.mass).map(|(d, m)| d * m).collect();
            Ok(self.solver.solve(&rhs)?.into())
        })
    }
}

/// The full recovery pipeline for one mesh, with all mesh-dependent
/// factorizations built up front.
#[derive(Debug, Clone)]
pub struct HessianRecovery {
    config: HessianConfig,
    grads: Vec<(f64, [[f64; 2]; 3])>,
    repair: Option<BoundaryRepair>,
    smoother: Option<Smoother>,
}

impl HessianRecovery {
    pub fn new(config: HessianConfig, mesh: &Triangulation, geometry: &NodeGeometry) -> Result<Self> {
        config.validate()?;
        let grads = (0..mesh.triangles().len()).map(|t| p1_gradients(mesh, t)).collect();
        let repair = if config.boundary_repair {
            Some(BoundaryRepair::new(mesh, geometry)?)
        } else {
            None
        };
        Ok(HessianRecovery {
            config,
            grads,
            repair,
            smoother: Smoother::new(config.epsilon, mesh, geometry)?,
        })
    }

    pub fn config(&self) -> HessianConfig {
        self.config
    }

    pub fn recover(&self, psi: &NodalField, mesh: &Triangulation, geometry: &NodeGeometry) -> Result<HessianField> {
        let mut field = recover_interior_with(psi, mesh, geometry, &self.grads);
        if let Some(repair) = &self.repair {
            field = repair.apply(&field)?;
        }
        if let Some(smoother) = &self.smoother {
            field = smoother.apply(&field)?;
        }
        Ok(field)
    }
}
