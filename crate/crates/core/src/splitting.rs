//! Lie (Marchuk-Yanenko) splitting: an implicit diffusion step for `u`
//! followed by an exact exponential relaxation of `w` toward `u`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_lumped_mass, assemble_stiffness, l2_norm, linf_norm, smallest_laplacian_eigenvalue, DirichletSolver,
    NodalField, SolverKind, SparseOperator,
};
use crate::hessian::{HessianConfig, HessianRecovery};
use crate::mesh::{NodeGeometry, Triangulation};
use crate::problems::{monge_ampere_rhs, pucci_rhs, semilinear_rhs, ProblemKind, ProblemSpec};

/// Increments above this mark a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingConfig {
    pub tau: f64,
    /// `None` uses the smallest Dirichlet eigenvalue of the mesh.
    pub gamma: Option<f64>,
    pub stop_tol: f64,
    pub max_iterations: usize,
    pub hessian: HessianConfig,
    pub solver: SolverKind,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig {
            tau: 1.0,
            gamma: None,
            stop_tol: 1e-9,
            max_iterations: 10_000,
            hessian: HessianConfig::regular(),
            solver: SolverKind::Direct,
        }
    }
}

impl SplittingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        positive("stop_tol", self.stop_tol)?;
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        self.hessian.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterations => "max-iterations",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// Trapezoidal L² norm of `u^{n} - u^{n-1}`.
    pub increment_l2: f64,
    pub err_l2: Option<f64>,
    pub err_linf: Option<f64>,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn total_clamp_events(&self) -> usize {
        self.records.iter().map(|r| r.clamp_events).sum()
    }

    /// CSV with columns `n,increment_l2,err_l2,err_linf`; error cells are
    /// empty when there is no exact solution.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "increment_l2", "err_l2", "err_linf"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.n.to_string(),
                format!("{:e}", r.increment_l2),
                opt(r.err_l2),
                opt(r.err_linf),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<iteration log>", e))?;
        Ok(())
    }
}

/// `u⁰`, `w⁰ = u⁰`: harmonic extension of `g`, or the discrete `Δu⁰ = f`
/// with `u⁰ = g` for Monge-Ampère.
pub fn initialize(problem: &ProblemSpec, mesh: &Triangulation, geometry: &NodeGeometry) -> Result<(NodalField, NodalField)> {
    let stiffness = assemble_stiffness(mesh);
    let mass = assemble_lumped_mass(mesh, geometry);
    let solver = DirichletSolver::new(&stiffness, mesh, SolverKind::Direct)?;
    initialize_with(problem, mesh, &mass, &solver)
}

fn initialize_with(
    problem: &ProblemSpec,
    mesh: &Triangulation,
    mass: &SparseOperator,
    laplace: &DirichletSolver,
) -> Result<(NodalField, NodalField)> {
    let g = problem.boundary_field(mesh);
    let rhs = match &problem.kind {
        // Weakly, Δu = f reads K u = -M f.
        ProblemKind::MongeAmpere { source, .. } => {
            let f = NodalField::interpolate(mesh, |p| source(p));
            let mut rhs = mass.apply(&f);
            for (j, v) in rhs.iter_mut().enumerate() {
                *v = if j < mesh.n_interior() { -*v } else { 0.0 };
            }
            rhs
        }
        _ => vec![0.0; mesh.n_total()],
    };
    let u = laplace.solve(&rhs, &g)?;
    Ok((u.clone(), u))
}

/// Solves `(M + τK) u = M u_n + τ M rhs` on interior rows with `u = g` on the boundary.
pub fn substep_u(
    u_n: &NodalField,
    rhs_field: &NodalField,
    config: &SplittingConfig,
    mesh: &Triangulation,
    geometry: &NodeGeometry,
    g: &NodalField,
) -> Result<NodalField> {
    let stiffness = assemble_stiffness(mesh);
    let mass = assemble_lumped_mass(mesh, geometry);
    let solver = DirichletSolver::new(&mass.combine(1.0, &stiffness, config.tau), mesh, config.solver)?;
    diffusion_step(&solver, &mass.diagonal(), config.tau, u_n, rhs_field, g)
}

fn diffusion_step(
    solver: &DirichletSolver,
    mass: &[f64],
    tau: f64,
    u_n: &NodalField,
    rhs_field: &NodalField,
    g: &NodalField,
) -> Result<NodalField> {
    let b: Vec<f64> = mass
        .iter()
        .zip(u_n.iter().zip(rhs_field.iter()))
        .map(|(m, (u, r))| m * (u + tau * r))
        .collect();
    solver.solve(&b, g)
}

/// `w^{n+1} = e^{-γτ} w^n + (1 - e^{-γτ}) u^{n+1}`.
pub fn substep_w(w_n: &NodalField, u_np1: &NodalField, tau: f64, gamma: f64) -> NodalField {
    assert_eq!(w_n.len(), u_np1.len());
    let a = (-gamma * tau).exp();
    w_n.iter()
        .zip(u_np1.iter())
        .map(|(w, u)| a * w + (1.0 - a) * u)
        .collect::<Vec<_>>()
        .into()
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub u: NodalField,
    pub w: NodalField,
    pub log: IterationLog,
    pub gamma: f64,
}

/// Everything a run needs that does not change between iterations.
struct Stepper<'a> {
    problem: &'a ProblemSpec,
    mesh: &'a Triangulation,
    geometry: &'a NodeGeometry,
    mass: Vec<f64>,
    diffusion: DirichletSolver,
    recovery: Option<HessianRecovery>,
}

impl Stepper<'_> {
    fn rhs(&self, w: &NodalField) -> Result<(NodalField, usize)> {
        let hessian = |w| match &self.recovery {
            Some(r) => r.recover(w, self.mesh, self.geometry),
            None => unreachable!("fully nonlinear problem without Hessian recovery"),
        };
        match self.problem.kind {
            ProblemKind::Semilinear { .. } => Ok((semilinear_rhs(w, self.problem, self.mesh)?, 0)),
            ProblemKind::MongeAmpere { .. } => {
                let r = monge_ampere_rhs(&hessian(w)?, self.problem, self.mesh)?;
                Ok((r.rhs, r.clamp_events))
            }
            ProblemKind::Pucci { .. } => Ok((pucci_rhs(&hessian(w)?, self.problem, self.mesh)?, 0)),
        }
    }
}

/// Runs the splitting from the standard initial guess.
pub fn run(
    problem: &ProblemSpec,
    mesh: &Triangulation,
    geometry: &NodeGeometry,
    config: &SplittingConfig,
) -> Result<RunOutcome> {
    run_from(problem, mesh, geometry, config, None)
}

/// Runs the splitting, optionally from a caller-supplied `(u⁰, w⁰)`.
pub fn run_from(
    problem: &ProblemSpec,
    mesh: &Triangulation,
    geometry: &NodeGeometry,
    config: &SplittingConfig,
    start: Option<(NodalField, NodalField)>,
) -> Result<RunOutcome> {
    config.validate()?;
    let gamma = match config.gamma {
        Some(g) => g,
        None => smallest_laplacian_eigenvalue(mesh)?,
    };
    let stiffness = assemble_stiffness(mesh);
    let mass_op = assemble_lumped_mass(mesh, geometry);
    let (mut u, mut w) = match start {
        Some((u, w)) => {
            if u.len() != mesh.n_total() || w.len() != mesh.n_total() {
                return Err(Error::InvalidArgument("initial fields do not match the mesh".into()));
            }
            (u, w)
        }
        None => {
            let laplace = DirichletSolver::new(&stiffness, mesh, SolverKind::Direct)?;
            initialize_with(problem, mesh, &mass_op, &laplace)?
        }
    };
    let recovery = match problem.kind {
        ProblemKind::Semilinear { .. } => None,
        _ => Some(HessianRecovery::new(config.hessian, mesh, geometry)?),
    };
    let stepper = Stepper {
        problem,
        mesh,
        geometry,
        mass: mass_op.diagonal(),
        diffusion: DirichletSolver::new(&mass_op.combine(1.0, &stiffness, config.tau), mesh, config.solver)?,
        recovery,
    };
    let g = problem.boundary_field(mesh);
    let exact = problem.exact_field(mesh);

    let mut log = IterationLog {
        records: Vec::new(),
        status: RunStatus::MaxIterations,
    };
    for n in 1..=config.max_iterations {
        let step = stepper
            .rhs(&w)
            .and_then(|(rhs, clamps)| {
                diffusion_step(&stepper.diffusion, &stepper.mass, config.tau, &u, &rhs, &g).map(|u| (u, clamps))
            });
        let (u_next, clamp_events) = match step {
            Ok(v) => v,
            Err(source) => {
                return Err(Error::SplittingAborted {
                    iteration: n,
                    log: Box::new(log),
                    source: Box::new(source),
                })
            }
        };
        let increment_l2 = l2_norm(&u_next.difference(&u), geometry);
        w = substep_w(&w, &u_next, config.tau, gamma);
        u = u_next;
        let (err_l2, err_linf) = match &exact {
            Some(ex) => {
                let e = u.difference(ex);
                (Some(l2_norm(&e, geometry)), Some(linf_norm(&e)))
            }
            None => (None, None),
        };
        log.records.push(IterationRecord {
            n,
            increment_l2,
            err_l2,
            err_linf,
            clamp_events,
        });
        if !increment_l2.is_finite() || increment_l2 > DIVERGENCE_THRESHOLD {
            log.status = RunStatus::Diverged;
            break;
        }
        if increment_l2 < config.stop_tol {
            log.status = RunStatus::Converged;
            break;
        }
    }
    Ok(RunOutcome { u, w, log, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionDiagnostic {
    pub c: f64,
    pub c1: f64,
    pub lipschitz: f64,
    /// `4L < γ < 1/C₁²` and `τ < 1/γ`.
    pub satisfied: bool,
}

/// Contraction constant of the semilinear scheme for step `tau`, rate
/// `gamma`, Poincaré constant `c1` and Lipschitz constant `lipschitz`.
pub fn contraction_diagnostic(tau: f64, gamma: f64, c1: f64, lipschitz: f64) -> ContractionDiagnostic {
    let decay = (-gamma * tau).exp();
    let damp = (2.0 - decay) / (1.0 + tau / (c1 * c1));
    let c = damp.max(decay + damp * lipschitz * tau);
    ContractionDiagnostic {
        c,
        c1,
        lipschitz,
        satisfied: 4.0 * lipschitz < gamma && gamma < 1.0 / (c1 * c1) && tau < 1.0 / gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_node_geometry, generate_regular_square};
    use crate::problems::{lookup, ProblemParams};

    fn square(n: usize) -> (Triangulation, NodeGeometry) {
        let m = generate_regular_square(n).unwrap();
        let g = compute_node_geometry(&m);
        (m, g)
    }

    #[test]
    fn initialize_reproduces_affine_data() {
        let (m, geo) = square(6);
        let affine = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 0.5 * p[1];
        let semi = ProblemSpec::semilinear("s", |_, _| 0.0, 0.0, affine);
        let (u, w) = initialize(&semi, &m, &geo).unwrap();
        assert_eq!(u, w);
        for (j, &p) in m.nodes().iter().enumerate() {
            assert!((u[j] - affine(p)).abs() < 1e-10);
        }
        let ma = ProblemSpec::monge_ampere("m", |_| 0.0, affine);
        let (u, _) = initialize(&ma, &m, &geo).unwrap();
        for (j, &p) in m.nodes().iter().enumerate() {
            assert!((u[j] - affine(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn pucci_initial_guess_obeys_maximum_principle() {
        let (m, geo) = square(10);
        let p = lookup("pucci-smooth", &ProblemParams::default()).unwrap();
        let (u, _) = initialize(&p, &m, &geo).unwrap();
        let g = p.boundary_field(&m);
        let gb = &g[m.n_interior()..];
        let lo = gb.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(u.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn substep_u_cases() {
        let (m, geo) = square(8);
        let n = m.n_total();
        let cfg = SplittingConfig::default();
        let z = NodalField::zeros(n);
        let u = substep_u(&z, &z, &cfg, &m, &geo, &z).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));

        // A discrete solution of -Δu = r is a fixed point.
        let r = NodalField::interpolate(&m, |p| p[0] * p[1] + 1.0);
        let g = NodalField::interpolate(&m, |p| p[0] - p[1]);
        let k = assemble_stiffness(&m);
        let mass = assemble_lumped_mass(&m, &geo);
        let fixed = crate::fem::solve_dirichlet(&k, &mass.apply(&r).into(), &g, &m).unwrap();
        let next = substep_u(&fixed, &r, &cfg, &m, &geo, &g).unwrap();
        assert!(linf_norm(&next.difference(&fixed)) < 1e-10);

        let tiny = SplittingConfig { tau: 1e-12, ..cfg };
        let next = substep_u(&fixed, &NodalField::interpolate(&m, |_| 50.0), &tiny, &m, &geo, &g).unwrap();
        assert!(linf_norm(&next.difference(&fixed)) <= 1e-8);
    }

    #[test]
    fn substep_w_cases() {
        let w = NodalField::from(vec![1.0, -2.0, 3.0]);
        let u = NodalField::from(vec![0.5, 4.0, -1.0]);
        let fast = substep_w(&w, &u, 1.0, 100.0);
        for (a, b) in fast.iter().zip(u.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        assert_eq!(substep_w(&w, &u, 0.0, 5.0), w);
        assert_eq!(substep_w(&w, &w, 0.7, 5.0), w);
    }

    #[test]
    fn contraction_examples() {
        let d = contraction_diagnostic(1e-8, 1.0, 1.0, 0.0);
        assert!((d.c - 1.0).abs() <= 1e-6);
        let d = contraction_diagnostic(1.0, 100.0, 1.0, 0.0);
        let e = (-100f64).exp();
        assert_eq!(d.c, ((2.0 - e) / 2.0).max(e));
        // 1 - e/2 rounds to 1 in double precision.
        assert!(d.c <= 1.0);
        let d = contraction_diagnostic(0.1, 1.0, 0.5, 0.25);
        assert!(!d.satisfied);
        let d = contraction_diagnostic(0.1, 1.0, 0.5, 0.2);
        assert!(d.satisfied);
    }

    #[test]
    fn config_validation() {
        assert!(SplittingConfig::default().validate().is_ok());
        let bad = [
            SplittingConfig { tau: 0.0, ..Default::default() },
            SplittingConfig { gamma: Some(-1.0), ..Default::default() },
            SplittingConfig { stop_tol: 0.0, ..Default::default() },
            SplittingConfig { max_iterations: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn quadratic_exact_start_is_steady() {
        let (m, geo) = square(10);
        let p = lookup("ma-quadratic", &ProblemParams::default()).unwrap();
        let ex = p.exact_field(&m).unwrap();
        let cfg = SplittingConfig { max_iterations: 1, ..Default::default() };
        let out = run_from(&p, &m, &geo, &cfg, Some((ex.clone(), ex))).unwrap();
        assert!(out.log.records[0].increment_l2 <= 1e-10);
    }

    #[test]
    fn log_csv_columns() {
        let log = IterationLog {
            records: vec![
                IterationRecord { n: 1, increment_l2: 0.5, err_l2: None, err_linf: None, clamp_events: 0 },
                IterationRecord { n: 2, increment_l2: 0.25, err_l2: Some(1e-3), err_linf: Some(2e-3), clamp_events: 0 },
            ],
            status: RunStatus::Converged,
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,increment_l2,err_l2,err_linf");
        assert_eq!(lines[1], "1,5e-1,,");
        assert_eq!(lines[2], "2,2.5e-1,1e-3,2e-3");
    }
}
