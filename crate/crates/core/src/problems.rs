//! Problem families, their right-hand-side evaluators and the benchmark registry.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::NodalField;
use crate::hessian::HessianField;
use crate::mesh::{DomainTag, Point, Triangulation};

pub type SpatialFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SemilinearSource = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ProblemKind {
    /// `-Δu = f(x, u)`; `lipschitz` bounds `|f(x,a) - f(x,b)| / |a - b|`.
    Semilinear { source: SemilinearSource, lipschitz: f64 },
    /// `det D²u = f`, `u` convex. `degenerate` allows `f = 0`.
    MongeAmpere { source: SpatialFn, degenerate: bool },
    /// `α λ₁ + λ₂ = 0`.
    Pucci { alpha: f64 },
}

impl ProblemKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemKind::Semilinear { .. } => "semilinear",
            ProblemKind::MongeAmpere { .. } => "monge-ampere",
            ProblemKind::Pucci { .. } => "pucci",
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    /// Dirichlet data `g`.
    pub boundary: SpatialFn,
    pub exact: Option<SpatialFn>,
    /// Domains the instance is posed on.
    pub domains: Vec<DomainTag>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("kind", &self.kind.label())
            .field("has_exact", &self.exact.is_some())
            .field("domains", &self.domains)
            .finish()
    }
}

impl ProblemSpec {
    pub fn semilinear(
        name: impl Into<String>,
        source: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        boundary: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Semilinear {
                source: Arc::new(source),
                lipschitz,
            },
            boundary: Arc::new(boundary),
            exact: None,
            domains: vec![DomainTag::UnitSquare],
        }
    }

    pub fn monge_ampere(
        name: impl Into<String>,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
        boundary: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            name: name.into(),
            kind: ProblemKind::MongeAmpere {
                source: Arc::new(source),
                degenerate: false,
            },
            boundary: Arc::new(boundary),
            exact: None,
            domains: vec![DomainTag::UnitSquare],
        }
    }

    pub fn pucci(
        name: impl Into<String>,
        alpha: f64,
        boundary: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidArgument(format!("Pucci parameter alpha must exceed 1, got {alpha}")));
        }
        Ok(ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Pucci { alpha },
            boundary: Arc::new(boundary),
            exact: None,
            domains: vec![DomainTag::UnitSquare],
        })
    }

    pub fn with_exact(mut self, exact: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn on_domains(mut self, domains: &[DomainTag]) -> Self {
        self.domains = domains.to_vec();
        self
    }

    fn degenerate(mut self) -> Self {
        if let ProblemKind::MongeAmpere { degenerate, .. } = &mut self.kind {
            *degenerate = true;
        }
        self
    }

    pub fn boundary_field(&self, mesh: &Triangulation) -> NodalField {
        NodalField::interpolate(mesh, |p| (self.boundary)(p))
    }

    pub fn exact_field(&self, mesh: &Triangulation) -> Option<NodalField> {
        self.exact
            .as_ref()
            .map(|u| NodalField::interpolate(mesh, |p| u(p)))
    }
}

/// Right-hand side together with the number of clamped negative radicands.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsEvaluation {
    pub rhs: NodalField,
    pub clamp_events: usize,
}

/// `rhs(Q_j) = f(Q_j, w(Q_j))` at every node.
pub fn semilinear_rhs(w: &NodalField, spec: &ProblemSpec, mesh: &Triangulation) -> Result<NodalField> {
    let ProblemKind::Semilinear { source, .. } = &spec.kind else {
        return Err(wrong_kind(spec, "semilinear"));
    };
    Ok(mesh
        .nodes()
        .iter()
        .zip(w.iter())
        .map(|(&p, &wj)| source(p, wj))
        .collect::<Vec<_>>()
        .into())
}

/// `rhs = -sqrt((Δw)² - 4 det D²w + 4f)` at interior nodes, zero on the boundary.
///
/// Negative radicands are clamped to zero and counted.
pub fn monge_ampere_rhs(h: &HessianField, spec: &ProblemSpec, mesh: &Triangulation) -> Result<RhsEvaluation> {
    let ProblemKind::MongeAmpere { source, degenerate } = &spec.kind else {
        return Err(wrong_kind(spec, "monge-ampere"));
    };
    let mut rhs = NodalField::zeros(mesh.n_total());
    let mut clamp_events = 0;
    for j in 0..mesh.n_interior() {
        let f = source(mesh.node(j));
        if !(f > 0.0) && !(*degenerate && f == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Monge-Ampere data f = {f} at node {j} {:?} is not positive",
                mesh.node(j)
            )));
        }
        let (a, b, c) = (h.d11[j], h.d12[j], h.d22[j]);
        let lap = a + c;
        let radicand = lap * lap - 4.0 * (a * c - b * b) + 4.0 * f;
        let radicand = if radicand < 0.0 {
            clamp_events += 1;
            0.0
        } else {
            radicand
        };
        rhs[j] = -radicand.sqrt();
    }
    Ok(RhsEvaluation { rhs, clamp_events })
}

/// `rhs = (α-1)/(α+1) · sqrt((d11 - d22)² + 4 d12²)` at every node.
pub fn pucci_rhs(h: &HessianField, spec: &ProblemSpec, mesh: &Triangulation) -> Result<NodalField> {
    let ProblemKind::Pucci { alpha } = spec.kind else {
        return Err(wrong_kind(spec, "pucci"));
    };
    let factor = (alpha - 1.0) / (alpha + 1.0);
    Ok((0..mesh.n_total())
        .map(|j| {
            let (a, b, c) = (h.d11[j], h.d12[j], h.d22[j]);
            factor * ((a - c) * (a - c) + 4.0 * b * b).sqrt()
        })
        .collect::<Vec<_>>()
        .into())
}

fn wrong_kind(spec: &ProblemSpec, expected: &str) -> Error {
    Error::InvalidArgument(format!(
        "problem `{}` is {}, expected {expected}",
        spec.name,
        spec.kind.label()
    ))
}

/// Tunable parameters of the registered instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    /// Lipschitz constant `L` of `semilinear-cos`.
    pub lipschitz: f64,
    /// Pucci `α`.
    pub alpha: f64,
    /// Anisotropy `β` of `ma-quadratic`.
    pub beta: f64,
    /// Ramp half-width of `pucci-indicator`.
    pub delta: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            lipschitz: 0.5,
            alpha: 2.0,
            beta: 1.0,
            delta: 1.0 / 16.0,
        }
    }
}

pub const PROBLEM_NAMES: [&str; 8] = [
    "semilinear-cos",
    "ma-quadratic",
    "ma-exp",
    "ma-obstacle",
    "ma-singular",
    "ma-no-classical",
    "pucci-smooth",
    "pucci-indicator",
];

/// All registered instances built with `params`.
pub fn registry(params: &ProblemParams) -> Result<BTreeMap<&'static str, ProblemSpec>> {
    PROBLEM_NAMES
        .iter()
        .map(|&name| lookup(name, params).map(|p| (name, p)))
        .collect()
}

pub fn lookup(name: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let ProblemParams {
        lipschitz,
        alpha,
        beta,
        delta,
    } = *params;
    let spec = match name {
        "semilinear-cos" => {
            let g = |p: Point| (PI * p[0]).cos() * (PI * p[1]).cos();
            ProblemSpec::semilinear(
                name,
                move |p, u| {
                    let gp = g(p);
                    lipschitz * u.abs() + 2.0 * PI * PI * gp - lipschitz * gp.abs()
                },
                lipschitz,
                g,
            )
            .with_exact(g)
        }
        "ma-quadratic" => {
            if !(beta > 0.0) {
                return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
            }
            let u = move |p: Point| {
                8.0 * (beta * (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) / beta) - 1.0
            };
            ProblemSpec::monge_ampere(name, |_| 256.0, u).with_exact(u)
        }
        "ma-exp" => {
            let u = |p: Point| (0.5 * (p[0] * p[0] + p[1] * p[1])).exp();
            ProblemSpec::monge_ampere(
                name,
                |p| {
                    let r2 = p[0] * p[0] + p[1] * p[1];
                    (1.0 + r2) * r2.exp()
                },
                u,
            )
            .with_exact(u)
            .on_domains(&[DomainTag::UnitSquare, DomainTag::HalfUnitDisk])
        }
        "ma-obstacle" => {
            let dist = |p: Point| (p[0] - 0.5).hypot(p[1] - 0.5);
            let u = move |p: Point| 0.5 * (dist(p) - 0.2).max(0.0).powi(2);
            ProblemSpec::monge_ampere(name, move |p| (1.0 - 0.2 / dist(p)).max(0.0), u)
                .with_exact(u)
                .degenerate()
        }
        "ma-singular" => {
            let r2 = |p: Point| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2);
            ProblemSpec::monge_ampere(name, move |p| 4.0 / (1.0 - 4.0 * r2(p)).powi(2), |_| 0.0)
                .with_exact(move |p| -0.5 * (1.0 - 4.0 * r2(p)).max(0.0).sqrt())
                .on_domains(&[DomainTag::HalfUnitDisk])
        }
        "ma-no-classical" => ProblemSpec::monge_ampere(name, |_| 1.0, |_| 0.0)
            .on_domains(&[DomainTag::UnitSquare, DomainTag::EyeShaped]),
        "pucci-smooth" => {
            let u = move |p: Point| -((p[0] + 1.0).hypot(p[1] + 1.0)).powf(1.0 - alpha);
            ProblemSpec::pucci(name, alpha, u)?.with_exact(u)
        }
        "pucci-indicator" => {
            if !(delta > 0.0 && delta < 0.25) {
                return Err(Error::InvalidArgument(format!("delta must lie in (0, 1/4), got {delta}")));
            }
            ProblemSpec::pucci(name, alpha, move |p| regularized_indicator(p, delta))?
        }
        _ => {
            return Err(Error::UnknownProblem {
                name: name.to_string(),
                valid: PROBLEM_NAMES.join(", "),
            })
        }
    };
    Ok(spec)
}

/// Smoothed boundary data of `pucci-indicator`: 0 on the middle halves of the
/// four sides, 1 near the corners, sine ramps of half-width `delta` between.
/// Off the boundary the nearest side decides.
pub fn regularized_indicator(p: Point, delta: f64) -> f64 {
    let [x1, x2] = p;
    // (distance to side, coordinate along side)
    let sides = [(x2, x1), (1.0 - x1, x2), (1.0 - x2, x1), (x1, x2)];
    let &(_, s) = sides
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    side_ramp(s, delta)
}

fn side_ramp(s: f64, delta: f64) -> f64 {
    let q = PI / 2.0 / delta;
    if s <= 0.25 - delta || s >= 0.75 + delta {
        1.0
    } else if s <= 0.25 + delta {
        0.5 * (1.0 - (q * (s - 0.25)).sin())
    } else if s <= 0.75 - delta {
        0.0
    } else {
        0.5 * (1.0 + (q * (s - 0.75)).sin())
    }
}
