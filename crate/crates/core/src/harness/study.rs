use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{create_file, write_field_csv, MeshFamily};
use crate::error::{Error, Result};
use crate::fem::{l2_norm, linf_norm};
use crate::hessian::HessianConfig;
use crate::mesh::{compute_node_geometry, DomainTag, Triangulation};
use crate::problems::{lookup, ProblemParams, ProblemSpec};
use crate::splitting::{run, RunOutcome, SplittingConfig};

/// A mesh-refinement study of one registered problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub problem: String,
    pub params: ProblemParams,
    pub mesh: MeshFamily,
    /// Strictly decreasing. File meshes take a single entry, which is ignored.
    pub h_values: Vec<f64>,
    pub config: SplittingConfig,
    /// Overrides the per-family recovery settings.
    pub hessian: Option<HessianConfig>,
    /// Report, histories and fields are written here when set.
    pub out_dir: Option<PathBuf>,
}

impl StudyPlan {
    pub fn new(problem: impl Into<String>, mesh: MeshFamily, h_values: Vec<f64>) -> Self {
        StudyPlan {
            problem: problem.into(),
            params: ProblemParams::default(),
            mesh,
            h_values,
            config: SplittingConfig::default(),
            hessian: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() {
            return Err(Error::InvalidArgument("a study needs at least one mesh size".into()));
        }
        if let Some(h) = self.h_values.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("mesh sizes must be strictly decreasing".into()));
        }
        if matches!(self.mesh, MeshFamily::File(_)) && self.h_values.len() > 1 {
            return Err(Error::InvalidArgument("a mesh file gives a single level".into()));
        }
        self.config.validate()?;
        if let Some(h) = &self.hessian {
            h.validate()?;
        }
        Ok(())
    }
}

/// One row of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub problem: String,
    pub mesh: String,
    pub h: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub status: String,
    pub err_l2: Option<f64>,
    pub err_linf: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_linf: Option<f64>,
    pub min_value: Option<f64>,
    pub cpu_seconds: f64,
    /// Clamped radicands in the final iteration.
    pub clamp_events: usize,
    /// Clamped radicands over the whole run.
    pub clamp_total: usize,
    pub gamma: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub problem: String,
    pub params: ProblemParams,
    pub levels: Vec<LevelRecord>,
}

impl RunReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for level in &self.levels {
            w.serialize(level)?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<LevelRecord>> {
        csv::Reader::from_reader(input)
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect()
    }
}

/// Empirical order of convergence between two levels.
pub fn compute_rate(err_coarse: f64, err_fine: f64, h_coarse: f64, h_fine: f64) -> Result<f64> {
    if [err_coarse, err_fine, h_coarse, h_fine].iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "rate needs positive inputs, got errors ({err_coarse}, {err_fine}) and sizes ({h_coarse}, {h_fine})"
        )));
    }
    if h_coarse <= h_fine {
        return Err(Error::InvalidArgument(format!(
            "coarse size {h_coarse} must exceed fine size {h_fine}"
        )));
    }
    Ok((err_coarse / err_fine).ln() / (h_coarse / h_fine).ln())
}

/// Runs every level of `plan`. Failures of individual levels are recorded in
/// their rows; only an invalid plan or an output error aborts the study.
pub fn run_study(plan: &StudyPlan) -> Result<RunReport> {
    plan.validate()?;
    let problem = lookup(&plan.problem, &plan.params)?;
    if let Some(dir) = &plan.out_dir {
        super::ensure_writable_dir(dir)?;
    }
    let mut levels: Vec<LevelRecord> = Vec::with_capacity(plan.h_values.len());
    for (k, &h) in plan.h_values.iter().enumerate() {
        let mut record = LevelRecord {
            problem: plan.problem.clone(),
            mesh: plan.mesh.to_string(),
            h,
            nodes: 0,
            iterations: 0,
            status: "failed".into(),
            err_l2: None,
            err_linf: None,
            rate_l2: None,
            rate_linf: None,
            min_value: None,
            cpu_seconds: 0.0,
            clamp_events: 0,
            clamp_total: 0,
            gamma: None,
            failure: None,
        };
        let start = Instant::now();
        match solve_level(plan, &problem, h) {
            Ok((mesh, outcome)) => {
                record.cpu_seconds = start.elapsed().as_secs_f64();
                record.h = mesh.h();
                record.nodes = mesh.n_total();
                record.iterations = outcome.log.iterations();
                record.status = outcome.log.status.as_str().into();
                record.min_value = Some(outcome.u.min());
                record.clamp_events = outcome.log.last().map_or(0, |r| r.clamp_events);
                record.clamp_total = outcome.log.total_clamp_events();
                record.gamma = Some(outcome.gamma);
                if let Some(exact) = problem.exact_field(&mesh) {
                    let geometry = compute_node_geometry(&mesh);
                    let e = outcome.u.difference(&exact);
                    record.err_l2 = Some(l2_norm(&e, &geometry));
                    record.err_linf = Some(linf_norm(&e));
                }
                if let Some(dir) = &plan.out_dir {
                    let tag = format!("level{}", k + 1);
                    outcome.log.write_csv(create_file(&dir.join(format!("{tag}_history.csv")))?)?;
                    write_field_csv(
                        create_file(&dir.join(format!("{tag}_field.csv")))?,
                        &mesh,
                        &outcome.u,
                        &outcome.w,
                    )?;
                }
            }
            Err(e) => {
                record.cpu_seconds = start.elapsed().as_secs_f64();
                if let Error::SplittingAborted { log, .. } = &e {
                    record.iterations = log.iterations();
                }
                record.failure = Some(e.to_string());
            }
        }
        if let Some(prev) = levels.last() {
            let rate = |a: Option<f64>, b: Option<f64>| compute_rate(a?, b?, prev.h, record.h).ok();
            record.rate_l2 = rate(prev.err_l2, record.err_l2);
            record.rate_linf = rate(prev.err_linf, record.err_linf);
        }
        levels.push(record);
    }
    let report = RunReport {
        problem: plan.problem.clone(),
        params: plan.params,
        levels,
    };
    if let Some(dir) = &plan.out_dir {
        report.write_csv(create_file(&dir.join("report.csv"))?)?;
    }
    Ok(report)
}

fn solve_level(plan: &StudyPlan, problem: &ProblemSpec, h: f64) -> Result<(Triangulation, RunOutcome)> {
    let mesh = plan.mesh.build(h)?;
    let tag = mesh.domain_tag();
    if tag != DomainTag::External && !problem.domains.contains(&tag) {
        return Err(Error::InvalidArgument(format!(
            "problem `{}` is not posed on the {tag} domain",
            problem.name
        )));
    }
    let geometry = compute_node_geometry(&mesh);
    let config = SplittingConfig {
        hessian: plan.hessian.unwrap_or_else(|| plan.mesh.default_hessian(mesh.h())),
        ..plan.config
    };
    let outcome = run(problem, &mesh, &geometry, &config)?;
    Ok((mesh, outcome))
}
