//! Convergence studies, cross-sections and the file formats used by the CLI.

mod config;
mod section;
mod study;

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{parse_config, ConfigFile};
pub use section::{cross_section, Line, SectionSample};
pub use study::{compute_rate, run_study, LevelRecord, RunReport, StudyPlan};

use crate::error::{Error, Result};
use crate::fem::NodalField;
use crate::hessian::HessianConfig;
use crate::mesh::{generate_eye_domain, generate_half_unit_disk, generate_regular_square, load_mesh, Triangulation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshFamily {
    Regular,
    Disk,
    Eye,
    File(PathBuf),
}

impl MeshFamily {
    /// Builds the member of the family with spacing closest to `h`.
    /// File meshes ignore `h`.
    pub fn build(&self, h: f64) -> Result<Triangulation> {
        let count = |scale: f64| {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
            }
            Ok((scale / h).round() as usize)
        };
        match self {
            MeshFamily::Regular => generate_regular_square(count(1.0)?),
            MeshFamily::Disk => generate_half_unit_disk(count(0.5)?),
            MeshFamily::Eye => generate_eye_domain(count(1.0)?),
            MeshFamily::File(path) => load_mesh(path),
        }
    }

    /// Recovery settings for a mesh of this family: no smoothing or boundary
    /// repair on the regular grid, `ε = h²` with repair otherwise.
    pub fn default_hessian(&self, h: f64) -> HessianConfig {
        match self {
            MeshFamily::Regular => HessianConfig::regular(),
            _ => HessianConfig::unstructured(h),
        }
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(MeshFamily::Regular),
            "disk" => Ok(MeshFamily::Disk),
            "eye" => Ok(MeshFamily::Eye),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(MeshFamily::File(PathBuf::from(p))),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown mesh `{s}` (expected regular, disk, eye or file:PATH)"
                ))),
            },
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshFamily::Regular => f.write_str("regular"),
            MeshFamily::Disk => f.write_str("disk"),
            MeshFamily::Eye => f.write_str("eye"),
            MeshFamily::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Parses `1/N` or a decimal.
pub fn parse_h(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse mesh size `{s}`"));
    let h = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(bad())
    }
}

/// Parses a comma-separated list of mesh sizes.
pub fn parse_h_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_h).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FieldRow {
    node_index: usize,
    x: f64,
    y: f64,
    u: f64,
    w: f64,
}

/// Writes `node_index,x,y,u,w`.
pub fn write_field_csv<W: Write>(out: W, mesh: &Triangulation, u: &NodalField, w: &NodalField) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    for (j, &[x, y]) in mesh.nodes().iter().enumerate() {
        wr.serialize(FieldRow {
            node_index: j,
            x,
            y,
            u: u[j],
            w: w[j],
        })?;
    }
    wr.flush().map_err(|e| Error::io("<field>", e))?;
    Ok(())
}

/// Reads a field dump back onto `mesh`, checking node coordinates.
pub fn read_field_csv<R: Read>(input: R, mesh: &Triangulation) -> Result<(NodalField, NodalField)> {
    let mut u = vec![f64::NAN; mesh.n_total()];
    let mut w = vec![f64::NAN; mesh.n_total()];
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: FieldRow = row?;
        let Some(p) = mesh.nodes().get(r.node_index) else {
            return Err(Error::InvalidArgument(format!(
                "field node {} outside a mesh of {} nodes",
                r.node_index,
                mesh.n_total()
            )));
        };
        if (p[0] - r.x).abs() > 1e-9 || (p[1] - r.y).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "field node {} at ({}, {}) does not match mesh node {:?}",
                r.node_index, r.x, r.y, p
            )));
        }
        u[r.node_index] = r.u;
        w[r.node_index] = r.w;
    }
    if let Some(j) = u.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("field has no value for node {j}")));
    }
    Ok((u.into(), w.into()))
}

/// Creates `dir` if needed and checks that files can be written into it.
pub fn ensure_writable_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".splitfem-write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

pub(crate) fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
