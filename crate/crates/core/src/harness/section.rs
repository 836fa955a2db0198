use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::NodalField;
use crate::mesh::{Point, Triangulation};

/// The line `point + t · direction`, with `direction` of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: Point,
    pub direction: Point,
}

impl Line {
    pub fn new(point: Point, direction: Point) -> Result<Self> {
        let len = direction[0].hypot(direction[1]);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::InvalidArgument("line direction must be nonzero".into()));
        }
        Ok(Line {
            point,
            direction: [direction[0] / len, direction[1] / len],
        })
    }

    fn at(&self, t: f64) -> Point {
        [self.point[0] + t * self.direction[0], self.point[1] + t * self.direction[1]]
    }
}

/// Accepts `x1=C`, `x2=C`, `x1=x2`.
impl FromStr for Line {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidArgument(format!("cannot parse line `{s}` (expected x1=C, x2=C or x1=x2)"));
        let (lhs, rhs) = compact.split_once('=').ok_or_else(bad)?;
        match (lhs, rhs) {
            ("x1", "x2") | ("x2", "x1") => Line::new([0.0, 0.0], [1.0, 1.0]),
            ("x1", c) => Line::new([coordinate(c).ok_or_else(bad)?, 0.0], [0.0, 1.0]),
            ("x2", c) => Line::new([0.0, coordinate(c).ok_or_else(bad)?], [1.0, 0.0]),
            _ => Err(bad()),
        }
    }
}

/// `C` or `A/B`.
fn coordinate(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.parse::<f64>().ok()? / b.parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSample {
    /// Arc length from where the line enters the mesh.
    pub s: f64,
    pub point: Point,
    pub value: f64,
}

const TOL: f64 = 1e-12;

/// Samples the P1 function `u` at `n_samples` equispaced points between the
/// first and last intersections of `line` with the mesh. Points that fall in
/// gaps of a non-convex mesh are omitted; a line that misses the mesh gives
/// an empty result.
pub fn cross_section(u: &NodalField, mesh: &Triangulation, line: &Line, n_samples: usize) -> Result<Vec<SectionSample>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    if u.len() != mesh.n_total() {
        return Err(Error::InvalidArgument("field does not match the mesh".into()));
    }
    // Barycentric coordinates along the line are affine in t: λ_k = a_k + b_k t.
    let mut hits = Vec::new();
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|j| mesh.node(j));
        let area2 = 2.0 * mesh.triangle_area(k);
        let mut coeffs = [(0.0, 0.0); 3];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..3 {
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let lam = |q: Point| ((b[0] - q[0]) * (c[1] - q[1]) - (c[0] - q[0]) * (b[1] - q[1])) / area2;
            let a0 = lam(line.point);
            let a1 = lam(line.at(1.0)) - a0;
            coeffs[i] = (a0, a1);
            if a1.abs() < 1e-300 {
                if a0 < -TOL {
                    lo = f64::INFINITY;
                }
            } else if a1 > 0.0 {
                lo = lo.max((-TOL - a0) / a1);
            } else {
                hi = hi.min((-TOL - a0) / a1);
            }
        }
        if lo <= hi {
            hits.push((lo, hi, k, coeffs));
        }
    }
    if hits.is_empty() {
        return Ok(Vec::new());
    }
    let t0 = hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    let t1 = hits.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
    let ts: Vec<f64> = if n_samples == 1 {
        vec![0.5 * (t0 + t1)]
    } else {
        (0..n_samples)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n_samples - 1) as f64)
            .collect()
    };
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        let Some(&(_, _, k, coeffs)) = hits.iter().find(|h| h.0 <= t && t <= h.1) else {
            continue;
        };
        let tri = mesh.triangles()[k];
        let value = (0..3)
            .map(|i| (coeffs[i].0 + coeffs[i].1 * t) * u[tri[i]])
            .sum();
        out.push(SectionSample {
            s: t - t0,
            point: line.at(t),
            value,
        });
    }
    Ok(out)
}
