//! Native text mesh format.
//!
//! ```text
//! # comment
//! N_nodes N_triangles
//! x y flag        (N_nodes lines, flag 0 = interior, 1 = boundary)
//! i j k           (N_triangles lines, 0-based node indices)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{DomainTag, Point, Triangulation};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Triangulation> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

/// Parses mesh text; `origin` is only used in error messages.
pub fn parse_mesh(text: &str, origin: &Path) -> Result<Triangulation> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header `N_nodes N_triangles`".into()))?;
    let counts = parse_fields::<usize>(header, 2).map_err(|m| err(hline, m))?;
    let (n_nodes, n_tris) = (counts[0], counts[1]);

    let mut nodes: Vec<Point> = Vec::with_capacity(n_nodes);
    let mut flags = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {n_nodes} node lines, found {k}")))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(ln, format!("expected `x y flag`, found {} fields", f.len())));
        }
        let x: f64 = f[0].parse().map_err(|_| err(ln, format!("bad coordinate `{}`", f[0])))?;
        let y: f64 = f[1].parse().map_err(|_| err(ln, format!("bad coordinate `{}`", f[1])))?;
        let flag = match f[2] {
            "0" => false,
            "1" => true,
            other => return Err(err(ln, format!("boundary flag must be 0 or 1, found `{other}`"))),
        };
        nodes.push([x, y]);
        flags.push(flag);
    }

    let mut triangles = Vec::with_capacity(n_tris);
    for k in 0..n_tris {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {n_tris} triangle lines, found {k}")))?;
        let v = parse_fields::<usize>(l, 3).map_err(|m| err(ln, m))?;
        triangles.push([v[0], v[1], v[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected trailing content".into()));
    }

    Triangulation::from_raw(nodes, triangles, Some(&flags), None, DomainTag::External)
}

fn parse_fields<T: std::str::FromStr>(line: &str, expected: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(format!("expected {expected} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`")))
        .collect()
}

/// Serializes a mesh in the native format, in its internal node order.
pub fn write_mesh(mesh: &Triangulation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", mesh.n_total(), mesh.triangles().len());
    for (j, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], u8::from(mesh.is_boundary(j)));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Triangulation> {
        parse_mesh(text, Path::new("test.mesh"))
    }

    #[test]
    fn one_triangle_all_boundary() {
        let m = parse("# tiny\n3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n").unwrap();
        assert_eq!(m.n_interior(), 0);
        assert_eq!(m.domain_tag(), DomainTag::External);
    }

    #[test]
    fn clockwise_is_repaired() {
        let m = parse("3 1\n0 0 1\n0 1 1\n1 0 1\n0 1 2\n").unwrap();
        assert!(m.triangle_area(0) > 0.0);
    }

    #[test]
    fn dangling_node_rejected() {
        let e = parse("4 1\n0 0 1\n1 0 1\n0 1 1\n3 3 1\n0 1 2\n").unwrap_err();
        assert!(matches!(e, Error::InvalidMesh(_)), "{e}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse("3 1\n0 0 1\n1 zero 1\n0 1 1\n0 1 2\n").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let e = parse("# header next\n\n3 1\n0 0 1\n1 0 1\n0 1 1\n0 1\n").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn permutation_is_recorded() {
        // Interior node listed last in the file.
        let text = "5 4\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n0.5 0.5 0\n0 1 4\n1 2 4\n2 3 4\n3 0 4\n";
        let m = parse(text).unwrap();
        assert_eq!(m.n_interior(), 1);
        assert_eq!(m.node(0), [0.5, 0.5]);
        assert_eq!(m.original_index(0), 4);
        let again = parse(&write_mesh(&m)).unwrap();
        assert_eq!(again.nodes(), m.nodes());
    }
}
