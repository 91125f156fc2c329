//! Plain-text mesh format.
//!
//! ```text
//! meshfmt 1
//! vertices <count>
//! x y
//! triangles <count>
//! i j k tag        # tag 1 = Y1, 2 = Y2
//! interface_edges <count>
//! i j
//! periodic_pairs <count>
//! master slave
//! ```
//!
//! Indices are 0-based; floats carry 17 significant digits. Outer boundary
//! edges are not stored and are recovered from the topology on reading.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BoundaryTag, Phase, TriangleMesh};
use crate::error::{Error, Result};

pub fn format_mesh(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    out.push_str("meshfmt 1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for (t, tag) in mesh.triangles.iter().zip(&mesh.tags) {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], tag.label());
    }
    let interface: Vec<[usize; 2]> = mesh.interface_edges().collect();
    let _ = writeln!(out, "interface_edges {}", interface.len());
    for [a, b] in interface {
        let _ = writeln!(out, "{a} {b}");
    }
    let _ = writeln!(out, "periodic_pairs {}", mesh.periodic_pairs.len());
    for (m, s) in &mesh.periodic_pairs {
        let _ = writeln!(out, "{m} {s}");
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        for (i, raw) in self.inner.by_ref() {
            self.line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                return Ok(content.split_whitespace().collect());
            }
        }
        Err(self.error("unexpected end of file"))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn header(&mut self, name: &str) -> Result<usize> {
        let fields = self.next_fields()?;
        match fields.as_slice() {
            [key, count] if *key == name => count
                .parse()
                .map_err(|_| self.error(format!("invalid count `{count}` for `{name}`"))),
            _ => Err(self.error(format!("expected `{name} <count>`"))),
        }
    }

    fn record<T: FromStr, const N: usize>(&mut self) -> Result<[T; N]> {
        let fields = self.next_fields()?;
        if fields.len() != N {
            return Err(self.error(format!("expected {N} fields, found {}", fields.len())));
        }
        let mut parsed = Vec::with_capacity(N);
        for f in fields {
            parsed.push(f.parse::<T>().map_err(|_| self.error(format!("cannot parse `{f}`")))?);
        }
        parsed
            .try_into()
            .map_err(|_| self.error("field count mismatch"))
    }
}

/// Parses and validates a mesh in the text format.
pub fn parse_mesh(text: &str) -> Result<TriangleMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next_fields()?;
    if magic != ["meshfmt", "1"] {
        return Err(lines.error("expected header `meshfmt 1`"));
    }
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let p: [f64; 2] = lines.record()?;
        if !p.iter().all(|c| c.is_finite()) {
            return Err(lines.error("non-finite coordinate"));
        }
        vertices.push(p);
    }
    let nt = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut tags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let [i, j, k, tag]: [usize; 4] = lines.record()?;
        if [i, j, k].iter().any(|&v| v >= nv) {
            return Err(lines.error("vertex index out of range"));
        }
        let phase = u8::try_from(tag)
            .ok()
            .and_then(Phase::from_label)
            .ok_or_else(|| lines.error(format!("unknown subdomain tag {tag}")))?;
        triangles.push([i, j, k]);
        tags.push(phase);
    }
    let ni = lines.header("interface_edges")?;
    let mut boundary_edges = Vec::with_capacity(ni);
    for _ in 0..ni {
        let [a, b]: [usize; 2] = lines.record()?;
        if a >= nv || b >= nv {
            return Err(lines.error("vertex index out of range"));
        }
        boundary_edges.push(([a, b], BoundaryTag::Interface));
    }
    let np = lines.header("periodic_pairs")?;
    let mut periodic_pairs = Vec::with_capacity(np);
    for _ in 0..np {
        let [m, s]: [usize; 2] = lines.record()?;
        periodic_pairs.push((m, s));
    }
    let mut mesh = TriangleMesh {
        vertices,
        triangles,
        tags,
        boundary_edges,
        periodic_pairs,
    };
    mesh.recompute_outer_edges();
    mesh.validate()?;
    Ok(mesh)
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}

/// Reads a mesh file; any parse or topology failure carries the path.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text).map_err(|e| Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}
