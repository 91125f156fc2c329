use std::collections::HashMap;

use super::{cross, dist, sub, Phase, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Outer,
    Interface,
}

/// Conforming P1 triangulation with phase tags.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<Phase>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// `(master, slave)`; the slave sits on the right/top face (or a corner)
    /// and differs from its master by a unit lattice vector.
    pub periodic_pairs: Vec<(usize, usize)>,
}

impl TriangleMesh {
    /// Structured triangulation of (0,1)² with `n` intervals per side, every
    /// square split along its rising diagonal. No inclusion, no periodicity.
    pub fn unit_square(n: usize) -> Self {
        assert!(n >= 1);
        let h = 1.0 / n as f64;
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary_edges.push(([id(i, 0), id(i + 1, 0)], BoundaryTag::Outer));
            boundary_edges.push(([id(n, i), id(n, i + 1)], BoundaryTag::Outer));
            boundary_edges.push(([id(i + 1, n), id(i, n)], BoundaryTag::Outer));
            boundary_edges.push(([id(0, i + 1), id(0, i)], BoundaryTag::Outer));
        }
        let tags = vec![Phase::Y1; triangles.len()];
        Self {
            vertices,
            triangles,
            tags,
            boundary_edges,
            periodic_pairs: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Longest edge of the triangulation.
    pub fn mesh_size(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(p, q)| dist(self.vertices[p], self.vertices[q]))
            .fold(0.0, f64::max)
    }

    pub fn area(&self, phase: Phase) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.tags[t] == phase)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn interface_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.boundary_edges
            .iter()
            .filter(|(_, tag)| *tag == BoundaryTag::Interface)
            .map(|(e, _)| *e)
    }

    /// Maps every vertex to its periodic master (itself when unpaired).
    pub fn periodic_masters(&self) -> Vec<usize> {
        let mut master: Vec<usize> = (0..self.vertices.len()).collect();
        for &(m, s) in &self.periodic_pairs {
            master[s] = m;
        }
        master
    }

    /// Lattice vector `vertex - master(vertex)` for every vertex.
    pub fn lattice_offsets(&self) -> Vec<[i64; 2]> {
        let master = self.periodic_masters();
        (0..self.vertices.len())
            .map(|v| {
                let d = sub(self.vertices[v], self.vertices[master[v]]);
                [d[0].round() as i64, d[1].round() as i64]
            })
            .collect()
    }

    /// Edge → adjacent triangles.
    pub(crate) fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                map.entry((p.min(q), p.max(q))).or_default().push(t);
            }
        }
        map
    }

    /// Rebuilds the outer boundary edges from topology: edges with a single
    /// adjacent triangle that are not interface edges.
    pub(crate) fn recompute_outer_edges(&mut self) {
        let interface: std::collections::HashSet<(usize, usize)> = self
            .interface_edges()
            .map(|[a, b]| (a.min(b), a.max(b)))
            .collect();
        let edge_map = self.edge_triangles();
        let mut outer: Vec<[usize; 2]> = edge_map
            .iter()
            .filter(|(k, tris)| tris.len() == 1 && !interface.contains(k))
            .map(|(&(a, b), _)| [a, b])
            .collect();
        outer.sort_unstable();
        self.boundary_edges.retain(|(_, tag)| *tag == BoundaryTag::Interface);
        self.boundary_edges
            .extend(outer.into_iter().map(|e| (e, BoundaryTag::Outer)));
    }

    /// Checks orientation, non-degeneracy, interface separation and the
    /// periodic pairing.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.tags.len() != self.triangles.len() {
            return Err(Error::Topology("one phase tag per triangle required".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Topology(format!("triangle {t} references a missing vertex")));
            }
        }
        let h = self.mesh_size();
        for t in 0..self.triangles.len() {
            let area = self.signed_area(t);
            if !(area > 1e-14 * h * h) {
                return Err(Error::Topology(format!(
                    "triangle {t} is degenerate or negatively oriented (area {area:e})"
                )));
            }
        }

        let edge_map = self.edge_triangles();
        for (e, tris) in &edge_map {
            if tris.len() > 2 {
                return Err(Error::Topology(format!(
                    "edge {e:?} is shared by {} triangles",
                    tris.len()
                )));
            }
        }
        for [a, b] in self.interface_edges() {
            let tris = edge_map
                .get(&(a.min(b), a.max(b)))
                .ok_or_else(|| Error::Topology(format!("interface edge ({a}, {b}) is not a mesh edge")))?;
            let phases: Vec<Phase> = tris.iter().map(|&t| self.tags[t]).collect();
            let separates = match phases.as_slice() {
                [p, q] => p != q,
                [_] => true,
                _ => false,
            };
            if !separates {
                return Err(Error::Topology(format!(
                    "interface edge ({a}, {b}) does not separate Y1 from Y2"
                )));
            }
        }

        let mut is_slave = vec![false; n];
        for &(m, s) in &self.periodic_pairs {
            if m >= n || s >= n || m == s {
                return Err(Error::Topology(format!("invalid periodic pair ({m}, {s})")));
            }
            if is_slave[s] {
                return Err(Error::Topology(format!("vertex {s} is paired twice")));
            }
            is_slave[s] = true;
            let d = sub(self.vertices[s], self.vertices[m]);
            let lattice = [d[0].round(), d[1].round()];
            let on_lattice = (d[0] - lattice[0]).abs() < 1e-12 && (d[1] - lattice[1]).abs() < 1e-12;
            let unit = lattice.iter().all(|l| *l == 0.0 || *l == 1.0) && lattice != [0.0, 0.0];
            if !(on_lattice && unit) {
                return Err(Error::Topology(format!(
                    "periodic pair ({m}, {s}) is not separated by a unit lattice vector"
                )));
            }
        }
        for &(m, _) in &self.periodic_pairs {
            if is_slave[m] {
                return Err(Error::Topology(format!("master {m} is itself a slave")));
            }
        }
        Ok(())
    }
}
