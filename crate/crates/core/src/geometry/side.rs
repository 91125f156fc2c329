use super::{cross, dist, Phase, Point, SurfaceMesh, TriangleMesh};
use crate::error::{Error, Result};

/// Triangulation of one phase (a cell side Y_j or a perforated domain Ω_ε^j)
/// with its interface edges expressed in the side's own vertex numbering.
///
/// The interface unknowns are a subset of the bulk unknowns, so a nodal
/// vector on this mesh carries the bulk field and its trace at once.
#[derive(Debug, Clone, PartialEq)]
pub struct SideMesh {
    pub phase: Phase,
    /// Period of the coefficients: data are evaluated at `frac(x/epsilon)`.
    pub epsilon: f64,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Interface edges, oriented counter-clockwise around each inclusion.
    pub surface_edges: Vec<[usize; 2]>,
    /// Interface vertices in polygon order (cell by cell for tilings).
    pub interface_nodes: Vec<usize>,
    /// Periodic master of every vertex (identity when not periodic).
    pub periodic_master: Vec<usize>,
}

impl SideMesh {
    /// Restricts the cell mesh to one phase. Vertices keep the relative order
    /// of the parent mesh.
    pub(crate) fn from_cell(mesh: &TriangleMesh, surface: &SurfaceMesh, phase: Phase) -> Result<Self> {
        let mut local = vec![usize::MAX; mesh.vertices.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if mesh.tags[t] == phase {
                for &v in tri {
                    local[v] = 0;
                }
            }
        }
        let mut vertices = Vec::new();
        for (v, slot) in local.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len();
                vertices.push(mesh.vertices[v]);
            }
        }
        let triangles = mesh
            .triangles
            .iter()
            .zip(&mesh.tags)
            .filter(|(_, &tag)| tag == phase)
            .map(|(tri, _)| tri.map(|v| local[v]))
            .collect();
        let mut interface_nodes = Vec::with_capacity(surface.node_count());
        for &v in &surface.vertex_ids {
            if local[v] == usize::MAX {
                return Err(Error::Topology(format!(
                    "interface vertex {v} does not touch a {phase:?} triangle"
                )));
            }
            interface_nodes.push(local[v]);
        }
        let surface_edges = surface
            .edges
            .iter()
            .map(|&[a, b]| [interface_nodes[a], interface_nodes[b]])
            .collect();
        let cell_master = mesh.periodic_masters();
        let mut periodic_master: Vec<usize> = (0..vertices.len()).collect();
        for (v, &lv) in local.iter().enumerate() {
            if lv == usize::MAX {
                continue;
            }
            let mv = local[cell_master[v]];
            if mv == usize::MAX {
                return Err(Error::Topology(format!(
                    "periodic master of vertex {v} lies outside {phase:?}"
                )));
            }
            periodic_master[lv] = mv;
        }
        Ok(Self {
            phase,
            epsilon: 1.0,
            vertices,
            triangles,
            surface_edges,
            interface_nodes,
            periodic_master,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| 0.5 * cross(self.vertices[a], self.vertices[b], self.vertices[c]))
            .sum()
    }

    pub fn surface_length(&self) -> f64 {
        self.surface_edges
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    pub fn has_periodicity(&self) -> bool {
        self.periodic_master.iter().enumerate().any(|(i, &m)| i != m)
    }

    /// Copies bulk values at the interface nodes into a trace vector.
    pub fn trace(&self, bulk: &[f64]) -> Vec<f64> {
        self.interface_nodes.iter().map(|&v| bulk[v]).collect()
    }
}
