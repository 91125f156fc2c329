use std::collections::HashMap;

use super::{dist, Point, TriangleMesh};
use crate::error::{Error, Result};

/// Closed interface polygon, counter-clockwise around the inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    /// Vertex id in the parent triangle mesh for every polygon node.
    pub vertex_ids: Vec<usize>,
    pub nodes: Vec<Point>,
    /// Edge `e` joins nodes `e` and `e + 1 (mod n)`.
    pub edges: Vec<[usize; 2]>,
    /// Unit normal per edge pointing out of Y₂.
    pub normals: Vec<Point>,
    pub tangents: Vec<Point>,
    pub lengths: Vec<f64>,
}

impl SurfaceMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Total polygon length |Γ_h|.
    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Shoelace area enclosed by the polygon.
    pub fn enclosed_area(&self) -> f64 {
        0.5 * self
            .edges
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (self.nodes[a], self.nodes[b]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (p, q) = (self.nodes[a], self.nodes[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Length-weighted average of the two adjacent edge normals.
    pub fn node_normal(&self, node: usize) -> Point {
        let n = self.edges.len();
        let before = (node + n - 1) % n;
        let (w0, w1) = (self.lengths[before], self.lengths[node]);
        let (a, b) = (self.normals[before], self.normals[node]);
        let v = [w0 * a[0] + w1 * b[0], w0 * a[1] + w1 * b[1]];
        let len = v[0].hypot(v[1]);
        [v[0] / len, v[1] / len]
    }
}

/// Orders the interface edges of `mesh` into one closed polygon.
pub fn extract_surface_mesh(mesh: &TriangleMesh) -> Result<SurfaceMesh> {
    let edges: Vec<[usize; 2]> = mesh.interface_edges().collect();
    if edges.is_empty() {
        return Err(Error::Topology("mesh has no interface edges".into()));
    }
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for &[a, b] in &edges {
        if a == b {
            return Err(Error::Topology(format!("interface edge ({a}, {a}) is degenerate")));
        }
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    for (v, nbrs) in &adjacency {
        if nbrs.len() != 2 {
            return Err(Error::Topology(format!(
                "interface vertex {v} has {} interface neighbours; the interface is not one closed loop",
                nbrs.len()
            )));
        }
    }

    let start = *adjacency.keys().min().expect("non-empty");
    let mut order = vec![start];
    let mut previous = start;
    let mut current = adjacency[&start][0].min(adjacency[&start][1]);
    while current != start {
        if order.len() > edges.len() {
            return Err(Error::Topology("interface walk does not close".into()));
        }
        order.push(current);
        let nbrs = &adjacency[&current];
        let next = if nbrs[0] == previous { nbrs[1] } else { nbrs[0] };
        previous = current;
        current = next;
    }
    if order.len() != edges.len() {
        return Err(Error::Topology(format!(
            "interface edges form more than one loop ({} of {} edges reached)",
            order.len(),
            edges.len()
        )));
    }

    let signed: f64 = (0..order.len())
        .map(|i| {
            let p = mesh.vertices[order[i]];
            let q = mesh.vertices[order[(i + 1) % order.len()]];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    if signed < 0.0 {
        order[1..].reverse();
    }

    let n = order.len();
    let nodes: Vec<Point> = order.iter().map(|&v| mesh.vertices[v]).collect();
    let edges: Vec<[usize; 2]> = (0..n).map(|i| [i, (i + 1) % n]).collect();
    let mut tangents = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    for &[a, b] in &edges {
        let len = dist(nodes[a], nodes[b]);
        let t = [(nodes[b][0] - nodes[a][0]) / len, (nodes[b][1] - nodes[a][1]) / len];
        tangents.push(t);
        // counter-clockwise loop: the right-hand normal points outward
        normals.push([t[1], -t[0]]);
        lengths.push(len);
    }
    Ok(SurfaceMesh {
        vertex_ids: order,
        nodes,
        edges,
        normals,
        tangents,
        lengths,
    })
}
