use std::collections::HashMap;
use std::sync::Arc;

use super::{CellMesh, Phase, Point, SideMesh};
use crate::error::{Error, Result};

/// ε-scaled copies of the cell mesh covering Ω = (0,1)² with ε = 1/n.
///
/// The matrix copies are glued along shared cell faces into one conforming
/// mesh of Ω_ε¹; every inclusion keeps its own vertices, so Ω_ε² has n²
/// components.
#[derive(Debug, Clone)]
pub struct EpsilonTiling {
    pub n: usize,
    pub epsilon: f64,
    pub cell: Arc<CellMesh>,
    /// Lattice vectors k of K_ε, cell index `c = k₂·n + k₁`.
    pub cells: Vec<[usize; 2]>,
    sides: [SideMesh; 2],
    /// `cell_maps[j][c][p]`: global vertex of local cell-side vertex `p` in cell `c`.
    cell_maps: [Vec<Vec<usize>>; 2],
}

pub fn build_epsilon_tiling(cell: Arc<CellMesh>, n: usize) -> Result<EpsilonTiling> {
    if n == 0 {
        return Err(Error::validation("epsilon", "1/ε must be a positive integer"));
    }
    let epsilon = 1.0 / n as f64;
    let cells: Vec<[usize; 2]> = (0..n)
        .flat_map(|k2| (0..n).map(move |k1| [k1, k2]))
        .collect();
    let scale = |k: [usize; 2], y: Point| -> Point {
        [epsilon * (k[0] as f64 + y[0]), epsilon * (k[1] as f64 + y[1])]
    };

    // matrix side: glue along periodic images
    let local1 = cell.side(Phase::Y1);
    let offsets: Vec<[i64; 2]> = (0..local1.vertex_count())
        .map(|p| {
            let (y, ym) = (local1.vertices[p], local1.vertices[local1.periodic_master[p]]);
            [(y[0] - ym[0]).round() as i64, (y[1] - ym[1]).round() as i64]
        })
        .collect();
    let mut index: HashMap<(i64, i64, usize), usize> = HashMap::new();
    let mut vertices1 = Vec::new();
    let mut maps1 = Vec::with_capacity(cells.len());
    for &k in &cells {
        let mut map = Vec::with_capacity(local1.vertex_count());
        for p in 0..local1.vertex_count() {
            let o = offsets[p];
            let key = (k[0] as i64 + o[0], k[1] as i64 + o[1], local1.periodic_master[p]);
            let id = *index.entry(key).or_insert_with(|| {
                vertices1.push(scale(k, local1.vertices[p]));
                vertices1.len() - 1
            });
            map.push(id);
        }
        maps1.push(map);
    }
    let side1 = assemble_side(local1, vertices1, &maps1, epsilon);

    // inclusions: disjoint copies
    let local2 = cell.side(Phase::Y2);
    let nloc2 = local2.vertex_count();
    let mut vertices2 = Vec::with_capacity(nloc2 * cells.len());
    let mut maps2 = Vec::with_capacity(cells.len());
    for (c, &k) in cells.iter().enumerate() {
        vertices2.extend(local2.vertices.iter().map(|&y| scale(k, y)));
        maps2.push((c * nloc2..(c + 1) * nloc2).collect());
    }
    let side2 = assemble_side(local2, vertices2, &maps2, epsilon);

    Ok(EpsilonTiling {
        n,
        epsilon,
        cell,
        cells,
        sides: [side1, side2],
        cell_maps: [maps1, maps2],
    })
}

fn assemble_side(local: &SideMesh, vertices: Vec<Point>, maps: &[Vec<usize>], epsilon: f64) -> SideMesh {
    let mut triangles = Vec::with_capacity(local.triangles.len() * maps.len());
    let mut surface_edges = Vec::with_capacity(local.surface_edges.len() * maps.len());
    let mut interface_nodes = Vec::with_capacity(local.interface_nodes.len() * maps.len());
    for map in maps {
        triangles.extend(local.triangles.iter().map(|t| t.map(|v| map[v])));
        surface_edges.extend(local.surface_edges.iter().map(|e| e.map(|v| map[v])));
        interface_nodes.extend(local.interface_nodes.iter().map(|&v| map[v]));
    }
    let count = vertices.len();
    SideMesh {
        phase: local.phase,
        epsilon,
        vertices,
        triangles,
        surface_edges,
        interface_nodes,
        periodic_master: (0..count).collect(),
    }
}

impl EpsilonTiling {
    pub fn side(&self, phase: Phase) -> &SideMesh {
        &self.sides[phase.index()]
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Global vertex ids of cell `c`, indexed by the cell-side vertex.
    pub fn cell_map(&self, phase: Phase, c: usize) -> &[usize] {
        &self.cell_maps[phase.index()][c]
    }

    /// Nodes of the interface polygon of cell `c`, as a range into
    /// `side(_).interface_nodes`.
    pub fn interface_range(&self, c: usize) -> std::ops::Range<usize> {
        let m = self.cell.surface.node_count();
        c * m..(c + 1) * m
    }

    /// Vertex range of inclusion `c` in the Ω_ε² numbering.
    pub fn inclusion_range(&self, c: usize) -> std::ops::Range<usize> {
        let m = self.cell.side(Phase::Y2).vertex_count();
        c * m..(c + 1) * m
    }

    /// Cell index of the lattice vector `k`.
    pub fn cell_index(&self, k: [usize; 2]) -> usize {
        k[1] * self.n + k[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitCellGeometry;
    use std::f64::consts::PI;

    fn cell() -> Arc<CellMesh> {
        Arc::new(CellMesh::build(&UnitCellGeometry::default(), 0.1).unwrap())
    }

    #[test]
    fn dyadic_tilings_are_exact_copies() {
        let cell = cell();
        for n in [2, 4, 8] {
            let tiling = build_epsilon_tiling(cell.clone(), n).unwrap();
            for phase in Phase::BOTH {
                let local = cell.side(phase);
                for (c, &k) in tiling.cells.iter().enumerate() {
                    for (p, &g) in tiling.cell_map(phase, c).iter().enumerate() {
                        let x = tiling.side(phase).vertices[g];
                        let y = local.vertices[p];
                        assert_eq!(x[0] * n as f64 - k[0] as f64, y[0]);
                        assert_eq!(x[1] * n as f64 - k[1] as f64, y[1]);
                    }
                }
            }
        }
    }

    fn components(side: &SideMesh) -> usize {
        let mut parent: Vec<usize> = (0..side.vertex_count()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[a, b, c] in &side.triangles {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                parent[ru] = rv;
            }
        }
        (0..parent.len())
            .filter(|&v| find(&mut parent, v) == v)
            .count()
    }

    #[test]
    fn single_cell_reproduces_the_cell_mesh() {
        let cell = cell();
        let tiling = build_epsilon_tiling(cell.clone(), 1).unwrap();
        for phase in Phase::BOTH {
            let (a, b) = (tiling.side(phase), cell.side(phase));
            assert_eq!(a.triangles, b.triangles);
            assert_eq!(a.vertices, b.vertices);
        }
    }

    #[test]
    fn inclusion_area_and_components() {
        let cell = cell();
        let t2 = build_epsilon_tiling(cell.clone(), 2).unwrap();
        let area = t2.side(Phase::Y2).area();
        assert!((area - cell.area(Phase::Y2)).abs() < 1e-14);
        assert!((area - PI / 16.0).abs() < 0.01);
        let t4 = build_epsilon_tiling(cell, 4).unwrap();
        assert_eq!(components(t4.side(Phase::Y2)), 16);
        assert_eq!(components(t4.side(Phase::Y1)), 1);
    }

    #[test]
    fn every_triangle_is_a_scaled_cell_triangle() {
        let cell = cell();
        let tiling = build_epsilon_tiling(cell.clone(), 4).unwrap();
        for phase in Phase::BOTH {
            let local = cell.side(phase);
            let side = tiling.side(phase);
            for (c, &k) in tiling.cells.iter().enumerate() {
                let map = tiling.cell_map(phase, c);
                for (p, &g) in map.iter().enumerate() {
                    let y = local.vertices[p];
                    let x = side.vertices[g];
                    for d in 0..2 {
                        assert!((x[d] - tiling.epsilon * (k[d] as f64 + y[d])).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn interface_stays_away_from_the_outer_boundary() {
        let tiling = build_epsilon_tiling(cell(), 4).unwrap();
        let side = tiling.side(Phase::Y1);
        for &v in &side.interface_nodes {
            let x = side.vertices[v];
            assert!(x.iter().all(|&c| c > 0.0 && c < 1.0));
        }
    }
}
