//! Closed, consistently oriented triangle meshes approximating a surface.
//!
//! Local numbering convention used throughout the crate: local edge `i` of a
//! triangle is the edge opposite local vertex `i`, i.e. it joins vertices
//! `(i + 1) % 3` and `(i + 2) % 3`.

mod generate;
pub mod io;
mod refine;

use std::collections::HashMap;

use petgraph::algo::maximum_matching;
use petgraph::graph::{NodeIndex, UnGraph};

use crate::error::{Error, Result};
use crate::geometry::LevelSetSurface;
use crate::Vec3;

pub use generate::{icosahedron, icosphere, icosphere_on, tetrahedron};
pub use io::{load_mesh, parse_obj, parse_off, save_mesh, write_obj, write_off, MeshFormat};
pub use refine::{bisect, bisect_with, uniform_refine, uniform_refine_with, MAX_CLOSURE_PASSES};

/// Default bound on circumradius/inradius accepted by [`SurfaceMesh::check_shape`].
pub const DEFAULT_SHAPE_BOUND: f64 = 50.0;

/// Edges shorter than this fraction of a triangle's longest edge are never
/// chosen as its initial refinement edge.
pub const LABEL_LENGTH_RATIO: f64 = 0.8;

/// Undirected edge stored as `(min, max)` vertex indices.
///
/// `faces[0]` is the adjacent triangle with the smaller index (`T+`),
/// `faces[1]` the other one (`T-`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub faces: [usize; 2],
}

/// Per-edge geometric data: midpoint, length, conormals and adjacent face normals.
#[derive(Clone, Copy, Debug)]
pub struct EdgeGeometry {
    pub midpoint: Vec3,
    pub length: f64,
    pub conormal_plus: Vec3,
    pub conormal_minus: Vec3,
    pub face_normal_plus: Vec3,
    pub face_normal_minus: Vec3,
}

/// How newly created vertices are moved onto the exact surface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    Exact,
    FirstOrder,
    None,
}

impl ProjectionMode {
    pub fn apply(self, surface: &LevelSetSurface, x: &Vec3) -> Result<Vec3> {
        match self {
            ProjectionMode::Exact => surface.closest_point(x),
            ProjectionMode::FirstOrder => surface.first_order_projection(x),
            ProjectionMode::None => Ok(*x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    face_edges: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    generation: usize,
}

/// Builds the edge table of a closed oriented triangle soup.
///
/// Edges are numbered in order of first appearance when scanning the faces.
/// Returns the edge list together with the per-face local edge indices.
pub fn build_edges(triangles: &[[usize; 3]], vertex_count: usize) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3 / 2 + 1);
    let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 1);
    // forward[e] records whether faces[0] traverses the edge from min to max
    let mut forward: Vec<bool> = Vec::with_capacity(edges.capacity());
    let mut counts: Vec<usize> = Vec::with_capacity(edges.capacity());
    let mut face_edges = vec![[usize::MAX; 3]; triangles.len()];

    for (t, tri) in triangles.iter().enumerate() {
        if tri.iter().any(|&v| v >= vertex_count) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::InvalidFace(t));
        }
        for i in 0..3 {
            let a = tri[(i + 1) % 3];
            let b = tri[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            match lookup.get(&key) {
                None => {
                    let idx = edges.len();
                    lookup.insert(key, idx);
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        faces: [t, usize::MAX],
                    });
                    forward.push(a < b);
                    counts.push(1);
                    face_edges[t][i] = idx;
                }
                Some(&idx) => {
                    counts[idx] += 1;
                    if counts[idx] > 2 {
                        return Err(Error::NonManifold(key.0, key.1, counts[idx]));
                    }
                    if forward[idx] == (a < b) {
                        return Err(Error::InconsistentOrientation(edges[idx].faces[0], t));
                    }
                    edges[idx].faces[1] = t;
                    face_edges[t][i] = idx;
                }
            }
        }
    }
    if let Some((idx, &c)) = counts.iter().enumerate().find(|(_, &c)| c != 2) {
        let e = edges[idx].vertices;
        return Err(Error::NonManifold(e[0], e[1], c));
    }
    Ok((edges, face_edges))
}

impl SurfaceMesh {
    /// Builds a mesh and assigns refinement edges (see `matched_labels`).
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut mesh = Self::with_labels(vertices, triangles, Vec::new(), 0)?;
        mesh.refinement_edge = mesh.matched_labels();
        Ok(mesh)
    }

    pub(crate) fn with_labels(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        generation: usize,
    ) -> Result<Self> {
        let (edges, face_edges) = build_edges(&triangles, vertices.len())?;
        let mesh = Self {
            vertices,
            triangles,
            edges,
            face_edges,
            refinement_edge,
            generation,
        };
        for t in 0..mesh.triangles.len() {
            if !(mesh.area(t) > 0.0) {
                return Err(Error::DegenerateTriangle(t));
            }
        }
        Ok(mesh)
    }

    /// Refinement edges from a maximum matching of the dual graph restricted
    /// to edges at least `LABEL_LENGTH_RATIO` times the longest edge of both
    /// adjacent triangles. Matched triangles share their refinement edge, so
    /// bisecting both creates a single new vertex; unmatched triangles take
    /// their longest edge (ties to the smallest canonical vertex pair).
    fn matched_labels(&self) -> Vec<u8> {
        let nf = self.triangles.len();
        let lengths: Vec<[f64; 3]> = (0..nf)
            .map(|t| {
                let v = self.triangle_vertices(t);
                [0, 1, 2].map(|i| (v[(i + 1) % 3] - v[(i + 2) % 3]).norm())
            })
            .collect();
        let longest: Vec<f64> = lengths.iter().map(|l| l.iter().copied().fold(0.0, f64::max)).collect();
        let mut graph = UnGraph::<(), usize>::with_capacity(nf, self.edges.len());
        for _ in 0..nf {
            graph.add_node(());
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let [a, b] = edge.faces;
            let ok = |t: usize| {
                let i = self.local_edge_index(t, e).expect("edge belongs to its faces");
                lengths[t][i] >= LABEL_LENGTH_RATIO * longest[t]
            };
            if ok(a) && ok(b) {
                graph.add_edge(NodeIndex::new(a), NodeIndex::new(b), e);
            }
        }
        let matching = maximum_matching(&graph);
        (0..nf)
            .map(|t| {
                if let Some(other) = matching.mate(NodeIndex::new(t)) {
                    let shared = self.face_edges[t]
                        .iter()
                        .position(|&e| {
                            let [a, b] = self.edges[e].faces;
                            (a == t && b == other.index()) || (b == t && a == other.index())
                        })
                        .expect("matched triangles share an edge");
                    return shared as u8;
                }
                (0..3)
                    .filter(|&i| lengths[t][i] >= longest[t] * (1.0 - 1e-10))
                    .min_by_key(|&i| self.edges[self.face_edges[t][i]].vertices)
                    .unwrap() as u8
            })
            .collect()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Local edges of each triangle (edge `i` opposite vertex `i`).
    pub fn face_edges(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        crate::quadrature::triangle_area(&self.triangle_vertices(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.face_count()).map(|t| self.area(t)).sum()
    }

    /// Unit normal of triangle `t` from its orientation.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let v = self.triangle_vertices(t);
        (v[1] - v[0]).cross(&(v[2] - v[0])).normalize()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let v = self.triangle_vertices(t);
        (v[0] + v[1] + v[2]) / 3.0
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec3 {
        let [a, b] = self.edges[e].vertices;
        0.5 * (self.vertices[a] + self.vertices[b])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Local index of edge `e` within triangle `t`.
    pub fn local_edge_index(&self, t: usize, e: usize) -> Option<usize> {
        self.face_edges[t].iter().position(|&x| x == e)
    }

    /// Unit vector in the plane of `t`, perpendicular to edge `e` and pointing out of `t`.
    pub fn conormal(&self, t: usize, e: usize) -> Vec3 {
        let i = self.local_edge_index(t, e).expect("edge not in triangle");
        let v = self.triangle_vertices(t);
        let a = v[(i + 1) % 3];
        let b = v[(i + 2) % 3];
        let dir = (b - a).normalize();
        let out = 0.5 * (a + b) - v[i];
        (out - out.dot(&dir) * dir).normalize()
    }

    pub fn edge_geometry(&self, e: usize) -> EdgeGeometry {
        let [tp, tm] = self.edges[e].faces;
        EdgeGeometry {
            midpoint: self.edge_midpoint(e),
            length: self.edge_length(e),
            conormal_plus: self.conormal(tp, e),
            conormal_minus: self.conormal(tm, e),
            face_normal_plus: self.face_normal(tp),
            face_normal_minus: self.face_normal(tm),
        }
    }

    /// Triangles sharing an edge with `t`, by local edge index.
    pub fn face_neighbors(&self, t: usize) -> [usize; 3] {
        self.face_edges[t].map(|e| {
            let f = self.edges[e].faces;
            if f[0] == t {
                f[1]
            } else {
                f[0]
            }
        })
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let v = self.triangle_vertices(t);
        (0..3).map(|i| (v[(i + 1) % 3] - v[(i + 2) % 3]).norm()).fold(0.0, f64::max)
    }

    /// `h = max_T diam(T)`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.face_count()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Circumradius over inradius of triangle `t` (2 for equilateral).
    pub fn shape_ratio(&self, t: usize) -> f64 {
        let v = self.triangle_vertices(t);
        let l: Vec<f64> = (0..3).map(|i| (v[(i + 1) % 3] - v[(i + 2) % 3]).norm()).collect();
        let area = self.area(t);
        let circum = l[0] * l[1] * l[2] / (4.0 * area);
        let inr = 2.0 * area / (l[0] + l[1] + l[2]);
        circum / inr
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.face_count()).map(|t| self.shape_ratio(t)).fold(0.0, f64::max)
    }

    /// Returns the worst shape ratio if it exceeds `bound`.
    pub fn check_shape(&self, bound: f64) -> Result<()> {
        for t in 0..self.face_count() {
            if self.shape_ratio(t) > bound {
                return Err(Error::DegenerateTriangle(t));
            }
        }
        Ok(())
    }

    /// Moves every vertex with the given projection mode.
    pub fn project_vertices(&self, surface: &LevelSetSurface, mode: ProjectionMode) -> Result<Self> {
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, x)| mode.apply(surface, x).map_err(|e| Error::AtVertex(i, Box::new(e))))
            .collect::<Result<Vec<_>>>()?;
        Self::with_labels(vertices, self.triangles.clone(), self.refinement_edge.clone(), self.generation)
    }

    /// Same mesh with vertices replaced (connectivity and labels kept).
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        assert_eq!(vertices.len(), self.vertices.len());
        Self::with_labels(vertices, self.triangles.clone(), self.refinement_edge.clone(), self.generation)
    }
}
