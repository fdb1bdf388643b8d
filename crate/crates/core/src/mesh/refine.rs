//! Uniform red refinement and newest-vertex bisection with conforming closure.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::LevelSetSurface;
use crate::Vec3;

use super::{ProjectionMode, SurfaceMesh};

/// Upper bound on closure sweeps before giving up.
pub const MAX_CLOSURE_PASSES: usize = 10_000;

pub fn uniform_refine(mesh: &SurfaceMesh, surface: &LevelSetSurface, mode: ProjectionMode) -> Result<SurfaceMesh> {
    uniform_refine_with(mesh, |x| mode.apply(surface, x))
}

/// Splits every triangle into four through its edge midpoints; `project`
/// places each new vertex.
///
/// Corner children take the edge opposite the old vertex as refinement edge;
/// the middle child inherits the direction of the parent's refinement edge.
pub fn uniform_refine_with<P>(mesh: &SurfaceMesh, project: P) -> Result<SurfaceMesh>
where
    P: Fn(&Vec3) -> Result<Vec3>,
{
    let nv = mesh.vertex_count();
    let mut vertices = mesh.vertices().to_vec();
    vertices.reserve(mesh.edge_count());
    for e in 0..mesh.edge_count() {
        vertices.push(project(&mesh.edge_midpoint(e))?);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.face_count());
    let mut labels = Vec::with_capacity(4 * mesh.face_count());
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let [m0, m1, m2] = mesh.face_edges()[t].map(|e| nv + e);
        triangles.extend_from_slice(&[[a, m2, m1], [m2, b, m0], [m1, m0, c], [m0, m1, m2]]);
        labels.extend_from_slice(&[0, 1, 2, mesh.refinement_edges()[t]]);
    }
    SurfaceMesh::with_labels(vertices, triangles, labels, mesh.generation() + 1)
}

pub fn bisect(
    mesh: &SurfaceMesh,
    marked: &[usize],
    surface: &LevelSetSurface,
    mode: ProjectionMode,
) -> Result<SurfaceMesh> {
    bisect_with(mesh, marked, |x| mode.apply(surface, x))
}

/// Newest-vertex bisection of the marked triangles plus the closure needed to
/// keep the mesh conforming.
///
/// An edge is bisected iff it is marked; closure marks the refinement edge
/// of every triangle owning a marked edge. Each triangle is then bisected
/// through its refinement edge, and children are bisected again wherever
/// one of their edges is marked. New vertices take the place `project` gives.
pub fn bisect_with<P>(mesh: &SurfaceMesh, marked: &[usize], project: P) -> Result<SurfaceMesh>
where
    P: Fn(&Vec3) -> Result<Vec3>,
{
    let fe = mesh.face_edges();
    let labels = mesh.refinement_edges();
    let mut edge_marked = vec![false; mesh.edge_count()];
    for &t in marked {
        edge_marked[fe[t][labels[t] as usize]] = true;
    }

    let mut passes = 0;
    loop {
        let mut changed = false;
        for t in 0..mesh.face_count() {
            let r = fe[t][labels[t] as usize];
            if !edge_marked[r] && fe[t].iter().any(|&e| edge_marked[e]) {
                edge_marked[r] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        passes += 1;
        if passes > MAX_CLOSURE_PASSES {
            return Err(Error::ClosureDiverged(passes));
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, _) in edge_marked.iter().enumerate().filter(|(_, &m)| m) {
        let [a, b] = mesh.edges()[e].vertices;
        midpoints.insert((a, b), vertices.len());
        vertices.push(project(&mesh.edge_midpoint(e))?);
    }

    let mut triangles = Vec::with_capacity(mesh.face_count() + 2 * midpoints.len());
    let mut new_labels = Vec::with_capacity(triangles.capacity());
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        split(tri, labels[t], &midpoints, &mut triangles, &mut new_labels);
    }
    SurfaceMesh::with_labels(vertices, triangles, new_labels, mesh.generation() + 1)
}

fn split(
    tri: [usize; 3],
    label: u8,
    midpoints: &HashMap<(usize, usize), usize>,
    out: &mut Vec<[usize; 3]>,
    out_labels: &mut Vec<u8>,
) {
    let r = label as usize;
    let peak = tri[r];
    let b = tri[(r + 1) % 3];
    let c = tri[(r + 2) % 3];
    match midpoints.get(&(b.min(c), b.max(c))) {
        None => {
            out.push(tri);
            out_labels.push(label);
        }
        Some(&m) => {
            // the new vertex m is the peak of both children
            split([peak, b, m], 2, midpoints, out, out_labels);
            split([peak, m, c], 1, midpoints, out, out_labels);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, tetrahedron};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_tetrahedron_counts() {
        let m = uniform_refine_with(&tetrahedron(), |x| Ok(*x)).unwrap();
        assert_eq!((m.face_count(), m.edge_count()), (16, 24));
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn uniform_refine_matches_next_icosphere_level() {
        let sphere = LevelSetSurface::unit_sphere();
        let refined = uniform_refine(&icosphere(2), &sphere, ProjectionMode::Exact).unwrap();
        let next = icosphere(3);
        let key = |v: &Vec3| [v[0], v[1], v[2]].map(|c| (c * 1e9).round() as i64);
        let mut a: Vec<_> = refined.vertices().iter().map(key).collect();
        let mut b: Vec<_> = next.vertices().iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn bisect_all_tetrahedron() {
        let t = tetrahedron();
        let all: Vec<usize> = (0..t.face_count()).collect();
        let m = bisect_with(&t, &all, |x| Ok(*x)).unwrap();
        assert_eq!(m.face_count(), 8);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn single_mark_closes_conformingly() {
        let s = LevelSetSurface::unit_sphere();
        let m0 = icosphere(1);
        let m1 = bisect(&m0, &[5], &s, ProjectionMode::Exact).unwrap();
        assert!(m1.face_count() >= m0.face_count() + 2);
        assert_eq!(m1.euler_characteristic(), 2);
        assert!(m1.vertices().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn random_marking_stays_conforming() {
        let s = LevelSetSurface::unit_sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = icosphere(0);
        for _ in 0..12 {
            let marked: Vec<usize> = (0..m.face_count()).filter(|_| rng.gen_bool(0.2)).collect();
            let next = bisect(&m, &marked, &s, ProjectionMode::Exact).unwrap();
            assert!(next.face_count() >= m.face_count() + 2 * marked.len().min(1));
            assert_eq!(next.euler_characteristic(), 2);
            m = next;
        }
    }
}
