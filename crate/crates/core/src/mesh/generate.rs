use crate::error::Result;
use crate::geometry::LevelSetSurface;
use crate::Vec3;

use super::{uniform_refine_with, SurfaceMesh};

/// Regular tetrahedron inscribed in the unit sphere, outward oriented.
pub fn tetrahedron() -> SurfaceMesh {
    let s = 1.0 / 3f64.sqrt();
    let vertices = vec![
        Vec3::new(1.0, 1.0, 1.0) * s,
        Vec3::new(1.0, -1.0, -1.0) * s,
        Vec3::new(-1.0, 1.0, -1.0) * s,
        Vec3::new(-1.0, -1.0, 1.0) * s,
    ];
    let faces = orient_outward(&vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]);
    SurfaceMesh::new(vertices, faces).expect("tetrahedron is a valid closed mesh")
}

/// Icosahedron with vertices on the unit sphere.
pub fn icosahedron() -> SurfaceMesh {
    let g = 0.5 * (1.0 + 5f64.sqrt());
    let raw = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ];
    let vertices: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let faces = orient_outward(&vertices, faces);
    SurfaceMesh::new(vertices, faces).expect("icosahedron is a valid closed mesh")
}

/// Icosahedron quadrisected `level` times with radial projection onto the unit sphere.
pub fn icosphere(level: usize) -> SurfaceMesh {
    let mut mesh = icosahedron();
    for _ in 0..level {
        mesh = uniform_refine_with(&mesh, |x| Ok(x.normalize())).expect("sphere refinement cannot fail");
    }
    mesh
}

/// Icosphere of the given level mapped onto the surface by its sphere map, or
/// along rays from the origin for star-shaped surfaces without one.
/// Refinement labels are recomputed on the mapped mesh.
pub fn icosphere_on(surface: &LevelSetSurface, level: usize) -> Result<SurfaceMesh> {
    let sphere = icosphere(level);
    let vertices = sphere
        .vertices()
        .iter()
        .map(|v| surface.from_sphere(v))
        .collect::<Result<Vec<_>>>()?;
    SurfaceMesh::new(vertices, sphere.triangles().to_vec())
}

fn orient_outward(vertices: &[Vec3], mut faces: Vec<[usize; 3]>) -> Vec<[usize; 3]> {
    for f in &mut faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    faces
}
