//! Crouzeix-Raviart space on a polyhedral surface.
//!
//! One degree of freedom per edge, located at the edge midpoint. On a face
//! the basis function of local edge `i` is `1 - 2 lambda_i`, where `lambda_i`
//! is the barycentric coordinate of the opposite vertex.

use std::ops::{Add, Mul};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{LevelSetSurface, SourceTerm};
use crate::mesh::SurfaceMesh;
use crate::quadrature::{integrate_edge, EdgeRule, TriangleRule};
use crate::solver::{cg_solve, CgOptions, SolveFailure, SolveReport};
use crate::sparse::CsrMatrix;
use crate::Vec3;

/// Edge-to-DOF numbering. DOFs are numbered like the edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofMap {
    count: usize,
}

impl DofMap {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        Self {
            count: mesh.edge_count(),
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dof_of_edge(&self, edge: usize) -> usize {
        debug_assert!(edge < self.count);
        edge
    }

    pub fn edge_of_dof(&self, dof: usize) -> usize {
        debug_assert!(dof < self.count);
        dof
    }
}

/// Values of the CR basis functions at barycentric point `l`.
pub fn basis_values(l: &[f64; 3]) -> [f64; 3] {
    [1.0 - 2.0 * l[0], 1.0 - 2.0 * l[1], 1.0 - 2.0 * l[2]]
}

/// Constant surface gradients of the three CR basis functions of a triangle.
pub fn cr_basis_gradients(v: &[Vec3; 3]) -> Result<[Vec3; 3]> {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let n2 = n.norm_squared();
    let scale = (v[1] - v[0]).norm_squared().max((v[2] - v[0]).norm_squared());
    if !(n2 > 1e-28 * scale * scale) {
        return Err(Error::DegenerateTriangle(usize::MAX));
    }
    Ok(std::array::from_fn(|i| {
        let grad_lambda = n.cross(&(v[(i + 2) % 3] - v[(i + 1) % 3])) / n2;
        -2.0 * grad_lambda
    }))
}

/// A piecewise-linear function continuous at edge midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct CrFunction<T> {
    pub dofs: Vec<T>,
}

pub type ScalarCr = CrFunction<f64>;
pub type VectorCr = CrFunction<Vec3>;

impl<T> CrFunction<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(dofs: Vec<T>) -> Self {
        Self { dofs }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn face_dofs(&self, mesh: &SurfaceMesh, t: usize) -> [T; 3] {
        mesh.face_edges()[t].map(|e| self.dofs[e])
    }

    /// Value on face `t` at barycentric point `l`.
    pub fn evaluate(&self, mesh: &SurfaceMesh, t: usize, l: &[f64; 3]) -> T {
        let d = self.face_dofs(mesh, t);
        let b = basis_values(l);
        d[0] * b[0] + d[1] * b[1] + d[2] * b[2]
    }
}

impl ScalarCr {
    /// Constant tangential gradient on face `t`.
    pub fn face_gradient(&self, mesh: &SurfaceMesh, t: usize) -> Result<Vec3> {
        let g = cr_basis_gradients(&mesh.triangle_vertices(t)).map_err(|_| Error::DegenerateTriangle(t))?;
        let d = self.face_dofs(mesh, t);
        Ok(g[0] * d[0] + g[1] * d[1] + g[2] * d[2])
    }

    /// `int_E (v|T+ - v|T-)` by two-point Gauss.
    pub fn jump_defect(&self, mesh: &SurfaceMesh, e: usize) -> f64 {
        edge_jump(mesh, e, |t, l| self.evaluate(mesh, t, l))
    }
}

/// `int_E (trace from T+ - trace from T-)` of a per-face field given by
/// `eval(face, barycentric)`, by two-point Gauss.
pub fn edge_jump<F: Fn(usize, &[f64; 3]) -> f64>(mesh: &SurfaceMesh, e: usize, eval: F) -> f64 {
    let edge = mesh.edges()[e];
    let [a, b] = edge.vertices;
    let trace = |t: usize, s: f64| -> f64 {
        let tri = mesh.triangles()[t];
        let mut l = [0.0; 3];
        for k in 0..3 {
            if tri[k] == a {
                l[k] = 1.0 - s;
            } else if tri[k] == b {
                l[k] = s;
            }
        }
        eval(t, &l)
    };
    let rule = EdgeRule::gauss2();
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, w)| w * (trace(edge.faces[0], s) - trace(edge.faces[1], s)))
        .sum::<f64>()
        * mesh.edge_length(e)
}

/// Quadrature points of every face together with their closest points on the
/// exact surface. Built once per mesh and reused for loads and error norms.
#[derive(Clone, Debug)]
pub struct ProjectedQuadrature {
    pub rule: TriangleRule,
    /// `area * weight` per face and point.
    pub weights: Vec<f64>,
    pub points: Vec<Vec3>,
    pub projected: Vec<Vec3>,
}

impl ProjectedQuadrature {
    pub fn new(mesh: &SurfaceMesh, surface: &LevelSetSurface, rule: TriangleRule) -> Result<Self> {
        let per_face: Vec<Result<Vec<(f64, Vec3, Vec3)>>> = (0..mesh.face_count())
            .into_par_iter()
            .map(|t| {
                let v = mesh.triangle_vertices(t);
                let area = mesh.area(t);
                rule.map(&v)
                    .zip(&rule.weights)
                    .map(|(x, w)| Ok((area * w, x, surface.closest_point(&x)?)))
                    .collect()
            })
            .collect();
        let q = rule.len();
        let mut weights = Vec::with_capacity(q * mesh.face_count());
        let mut points = Vec::with_capacity(weights.capacity());
        let mut projected = Vec::with_capacity(weights.capacity());
        for face in per_face {
            for (w, x, p) in face? {
                weights.push(w);
                points.push(x);
                projected.push(p);
            }
        }
        Ok(Self {
            rule,
            weights,
            points,
            projected,
        })
    }

    pub fn points_per_face(&self) -> usize {
        self.rule.len()
    }

    /// Index range of face `t` in the flat arrays.
    pub fn face_range(&self, t: usize) -> std::ops::Range<usize> {
        let q = self.points_per_face();
        t * q..(t + 1) * q
    }
}

/// Symmetric positive-definite system `A u = b`.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Local stiffness and mass matrices of one face.
fn local_matrices(v: &[Vec3; 3], mass_rule: &TriangleRule) -> Result<([[f64; 3]; 3], [[f64; 3]; 3])> {
    let g = cr_basis_gradients(v)?;
    let area = crate::quadrature::triangle_area(v);
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(&g[j]);
        }
    }
    for (l, w) in mass_rule.points.iter().zip(&mass_rule.weights) {
        let b = basis_values(l);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += area * w * b[i] * b[j];
            }
        }
    }
    Ok((k, m))
}

fn assemble_matrix(mesh: &SurfaceMesh, stiffness: f64, mass: f64) -> Result<CsrMatrix> {
    let mass_rule = TriangleRule::degree2();
    let locals: Vec<Result<[[f64; 3]; 3]>> = (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            let (k, m) = local_matrices(&mesh.triangle_vertices(t), &mass_rule).map_err(|_| Error::DegenerateTriangle(t))?;
            Ok(std::array::from_fn(|i| std::array::from_fn(|j| stiffness * k[i][j] + mass * m[i][j])))
        })
        .collect();
    let mut triplets = Vec::with_capacity(9 * mesh.face_count());
    for (t, local) in locals.into_iter().enumerate() {
        let local = local?;
        let fe = mesh.face_edges()[t];
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((fe[i], fe[j], local[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.edge_count(), triplets))
}

pub fn stiffness_matrix(mesh: &SurfaceMesh) -> Result<CsrMatrix> {
    assemble_matrix(mesh, 1.0, 0.0)
}

pub fn mass_matrix(mesh: &SurfaceMesh) -> Result<CsrMatrix> {
    assemble_matrix(mesh, 0.0, 1.0)
}

/// `(f o p, chi_i)` for every basis function.
pub fn load_vector(mesh: &SurfaceMesh, source: &SourceTerm, quad: &ProjectedQuadrature) -> Result<Vec<f64>> {
    let locals: Vec<Result<[f64; 3]>> = (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            let mut b = [0.0; 3];
            for (k, l) in quad.face_range(t).zip(&quad.rule.points) {
                let f = source.at_surface_point(&quad.projected[k])?;
                let phi = basis_values(l);
                for i in 0..3 {
                    b[i] += quad.weights[k] * f * phi[i];
                }
            }
            Ok(b)
        })
        .collect();
    let mut rhs = vec![0.0; mesh.edge_count()];
    for (t, local) in locals.into_iter().enumerate() {
        let local = local?;
        for (i, &e) in mesh.face_edges()[t].iter().enumerate() {
            rhs[e] += local[i];
        }
    }
    Ok(rhs)
}

/// Matrix of `a_h(w, v) = sum_T int_T grad w . grad v + int w v` and load `(f o p, v)`.
pub fn assemble(mesh: &SurfaceMesh, source: &SourceTerm, quad: &ProjectedQuadrature) -> Result<AssembledSystem> {
    Ok(AssembledSystem {
        matrix: assemble_matrix(mesh, 1.0, 1.0)?,
        rhs: load_vector(mesh, source, quad)?,
    })
}

/// Edge averages `(1/|E|) int_E v` by two-point Gauss.
pub fn interpolate_cr<F>(mesh: &SurfaceMesh, v: F) -> Result<ScalarCr>
where
    F: Fn(&Vec3) -> Result<f64> + Sync,
{
    let rule = EdgeRule::gauss2();
    let dofs = (0..mesh.edge_count())
        .into_par_iter()
        .map(|e| {
            let [a, b] = mesh.edges()[e].vertices;
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let mut err = None;
            let integral = integrate_edge(
                |x| match v(x) {
                    Ok(val) => val,
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                },
                &pa,
                &pb,
                &rule,
            );
            match err {
                Some(e) => Err(e),
                None => Ok(integral / (pb - pa).norm()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrFunction::new(dofs))
}

/// Values at the edge midpoints.
pub fn interpolate_midpoints<F>(mesh: &SurfaceMesh, v: F) -> Result<ScalarCr>
where
    F: Fn(&Vec3) -> Result<f64> + Sync,
{
    let dofs = (0..mesh.edge_count())
        .into_par_iter()
        .map(|e| v(&mesh.edge_midpoint(e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrFunction::new(dofs))
}

/// Discrete solution together with the solve diagnostics.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u_h: ScalarCr,
    pub report: SolveReport,
}

/// Assembles and solves on `mesh`.
pub fn solve(
    mesh: &SurfaceMesh,
    source: &SourceTerm,
    quad: &ProjectedQuadrature,
    opts: &CgOptions,
) -> Result<Solution> {
    let system = assemble(mesh, source, quad)?;
    match cg_solve(&system.matrix, &system.rhs, opts) {
        Ok((x, report)) => Ok(Solution {
            u_h: CrFunction::new(x),
            report,
        }),
        Err(failure) => {
            let SolveFailure { error, .. } = *failure;
            Err(error)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSetSurface;
    use crate::mesh::{icosphere, tetrahedron};
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation3;

    fn right_triangle() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::x(), Vec3::y()]
    }

    #[test]
    fn basis_gradient_examples() {
        let v = right_triangle();
        let g = cr_basis_gradients(&v).unwrap();
        // hypotenuse is opposite vertex 0
        assert_abs_diff_eq!(g[0], Vec3::new(2.0, 2.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(g[0] + g[1] + g[2], Vec3::zeros(), epsilon = 1e-15);
        // nodal property through linear reconstruction: chi_i(m_j) = delta_ij
        let centroid = (v[0] + v[1] + v[2]) / 3.0;
        for i in 0..3 {
            let at_centroid = 1.0 / 3.0;
            for j in 0..3 {
                let m = 0.5 * (v[(j + 1) % 3] + v[(j + 2) % 3]);
                let val = at_centroid + g[i].dot(&(m - centroid));
                assert_abs_diff_eq!(val, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn basis_gradients_rotate_with_triangle() {
        let v = [Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.2, -0.1, 0.4), Vec3::new(0.3, 0.9, -0.2)];
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let g = cr_basis_gradients(&v).unwrap();
        let gr = cr_basis_gradients(&v.map(|x| rot * x)).unwrap();
        let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
        for i in 0..3 {
            assert_abs_diff_eq!(gr[i], rot * g[i], epsilon = 1e-13);
            assert!(g[i].dot(&n).abs() <= 1e-12 * g[i].norm() * n.norm());
        }
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let v = [Vec3::zeros(), Vec3::x(), 2.0 * Vec3::x()];
        assert!(cr_basis_gradients(&v).is_err());
    }

    #[test]
    fn mass_matrix_is_diagonal_area_over_three() {
        let m = icosphere(1);
        let mass = mass_matrix(&m).unwrap();
        for e in 0..m.edge_count() {
            let [a, b] = m.edges()[e].faces;
            assert_abs_diff_eq!(mass.get(e, e), (m.area(a) + m.area(b)) / 3.0, epsilon = 1e-14);
        }
        let ones = vec![1.0; m.edge_count()];
        assert_abs_diff_eq!(mass.bilinear(&ones, &ones), m.total_area(), epsilon = 1e-12);
    }

    #[test]
    fn total_area_of_level3_icosphere() {
        let m = icosphere(3);
        let ones = vec![1.0; m.edge_count()];
        let area = mass_matrix(&m).unwrap().bilinear(&ones, &ones);
        let sphere = 4.0 * std::f64::consts::PI;
        assert!(area < sphere && area > 0.99 * sphere, "{area}");
    }

    #[test]
    fn stiffness_kills_constants() {
        let m = icosphere(2);
        let k = stiffness_matrix(&m).unwrap();
        let y = k.mul_vec(&vec![1.0; m.edge_count()]);
        let scale = k.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(y.iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    #[test]
    fn interpolation_examples() {
        let m = icosphere(1);
        let lin = interpolate_cr(&m, |x| Ok(3.0 * x[0] - 2.0 * x[1] + x[2])).unwrap();
        for e in 0..m.edge_count() {
            let x = m.edge_midpoint(e);
            assert_abs_diff_eq!(lin.dofs[e], 3.0 * x[0] - 2.0 * x[1] + x[2], epsilon = 1e-14);
        }
        let c = interpolate_cr(&m, |_| Ok(2.5)).unwrap();
        assert!(c.dofs.iter().all(|&d| (d - 2.5).abs() < 1e-15));

        // edge average of x1^2 on the segment from 0 to e1
        let avg = integrate_edge(|x| x[0] * x[0], &Vec3::zeros(), &Vec3::x(), &EdgeRule::gauss2());
        assert_abs_diff_eq!(avg, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn evaluation_examples() {
        let m = tetrahedron();
        let u = CrFunction::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = u.face_dofs(&m, 0);
        assert_abs_diff_eq!(u.evaluate(&m, 0, &[0.0, 0.5, 0.5]), d[0], epsilon = 1e-15);
        assert_abs_diff_eq!(u.evaluate(&m, 0, &[1.0 / 3.0; 3]), (d[0] + d[1] + d[2]) / 3.0, epsilon = 1e-15);
        let c = CrFunction::new(vec![4.0; 6]);
        assert_abs_diff_eq!(c.evaluate(&m, 2, &[0.2, 0.7, 0.1]), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn jumps_vanish_in_mean() {
        let m = icosphere(2);
        let u = CrFunction::new((0..m.edge_count()).map(|e| ((e * 7919) % 101) as f64 / 10.0).collect());
        let max = u.dofs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for e in 0..m.edge_count() {
            assert!(u.jump_defect(&m, e).abs() <= 1e-12 * m.edge_length(e) * max);
        }
    }

    #[test]
    fn per_face_constants_jump() {
        let m = tetrahedron();
        for e in 0..m.edge_count() {
            let [tp, _] = m.edges()[e].faces;
            let jump = edge_jump(&m, e, |t, _| if t == tp { 0.0 } else { 1.0 });
            assert_abs_diff_eq!(jump, -m.edge_length(e), epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_solution_is_reproduced() {
        let surface = LevelSetSurface::dziuk();
        let m = crate::mesh::icosphere_on(&surface, 2).unwrap();
        let quad = ProjectedQuadrature::new(&m, &surface, TriangleRule::degree4()).unwrap();
        let sol = solve(&m, &SourceTerm::constant(1.0), &quad, &CgOptions::default()).unwrap();
        assert!(sol.report.converged);
        assert!(sol.u_h.dofs.iter().all(|&d| (d - 1.0).abs() < 1e-8));
    }
}
