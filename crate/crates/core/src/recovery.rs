//! Parametric polynomial-preserving gradient recovery for surface CR elements.
//!
//! For every edge midpoint `x_i` a patch of triangles is grown layer by layer
//! until the midpoints it contains admit a unique least-squares quadratic.
//! Midpoints are projected onto the plane through `x_i` orthogonal to the
//! local normal `phi3`; two quadratics are fitted over the projected
//! parameters, one to the heights along `phi3` (the local surface graph `s`)
//! and one to the discrete solution (`p`). The recovered tangential gradient
//! is `J (J^T J)^-1 grad p(0)` with `J = [e1, e2, grad s(0)]^T`, the Jacobian
//! of `xi -> (xi, s(xi))`, mapped back to global coordinates.
//!
//! The recovered value depends linearly on the samples, so the whole
//! operator is precomputed per mesh as sparse 3-vector weights.

use nalgebra::{DMatrix, Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::cr_fem::{CrFunction, ScalarCr, VectorCr};
use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::Vec3;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Patches are grown at most this many layers.
pub const MAX_LAYERS: usize = 10;

/// Orthonormal frame at an edge midpoint; `axes[2]` is the local normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchFrame {
    pub origin: Vec3,
    pub axes: [Vec3; 3],
    pub edge: usize,
}

impl PatchFrame {
    /// Frame with the given normal and a deterministic tangent basis.
    pub fn from_normal(origin: Vec3, normal: Vec3, edge: usize) -> Self {
        let phi3 = normal.normalize();
        let k = (0..3)
            .min_by(|&a, &b| phi3[a].abs().total_cmp(&phi3[b].abs()))
            .unwrap();
        let seed = Vec3::ith(k, 1.0);
        let phi1 = (seed - seed.dot(&phi3) * phi3).normalize();
        let phi2 = phi3.cross(&phi1);
        Self {
            origin,
            axes: [phi1, phi2, phi3],
            edge,
        }
    }

    /// Rotates the tangent pair `(phi1, phi2)` by `angle` about `phi3`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let [a, b, n] = self.axes;
        Self {
            axes: [c * a + s * b, -s * a + c * b, n],
            ..*self
        }
    }

    /// Local coordinates `((x - o).phi1, (x - o).phi2, (x - o).phi3)`.
    pub fn local(&self, x: &Vec3) -> Vec3 {
        let d = x - self.origin;
        Vec3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }

    pub fn to_global(&self, v: &Vec3) -> Vec3 {
        v[0] * self.axes[0] + v[1] * self.axes[1] + v[2] * self.axes[2]
    }
}

/// Frame whose normal is the normalized sum of the two adjacent face normals.
pub fn local_frame(mesh: &SurfaceMesh, e: usize) -> Result<PatchFrame> {
    let [tp, tm] = mesh.edges()[e].faces;
    let n = mesh.face_normal(tp) + mesh.face_normal(tm);
    if n.norm() < 1e-10 {
        return Err(Error::DegenerateFrame(e));
    }
    Ok(PatchFrame::from_normal(mesh.edge_midpoint(e), n, e))
}

/// Midpoints sampled around one edge.
#[derive(Clone, Debug)]
pub struct Patch {
    /// Member edges; the origin edge comes first.
    pub edges: Vec<usize>,
    /// Projected parameters of the member midpoints.
    pub params: Vec<[f64; 2]>,
    /// Heights of the member midpoints along the local normal.
    pub heights: Vec<f64>,
    pub layers: usize,
}

/// Least-squares fit `c0 + c1 xi1 + c2 xi2 + c3 xi1^2 + c4 xi1 xi2 + c5 xi2^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticFit {
    pub coeffs: [f64; 6],
    pub residual_norm: f64,
    /// Smallest over largest singular value of the scaled design matrix.
    pub condition: f64,
}

impl QuadraticFit {
    pub fn eval(&self, xi: &[f64; 2]) -> f64 {
        let c = &self.coeffs;
        c[0] + c[1] * xi[0] + c[2] * xi[1] + c[3] * xi[0] * xi[0] + c[4] * xi[0] * xi[1] + c[5] * xi[1] * xi[1]
    }

    pub fn gradient_at_origin(&self) -> [f64; 2] {
        [self.coeffs[1], self.coeffs[2]]
    }
}

/// Pseudoinverse of the scaled quadratic design matrix of a parameter set.
#[derive(Clone, Debug)]
pub struct QuadraticLeastSquares {
    pinv: DMatrix<f64>,
    scale: f64,
    rank: usize,
    condition: f64,
    params: Vec<[f64; 2]>,
}

impl QuadraticLeastSquares {
    /// `scale` should be the patch diameter; parameters are divided by it
    /// before building the design matrix.
    pub fn new(params: &[[f64; 2]], scale: f64) -> Self {
        let m = params.len();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut a = DMatrix::zeros(m, 6);
        for (r, xi) in params.iter().enumerate() {
            let (x, y) = (xi[0] / scale, xi[1] / scale);
            for (c, v) in [1.0, x, y, x * x, x * y, y * y].into_iter().enumerate() {
                a[(r, c)] = v;
            }
        }
        let svd = a.svd(true, true);
        let sv = &svd.singular_values;
        let largest = sv.iter().fold(0.0f64, |m, &s| m.max(s));
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * largest).count();
        let smallest = if m >= 6 { sv.iter().fold(f64::INFINITY, |m, &s| m.min(s)) } else { 0.0 };
        let pinv = svd
            .pseudo_inverse(RANK_TOL * largest)
            .unwrap_or_else(|_| DMatrix::zeros(6, m));
        Self {
            pinv,
            scale,
            rank,
            condition: if largest > 0.0 { smallest / largest } else { 0.0 },
            params: params.to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == 6
    }

    /// Coefficients in unscaled parameters.
    pub fn fit(&self, samples: &[f64]) -> Result<QuadraticFit> {
        if !self.is_full_rank() {
            return Err(Error::RankDeficient { rank: self.rank });
        }
        let mut coeffs = [0.0; 6];
        let powers = [0, 1, 1, 2, 2, 2];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let scaled: f64 = (0..samples.len()).map(|j| self.pinv[(k, j)] * samples[j]).sum();
            *c = scaled / self.scale.powi(powers[k]);
        }
        let mut fit = QuadraticFit {
            coeffs,
            residual_norm: 0.0,
            condition: self.condition,
        };
        fit.residual_norm = self
            .params
            .iter()
            .zip(samples)
            .map(|(xi, s)| (fit.eval(xi) - s).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(fit)
    }

    /// Row of the pseudoinverse giving coefficient `k` (unscaled) per sample.
    fn coefficient_weights(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let powers = [0, 1, 1, 2, 2, 2];
        let s = self.scale.powi(powers[k]);
        (0..self.pinv.ncols()).map(move |j| self.pinv[(k, j)] / s)
    }
}

/// Least-squares fit of `samples` over `params` with diameter scaling.
pub fn fit_quadratic(params: &[[f64; 2]], samples: &[f64], scale: f64) -> Result<QuadraticFit> {
    QuadraticLeastSquares::new(params, scale).fit(samples)
}

fn patch_scale(params: &[[f64; 2]]) -> f64 {
    params.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
}

/// Edges of all faces in `faces`, origin edge first, without duplicates.
fn member_edges(mesh: &SurfaceMesh, origin: usize, faces: &[usize]) -> Vec<usize> {
    let mut out = vec![origin];
    for &t in faces {
        for &e in &mesh.face_edges()[t] {
            if !out.contains(&e) {
                out.push(e);
            }
        }
    }
    out
}

/// Grows layers around edge `e` until the rank condition holds.
pub fn build_patch(mesh: &SurfaceMesh, e: usize, frame: &PatchFrame) -> Result<Patch> {
    let mut faces: Vec<usize> = mesh.edges()[e].faces.to_vec();
    for layers in 1..=MAX_LAYERS {
        if layers > 1 {
            let current = faces.clone();
            for t in current {
                for nb in mesh.face_neighbors(t) {
                    if !faces.contains(&nb) {
                        faces.push(nb);
                    }
                }
            }
        }
        let edges = member_edges(mesh, e, &faces);
        if edges.len() < 6 {
            continue;
        }
        let local: Vec<Vec3> = edges.iter().map(|&k| frame.local(&mesh.edge_midpoint(k))).collect();
        let params: Vec<[f64; 2]> = local.iter().map(|v| [v[0], v[1]]).collect();
        if QuadraticLeastSquares::new(&params, patch_scale(&params)).is_full_rank() {
            return Ok(Patch {
                edges,
                heights: local.iter().map(|v| v[2]).collect(),
                params,
                layers,
            });
        }
    }
    Err(Error::PatchGrowthExceeded {
        edge: e,
        layers: MAX_LAYERS,
    })
}

/// Recovered gradient at a patch origin together with the fitted surface data.
#[derive(Clone, Copy, Debug)]
pub struct RecoveredGradient {
    pub gradient: Vec3,
    /// Unit normal of the fitted graph `(xi, s(xi))` at the origin, global coordinates.
    pub fitted_normal: Vec3,
}

/// Linear map from `grad p(0)` to the recovered gradient in frame coordinates.
fn tangent_map(surface_fit: &QuadraticFit) -> (nalgebra::Matrix3x2<f64>, Vec3) {
    let [s1, s2] = surface_fit.gradient_at_origin();
    let jac = nalgebra::Matrix3x2::new(1.0, 0.0, 0.0, 1.0, s1, s2);
    let gram: Matrix2<f64> = jac.transpose() * jac;
    // J^T J = I + grad s grad s^T is always invertible
    let inv = gram.try_inverse().expect("metric tensor is positive definite");
    (jac * inv, Vector3::new(-s1, -s2, 1.0).normalize())
}

/// Gradient recovery from sampled points and values in a given frame.
///
/// `points[k]` are the sampling sites (the origin need not be included) and
/// `values[k]` the data there.
pub fn recover_from_samples(frame: &PatchFrame, points: &[Vec3], values: &[f64]) -> Result<RecoveredGradient> {
    let local: Vec<Vec3> = points.iter().map(|x| frame.local(x)).collect();
    let params: Vec<[f64; 2]> = local.iter().map(|v| [v[0], v[1]]).collect();
    let heights: Vec<f64> = local.iter().map(|v| v[2]).collect();
    let ls = QuadraticLeastSquares::new(&params, patch_scale(&params));
    let s_fit = ls.fit(&heights)?;
    let p_fit = ls.fit(values)?;
    let (map, normal) = tangent_map(&s_fit);
    let g = map * Vector2::from(p_fit.gradient_at_origin());
    Ok(RecoveredGradient {
        gradient: frame.to_global(&g),
        fitted_normal: frame.to_global(&normal),
    })
}

/// Recovered gradient at the midpoint of edge `e`.
pub fn recovered_gradient_at(mesh: &SurfaceMesh, e: usize, u_h: &ScalarCr) -> Result<RecoveredGradient> {
    let frame = local_frame(mesh, e)?;
    recovered_gradient_in_frame(mesh, &frame, u_h)
}

/// Same as [`recovered_gradient_at`] with an explicitly supplied frame.
pub fn recovered_gradient_in_frame(mesh: &SurfaceMesh, frame: &PatchFrame, u_h: &ScalarCr) -> Result<RecoveredGradient> {
    let patch = build_patch(mesh, frame.edge, frame)?;
    let points: Vec<Vec3> = patch.edges.iter().map(|&k| mesh.edge_midpoint(k)).collect();
    let values: Vec<f64> = patch.edges.iter().map(|&k| u_h.dofs[k]).collect();
    recover_from_samples(frame, &points, &values)
}

/// Recovery weights of one edge: `G(x_i) = sum_k weights[k] * u[edges[k]]`.
#[derive(Clone, Debug)]
pub struct EdgeStencil {
    pub edges: Vec<usize>,
    pub weights: Vec<Vec3>,
    pub layers: usize,
}

fn edge_stencil(mesh: &SurfaceMesh, e: usize) -> Result<EdgeStencil> {
    let frame = local_frame(mesh, e)?;
    let patch = build_patch(mesh, e, &frame)?;
    let ls = QuadraticLeastSquares::new(&patch.params, patch_scale(&patch.params));
    let s_fit = ls.fit(&patch.heights)?;
    let (map, _) = tangent_map(&s_fit);
    let w1: Vec<f64> = ls.coefficient_weights(1).collect();
    let w2: Vec<f64> = ls.coefficient_weights(2).collect();
    let weights = w1
        .iter()
        .zip(&w2)
        .map(|(&a, &b)| frame.to_global(&(map * Vector2::new(a, b))))
        .collect();
    Ok(EdgeStencil {
        edges: patch.edges,
        weights,
        layers: patch.layers,
    })
}

/// Gradient recovery operator of a fixed mesh.
#[derive(Clone, Debug)]
pub struct RecoveryOperator {
    stencils: Vec<EdgeStencil>,
}

impl RecoveryOperator {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        let results: Vec<Result<EdgeStencil>> = (0..mesh.edge_count()).into_par_iter().map(|e| edge_stencil(mesh, e)).collect();
        let mut stencils = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (e, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => stencils.push(s),
                Err(err) => failures.push((e, Box::new(err))),
            }
        }
        if !failures.is_empty() {
            return Err(Error::Recovery(failures));
        }
        Ok(Self { stencils })
    }

    pub fn stencil(&self, e: usize) -> &EdgeStencil {
        &self.stencils[e]
    }

    pub fn apply(&self, u_h: &ScalarCr) -> VectorCr {
        let dofs = self
            .stencils
            .par_iter()
            .map(|s| s.edges.iter().zip(&s.weights).map(|(&k, w)| w * u_h.dofs[k]).sum())
            .collect();
        CrFunction::new(dofs)
    }
}

/// Recovered gradient field `G_h u_h` as a vector-valued CR function.
pub fn recover_field(mesh: &SurfaceMesh, u_h: &ScalarCr) -> Result<VectorCr> {
    Ok(RecoveryOperator::new(mesh)?.apply(u_h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr_fem::interpolate_midpoints;
    use crate::mesh::icosphere;
    use approx::assert_abs_diff_eq;

    fn generic_points() -> Vec<[f64; 2]> {
        vec![
            [0.0, 0.0],
            [0.3, 0.1],
            [-0.2, 0.25],
            [0.1, -0.4],
            [-0.35, -0.15],
            [0.45, 0.3],
            [0.05, 0.5],
        ]
    }

    #[test]
    fn quadratic_is_reproduced() {
        let pts = generic_points();
        let q = |p: &[f64; 2]| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[0];
        let samples: Vec<f64> = pts.iter().map(q).collect();
        let fit = fit_quadratic(&pts, &samples, 0.5).unwrap();
        let expected = [1.0, 2.0, -1.0, 3.0, 0.0, 0.0];
        for (c, e) in fit.coeffs.iter().zip(expected) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-10);
        }
        let constant = fit_quadratic(&pts, &vec![4.0; pts.len()], 0.5).unwrap();
        assert_abs_diff_eq!(constant.coeffs[0], 4.0, epsilon = 1e-12);
        assert!(constant.coeffs[1..].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let pts: Vec<[f64; 2]> = (0..8).map(|k| [k as f64 * 0.1, 0.0]).collect();
        assert!(matches!(
            fit_quadratic(&pts, &vec![0.0; 8], 1.0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn cubic_gradient_superconverges_on_symmetric_patch() {
        // 12 points symmetric under xi -> -xi: odd cubic terms do not pollute c1, c2
        // beyond O(diam^2).
        let cubic = |p: &[f64; 2]| p[0] - 2.0 * p[1] + p[0].powi(3) + 0.5 * p[0] * p[1] * p[1] - p[1].powi(3);
        let grad0 = [1.0, -2.0];
        let mut errs = Vec::new();
        for h in [0.2, 0.1, 0.05] {
            let mut pts = Vec::new();
            for k in 0..6 {
                let a = std::f64::consts::PI * k as f64 / 3.0 + 0.2;
                pts.push([h * a.cos(), h * a.sin()]);
                pts.push([0.5 * h * (a + 0.5).cos(), 0.5 * h * (a + 0.5).sin()]);
            }
            let samples: Vec<f64> = pts.iter().map(cubic).collect();
            let fit = fit_quadratic(&pts, &samples, h).unwrap();
            let g = fit.gradient_at_origin();
            errs.push(((g[0] - grad0[0]).powi(2) + (g[1] - grad0[1]).powi(2)).sqrt());
        }
        assert!((errs[0] / errs[1]).log2() > 1.9);
        assert!((errs[1] / errs[2]).log2() > 1.9);
    }

    #[test]
    fn frame_examples() {
        let f = PatchFrame::from_normal(Vec3::zeros(), Vec3::z(), 0);
        assert_abs_diff_eq!(f.axes[2], Vec3::z(), epsilon = 1e-15);
        let f = PatchFrame::from_normal(Vec3::zeros(), Vec3::x() + Vec3::y(), 0);
        assert_abs_diff_eq!(f.axes[2], (Vec3::x() + Vec3::y()) / 2f64.sqrt(), epsilon = 1e-15);
        let m = icosphere(2);
        for e in 0..m.edge_count() {
            let f = local_frame(&m, e).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(f.axes[i].dot(&f.axes[j]), expect, epsilon = 1e-14);
                }
            }
            assert_eq!(f.local(&f.origin), Vec3::zeros());
        }
    }

    #[test]
    fn icosphere_patches_need_two_layers() {
        let m = icosphere(2);
        for e in 0..m.edge_count() {
            let f = local_frame(&m, e).unwrap();
            let p = build_patch(&m, e, &f).unwrap();
            assert_eq!(p.layers, 2);
            assert_eq!(p.edges[0], e);
            assert_eq!(p.params[0], [0.0, 0.0]);
            assert!(p.edges.len() >= 6);
        }
    }

    #[test]
    fn constant_data_recovers_zero() {
        let m = icosphere(2);
        let g = recover_field(&m, &CrFunction::new(vec![3.0; m.edge_count()])).unwrap();
        assert!(g.dofs.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn operator_matches_direct_recovery() {
        let m = icosphere(2);
        let u = interpolate_midpoints(&m, |x| Ok(x[0] * x[1] + x[2])).unwrap();
        let field = recover_field(&m, &u).unwrap();
        for e in (0..m.edge_count()).step_by(17) {
            let direct = recovered_gradient_at(&m, e, &u).unwrap();
            assert_abs_diff_eq!(direct.gradient, field.dofs[e], epsilon = 1e-12);
            assert!(direct.gradient.dot(&direct.fitted_normal).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_recovery_is_second_order() {
        let sphere = crate::geometry::LevelSetSurface::unit_sphere();
        let u = crate::geometry::AmbientField::product(0, 1);
        let mut errs = Vec::new();
        for level in [3, 4, 5] {
            let m = icosphere(level);
            let uh = interpolate_midpoints(&m, |x| {
                let p = sphere.closest_point(x)?;
                Ok(u.value(&p))
            })
            .unwrap();
            let mut worst = 0.0f64;
            for e in (0..m.edge_count()).step_by(97) {
                let g = recovered_gradient_at(&m, e, &uh).unwrap().gradient;
                let p = sphere.closest_point(&m.edge_midpoint(e)).unwrap();
                let exact = sphere.tangential_gradient(&u, &p).unwrap();
                worst = worst.max((g - exact).norm());
            }
            errs.push(worst);
        }
        assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.5, "{errs:?}");
    }
}
