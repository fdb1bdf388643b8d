//! Level-set surfaces `{phi = 0}` and the differential-geometry queries built on them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::Vec3;

pub type ScalarFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vec3) -> Matrix3<f64> + Send + Sync>;
pub type PointMap = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// Gradients shorter than this are treated as degenerate.
pub const REGULARITY_EPS: f64 = 1e-12;
/// Default absolute tolerance of [`LevelSetSurface::closest_point`].
pub const PROJECTION_TOL: f64 = 1e-12;
/// Default iteration cap of [`LevelSetSurface::closest_point`].
pub const PROJECTION_MAX_ITER: usize = 50;
/// Points must satisfy `|phi| / |grad phi| <= ON_SURFACE_TOL`-style checks in
/// [`LevelSetSurface::laplace_beltrami`].
pub const ON_SURFACE_TOL: f64 = 1e-8;

/// A closed regular surface given implicitly as the zero level of `phi`.
///
/// `phi` is not required to be a signed distance; normals, projections and
/// curvature are all derived from `phi`, its gradient and its Hessian.
#[derive(Clone)]
pub struct LevelSetSurface {
    name: String,
    phi: ScalarFn,
    grad: VectorFn,
    hess: MatrixFn,
    bounding_radius: f64,
    /// Largest first-order distance estimate `|phi|/|grad phi|` accepted by projections.
    max_distance: f64,
    /// Diffeomorphism from the unit sphere onto the surface, when known.
    sphere_map: Option<PointMap>,
}

impl fmt::Debug for LevelSetSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetSurface")
            .field("name", &self.name)
            .field("bounding_radius", &self.bounding_radius)
            .finish()
    }
}

impl LevelSetSurface {
    pub fn new(
        name: impl Into<String>,
        phi: ScalarFn,
        grad: VectorFn,
        hess: MatrixFn,
        bounding_radius: f64,
    ) -> Self {
        Self {
            name: name.into(),
            phi,
            grad,
            hess,
            bounding_radius,
            max_distance: 1.0,
            sphere_map: None,
        }
    }

    /// `phi = |x|^2 - 1`.
    pub fn unit_sphere() -> Self {
        Self::new(
            "sphere",
            Arc::new(|x: &Vec3| x.norm_squared() - 1.0),
            Arc::new(|x: &Vec3| 2.0 * x),
            Arc::new(|_: &Vec3| 2.0 * Matrix3::identity()),
            1.0,
        )
        .with_sphere_map(Arc::new(|y: &Vec3| *y))
    }

    /// `phi = (x1 - x3^2)^2 + x2^2 + x3^2 - 1`.
    pub fn dziuk() -> Self {
        Self::new(
            "dziuk",
            Arc::new(|x: &Vec3| {
                let a = x[0] - x[2] * x[2];
                a * a + x[1] * x[1] + x[2] * x[2] - 1.0
            }),
            Arc::new(|x: &Vec3| {
                let a = x[0] - x[2] * x[2];
                Vector3::new(2.0 * a, 2.0 * x[1], -4.0 * x[2] * a + 2.0 * x[2])
            }),
            Arc::new(|x: &Vec3| {
                let a = x[0] - x[2] * x[2];
                let xz = -4.0 * x[2];
                let zz = 8.0 * x[2] * x[2] - 4.0 * a + 2.0;
                Matrix3::new(2.0, 0.0, xz, 0.0, 2.0, 0.0, xz, 0.0, zz)
            }),
            2.0,
        )
        .with_sphere_map(Arc::new(|y: &Vec3| Vec3::new(y[0] + y[2] * y[2], y[1], y[2])))
    }

    /// `phi = 400 (x1^2 x2^2 + x2^2 x3^2 + x1^2 x3^2) - (1 - |x|^2)^3 - 40`.
    pub fn star() -> Self {
        Self::new(
            "star",
            Arc::new(|x: &Vec3| {
                let (a, b, c) = (x[0] * x[0], x[1] * x[1], x[2] * x[2]);
                let s = 1.0 - a - b - c;
                400.0 * (a * b + b * c + a * c) - s * s * s - 40.0
            }),
            Arc::new(|x: &Vec3| {
                let sq = x.component_mul(x);
                let s = 1.0 - sq.sum();
                let t = 6.0 * s * s;
                Vector3::new(
                    800.0 * x[0] * (sq[1] + sq[2]) + t * x[0],
                    800.0 * x[1] * (sq[0] + sq[2]) + t * x[1],
                    800.0 * x[2] * (sq[0] + sq[1]) + t * x[2],
                )
            }),
            Arc::new(|x: &Vec3| {
                let sq = x.component_mul(x);
                let s = 1.0 - sq.sum();
                let t = 6.0 * s * s;
                let mut h = Matrix3::zeros();
                for i in 0..3 {
                    let others: f64 = sq.sum() - sq[i];
                    h[(i, i)] = 800.0 * others + t - 24.0 * s * sq[i];
                    for j in 0..3 {
                        if i != j {
                            h[(i, j)] = 1600.0 * x[i] * x[j] - 24.0 * s * x[i] * x[j];
                        }
                    }
                }
                h
            }),
            2.2,
        )
    }

    /// Looks up one of the built-in surfaces by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(Self::unit_sphere()),
            "dziuk" => Ok(Self::dziuk()),
            "star" => Ok(Self::star()),
            other => Err(Error::UnknownName {
                kind: "surface",
                name: other.to_string(),
            }),
        }
    }

    /// Registers a map taking unit-sphere points onto the surface.
    pub fn with_sphere_map(mut self, map: PointMap) -> Self {
        self.sphere_map = Some(map);
        self
    }

    /// Image of the unit-sphere point `y`: the registered sphere map if any,
    /// otherwise the radial point along `y`.
    pub fn from_sphere(&self, y: &Vec3) -> Result<Vec3> {
        match &self.sphere_map {
            Some(map) => Ok(map(y)),
            None => self.radial_point(y),
        }
    }

    pub fn with_max_distance(mut self, max_distance: f64) -> Self {
        self.max_distance = max_distance;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn phi(&self, x: &Vec3) -> f64 {
        (self.phi)(x)
    }

    pub fn grad_phi(&self, x: &Vec3) -> Vec3 {
        (self.grad)(x)
    }

    pub fn hess_phi(&self, x: &Vec3) -> Matrix3<f64> {
        (self.hess)(x)
    }

    fn regular_gradient(&self, x: &Vec3) -> Result<Vec3> {
        let g = self.grad_phi(x);
        let norm = g.norm();
        if !(norm >= REGULARITY_EPS) {
            return Err(Error::DegenerateGradient { point: *x, norm });
        }
        Ok(g)
    }

    /// Unit normal `grad phi / |grad phi|`, pointing towards increasing `phi`.
    pub fn unit_normal(&self, x: &Vec3) -> Result<Vec3> {
        let g = self.regular_gradient(x)?;
        Ok(g / g.norm())
    }

    /// First-order estimate of the distance from `x` to the surface.
    pub fn distance_estimate(&self, x: &Vec3) -> Result<f64> {
        let g = self.regular_gradient(x)?;
        Ok(self.phi(x).abs() / g.norm())
    }

    /// Mean-curvature-type quantity `div(grad phi / |grad phi|)`.
    pub fn normal_divergence(&self, x: &Vec3) -> Result<f64> {
        let g = self.regular_gradient(x)?;
        let norm = g.norm();
        let n = g / norm;
        let h = self.hess_phi(x);
        Ok((h.trace() - n.dot(&(h * n))) / norm)
    }

    /// Tangential projector `I - n n^T` at `x`.
    pub fn tangent_projector(&self, x: &Vec3) -> Result<Matrix3<f64>> {
        let n = self.unit_normal(x)?;
        Ok(Matrix3::identity() - n * n.transpose())
    }

    /// One Newton step towards `phi = 0` along the gradient.
    pub fn first_order_projection(&self, x: &Vec3) -> Result<Vec3> {
        let g = self.regular_gradient(x)?;
        Ok(x - self.phi(x) * g / g.norm_squared())
    }

    pub fn closest_point(&self, x: &Vec3) -> Result<Vec3> {
        self.closest_point_with(x, PROJECTION_TOL, PROJECTION_MAX_ITER)
    }

    /// Closest point on the surface.
    ///
    /// Solves the stationarity system `p - x + mu grad phi(p) = 0, phi(p) = 0`
    /// with damped Newton, started from a gradient-projected guess. When a
    /// Newton step fails to reduce the residual, an alternating
    /// projection/tangential-correction step is taken instead.
    pub fn closest_point_with(&self, x: &Vec3, tol: f64, max_iter: usize) -> Result<Vec3> {
        let estimate = self.distance_estimate(x)?;
        if estimate > self.max_distance {
            return Err(Error::OutsideTubularNeighborhood {
                point: *x,
                distance: estimate,
            });
        }

        let mut p = *x;
        for _ in 0..3 {
            let g = self.regular_gradient(&p)?;
            let val = self.phi(&p);
            if val.abs() <= tol {
                break;
            }
            p -= val * g / g.norm_squared();
        }
        let g = self.regular_gradient(&p)?;
        let mut mu = (x - p).dot(&g) / g.norm_squared();

        let residual = |p: &Vec3, mu: f64| -> Result<(Vector4<f64>, Vec3)> {
            let g = self.regular_gradient(p)?;
            let r = p - x + mu * g;
            Ok((Vector4::new(r[0], r[1], r[2], self.phi(p)), g))
        };

        for _ in 0..max_iter {
            if self.projection_converged(x, &p, tol)? {
                return Ok(p);
            }
            let (f, g) = residual(&p, mu)?;
            let h = self.hess_phi(&p);
            let a = Matrix3::identity() + mu * h;
            let mut jac = Matrix4::zeros();
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
            jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&g);
            jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&g.transpose());

            let mut accepted = false;
            if let Some(step) = jac.lu().solve(&f) {
                let f_norm = f.norm();
                let mut damping = 1.0;
                for _ in 0..8 {
                    let cand_p = p - damping * Vector3::new(step[0], step[1], step[2]);
                    let cand_mu = mu - damping * step[3];
                    if let Ok((cand_f, _)) = residual(&cand_p, cand_mu) {
                        if cand_f.norm() < f_norm || cand_f.norm() <= tol {
                            p = cand_p;
                            mu = cand_mu;
                            accepted = true;
                            break;
                        }
                    }
                    damping *= 0.5;
                }
            }
            if !accepted {
                // alternating fallback
                let g = self.regular_gradient(&p)?;
                p -= self.phi(&p) * g / g.norm_squared();
                let proj = self.tangent_projector(&p)?;
                p += proj * (x - p);
                let g = self.regular_gradient(&p)?;
                p -= self.phi(&p) * g / g.norm_squared();
                let g = self.regular_gradient(&p)?;
                mu = (x - p).dot(&g) / g.norm_squared();
            }
        }
        if self.projection_converged(x, &p, tol)? {
            return Ok(p);
        }
        Err(Error::NoConvergence {
            what: "closest-point projection",
            iterations: max_iter,
            residual: self.phi(&p).abs(),
        })
    }

    fn projection_converged(&self, x: &Vec3, p: &Vec3, tol: f64) -> Result<bool> {
        if self.phi(p).abs() > tol {
            return Ok(false);
        }
        let n = self.unit_normal(p)?;
        let d = x - p;
        let tangential = d - d.dot(&n) * n;
        Ok(tangential.norm() <= tol * (1.0 + d.norm()))
    }

    /// Laplace-Beltrami operator of an ambient field at a surface point:
    /// `lap u - (grad u . n) div n - n^T (hess u) n`.
    pub fn laplace_beltrami(&self, u: &AmbientField, x: &Vec3) -> Result<f64> {
        let dist = self.distance_estimate(x)?;
        if dist > ON_SURFACE_TOL {
            return Err(Error::NotOnSurface {
                point: *x,
                residual: self.phi(x),
            });
        }
        let n = self.unit_normal(x)?;
        let div_n = self.normal_divergence(x)?;
        let hu = u.hessian(x);
        Ok(hu.trace() - u.gradient(x).dot(&n) * div_n - n.dot(&(hu * n)))
    }

    /// Tangential gradient `P grad u` at a surface point.
    pub fn tangential_gradient(&self, u: &AmbientField, x: &Vec3) -> Result<Vec3> {
        Ok(self.tangent_projector(x)? * u.gradient(x))
    }

    /// Point on the surface along the ray from the origin through `direction`.
    ///
    /// Requires `phi(0) < 0` and a single crossing along the ray (star-shaped
    /// surfaces). Used to map sphere meshes onto the surface.
    pub fn radial_point(&self, direction: &Vec3) -> Result<Vec3> {
        let d = direction.normalize();
        let origin = self.phi(&Vec3::zeros());
        if origin >= 0.0 {
            return Err(Error::NotStarShaped {
                surface: self.name.clone(),
            });
        }
        let mut lo = 0.0;
        let mut hi = self.bounding_radius;
        while self.phi(&(hi * d)) <= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NotStarShaped {
                    surface: self.name.clone(),
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.phi(&(mid * d)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mut t = 0.5 * (lo + hi);
        // Newton polish along the ray
        for _ in 0..4 {
            let p = t * d;
            let slope = self.grad_phi(&p).dot(&d);
            if slope.abs() < REGULARITY_EPS {
                break;
            }
            let next = t - self.phi(&p) / slope;
            if next < lo || next > hi {
                break;
            }
            t = next;
        }
        Ok(t * d)
    }
}

/// A smooth scalar field on R^3 with its gradient and Hessian.
#[derive(Clone)]
pub struct AmbientField {
    name: String,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: MatrixFn,
}

impl fmt::Debug for AmbientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AmbientField").field("name", &self.name).finish()
    }
}

impl AmbientField {
    pub fn new(name: impl Into<String>, value: ScalarFn, gradient: VectorFn, hessian: MatrixFn) -> Self {
        Self {
            name: name.into(),
            value,
            gradient,
            hessian,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            "constant",
            Arc::new(move |_: &Vec3| c),
            Arc::new(|_: &Vec3| Vec3::zeros()),
            Arc::new(|_: &Vec3| Matrix3::zeros()),
        )
    }

    /// `a . x + b`.
    pub fn linear(a: Vec3, b: f64) -> Self {
        Self::new(
            "linear",
            Arc::new(move |x: &Vec3| a.dot(x) + b),
            Arc::new(move |_: &Vec3| a),
            Arc::new(|_: &Vec3| Matrix3::zeros()),
        )
    }

    /// `x_i x_j` (zero-based component indices).
    pub fn product(i: usize, j: usize) -> Self {
        Self::new(
            format!("x{}x{}", i + 1, j + 1),
            Arc::new(move |x: &Vec3| x[i] * x[j]),
            Arc::new(move |x: &Vec3| {
                let mut g = Vec3::zeros();
                g[i] += x[j];
                g[j] += x[i];
                g
            }),
            Arc::new(move |_: &Vec3| {
                let mut h = Matrix3::zeros();
                h[(i, j)] += 1.0;
                h[(j, i)] += 1.0;
                h
            }),
        )
    }

    /// Quadratic `c + b . x + x^T A x / 2` with symmetric `A`.
    pub fn quadratic(c: f64, b: Vec3, a: Matrix3<f64>) -> Self {
        let a = 0.5 * (a + a.transpose());
        Self::new(
            "quadratic",
            Arc::new(move |x: &Vec3| c + b.dot(x) + 0.5 * x.dot(&(a * x))),
            Arc::new(move |x: &Vec3| b + a * x),
            Arc::new(move |_: &Vec3| a),
        )
    }

    /// `sin^lambda(theta) sin(azimuth)` written in Cartesian form
    /// `x2 (x1^2 + x2^2)^((lambda - 1) / 2)`, which agrees with the spherical
    /// expression on the unit sphere. Singular on the `x3` axis for `lambda < 1`;
    /// value, gradient and Hessian are set to zero there.
    pub fn polar_singular(lambda: f64) -> Self {
        let a = 0.5 * (lambda - 1.0);
        Self::new(
            format!("polar_singular({lambda})"),
            Arc::new(move |x: &Vec3| {
                let s = x[0] * x[0] + x[1] * x[1];
                if s == 0.0 {
                    return 0.0;
                }
                x[1] * s.powf(a)
            }),
            Arc::new(move |x: &Vec3| {
                let s = x[0] * x[0] + x[1] * x[1];
                if s == 0.0 {
                    return Vec3::zeros();
                }
                let sa = s.powf(a);
                let sa1 = sa / s;
                Vector3::new(
                    2.0 * a * x[0] * x[1] * sa1,
                    sa + 2.0 * a * x[1] * x[1] * sa1,
                    0.0,
                )
            }),
            Arc::new(move |x: &Vec3| {
                let s = x[0] * x[0] + x[1] * x[1];
                if s == 0.0 {
                    return Matrix3::zeros();
                }
                let sa1 = s.powf(a) / s;
                let sa2 = sa1 / s;
                let (px, py) = (x[0], x[1]);
                let c = 4.0 * a * (a - 1.0);
                let xx = 2.0 * a * py * sa1 + c * px * px * py * sa2;
                let xy = 2.0 * a * px * sa1 + c * px * py * py * sa2;
                let yy = 6.0 * a * py * sa1 + c * py * py * py * sa2;
                Matrix3::new(xx, xy, 0.0, xy, yy, 0.0, 0.0, 0.0, 0.0)
            }),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &Vec3) -> Matrix3<f64> {
        (self.hessian)(x)
    }
}
