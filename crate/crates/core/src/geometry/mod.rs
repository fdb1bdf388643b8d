//! Analytic surfaces, ambient fields and manufactured right-hand sides.

mod surface;

use std::fmt;
use std::sync::Arc;

pub use surface::{
    AmbientField, LevelSetSurface, MatrixFn, ScalarFn, VectorFn, ON_SURFACE_TOL, PROJECTION_MAX_ITER,
    PROJECTION_TOL, REGULARITY_EPS,
};

use crate::error::Result;
use crate::Vec3;

type SourceFn = Arc<dyn Fn(&Vec3) -> Result<f64> + Send + Sync>;

/// Right-hand side `f`, evaluated at points already lying on the exact surface.
///
/// The discrete load uses `f o p`, so callers project quadrature points first
/// and hand the projected points to [`SourceTerm::at_surface_point`].
#[derive(Clone)]
pub struct SourceTerm {
    name: String,
    eval: SourceFn,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm").field("name", &self.name).finish()
    }
}

impl SourceTerm {
    pub fn new(name: impl Into<String>, eval: impl Fn(&Vec3) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", move |_| Ok(c))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at_surface_point(&self, y: &Vec3) -> Result<f64> {
        (self.eval)(y)
    }

    /// `f(p(x))` for an arbitrary point of the tubular neighborhood.
    pub fn at(&self, surface: &LevelSetSurface, x: &Vec3) -> Result<f64> {
        let y = surface.closest_point(x)?;
        self.at_surface_point(&y)
    }
}

/// `f = -lap_Gamma u + u` computed from the ambient field by the generic operator.
pub fn manufactured_rhs(surface: &LevelSetSurface, u: &AmbientField) -> SourceTerm {
    let surface = surface.clone();
    let u = u.clone();
    SourceTerm::new(format!("manufactured({})", u.name()), move |y| {
        Ok(-surface.laplace_beltrami(&u, y)? + u.value(y))
    })
}

/// Closed-form right-hand side for `u = sin^lambda(theta) sin(azimuth)` on the
/// unit sphere: `(1 + lambda + lambda^2) sin^lambda(theta) sin(azimuth)
/// + (1 - lambda^2) sin^(lambda-2)(theta) sin(azimuth)`.
///
/// Evaluates to zero on the polar axis.
pub fn polar_singular_rhs(lambda: f64) -> SourceTerm {
    SourceTerm::new(format!("polar_singular_rhs({lambda})"), move |y| {
        let rho2 = y[0] * y[0] + y[1] * y[1];
        if rho2 == 0.0 {
            return Ok(0.0);
        }
        let r = y.norm();
        let sin_theta = rho2.sqrt() / r;
        let sin_az = y[1] / rho2.sqrt();
        let main = (1.0 + lambda + lambda * lambda) * sin_theta.powf(lambda);
        let sing = (1.0 - lambda * lambda) * sin_theta.powf(lambda - 2.0);
        Ok((main + sing) * sin_az)
    })
}

/// A model problem `-lap_Gamma u + u = f` with an optional known solution.
#[derive(Clone, Debug)]
pub struct Problem {
    pub surface: LevelSetSurface,
    pub source: SourceTerm,
    pub exact: Option<AmbientField>,
}

impl Problem {
    /// Problem whose right-hand side is manufactured from `u`.
    pub fn manufactured(surface: LevelSetSurface, u: AmbientField) -> Self {
        let source = manufactured_rhs(&surface, &u);
        Self {
            surface,
            source,
            exact: Some(u),
        }
    }

    /// Singular benchmark on the unit sphere.
    pub fn polar_singular(lambda: f64) -> Self {
        Self {
            surface: LevelSetSurface::unit_sphere(),
            source: polar_singular_rhs(lambda),
            exact: Some(AmbientField::polar_singular(lambda)),
        }
    }

    pub fn source_only(surface: LevelSetSurface, source: SourceTerm) -> Self {
        Self {
            surface,
            source,
            exact: None,
        }
    }
}
