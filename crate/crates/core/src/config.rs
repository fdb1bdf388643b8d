//! Experiment configuration: TOML sections with validation and an
//! "effective config" dump that reproduces a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{validate_theta, Discretization, IndicatorMode};
use crate::geometry::{AmbientField, LevelSetSurface, Problem, SourceTerm};
use crate::mesh::{icosphere_on, load_mesh, MeshFormat, ProjectionMode, SurfaceMesh};
use crate::solver::{CgOptions, Preconditioner};
use crate::Vec3;
use nalgebra::Matrix3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    /// `sphere`, `dziuk` or `star`.
    pub name: String,
    /// Cap on `|phi|` accepted by the closest-point projection.
    pub max_distance: f64,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self {
            name: "sphere".into(),
            max_distance: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    /// `u = x1 x2` with a manufactured right-hand side.
    #[default]
    X1x2,
    /// `u = sin^lambda(theta) sin(phi)` on the unit sphere.
    Singular,
    /// `u = value`, so `f = value`.
    Constant,
    /// No known solution; `f = source + source_linear . x + x^T source_quadratic x`.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolutionSection {
    pub name: SolutionKind,
    pub lambda: f64,
    pub value: f64,
    pub source: f64,
    pub source_linear: [f64; 3],
    pub source_quadratic: [[f64; 3]; 3],
}

impl Default for SolutionSection {
    fn default() -> Self {
        Self {
            name: SolutionKind::X1x2,
            lambda: 0.6,
            value: 1.0,
            source: 1.0,
            source_linear: [0.0; 3],
            source_quadratic: [[0.0; 3]; 3],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    /// Icosphere mapped onto the surface by its sphere map.
    #[default]
    Icosphere,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub source: MeshSource,
    pub level: usize,
    pub path: Option<PathBuf>,
    pub projection: ProjectionMode,
    pub shape_bound: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            source: MeshSource::Icosphere,
            level: 2,
            path: None,
            projection: ProjectionMode::Exact,
            shape_bound: crate::mesh::DEFAULT_SHAPE_BOUND,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    #[default]
    Uniform,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinementSection {
    pub mode: RefinementMode,
    /// Number of solved meshes.
    pub rounds: usize,
    pub theta: f64,
    pub indicator: IndicatorMode,
}

impl Default for RefinementSection {
    fn default() -> Self {
        Self {
            mode: RefinementMode::Uniform,
            rounds: 5,
            theta: 0.5,
            indicator: IndicatorMode::Tangential,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub load_degree: usize,
    pub error_degree: usize,
    pub indicator_degree: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            load_degree: 4,
            error_degree: 4,
            indicator_degree: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = CgOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            preconditioner: d.preconditioner,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the final solution and recovered gradient as CSV.
    pub solution: bool,
    /// Also write legacy VTK files for the final fields.
    pub vtk: bool,
    /// Write every solved adaptive mesh as OFF.
    pub mesh_snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            solution: false,
            vtk: false,
            mesh_snapshots: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub surface: SurfaceSection,
    pub solution: SolutionSection,
    pub mesh: MeshSection,
    pub refinement: RefinementSection,
    pub quadrature: QuadratureSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        LevelSetSurface::by_name(&self.surface.name)?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.surface.max_distance > 0.0) {
            return bad(format!("surface.max_distance must be positive, got {}", self.surface.max_distance));
        }
        if self.solution.name == SolutionKind::Singular {
            if self.surface.name != "sphere" {
                return bad("the singular solution is defined on the unit sphere only".into());
            }
            if !(self.solution.lambda > 0.0) {
                return bad(format!("solution.lambda must be positive, got {}", self.solution.lambda));
            }
        }
        let coeffs = std::iter::once(self.solution.source)
            .chain(self.solution.source_linear)
            .chain(self.solution.source_quadratic.into_iter().flatten());
        if coeffs.into_iter().any(|v| !v.is_finite()) {
            return bad("solution source coefficients must be finite".into());
        }
        if self.mesh.source == MeshSource::File {
            match &self.mesh.path {
                None => return bad("mesh.path is required when mesh.source = \"file\"".into()),
                Some(p) if MeshFormat::from_path(p).is_none() => {
                    return bad(format!("mesh.path {} must end in .off or .obj", p.display()))
                }
                _ => {}
            }
        }
        if self.mesh.level > 9 {
            return bad(format!("mesh.level {} is too large", self.mesh.level));
        }
        if !(self.mesh.shape_bound > 1.0) {
            return bad(format!("mesh.shape_bound must exceed 1, got {}", self.mesh.shape_bound));
        }
        if self.refinement.rounds == 0 {
            return bad("refinement.rounds must be at least 1".into());
        }
        validate_theta(self.refinement.theta)?;
        let q = &self.quadrature;
        for (k, d) in [("load_degree", q.load_degree), ("error_degree", q.error_degree), ("indicator_degree", q.indicator_degree)] {
            if d == 0 || d > 20 {
                return bad(format!("quadrature.{k} must lie in 1..=20, got {d}"));
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad(format!("solver.tol must lie in (0, 1), got {}", self.solver.tol));
        }
        if self.solver.max_iter == Some(0) {
            return bad("solver.max_iter must be positive".into());
        }
        Ok(())
    }

    pub fn surface(&self) -> Result<LevelSetSurface> {
        Ok(LevelSetSurface::by_name(&self.surface.name)?.with_max_distance(self.surface.max_distance))
    }

    pub fn problem(&self) -> Result<Problem> {
        let surface = self.surface()?;
        let s = &self.solution;
        Ok(match s.name {
            SolutionKind::X1x2 => Problem::manufactured(surface, AmbientField::product(0, 1)),
            SolutionKind::Singular => {
                let mut p = Problem::polar_singular(s.lambda);
                p.surface = surface;
                p
            }
            SolutionKind::Constant => Problem::manufactured(surface, AmbientField::constant(s.value)),
            SolutionKind::None => {
                let (c, b, q) = (s.source, Vec3::from(s.source_linear), Matrix3::from(s.source_quadratic).transpose());
                let f = SourceTerm::new("polynomial", move |x: &Vec3| Ok(c + b.dot(x) + x.dot(&(q * x))));
                Problem::source_only(surface, f)
            }
        })
    }

    pub fn initial_mesh(&self, surface: &LevelSetSurface) -> Result<SurfaceMesh> {
        let mesh = match self.mesh.source {
            MeshSource::Icosphere => icosphere_on(surface, self.mesh.level)?,
            MeshSource::File => {
                let path = self
                    .mesh
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("mesh.path is required".into()))?;
                let format = MeshFormat::from_path(path)
                    .ok_or_else(|| Error::Config(format!("unknown mesh format for {}", path.display())))?;
                load_mesh(path, format)?
            }
        };
        mesh.check_shape(self.mesh.shape_bound)?;
        Ok(mesh)
    }

    pub fn discretization(&self) -> Discretization {
        Discretization {
            load_degree: self.quadrature.load_degree,
            error_degree: self.quadrature.error_degree,
            indicator_degree: self.quadrature.indicator_degree,
            indicator_mode: self.refinement.indicator,
            projection: self.mesh.projection,
            cg: CgOptions {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                preconditioner: self.solver.preconditioner,
            },
        }
    }
}
