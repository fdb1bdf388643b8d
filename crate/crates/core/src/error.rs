use std::path::PathBuf;

use thiserror::Error;

use crate::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gradient of the level set vanishes at {point:?} (|grad phi| = {norm:e})")]
    DegenerateGradient { point: Vec3, norm: f64 },

    #[error("point {point:?} is not on the surface (phi = {residual:e})")]
    NotOnSurface { point: Vec3, residual: f64 },

    #[error("point {point:?} lies outside the tubular neighborhood (distance estimate {distance:e})")]
    OutsideTubularNeighborhood { point: Vec3, distance: f64 },

    #[error("surface `{surface}` is not star-shaped with respect to the origin")]
    NotStarShaped { surface: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-manifold edge ({0}, {1}) has {2} incident faces")]
    NonManifold(usize, usize, usize),

    #[error("faces {0} and {1} induce the same direction on their shared edge")]
    InconsistentOrientation(usize, usize),

    #[error("face {0} references a missing vertex")]
    InvalidFace(usize),

    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),

    #[error("bisection closure did not terminate after {0} passes")]
    ClosureDiverged(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    IndefiniteMatrix { iteration: usize, curvature: f64 },

    #[error("adjacent face normals at edge {0} cancel; no local frame")]
    DegenerateFrame(usize),

    #[error("patch around edge {edge} fails the rank condition after {layers} layers")]
    PatchGrowthExceeded { edge: usize, layers: usize },

    #[error("least-squares system is rank deficient (rank {rank} < 6)")]
    RankDeficient { rank: usize },

    #[error("gradient recovery failed on {} edge(s); first: edge {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Recovery(Vec<(usize, Box<Error>)>),

    #[error("vertex {0}: {1}")]
    AtVertex(usize, Box<Error>),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
