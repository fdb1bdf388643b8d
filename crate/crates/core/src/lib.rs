//! Surface Crouzeix-Raviart finite elements for `-lap_Gamma u + u = f` on
//! closed level-set surfaces, with parametric polynomial-preserving gradient
//! recovery, a recovery-based error estimator and adaptive refinement.

pub mod config;
pub mod cr_fem;
pub mod error;
pub mod error_norms;
pub mod estimator;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
