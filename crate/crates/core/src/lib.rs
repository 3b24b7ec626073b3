//! Stokes flow and permeability in periodic binary voxel geometries, solved
//! through the pressure Schur complement `S = B A^{-1} B^T` with CG-Uzawa
//! (`S` unpreconditioned) or CG-SIMPLE (`S` preconditioned by
//! `B diag(A)^{-1} B^T`), and dense spectral tools for small instances.
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what every experiment uses.

pub mod eig;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod mac;
pub mod scalar;
pub mod spectra;
pub mod stokes;
pub mod voxgeo;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use stokes::{Preconditioner, Profile, SchurConfig, SolveReport};
pub use voxgeo::{GeometryStats, PackingParams, VoxelGrid};

pub type StaggeredSystem = mac::StaggeredSystem<f64>;
pub type PcgConfig = krylov::PcgConfig<f64>;
pub type PcgResult = krylov::PcgResult<f64>;
pub type DenseMatrix = eig::DenseMatrix<f64>;
pub type CsrMatrix = linalg::CsrMatrix<f64>;
