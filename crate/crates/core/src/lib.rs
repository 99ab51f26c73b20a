//! Canonical-correspondence 3D multi-object tracking on voxelized RGB-D data.
//!
//! The crate covers the full non-learned pipeline: synthetic scene
//! generation and depth rendering ([`synth`]), TSDF fusion and voxel grids
//! ([`voxel`]), proposal extraction from per-voxel predictions ([`detect`]),
//! an oracle for completed geometry and canonical coordinates
//! ([`complete`]), closed-form similarity pose solving ([`pose`]), tracklet
//! association ([`track`]) and CLEAR-MOT style evaluation ([`eval`]).
//! [`experiment`] wires the stages together and [`config`] holds the
//! experiment configuration consumed by the `noctrack` binary.

pub mod complete;
pub mod config;
pub mod detect;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geom;
pub mod pose;
pub mod seed;
pub mod synth;
pub mod track;
pub mod voxel;

pub use error::{Error, Result};
pub use geom::{Box3, SimilarityTransform, Vec3};

/// Side length of every object-level grid (crops and canonical space).
pub const OBJECT_RES: usize = 64;
