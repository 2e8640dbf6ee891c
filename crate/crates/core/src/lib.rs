//! Automated generation of aerial navigation data from Gaussian-splat scenes.
//!
//! The crate is organised along the three pipeline stages:
//!
//! - [`scene`]: splat scene ingestion, occupancy voxelization and depth queries.
//! - [`camera`] and [`annotate`]: orbit/rig camera sampling, distance-aware
//!   target selection and distance-pruned fusion of detections.
//! - [`planner`] and [`nav`]: voxel A*, collision-aware smoothing,
//!   time-parameterization, target-set generation and episode recording.
//!
//! External services (world generator, 3D detector, language model) sit
//! behind the traits in [`services`]; [`pipeline`] wires everything together.

pub mod annotate;
pub mod camera;
pub mod geometry;
pub mod nav;
pub mod pipeline;
pub mod planner;
pub mod scene;
pub mod services;

pub use geometry::Vec3;
