//! Gaussian-splat scenes and the geometry derived from them.

mod depth;
mod grid_io;
mod occupancy;
mod ply;

use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;

use crate::geometry::{Aabb, Vec3};

pub use depth::{query_depth, DepthImage, DepthRenderer, Intrinsics};
pub use grid_io::{read_grid, write_grid, GridHeader};
pub use occupancy::{build_occupancy, OccupancyGrid, VoxelIndex, INFLATION_TOLERANCE};
pub use ply::{parse_ply, write_ply};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PLY header: {0}")]
    Format(String),
    #[error("missing required vertex property `{field}`")]
    Schema { field: String },
    #[error("vertex {element}: {message}")]
    Parse { element: usize, message: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// One 3D Gaussian, with activations already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub position: Vec3,
    /// Per-axis standard deviation in metres (exp of the stored log-scale).
    pub scale: Vec3,
    pub rotation: UnitQuaternion<f64>,
    /// In `[0, 1]` (sigmoid of the stored logit).
    pub opacity: f64,
    pub color_dc: Vec3,
}

impl GaussianPrimitive {
    /// Isotropic primitive, used by synthetic scene builders and tests.
    pub fn sphere(position: Vec3, radius: f64, opacity: f64) -> Self {
        Self {
            position,
            scale: Vec3::repeat(radius),
            rotation: UnitQuaternion::identity(),
            opacity: opacity.clamp(0.0, 1.0),
            color_dc: Vec3::zeros(),
        }
    }

    /// Radius of the sphere used for depth queries.
    pub fn radius(&self) -> f64 {
        self.scale.max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatScene {
    pub primitives: Vec<GaussianPrimitive>,
    pub center: Vec3,
    /// Bounds of every primitive position together with the center.
    pub aabb: Aabb,
}

impl SplatScene {
    pub fn new(primitives: Vec<GaussianPrimitive>, center: Vec3) -> Self {
        let mut aabb = Aabb::point(center);
        for p in &primitives {
            aabb.grow(&p.position);
        }
        Self { primitives, center, aabb }
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// Loads a binary little-endian 3DGS PLY file.
///
/// Without an override the scene center is the world origin, where the
/// generator's viewpoint sits.
pub fn load_scene(path: &Path, center_override: Option<Vec3>) -> Result<SplatScene, SceneError> {
    let bytes = std::fs::read(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    let primitives = parse_ply(&bytes)?;
    Ok(SplatScene::new(primitives, center_override.unwrap_or_else(Vec3::zeros)))
}
