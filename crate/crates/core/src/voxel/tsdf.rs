use crate::geom::{SimilarityTransform, Vec3};
use crate::{Error, Result};

use super::{CameraIntrinsics, DepthImage, Dims};

/// Truncated signed distance grid. Free space in front of a surface is
/// positive. Unobserved voxels hold `+truncation` with weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTsdfGrid {
    origin: Vec3,
    voxel_size: f64,
    dims: Dims,
    truncation: f64,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl DenseTsdfGrid {
    /// `origin` is the minimum corner of voxel `(0, 0, 0)`.
    pub fn new(origin: Vec3, voxel_size: f64, dims: Dims, truncation: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !(truncation > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "voxel size {voxel_size} and truncation {truncation} must be positive"
            )));
        }
        dims.validate()?;
        Ok(Self {
            origin,
            voxel_size,
            dims,
            truncation,
            values: vec![truncation; dims.len()],
            weights: vec![0.0; dims.len()],
        })
    }

    /// Rebuilds a grid from stored values, e.g. after reading a dump.
    pub fn from_parts(
        origin: Vec3,
        voxel_size: f64,
        dims: Dims,
        truncation: f64,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut g = Self::new(origin, voxel_size, dims, truncation)?;
        if values.len() != dims.len() || weights.len() != dims.len() {
            return Err(Error::InvalidArgument("tsdf payload length mismatch".into()));
        }
        if values.iter().any(|v| v.abs() > truncation * (1.0 + 1e-6)) {
            return Err(Error::InvalidArgument("tsdf value outside ±truncation".into()));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("negative fusion weight".into()));
        }
        g.values = values.iter().map(|v| v.clamp(-truncation, truncation)).collect();
        g.weights = weights;
        Ok(g)
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.voxel_size
    }

    /// Voxel containing a world point.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let g = (p - self.origin) / self.voxel_size;
        let (x, y, z) = (g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64);
        self.dims
            .contains(x, y, z)
            .then_some([x as usize, y as usize, z as usize])
    }

    /// Fuses one depth frame with unit weight per observation.
    pub fn integrate(
        &mut self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        camera_pose: &SimilarityTransform,
    ) -> Result<()> {
        intrinsics.validate()?;
        if (camera_pose.scale() - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitCameraScale(camera_pose.scale()));
        }
        if !depth.matches(intrinsics) {
            return Err(Error::InvalidArgument(
                "depth image size differs from intrinsics".into(),
            ));
        }
        let world_to_cam = camera_pose.inverse();
        let [nx, ny, nz] = self.dims.0;
        let tau = self.truncation;
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let pc = world_to_cam.apply(&self.voxel_center(x, y, z));
                    let Some((u, v)) = intrinsics.project(&pc) else {
                        continue;
                    };
                    let Some(d) = depth.get(u, v) else {
                        continue;
                    };
                    let sdf = d - pc.z;
                    if sdf < -tau {
                        continue;
                    }
                    let sample = sdf.min(tau);
                    let i = self.dims.index(x, y, z);
                    let w = self.weights[i];
                    self.values[i] += (sample - self.values[i]) / (w + 1.0);
                    self.weights[i] = w + 1.0;
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`DenseTsdfGrid::integrate`].
pub fn fuse_depth_frame(
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    camera_pose: &SimilarityTransform,
    mut grid: DenseTsdfGrid,
) -> Result<DenseTsdfGrid> {
    grid.integrate(depth, intrinsics, camera_pose)?;
    Ok(grid)
}

/// Observed near-surface voxels of a TSDF, sorted by linear index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSurfaceGrid {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: Dims,
    pub voxels: Vec<[usize; 3]>,
}

impl SparseSurfaceGrid {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxel_center(&self, v: &[usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5) * self.voxel_size
    }
}

/// Voxels with `|tsdf| < truncation` and at least one observation.
pub fn extract_surface(grid: &DenseTsdfGrid) -> SparseSurfaceGrid {
    let voxels = grid
        .values
        .iter()
        .zip(&grid.weights)
        .enumerate()
        .filter(|(_, (v, w))| **w > 0.0 && v.abs() < grid.truncation)
        .map(|(i, _)| grid.dims.coords(i))
        .collect();
    SparseSurfaceGrid {
        origin: grid.origin,
        voxel_size: grid.voxel_size,
        dims: grid.dims,
        voxels,
    }
}
