//! Dense voxel grids, TSDF fusion and the binary grid container.
//!
//! All dense grids share one memory layout: row-major over `(x, y, z)`, so
//! the linear index of voxel `(x, y, z)` is `(x * ny + y) * nz + z`.

mod camera;
mod crop;
pub mod io;
mod tsdf;

pub use camera::{CameraIntrinsics, DepthImage};
pub use crop::{crop_grid, crop_index_range, CropSample, Placement};
pub use tsdf::{extract_surface, fuse_depth_frame, DenseTsdfGrid, SparseSurfaceGrid};

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::{Error, Result};

/// Grid dimensions `[nx, ny, nz]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims(pub [usize; 3]);

impl Dims {
    pub fn cube(n: usize) -> Self {
        Dims([n, n, n])
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.0[1] + y) * self.0[2] + z
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let z = idx % self.0[2];
        let y = (idx / self.0[2]) % self.0[1];
        let x = idx / (self.0[1] * self.0[2]);
        [x, y, z]
    }

    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.0[0]
            && (y as usize) < self.0[1]
            && (z as usize) < self.0[2]
    }

    fn validate(&self) -> Result<()> {
        if self.0.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("grid dims must be positive: {:?}", self.0)));
        }
        Ok(())
    }
}

fn check_len(dims: Dims, len: usize) -> Result<()> {
    dims.validate()?;
    if dims.len() != len {
        return Err(Error::InvalidArgument(format!(
            "dims {:?} hold {} voxels, got {len}",
            dims.0,
            dims.len()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            left: a.0,
            right: b.0,
        });
    }
    Ok(())
}

/// Dense binary grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    dims: Dims,
    bits: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        check_len(dims, bits.len())?;
        Ok(Self { dims, bits })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.dims.index(x, y, z);
        self.bits[i] = v;
    }

    pub fn set_index(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Linear indices of set voxels, ascending.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn to_prob(&self) -> ProbGrid {
        ProbGrid {
            dims: self.dims,
            values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Dense grid of values in `[0, 1]` (occupancy probabilities, running averages).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrid {
    dims: Dims,
    values: Vec<f32>,
}

impl ProbGrid {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: Dims, v: f32) -> Self {
        Self {
            dims,
            values: vec![v; dims.len()],
        }
    }

    pub fn from_values(dims: Dims, values: Vec<f32>) -> Result<Self> {
        check_len(dims, values.len())?;
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("probability outside [0, 1]".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.dims.index(x, y, z)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Sets one voxel; the value is clamped into `[0, 1]`.
    pub fn set_index(&mut self, i: usize, v: f32) {
        self.values[i] = v.clamp(0.0, 1.0);
    }
}

/// `bit = value >= threshold`.
pub fn binarize(grid: &ProbGrid, threshold: f32) -> OccupancyGrid {
    OccupancyGrid {
        dims: grid.dims,
        bits: grid.values.iter().map(|&v| v >= threshold).collect(),
    }
}

/// Per-voxel canonical coordinates with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NocGrid {
    dims: Dims,
    coords: Vec<Vec3>,
    valid: Vec<bool>,
}

impl NocGrid {
    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            coords: vec![Vec3::zeros(); dims.len()],
            valid: vec![false; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, i: usize) -> Option<&Vec3> {
        self.valid[i].then(|| &self.coords[i])
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    /// Stores a coordinate; values outside `[0, 1]³` are rejected.
    pub fn set(&mut self, i: usize, c: Vec3) -> Result<()> {
        if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "canonical coordinate outside unit cube: {:?}",
                c.as_slice()
            )));
        }
        self.coords[i] = c;
        self.valid[i] = true;
        Ok(())
    }

    pub fn clear(&mut self, i: usize) {
        self.valid[i] = false;
        self.coords[i] = Vec3::zeros();
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn validity(&self) -> OccupancyGrid {
        OccupancyGrid {
            dims: self.dims,
            bits: self.valid.clone(),
        }
    }
}
