use crate::geom::{Box3, Vec3};
use crate::{Error, Result};

use super::{DenseTsdfGrid, Dims, NocGrid, OccupancyGrid, ProbGrid};

/// World placement of a dense grid: minimum corner plus per-axis voxel size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub origin: Vec3,
    pub voxel_size: Vec3,
}

impl Placement {
    pub fn isotropic(origin: Vec3, voxel_size: f64) -> Self {
        Self {
            origin,
            voxel_size: Vec3::repeat(voxel_size),
        }
    }

    /// Lattice of `dims` voxels exactly covering `bbox`.
    pub fn covering(bbox: &Box3, dims: Dims) -> Self {
        let n = Vec3::new(dims.0[0] as f64, dims.0[1] as f64, dims.0[2] as f64);
        Self {
            origin: bbox.min(),
            voxel_size: bbox.extents().component_div(&n),
        }
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin
            + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5).component_mul(&self.voxel_size)
    }

    /// Continuous lattice coordinates where voxel `i`'s center sits at `i`.
    pub fn lattice_coords(&self, p: &Vec3) -> Vec3 {
        (p - self.origin).component_div(&self.voxel_size) - Vec3::repeat(0.5)
    }

    pub fn bounds(&self, dims: Dims) -> Box3 {
        let n = Vec3::new(dims.0[0] as f64, dims.0[1] as f64, dims.0[2] as f64);
        Box3::from_min_max(self.origin, self.origin + n.component_mul(&self.voxel_size))
            .expect("placement with positive voxel size")
    }
}

/// Voxel index range `[lo, hi)` per axis touched by `bbox`.
pub fn crop_index_range(dims: Dims, placement: &Placement, bbox: &Box3) -> Result<([usize; 3], [usize; 3])> {
    let lo = (bbox.min() - placement.origin).component_div(&placement.voxel_size);
    let hi = (bbox.max() - placement.origin).component_div(&placement.voxel_size);
    let mut a = [0usize; 3];
    let mut b = [0usize; 3];
    for i in 0..3 {
        let n = dims.0[i] as f64;
        let l = (lo[i] + 1e-9).floor().clamp(0.0, n);
        let h = (hi[i] - 1e-9).ceil().clamp(0.0, n);
        if h <= l {
            return Err(Error::EmptyOverlap);
        }
        a[i] = l as usize;
        b[i] = h as usize;
    }
    Ok((a, b))
}

/// Grids that can be resampled at continuous lattice coordinates.
pub trait CropSample: Sized {
    fn grid_dims(&self) -> Dims;

    /// Builds a grid of `dims` whose voxel `i` takes the value at lattice
    /// coordinates `coord(i)` of `self`.
    /// `out` is the placement of the resampled grid.
    fn resample(&self, dims: Dims, out: &Placement, coord: &dyn Fn(usize, usize, usize) -> Vec3) -> Self;
}

fn clamp_coord(c: f64, n: usize) -> f64 {
    c.clamp(0.0, (n - 1) as f64)
}

fn nearest(c: &Vec3, d: Dims) -> [usize; 3] {
    let mut out = [0; 3];
    for i in 0..3 {
        out[i] = clamp_coord(c[i], d.0[i]).round() as usize;
    }
    out
}

/// Trilinear corner indices and weights.
fn trilinear(c: &Vec3, d: Dims) -> [(usize, f64); 8] {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for i in 0..3 {
        let v = clamp_coord(c[i], d.0[i]);
        let f = v.floor();
        base[i] = (f as usize).min(d.0[i].saturating_sub(2));
        frac[i] = v - base[i] as f64;
        if d.0[i] == 1 {
            base[i] = 0;
            frac[i] = 0.0;
        }
    }
    let mut out = [(0usize, 0.0f64); 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut idx = [0usize; 3];
        let mut w = 1.0;
        for i in 0..3 {
            let bit = (k >> i) & 1;
            idx[i] = (base[i] + bit).min(d.0[i] - 1);
            w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
        }
        *slot = (d.index(idx[0], idx[1], idx[2]), w);
    }
    out
}

fn build<T>(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Vec<T> {
    let mut out = Vec::with_capacity(dims.len());
    for x in 0..dims.0[0] {
        for y in 0..dims.0[1] {
            for z in 0..dims.0[2] {
                out.push(f(x, y, z));
            }
        }
    }
    out
}

impl CropSample for OccupancyGrid {
    fn grid_dims(&self) -> Dims {
        self.dims
    }

    fn resample(&self, dims: Dims, _out: &Placement, coord: &dyn Fn(usize, usize, usize) -> Vec3) -> Self {
        let bits = build(dims, |x, y, z| {
            let [a, b, c] = nearest(&coord(x, y, z), self.dims);
            self.get(a, b, c)
        });
        OccupancyGrid { dims, bits }
    }
}

impl CropSample for ProbGrid {
    fn grid_dims(&self) -> Dims {
        self.dims
    }

    fn resample(&self, dims: Dims, _out: &Placement, coord: &dyn Fn(usize, usize, usize) -> Vec3) -> Self {
        let values = build(dims, |x, y, z| {
            let v: f64 = trilinear(&coord(x, y, z), self.dims)
                .iter()
                .map(|&(i, w)| w * self.values[i] as f64)
                .sum();
            v.clamp(0.0, 1.0) as f32
        });
        ProbGrid { dims, values }
    }
}

impl CropSample for NocGrid {
    fn grid_dims(&self) -> Dims {
        self.dims
    }

    /// Interpolates over valid corners only; a sample is valid when valid
    /// corners carry at least half the weight.
    fn resample(&self, dims: Dims, _out: &Placement, coord: &dyn Fn(usize, usize, usize) -> Vec3) -> Self {
        let mut out = NocGrid::empty(dims);
        let samples = build(dims, |x, y, z| {
            let mut acc = Vec3::zeros();
            let mut wsum = 0.0;
            for (i, w) in trilinear(&coord(x, y, z), self.dims) {
                if self.valid[i] && w > 0.0 {
                    acc += self.coords[i] * w;
                    wsum += w;
                }
            }
            (wsum >= 0.5).then(|| (acc / wsum).map(|v| v.clamp(0.0, 1.0)))
        });
        for (i, s) in samples.into_iter().enumerate() {
            if let Some(c) = s {
                out.coords[i] = c;
                out.valid[i] = true;
            }
        }
        out
    }
}

impl CropSample for DenseTsdfGrid {
    fn grid_dims(&self) -> Dims {
        self.dims()
    }

    fn resample(&self, dims: Dims, out: &Placement, coord: &dyn Fn(usize, usize, usize) -> Vec3) -> Self {
        let mut values = Vec::with_capacity(dims.len());
        let mut weights = Vec::with_capacity(dims.len());
        for x in 0..dims.0[0] {
            for y in 0..dims.0[1] {
                for z in 0..dims.0[2] {
                    let (mut v, mut w) = (0.0, 0.0);
                    for (i, t) in trilinear(&coord(x, y, z), self.dims()) {
                        v += t * self.values()[i];
                        w += t * self.weights()[i];
                    }
                    values.push(v);
                    weights.push(w);
                }
            }
        }
        // The grid type stores one voxel size; for anisotropic crops the
        // returned Placement is authoritative.
        let vs = out.voxel_size.max();
        DenseTsdfGrid::from_parts(out.origin, vs, dims, self.truncation(), values, weights)
            .expect("resampled tsdf stays within truncation")
    }
}

/// Crops `grid` (placed by `placement`) to `bbox` clipped to the grid
/// bounds, resampled to `resolution`. Masks use nearest-neighbor lookup;
/// TSDF, probability and NOC grids use trilinear interpolation. Returns the
/// crop and its placement.
pub fn crop_grid<G: CropSample>(
    grid: &G,
    placement: &Placement,
    bbox: &Box3,
    resolution: Dims,
) -> Result<(G, Placement)> {
    resolution.validate()?;
    let dims = grid.grid_dims();
    let bounds = placement.bounds(dims);
    let lo = bbox.min().sup(&bounds.min());
    let hi = bbox.max().inf(&bounds.max());
    if (0..3).any(|i| hi[i] <= lo[i]) {
        return Err(Error::EmptyOverlap);
    }
    let clipped = Box3::from_min_max(lo, hi)?;
    let out_place = Placement::covering(&clipped, resolution);
    let cropped = grid.resample(resolution, &out_place, &|x, y, z| {
        placement.lattice_coords(&out_place.voxel_center(x, y, z))
    });
    Ok((cropped, out_place))
}
