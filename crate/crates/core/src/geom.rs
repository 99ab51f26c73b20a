//! Similarity transforms, axis-aligned boxes and the two IoU measures.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::voxel::OccupancyGrid;
use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// Maps canonical space to frame space: `p ↦ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", try_from = "TransformRepr")]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Mat3,
    translation: Vec3,
}

/// Wire form: rotation as rows.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    scale: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<SimilarityTransform> for TransformRepr {
    fn from(t: SimilarityTransform) -> Self {
        let r = t.rotation;
        TransformRepr {
            scale: t.scale,
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: t.translation.into(),
        }
    }
}

impl TryFrom<TransformRepr> for SimilarityTransform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        let rot = Mat3::from_fn(|i, j| r.rotation[i][j]);
        SimilarityTransform::new(r.scale, rot, Vec3::from(r.translation))
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    /// Validated constructor: `scale > 0`, `rotation` orthonormal with det +1.
    pub fn new(scale: f64, rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidTransform(format!("scale {scale} is not positive")));
        }
        if !is_rotation(&rotation) {
            return Err(Error::InvalidTransform("rotation is not in SO(3)".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    /// Constructor for values produced by code that already guarantees the
    /// invariants (solvers, compositions).
    pub(crate) fn from_parts_unchecked(scale: f64, rotation: Mat3, translation: Vec3) -> Self {
        debug_assert!(scale > 0.0);
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts_unchecked(1.0, Mat3::identity(), Vec3::zeros())
    }

    pub fn rigid(rotation: Mat3, translation: Vec3) -> Result<Self> {
        Self::new(1.0, rotation, translation)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Applies only the linear part (scale and rotation).
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.scale * (self.rotation * v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        Self::from_parts_unchecked(inv_scale, rt, -(inv_scale * (rt * self.translation)))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_parts_unchecked(
            self.scale * other.scale,
            self.rotation * other.rotation,
            self.scale * (self.rotation * other.translation) + self.translation,
        )
    }
}

/// Free-function form of [`SimilarityTransform::apply`].
pub fn apply_transform(t: &SimilarityTransform, p: &Vec3) -> Vec3 {
    t.apply(p)
}

pub fn is_rotation(r: &Mat3) -> bool {
    let gram = r.transpose() * r - Mat3::identity();
    gram.iter().all(|v| v.abs() <= ORTHO_TOL) && (r.determinant() - 1.0).abs() <= ORTHO_TOL
}

/// Rotation about +z (the world and canonical up axis).
pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Axis-aligned box given by center and full side lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "BoxRepr", try_from = "BoxRepr")]
pub struct Box3 {
    center: Vec3,
    extents: Vec3,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    center: [f64; 3],
    extents: [f64; 3],
}

impl From<Box3> for BoxRepr {
    fn from(b: Box3) -> Self {
        BoxRepr {
            center: b.center.into(),
            extents: b.extents.into(),
        }
    }
}

impl TryFrom<BoxRepr> for Box3 {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        Box3::new(r.center.into(), r.extents.into())
    }
}

impl Box3 {
    pub fn new(center: Vec3, extents: Vec3) -> Result<Self> {
        if extents.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "box extents must be positive, got {:?}",
                extents.as_slice()
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite box center".into()));
        }
        Ok(Self { center, extents })
    }

    pub fn from_min_max(min: Vec3, max: Vec3) -> Result<Self> {
        Self::new((min + max) * 0.5, max - min)
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn extents(&self) -> &Vec3 {
        &self.extents
    }

    pub fn min(&self) -> Vec3 {
        self.center - self.extents * 0.5
    }

    pub fn max(&self) -> Vec3 {
        self.center + self.extents * 0.5
    }

    pub fn volume(&self) -> f64 {
        self.extents.product()
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            center: self.center + offset,
            extents: self.extents,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
    }

    pub fn intersection_volume(&self, other: &Box3) -> f64 {
        let (alo, ahi) = (self.min(), self.max());
        let (blo, bhi) = (other.min(), other.max());
        (0..3)
            .map(|i| (ahi[i].min(bhi[i]) - alo[i].max(blo[i])).max(0.0))
            .product()
    }
}

pub fn box_iou_3d(a: &Box3, b: &Box3) -> f64 {
    let inter = a.intersection_volume(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `|a ∧ b| / |a ∨ b|`; two empty grids score 0.
pub fn volumetric_iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims().0,
            right: b.dims().0,
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}
