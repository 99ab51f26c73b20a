use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::{Error, Result};

/// Pinhole intrinsics. Camera frame: x right, y down, z forward. Pixel `(u, v)`
/// covers `[u, u+1) × [v, v+1)` in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Square pixels, principal point at the image center.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::DegenerateCamera(format!(
                "image size {}x{}",
                self.width, self.height
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::DegenerateCamera(format!(
                "focal lengths fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Pixel containing the projection of a camera-frame point, if in view.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Option<(usize, usize)> {
        if p.z <= 0.0 {
            return None;
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (u, v) = (u.floor() as usize, v.floor() as usize);
        (u < self.width && v < self.height).then_some((u, v))
    }

    /// Ray through the pixel center, scaled so its z component is 1.
    #[inline]
    pub fn ray(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }
}

/// Depth along the optical axis, meters; `0.0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "depth buffer of {} for {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::InvalidArgument("negative or NaN depth".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.data[v * self.width + u];
        (d > 0.0 && d.is_finite()).then_some(d)
    }

    pub(crate) fn set(&mut self, u: usize, v: usize, d: f64) {
        self.data[v * self.width + u] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0 && d.is_finite()).count()
    }

    pub(crate) fn matches(&self, k: &CameraIntrinsics) -> bool {
        self.width == k.width && self.height == k.height
    }
}
