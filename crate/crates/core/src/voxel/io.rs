//! Binary grid container.
//!
//! Layout (all little-endian), 64-byte header then payload:
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `b"NTVOXEL1"`                          |
//! | 8      | 12   | dims `nx, ny, nz` as `u32`                   |
//! | 20     | 8    | voxel size, `f64` meters                     |
//! | 28     | 24   | origin `x, y, z`, `f64` meters               |
//! | 52     | 8    | truncation, `f64` meters (0 when unused)     |
//! | 60     | 1    | payload tag (see [`PayloadKind`])            |
//! | 61     | 3    | reserved, zero                               |
//!
//! The payload is one record per voxel in row-major `(x, y, z)` order:
//! TSDF `f32 value, f32 weight`; occupancy `u8` (0 or 1); probability
//! `f32`; NOC `f32 x, f32 y, f32 z, u8 valid`.

use std::fs;
use std::path::Path;

use crate::geom::Vec3;
use crate::{Error, Result};

use super::{DenseTsdfGrid, Dims, NocGrid, OccupancyGrid, ProbGrid};

pub const MAGIC: &[u8; 8] = b"NTVOXEL1";
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Tsdf = 1,
    Occupancy = 2,
    Probability = 3,
    Noc = 4,
}

impl PayloadKind {
    fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => Self::Tsdf,
            2 => Self::Occupancy,
            3 => Self::Probability,
            4 => Self::Noc,
            t => return Err(Error::Format(format!("unknown payload tag {t}"))),
        })
    }

    pub fn record_len(self) -> usize {
        match self {
            Self::Tsdf => 8,
            Self::Occupancy => 1,
            Self::Probability => 4,
            Self::Noc => 13,
        }
    }
}

/// Decoded header fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub dims: Dims,
    pub voxel_size: f64,
    pub origin: Vec3,
    pub truncation: f64,
    pub kind: PayloadKind,
}

impl Header {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..8].copy_from_slice(MAGIC);
        for (i, d) in self.dims.0.iter().enumerate() {
            h[8 + 4 * i..12 + 4 * i].copy_from_slice(&(*d as u32).to_le_bytes());
        }
        h[20..28].copy_from_slice(&self.voxel_size.to_le_bytes());
        for i in 0..3 {
            h[28 + 8 * i..36 + 8 * i].copy_from_slice(&self.origin[i].to_le_bytes());
        }
        h[52..60].copy_from_slice(&self.truncation.to_le_bytes());
        h[60] = self.kind as u8;
        h
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("header truncated at {} bytes", bytes.len())));
        }
        if &bytes[0..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let dims = Dims([u32_at(8), u32_at(12), u32_at(16)]);
        if dims.0.contains(&0) {
            return Err(Error::Format(format!("zero dimension in {:?}", dims.0)));
        }
        Ok(Self {
            dims,
            voxel_size: f64_at(20),
            origin: Vec3::new(f64_at(28), f64_at(36), f64_at(44)),
            truncation: f64_at(52),
            kind: PayloadKind::from_tag(bytes[60])?,
        })
    }
}

/// Any grid the container can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPayload {
    Tsdf(DenseTsdfGrid),
    Occupancy(OccupancyGrid),
    Probability(ProbGrid),
    Noc(NocGrid),
}

/// Placement metadata for grids that do not carry their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMeta {
    pub origin: Vec3,
    pub voxel_size: f64,
}

impl Default for GridMeta {
    fn default() -> Self {
        Self {
            origin: Vec3::zeros(),
            voxel_size: 1.0,
        }
    }
}

pub fn encode(payload: &GridPayload, meta: GridMeta) -> Vec<u8> {
    let (header, body) = match payload {
        GridPayload::Tsdf(g) => {
            let mut body = Vec::with_capacity(g.dims().len() * 8);
            for (v, w) in g.values().iter().zip(g.weights()) {
                body.extend_from_slice(&(*v as f32).to_le_bytes());
                body.extend_from_slice(&(*w as f32).to_le_bytes());
            }
            let h = Header {
                dims: g.dims(),
                voxel_size: g.voxel_size(),
                origin: *g.origin(),
                truncation: g.truncation(),
                kind: PayloadKind::Tsdf,
            };
            (h, body)
        }
        GridPayload::Occupancy(g) => (
            header_for(g.dims(), meta, PayloadKind::Occupancy),
            g.bits().iter().map(|&b| b as u8).collect(),
        ),
        GridPayload::Probability(g) => (
            header_for(g.dims(), meta, PayloadKind::Probability),
            g.values().iter().flat_map(|v| v.to_le_bytes()).collect(),
        ),
        GridPayload::Noc(g) => {
            let mut body = Vec::with_capacity(g.dims().len() * 13);
            for (c, &ok) in g.coords().iter().zip(g.valid_mask()) {
                for k in 0..3 {
                    body.extend_from_slice(&(c[k] as f32).to_le_bytes());
                }
                body.push(ok as u8);
            }
            (header_for(g.dims(), meta, PayloadKind::Noc), body)
        }
    };
    let mut out = header.encode().to_vec();
    out.extend_from_slice(&body);
    out
}

fn header_for(dims: Dims, meta: GridMeta, kind: PayloadKind) -> Header {
    Header {
        dims,
        voxel_size: meta.voxel_size,
        origin: meta.origin,
        truncation: 0.0,
        kind,
    }
}

pub fn decode(bytes: &[u8]) -> Result<(GridPayload, Header)> {
    let h = Header::decode(bytes)?;
    let n = h.dims.len();
    let body = &bytes[HEADER_LEN..];
    if body.len() != n * h.kind.record_len() {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            body.len(),
            n * h.kind.record_len()
        )));
    }
    let f32_at = |o: usize| f32::from_le_bytes(body[o..o + 4].try_into().unwrap());
    let payload = match h.kind {
        PayloadKind::Tsdf => {
            let values = (0..n).map(|i| f32_at(8 * i) as f64).collect();
            let weights = (0..n).map(|i| f32_at(8 * i + 4) as f64).collect();
            GridPayload::Tsdf(
                DenseTsdfGrid::from_parts(h.origin, h.voxel_size, h.dims, h.truncation, values, weights)
                    .map_err(|e| Error::Format(e.to_string()))?,
            )
        }
        PayloadKind::Occupancy => {
            if body.iter().any(|&b| b > 1) {
                return Err(Error::Format("occupancy byte other than 0/1".into()));
            }
            GridPayload::Occupancy(OccupancyGrid::from_bits(h.dims, body.iter().map(|&b| b == 1).collect())?)
        }
        PayloadKind::Probability => GridPayload::Probability(
            ProbGrid::from_values(h.dims, (0..n).map(|i| f32_at(4 * i)).collect())
                .map_err(|e| Error::Format(e.to_string()))?,
        ),
        PayloadKind::Noc => {
            let mut g = NocGrid::empty(h.dims);
            for i in 0..n {
                let o = 13 * i;
                if body[o + 12] == 1 {
                    let c = Vec3::new(f32_at(o) as f64, f32_at(o + 4) as f64, f32_at(o + 8) as f64);
                    g.set(i, c).map_err(|e| Error::Format(e.to_string()))?;
                }
            }
            GridPayload::Noc(g)
        }
    };
    Ok((payload, h))
}

pub fn write(path: &Path, payload: &GridPayload, meta: GridMeta) -> Result<()> {
    fs::write(path, encode(payload, meta)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<(GridPayload, Header)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
