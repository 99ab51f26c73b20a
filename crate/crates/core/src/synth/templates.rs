//! Procedural voxel templates for the ten object classes.

use crate::geom::Vec3;
use crate::pose::SymmetryClass;
use crate::voxel::{Dims, OccupancyGrid};
use crate::{Error, Result, OBJECT_RES};

pub const CLASS_NAMES: [&str; 10] = [
    "bathtub",
    "bed",
    "bookshelf",
    "cabinet",
    "chair",
    "desk",
    "sink",
    "sofa",
    "table",
    "toilet",
];

pub const NUM_CLASSES: usize = CLASS_NAMES.len();

/// Canonical 64³ occupancy of one object in `[0,1]³`, with its longest
/// physical extent spanning the unit cube and the other axes centered.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTemplate {
    pub id: String,
    pub class_id: usize,
    pub symmetry: SymmetryClass,
    /// Physical side lengths (x width, y depth, z height), meters.
    pub physical_scale: Vec3,
    occupancy: OccupancyGrid,
    bounds: (Vec3, Vec3),
}

impl ObjectTemplate {
    pub fn new(
        id: impl Into<String>,
        class_id: usize,
        symmetry: SymmetryClass,
        physical_scale: Vec3,
        occupancy: OccupancyGrid,
    ) -> Result<Self> {
        if physical_scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("physical scale must be positive".into()));
        }
        if class_id >= NUM_CLASSES {
            return Err(Error::InvalidArgument(format!("class id {class_id} out of range")));
        }
        let bounds = tight_bounds(&occupancy)
            .ok_or_else(|| Error::InvalidArgument("template occupancy is empty".into()))?;
        Ok(Self {
            id: id.into(),
            class_id,
            symmetry,
            physical_scale,
            occupancy,
            bounds,
        })
    }

    pub fn occupancy(&self) -> &OccupancyGrid {
        &self.occupancy
    }

    /// Canonical-to-metric scale: the longest physical extent.
    pub fn scale(&self) -> f64 {
        self.physical_scale.max()
    }

    /// Tight canonical bounds (min corner, max corner) of the occupied voxels.
    pub fn canonical_bounds(&self) -> (Vec3, Vec3) {
        self.bounds
    }

    /// Canonical point on the bottom face, centered in x and y.
    pub fn bottom_center(&self) -> Vec3 {
        let (lo, hi) = self.bounds;
        Vec3::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0, lo.z)
    }
}

fn tight_bounds(occ: &OccupancyGrid) -> Option<(Vec3, Vec3)> {
    let n = occ.dims();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in occ.occupied() {
        let c = n.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a] + 1);
        }
        any = true;
    }
    any.then(|| {
        let f = |v: [usize; 3], a: usize| v[a] as f64 / n.0[a] as f64;
        (
            Vec3::new(f(lo, 0), f(lo, 1), f(lo, 2)),
            Vec3::new(f(hi, 0), f(hi, 1), f(hi, 2)),
        )
    })
}

/// Paints parts given in object-fraction coordinates (`[0,1]` along each
/// axis of the object's own bounding box) into the canonical grid.
struct Painter {
    grid: OccupancyGrid,
    base: Vec3,
    size: Vec3,
}

impl Painter {
    fn new(physical: Vec3) -> Self {
        let size = physical / physical.max();
        Self {
            grid: OccupancyGrid::empty(Dims::cube(OBJECT_RES)),
            base: Vec3::repeat(0.5) - size / 2.0,
            size,
        }
    }

    /// Object-fraction coordinates of voxel `(i, j, k)`'s center.
    fn frac(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let n = OBJECT_RES as f64;
        let c = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) / n;
        (c - self.base).component_div(&self.size)
    }

    fn paint(&mut self, value: bool, inside: impl Fn(&Vec3) -> bool) {
        let n = OBJECT_RES;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = self.frac(i, j, k);
                    if (0..3).all(|a| (0.0..1.0).contains(&f[a])) && inside(&f) {
                        self.grid.set(i, j, k, value);
                    }
                }
            }
        }
    }

    fn cuboid(&mut self, lo: [f64; 3], hi: [f64; 3]) -> &mut Self {
        self.paint(true, |f| (0..3).all(|a| f[a] >= lo[a] && f[a] < hi[a]));
        self
    }

    fn carve(&mut self, lo: [f64; 3], hi: [f64; 3]) -> &mut Self {
        self.paint(false, |f| (0..3).all(|a| f[a] >= lo[a] && f[a] < hi[a]));
        self
    }

    /// Vertical cylinder; `radius` is relative to the object's x size and
    /// converted so the cross-section is circular in metric space.
    fn cylinder(&mut self, value: bool, center: [f64; 2], radius: f64, z: [f64; 2]) -> &mut Self {
        let ry = radius * self.size.x / self.size.y;
        self.paint(value, |f| {
            let dx = (f.x - center[0]) / radius;
            let dy = (f.y - center[1]) / ry;
            dx * dx + dy * dy < 1.0 && f.z >= z[0] && f.z < z[1]
        });
        self
    }

    fn legs(&mut self, inset: f64, width: f64, top: f64) -> &mut Self {
        for x in [inset, 1.0 - inset - width] {
            for y in [inset, 1.0 - inset - width] {
                self.cuboid([x, y, 0.0], [x + width, y + width, top]);
            }
        }
        self
    }
}

fn build(class_id: usize) -> (SymmetryClass, Vec3, OccupancyGrid) {
    use SymmetryClass::*;
    let (sym, phys) = match class_id {
        0 => (TwoFold, Vec3::new(1.5, 0.75, 0.55)),
        1 => (None, Vec3::new(1.5, 1.1, 0.6)),
        2 => (None, Vec3::new(0.9, 0.35, 1.5)),
        3 => (None, Vec3::new(0.8, 0.5, 0.9)),
        4 => (None, Vec3::new(0.5, 0.5, 0.9)),
        5 => (None, Vec3::new(1.2, 0.6, 0.75)),
        6 => (Cylindrical, Vec3::new(0.55, 0.55, 0.85)),
        7 => (None, Vec3::new(1.5, 0.8, 0.8)),
        8 => (FourFold, Vec3::new(1.0, 1.0, 0.75)),
        _ => (None, Vec3::new(0.45, 0.7, 0.75)),
    };
    let mut p = Painter::new(phys);
    match class_id {
        // bathtub: open-top shell
        0 => {
            p.cuboid([0.0; 3], [1.0; 3]).carve([0.08, 0.12, 0.15], [0.92, 0.88, 1.0]);
        }
        // bed: mattress and headboard
        1 => {
            p.cuboid([0.0; 3], [1.0, 1.0, 0.55]).cuboid([0.0; 3], [0.08, 1.0, 1.0]);
        }
        // bookshelf: back panel, sides, shelves
        2 => {
            p.cuboid([0.0, 0.85, 0.0], [1.0; 3])
                .cuboid([0.0; 3], [0.06, 1.0, 1.0])
                .cuboid([0.94, 0.0, 0.0], [1.0; 3]);
            for z in [0.0, 0.25, 0.5, 0.75, 0.95] {
                p.cuboid([0.0, 0.0, z], [1.0, 1.0, z + 0.05]);
            }
        }
        // cabinet: body on a plinth, one handle
        3 => {
            p.cuboid([0.0, 0.1, 0.08], [1.0; 3])
                .cuboid([0.05, 0.15, 0.0], [0.95, 0.95, 0.08])
                .cuboid([0.7, 0.0, 0.6], [0.8, 0.1, 0.75]);
        }
        // chair: legs, seat, backrest
        4 => {
            p.legs(0.0, 0.1, 0.48)
                .cuboid([0.0, 0.0, 0.48], [1.0, 1.0, 0.56])
                .cuboid([0.0, 0.88, 0.56], [1.0; 3]);
        }
        // desk: top, drawer block on one side, two legs on the other
        5 => {
            p.cuboid([0.0, 0.0, 0.92], [1.0; 3])
                .cuboid([0.62, 0.0, 0.0], [1.0, 1.0, 0.92])
                .cuboid([0.0, 0.0, 0.0], [0.06, 0.1, 0.92])
                .cuboid([0.0, 0.9, 0.0], [0.06, 1.0, 0.92]);
        }
        // sink: pedestal and bowl
        6 => {
            p.cylinder(true, [0.5, 0.5], 0.15, [0.0, 0.75])
                .cylinder(true, [0.5, 0.5], 0.5, [0.75, 1.0])
                .cylinder(false, [0.5, 0.5], 0.4, [0.82, 1.0]);
        }
        // sofa: seat, back, arms
        7 => {
            p.cuboid([0.0; 3], [1.0, 1.0, 0.5])
                .cuboid([0.0, 0.75, 0.5], [1.0; 3])
                .cuboid([0.0, 0.0, 0.5], [0.1, 1.0, 0.75])
                .cuboid([0.9, 0.0, 0.5], [1.0, 1.0, 0.75]);
        }
        // table: square top on four legs
        8 => {
            p.cuboid([0.0, 0.0, 0.92], [1.0; 3]).legs(0.05, 0.1, 0.92);
        }
        // toilet: bowl, tank
        _ => {
            p.cylinder(true, [0.5, 0.32], 0.5, [0.0, 0.55])
                .cylinder(false, [0.5, 0.32], 0.38, [0.35, 0.55])
                .cuboid([0.1, 0.62, 0.3], [0.9, 1.0, 1.0]);
        }
    }
    (sym, phys, p.grid)
}

/// Procedural template for `class_id` in `0..NUM_CLASSES`.
pub fn template(class_id: usize) -> Result<ObjectTemplate> {
    if class_id >= NUM_CLASSES {
        return Err(Error::InvalidArgument(format!("class id {class_id} out of range")));
    }
    let (sym, phys, occ) = build(class_id);
    ObjectTemplate::new(CLASS_NAMES[class_id], class_id, sym, phys, occ)
}

pub fn template_by_name(name: &str) -> Result<ObjectTemplate> {
    let id = CLASS_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown template {name:?}")))?;
    template(id)
}

/// All ten templates, indexed by class id.
pub fn library() -> Vec<ObjectTemplate> {
    (0..NUM_CLASSES)
        .map(|c| template(c).expect("builtin template"))
        .collect()
}
