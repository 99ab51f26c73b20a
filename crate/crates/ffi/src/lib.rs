//! C ABI over the noctrack core.
//!
//! Every fallible function returns an [`NtStatus`]; on failure a message is
//! available from [`nt_last_error_message`] on the same thread. Matrices are
//! row-major. Strings returned by the library must be released with
//! [`nt_string_free`], tracker handles with [`nt_tracker_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use noctrack::eval::{mota, GtDump, MotaParams};
use noctrack::geom::{box_iou_3d, volumetric_iou, Box3, Mat3, SimilarityTransform, Vec3};
use noctrack::pose::{rotation_error, umeyama_solve, CorrespondenceSet, SymmetryClass};
use noctrack::track::{hungarian, CostMatrix, Detection, TrackDump, Tracker, TrackerParams, Tracklet};
use noctrack::voxel::{Dims, OccupancyGrid, ProbGrid};
use noctrack::{Error, OBJECT_RES};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Degenerate = 4,
    FrameOrder = 5,
    Format = 6,
    InvalidState = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NtSymmetry {
    None = 0,
    TwoFold = 1,
    FourFold = 2,
    Cylindrical = 3,
}

impl From<NtSymmetry> for SymmetryClass {
    fn from(s: NtSymmetry) -> Self {
        match s {
            NtSymmetry::None => SymmetryClass::None,
            NtSymmetry::TwoFold => SymmetryClass::TwoFold,
            NtSymmetry::FourFold => SymmetryClass::FourFold,
            NtSymmetry::Cylindrical => SymmetryClass::Cylindrical,
        }
    }
}

/// `p ↦ scale · rotation · p + translation`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtSimilarity {
    pub scale: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

/// Axis-aligned box by center and full side lengths.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtBox {
    pub center: [f64; 3],
    pub extents: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtTrackerParams {
    pub association_iou: f64,
    pub rescue_iou: f64,
    pub binarize_threshold: f32,
    pub running_mean_weight: f32,
    pub class_gated: bool,
    pub rescue: bool,
}

/// One detection pushed into a tracker. `canonical` is either null or
/// 64³ occupancy probabilities in row-major `(x, y, z)` order; `pose` may
/// be null.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NtDetection {
    pub bbox: NtBox,
    pub class_id: u32,
    pub confidence: f64,
    pub canonical: *const f32,
    pub pose: *const NtSimilarity,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NtMota {
    pub mota: f64,
    pub gt: u64,
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
}

/// Opaque tracker handle.
pub struct NtTracker {
    running: Option<Tracker>,
    finished: Option<Vec<Tracklet>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => NtStatus::DimensionMismatch,
            Error::DegenerateCorrespondences(_) | Error::DegenerateCamera(_) | Error::EmptyOverlap => {
                NtStatus::Degenerate
            }
            Error::FrameIndexMismatch(_) => NtStatus::FrameOrder,
            Error::Format(_) | Error::Json(_) => NtStatus::Format,
            _ => NtStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: NtStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, records any failure and maps panics to [`NtStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NtStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(NtStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

unsafe fn points<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    nonnull(p, name)?;
    Ok(slice::from_raw_parts(p, 3 * n))
}

fn to_vecs(flat: &[f64]) -> Vec<Vec3> {
    flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn mat_from(r: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(r)
}

fn similarity_out(t: &SimilarityTransform) -> NtSimilarity {
    let r = t.rotation();
    let mut rotation = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            rotation[3 * i + j] = r[(i, j)];
        }
    }
    let tr = t.translation();
    NtSimilarity {
        scale: t.scale(),
        rotation,
        translation: [tr.x, tr.y, tr.z],
    }
}

fn similarity_in(s: &NtSimilarity) -> Result<SimilarityTransform, Failure> {
    Ok(SimilarityTransform::new(
        s.scale,
        mat_from(&s.rotation),
        Vec3::new(s.translation[0], s.translation[1], s.translation[2]),
    )?)
}

fn box_in(b: &NtBox) -> Result<Box3, Failure> {
    Ok(Box3::new(
        Vec3::from_row_slice(&b.center),
        Vec3::from_row_slice(&b.extents),
    )?)
}

unsafe fn c_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    nonnull(s, name)?;
    CStr::from_ptr(s)
        .to_str()
        .or_else(|_| fail(NtStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn nt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Least-squares similarity transform mapping `canonical[i]` onto
/// `frame[i]`; both arrays hold `n` xyz triples.
///
/// # Safety
/// Pointers must be valid for `3 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nt_umeyama(
    canonical: *const f64,
    frame: *const f64,
    n: usize,
    out: *mut NtSimilarity,
) -> NtStatus {
    guard(|| {
        nonnull(out, "out")?;
        let src = to_vecs(points(canonical, n, "canonical")?);
        let dst = to_vecs(points(frame, n, "frame")?);
        let t = umeyama_solve(&CorrespondenceSet::new(src, dst)?)?;
        *out = similarity_out(&t);
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nt_box_iou(a: *const NtBox, b: *const NtBox, out: *mut f64) -> NtStatus {
    guard(|| {
        nonnull(a, "a")?;
        nonnull(b, "b")?;
        nonnull(out, "out")?;
        *out = box_iou_3d(&box_in(&*a)?, &box_in(&*b)?);
        Ok(())
    })
}

/// IoU of two `nx·ny·nz` occupancy grids given as bytes (nonzero =
/// occupied), row-major `(x, y, z)`.
///
/// # Safety
/// `a` and `b` must be valid for `nx * ny * nz` bytes.
#[no_mangle]
pub unsafe extern "C" fn nt_volumetric_iou(
    a: *const u8,
    b: *const u8,
    nx: usize,
    ny: usize,
    nz: usize,
    out: *mut f64,
) -> NtStatus {
    guard(|| {
        nonnull(a, "a")?;
        nonnull(b, "b")?;
        nonnull(out, "out")?;
        let dims = Dims([nx, ny, nz]);
        let grid = |p: *const u8| {
            let bits = slice::from_raw_parts(p, dims.len()).iter().map(|&v| v != 0).collect();
            OccupancyGrid::from_bits(dims, bits)
        };
        *out = volumetric_iou(&grid(a)?, &grid(b)?)?;
        Ok(())
    })
}

/// Minimum-cost assignment of a `rows × cols` cost matrix. `row_to_col`
/// receives one column per row, or -1 when the row is unassigned.
///
/// # Safety
/// `cost` must hold `rows * cols` doubles, `row_to_col` room for `rows`
/// entries; `total` may be null.
#[no_mangle]
pub unsafe extern "C" fn nt_hungarian(
    cost: *const f64,
    rows: usize,
    cols: usize,
    row_to_col: *mut i64,
    total: *mut f64,
) -> NtStatus {
    guard(|| {
        nonnull(row_to_col, "row_to_col")?;
        let data = if rows * cols == 0 {
            Vec::new()
        } else {
            nonnull(cost, "cost")?;
            slice::from_raw_parts(cost, rows * cols).to_vec()
        };
        if data.iter().any(|c| !c.is_finite()) {
            return fail(NtStatus::InvalidArgument, "costs must be finite");
        }
        let m = CostMatrix::new(rows, cols, data);
        let a = hungarian(&m);
        let out = slice::from_raw_parts_mut(row_to_col, rows);
        for (o, c) in out.iter_mut().zip(&a.row_to_col) {
            *o = c.map_or(-1, |c| c as i64);
        }
        if !total.is_null() {
            *total = a.total(&m);
        }
        Ok(())
    })
}

/// Symmetry-aware angle between two rotations, degrees.
///
/// # Safety
/// `pred` and `target` must hold 9 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nt_rotation_error(
    pred: *const f64,
    target: *const f64,
    symmetry: NtSymmetry,
    out: *mut f64,
) -> NtStatus {
    guard(|| {
        nonnull(pred, "pred")?;
        nonnull(target, "target")?;
        nonnull(out, "out")?;
        let p = Mat3::from_row_slice(slice::from_raw_parts(pred, 9));
        let t = Mat3::from_row_slice(slice::from_raw_parts(target, 9));
        if !noctrack::geom::is_rotation(&p) || !noctrack::geom::is_rotation(&t) {
            return fail(NtStatus::InvalidArgument, "inputs must be rotation matrices");
        }
        *out = rotation_error(&p, &t, symmetry.into());
        Ok(())
    })
}

/// Default tracker parameters.
#[no_mangle]
pub extern "C" fn nt_tracker_params_default() -> NtTrackerParams {
    let p = TrackerParams::default();
    NtTrackerParams {
        association_iou: p.association_iou,
        rescue_iou: p.rescue_iou,
        binarize_threshold: p.binarize_threshold,
        running_mean_weight: p.running_mean_weight,
        class_gated: p.class_gated,
        rescue: p.rescue,
    }
}

/// Creates a tracker; `params` may be null for defaults.
///
/// # Safety
/// `out` must be writable; `params` null or valid.
#[no_mangle]
pub unsafe extern "C" fn nt_tracker_new(params: *const NtTrackerParams, out: *mut *mut NtTracker) -> NtStatus {
    guard(|| {
        nonnull(out, "out")?;
        let mut p = TrackerParams::default();
        if !params.is_null() {
            let q = &*params;
            let unit = |x: f64| x > 0.0 && x <= 1.0;
            if !unit(q.association_iou) || !unit(q.rescue_iou) || !unit(q.binarize_threshold as f64) {
                return fail(NtStatus::InvalidArgument, "thresholds must lie in (0, 1]");
            }
            if !(0.0..1.0).contains(&q.running_mean_weight) {
                return fail(NtStatus::InvalidArgument, "running_mean_weight must lie in [0, 1)");
            }
            p.association_iou = q.association_iou;
            p.rescue_iou = q.rescue_iou;
            p.binarize_threshold = q.binarize_threshold;
            p.running_mean_weight = q.running_mean_weight;
            p.class_gated = q.class_gated;
            p.rescue = q.rescue;
        }
        *out = Box::into_raw(Box::new(NtTracker {
            running: Some(Tracker::new(p)),
            finished: None,
        }));
        Ok(())
    })
}

/// Feeds one frame of detections. Frame indices must strictly increase.
///
/// # Safety
/// `tracker` must be a live handle; `detections` valid for `n` entries
/// (may be null when `n == 0`), each with valid optional pointers.
#[no_mangle]
pub unsafe extern "C" fn nt_tracker_push_frame(
    tracker: *mut NtTracker,
    frame: usize,
    detections: *const NtDetection,
    n: usize,
) -> NtStatus {
    guard(|| {
        nonnull(tracker, "tracker")?;
        let Some(t) = (*tracker).running.as_mut() else {
            return fail(NtStatus::InvalidState, "tracker already finished");
        };
        let raw = if n == 0 {
            &[][..]
        } else {
            nonnull(detections, "detections")?;
            slice::from_raw_parts(detections, n)
        };
        let cells = OBJECT_RES * OBJECT_RES * OBJECT_RES;
        let mut dets = Vec::with_capacity(n);
        for d in raw {
            let mut det = Detection::new(box_in(&d.bbox)?, d.class_id as usize);
            det.confidence = d.confidence;
            if !d.canonical.is_null() {
                let values = slice::from_raw_parts(d.canonical, cells).to_vec();
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return fail(NtStatus::InvalidArgument, "canonical values must lie in [0, 1]");
                }
                det.canonical = Some(ProbGrid::from_values(Dims::cube(OBJECT_RES), values)?);
            }
            if !d.pose.is_null() {
                det.pose = Some(similarity_in(&*d.pose)?);
            }
            dets.push(det);
        }
        t.step(frame, dets)?;
        Ok(())
    })
}

/// Runs the rescue pass and freezes the tracker. `tracklet_count` may be
/// null.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nt_tracker_finish(tracker: *mut NtTracker, tracklet_count: *mut usize) -> NtStatus {
    guard(|| {
        nonnull(tracker, "tracker")?;
        let h = &mut *tracker;
        let Some(t) = h.running.take() else {
            return fail(NtStatus::InvalidState, "tracker already finished");
        };
        let tracklets = t.finish()?;
        if !tracklet_count.is_null() {
            *tracklet_count = tracklets.len();
        }
        h.finished = Some(tracklets);
        Ok(())
    })
}

/// Tracklet dump of a finished tracker as JSON. Release `out` with
/// [`nt_string_free`].
///
/// # Safety
/// `tracker` must be a live handle, `sequence` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nt_tracker_dump_json(
    tracker: *const NtTracker,
    sequence: *const c_char,
    frame_count: usize,
    out: *mut *mut c_char,
) -> NtStatus {
    guard(|| {
        nonnull(tracker, "tracker")?;
        nonnull(out, "out")?;
        let Some(tracklets) = (*tracker).finished.as_ref() else {
            return fail(NtStatus::InvalidState, "tracker not finished");
        };
        let name = c_str(sequence, "sequence")?;
        let dump = TrackDump::from_tracklets(name, frame_count, tracklets);
        let json = serde_json::to_string(&dump).map_err(Error::from)?;
        *out = CString::new(json)
            .or_else(|_| fail(NtStatus::Format, "dump contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Destroys a tracker. Null is ignored.
///
/// # Safety
/// `tracker` must come from [`nt_tracker_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nt_tracker_free(tracker: *mut NtTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// CLEAR-MOT MOTA of a tracklet dump against a ground-truth dump, both
/// JSON, with the given center-distance gate in meters.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nt_mota_from_json(
    tracks_json: *const c_char,
    gt_json: *const c_char,
    gate: f64,
    out: *mut NtMota,
) -> NtStatus {
    guard(|| {
        nonnull(out, "out")?;
        let pred: TrackDump = serde_json::from_str(c_str(tracks_json, "tracks_json")?).map_err(Error::from)?;
        let gt: GtDump = serde_json::from_str(c_str(gt_json, "gt_json")?).map_err(Error::from)?;
        let params = MotaParams {
            gate,
            ..MotaParams::default()
        };
        let m = mota(&pred, &gt, &params)?;
        *out = NtMota {
            mota: m.mota,
            gt: m.gt as u64,
            misses: m.misses as u64,
            false_positives: m.false_positives as u64,
            mismatches: m.mismatches as u64,
        };
        Ok(())
    })
}
