use std::ffi::{CStr, CString};
use std::ptr;

use noctrack_ffi::*;

fn last_error() -> String {
    let p = nt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn rot_z(a: f64) -> [f64; 9] {
    let (s, c) = a.sin_cos();
    [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]
}

#[test]
fn umeyama_recovers_a_similarity() {
    let r = rot_z(0.7);
    let (scale, t) = (1.7, [0.5, -2.0, 3.0]);
    let src: Vec<f64> = (0..20).flat_map(|i| {
        let f = i as f64;
        [f.sin(), (1.3 * f).cos(), 0.1 * f]
    }).collect();
    let dst: Vec<f64> = src
        .chunks(3)
        .flat_map(|p| {
            (0..3).map(move |i| scale * (r[3 * i] * p[0] + r[3 * i + 1] * p[1] + r[3 * i + 2] * p[2]) + t[i])
        })
        .collect();
    let mut out = NtSimilarity { scale: 0.0, rotation: [0.0; 9], translation: [0.0; 3] };
    let s = unsafe { nt_umeyama(src.as_ptr(), dst.as_ptr(), 20, &mut out) };
    assert_eq!(s, NtStatus::Ok);
    assert!((out.scale - scale).abs() < 1e-9);
    for i in 0..9 {
        assert!((out.rotation[i] - r[i]).abs() < 1e-9);
    }
    for i in 0..3 {
        assert!((out.translation[i] - t[i]).abs() < 1e-9);
    }
    assert!(nt_last_error_message().is_null());
}

#[test]
fn degenerate_and_null_inputs_report_status() {
    let pts = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
    let mut out = NtSimilarity { scale: 0.0, rotation: [0.0; 9], translation: [0.0; 3] };
    let s = unsafe { nt_umeyama(pts.as_ptr(), pts.as_ptr(), 3, &mut out) };
    assert_eq!(s, NtStatus::Degenerate);
    assert!(last_error().contains("degenerate"));
    let s = unsafe { nt_umeyama(ptr::null(), pts.as_ptr(), 3, &mut out) };
    assert_eq!(s, NtStatus::NullPointer);
    let s = unsafe { nt_umeyama(pts.as_ptr(), pts.as_ptr(), 2, &mut out) };
    assert_ne!(s, NtStatus::Ok);
}

#[test]
fn box_and_volumetric_iou() {
    let a = NtBox { center: [0.0; 3], extents: [2.0; 3] };
    let b = NtBox { center: [1.0, 0.0, 0.0], extents: [2.0; 3] };
    let mut v = 0.0;
    assert_eq!(unsafe { nt_box_iou(&a, &b, &mut v) }, NtStatus::Ok);
    assert!((v - 1.0 / 3.0).abs() < 1e-12);
    let bad = NtBox { center: [0.0; 3], extents: [0.0, 1.0, 1.0] };
    assert_eq!(unsafe { nt_box_iou(&a, &bad, &mut v) }, NtStatus::InvalidArgument);

    let g1 = [1u8, 1, 0, 0, 1, 0, 0, 0];
    let g2 = [1u8, 0, 0, 0, 1, 1, 0, 0];
    assert_eq!(unsafe { nt_volumetric_iou(g1.as_ptr(), g2.as_ptr(), 2, 2, 2, &mut v) }, NtStatus::Ok);
    assert_eq!(v, 0.5);
}

#[test]
fn hungarian_assignment() {
    let cost = [1.0, 2.0, 2.0, 4.0];
    let mut cols = [0i64; 2];
    let mut total = 0.0;
    assert_eq!(unsafe { nt_hungarian(cost.as_ptr(), 2, 2, cols.as_mut_ptr(), &mut total) }, NtStatus::Ok);
    assert_eq!(cols, [1, 0]);
    assert_eq!(total, 4.0);
    let wide = [5.0, 1.0, 3.0];
    let tall_cols = &mut [0i64; 3];
    assert_eq!(unsafe { nt_hungarian(wide.as_ptr(), 3, 1, tall_cols.as_mut_ptr(), &mut total) }, NtStatus::Ok);
    assert_eq!(*tall_cols, [-1, 0, -1]);
    let nan = [f64::NAN];
    assert_eq!(unsafe { nt_hungarian(nan.as_ptr(), 1, 1, cols.as_mut_ptr(), ptr::null_mut()) }, NtStatus::InvalidArgument);
}

#[test]
fn rotation_error_respects_symmetry() {
    let mut deg = 0.0;
    let (a, b) = (rot_z(0.0), rot_z(std::f64::consts::PI));
    assert_eq!(unsafe { nt_rotation_error(a.as_ptr(), b.as_ptr(), NtSymmetry::None, &mut deg) }, NtStatus::Ok);
    assert!((deg - 180.0).abs() < 1e-9);
    assert_eq!(unsafe { nt_rotation_error(a.as_ptr(), b.as_ptr(), NtSymmetry::TwoFold, &mut deg) }, NtStatus::Ok);
    assert!(deg.abs() < 1e-6);
    let skew = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { nt_rotation_error(skew.as_ptr(), b.as_ptr(), NtSymmetry::None, &mut deg) }, NtStatus::InvalidArgument);
}

fn det(x: f64) -> NtDetection {
    NtDetection {
        bbox: NtBox { center: [x, 0.0, 0.5], extents: [1.0; 3] },
        class_id: 2,
        confidence: 1.0,
        canonical: ptr::null(),
        pose: ptr::null(),
    }
}

#[test]
fn tracker_lifecycle_and_mota() {
    let mut t = ptr::null_mut();
    let params = nt_tracker_params_default();
    assert_eq!(params.association_iou, 0.3);
    assert_eq!(unsafe { nt_tracker_new(&params, &mut t) }, NtStatus::Ok);
    for f in 0..4 {
        let dets = [det(0.05 * f as f64), det(5.0)];
        assert_eq!(unsafe { nt_tracker_push_frame(t, f, dets.as_ptr(), 2) }, NtStatus::Ok);
    }
    assert_eq!(unsafe { nt_tracker_push_frame(t, 2, ptr::null(), 0) }, NtStatus::FrameOrder);
    let mut json = ptr::null_mut();
    let name = CString::new("demo").unwrap();
    assert_eq!(unsafe { nt_tracker_dump_json(t, name.as_ptr(), 4, &mut json) }, NtStatus::InvalidState);
    let mut count = 0usize;
    assert_eq!(unsafe { nt_tracker_finish(t, &mut count) }, NtStatus::Ok);
    assert_eq!(count, 2);
    assert_eq!(unsafe { nt_tracker_push_frame(t, 9, ptr::null(), 0) }, NtStatus::InvalidState);
    assert_eq!(unsafe { nt_tracker_dump_json(t, name.as_ptr(), 4, &mut json) }, NtStatus::Ok);
    let tracks = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let dump: serde_json::Value = serde_json::from_str(&tracks).unwrap();
    assert_eq!(dump["sequence"], "demo");
    assert_eq!(dump["frames"].as_array().unwrap().len(), 4);

    // ground truth equal to the detections
    let gt_frames: Vec<serde_json::Value> = (0..4)
        .map(|f| {
            let obj = |id: u64, x: f64| serde_json::json!({
                "id": id, "class_id": 2,
                "box": {"center": [x, 0.0, 0.5], "extents": [1.0, 1.0, 1.0]},
                "pose": {"scale": 1.0, "rotation": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "translation": [0.0, 0.0, 0.0]}
            });
            serde_json::json!({"frame": f, "objects": [obj(0, 0.05 * f as f64), obj(1, 5.0)]})
        })
        .collect();
    let gt = CString::new(serde_json::json!({"sequence": "demo", "frames": gt_frames}).to_string()).unwrap();
    let mut m = NtMota::default();
    let s = unsafe { nt_mota_from_json(json, gt.as_ptr(), 0.25, &mut m) };
    assert_eq!(s, NtStatus::Ok, "{}", last_error());
    assert_eq!((m.mota, m.gt, m.mismatches), (1.0, 8, 0));
    let garbage = CString::new("{").unwrap();
    assert_eq!(unsafe { nt_mota_from_json(garbage.as_ptr(), gt.as_ptr(), 0.25, &mut m) }, NtStatus::Format);
    unsafe {
        nt_string_free(json);
        nt_tracker_free(t);
        nt_tracker_free(ptr::null_mut());
        nt_string_free(ptr::null_mut());
    }
}

#[test]
fn tracker_rejects_bad_canonical_values() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { nt_tracker_new(ptr::null(), &mut t) }, NtStatus::Ok);
    let grid = vec![2.0f32; 64 * 64 * 64];
    let mut d = det(0.0);
    d.canonical = grid.as_ptr();
    assert_eq!(unsafe { nt_tracker_push_frame(t, 0, &d, 1) }, NtStatus::InvalidArgument);
    let ok = vec![0.5f32; 64 * 64 * 64];
    d.canonical = ok.as_ptr();
    assert_eq!(unsafe { nt_tracker_push_frame(t, 0, &d, 1) }, NtStatus::Ok);
    unsafe { nt_tracker_free(t) };
}
