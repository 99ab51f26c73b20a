//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{UnitQuaternion, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noctrack::config::ExperimentConfig;
use noctrack::detect::{bce, smooth_l1, DetectorKnobs};
use noctrack::complete::CompletionKnobs;
use noctrack::eval::{mota, GtDump, GtFrame, GtRecord, MotaParams};
use noctrack::experiment::run_variants;
use noctrack::geom::{box_iou_3d, volumetric_iou, Box3, Mat3, SimilarityTransform, Vec3};
use noctrack::pose::{umeyama_solve, CorrespondenceSet, SymmetryClass};
use noctrack::synth::{look_at, render_depth, MotionProfile};
use noctrack::track::{hungarian, CostMatrix, TrackDump, TrackFrame, TrackRecord};
use noctrack::voxel::{extract_surface, CameraIntrinsics, DenseTsdfGrid, Dims, OccupancyGrid};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let q = Vector4::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    *UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q)).to_rotation_matrix().matrix()
}

fn umeyama_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<(SimilarityTransform, CorrespondenceSet)> = (0..1000)
        .map(|_| {
            let n = rng.gen_range(3..=200);
            let truth = SimilarityTransform::new(
                rng.gen_range(0.5..2.0),
                random_rotation(&mut rng),
                Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            )
            .unwrap();
            let src: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let dst = src.iter().map(|p| truth.apply(p)).collect();
            (truth, CorrespondenceSet::new(src, dst).unwrap())
        })
        .collect();
    let start = Instant::now();
    let solved: Vec<SimilarityTransform> = cases.iter().map(|(_, c)| umeyama_solve(c).unwrap()).collect();
    let elapsed = start.elapsed();
    let (mut rot, mut scale, mut trans) = (0.0f64, 0.0f64, 0.0f64);
    for ((truth, _), s) in cases.iter().zip(&solved) {
        rot = rot.max((s.rotation() - truth.rotation()).norm());
        scale = scale.max((s.scale() - truth.scale()).abs() / truth.scale());
        trans = trans.max((s.translation() - truth.translation()).norm());
    }
    check(
        rot < 1e-9 && scale < 1e-9 && trans < 1e-9 && elapsed < Duration::from_secs(1),
        format!("max rot {rot:.2e}, scale {scale:.2e}, trans {trans:.2e} m, {elapsed:.2?}"),
    )
}

/// Exhaustive minimum over injections of the smaller side into the larger.
fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let (r, c) = (cost.len(), cost[0].len());
    let transposed = r > c;
    let (n, m) = if transposed { (c, r) } else { (r, c) };
    let at = |i: usize, j: usize| if transposed { cost[j][i] } else { cost[i][j] };
    fn rec(i: usize, n: usize, used: &mut Vec<bool>, at: &dyn Fn(usize, usize) -> f64) -> f64 {
        if i == n {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(at(i, j) + rec(i + 1, n, used, at));
                used[j] = false;
            }
        }
        best
    }
    rec(0, n, &mut vec![false; m], &at)
}

fn hungarian_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (r, c) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
        let rows: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..c).map(|_| rng.gen_range(0..100) as f64).collect())
            .collect();
        let m = CostMatrix::from_rows(&rows);
        let got = hungarian(&m).total(&m);
        worst = worst.max((got - brute_force(&rows)).abs());
    }
    check(worst == 0.0, format!("500 matrices, max deviation {worst}"))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// IoU from Halton samples over the joint bounding box.
fn sampled_box_iou(a: &Box3, b: &Box3, samples: u64) -> f64 {
    let lo = a.min().inf(&b.min());
    let hi = a.max().sup(&b.max());
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 1..=samples {
        let u = Vec3::new(radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5));
        let p = lo + (hi - lo).component_mul(&u);
        let (ia, ib) = (a.contains(&p), b.contains(&p));
        inter += (ia && ib) as u64;
        union += (ia || ib) as u64;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn iou_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut vol_dev = 0.0f64;
    let mut box_dev = 0.0f64;
    for _ in 0..100 {
        let dims = Dims([rng.gen_range(1..12), rng.gen_range(1..12), rng.gen_range(1..12)]);
        let (pa, pb) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let a: Vec<bool> = (0..dims.len()).map(|_| rng.gen_bool(pa)).collect();
        let b: Vec<bool> = (0..dims.len()).map(|_| rng.gen_bool(pb)).collect();
        let inter = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
        let union = a.iter().zip(&b).filter(|(x, y)| **x || **y).count();
        let expected = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
        let got = volumetric_iou(
            &OccupancyGrid::from_bits(dims, a).unwrap(),
            &OccupancyGrid::from_bits(dims, b).unwrap(),
        )
        .unwrap();
        vol_dev = vol_dev.max((got - expected).abs());

        let e = Vec3::new(rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
        let ba = Box3::new(Vec3::zeros(), e).unwrap();
        let shift = Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let f = Vec3::new(rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
        let bb = Box3::new(shift, f).unwrap();
        box_dev = box_dev.max((box_iou_3d(&ba, &bb) - sampled_box_iou(&ba, &bb, 1 << 18)).abs());
    }
    check(
        vol_dev == 0.0 && box_dev < 1e-3,
        format!("volumetric max deviation {vol_dev}, box max deviation {box_dev:.2e}"),
    )
}

fn dumps(gt: &[Vec<(u64, f64)>], pred: &[Vec<(u64, f64)>]) -> (TrackDump, GtDump) {
    let bx = |x: f64| Box3::new(Vec3::new(x, 0.0, 0.0), Vec3::repeat(0.5)).unwrap();
    let p = TrackDump {
        sequence: "scripted".into(),
        frames: pred
            .iter()
            .enumerate()
            .map(|(f, objs)| TrackFrame {
                frame: f,
                tracks: objs
                    .iter()
                    .map(|&(id, x)| TrackRecord { id, class_id: 0, bbox: bx(x), pose: None })
                    .collect(),
            })
            .collect(),
    };
    let g = GtDump {
        sequence: "scripted".into(),
        frames: gt
            .iter()
            .enumerate()
            .map(|(f, objs)| GtFrame {
                frame: f,
                objects: objs
                    .iter()
                    .map(|&(id, x)| GtRecord {
                        id,
                        class_id: 0,
                        bbox: bx(x),
                        pose: SimilarityTransform::identity(),
                        symmetry: SymmetryClass::None,
                        visible_voxels: 1,
                    })
                    .collect(),
            })
            .collect(),
    };
    (p, g)
}

fn mota_hand_counts() -> Outcome {
    let eps = 1e-9;
    // (name, ground truth per frame, predictions per frame, hand-computed MOTA)
    let scenarios: Vec<(&str, Vec<Vec<(u64, f64)>>, Vec<Vec<(u64, f64)>>, f64)> = vec![
        ("perfect", vec![vec![(1, 0.0), (2, 5.0)]; 3], vec![vec![(10, 0.0), (20, 5.0)]; 3], 1.0),
        ("no predictions", vec![vec![(1, 0.0)]; 3], vec![vec![]; 3], 0.0),
        (
            "id switch at frame 2",
            vec![vec![(1, 0.0)]; 3],
            vec![vec![(7, 0.0)], vec![(8, 0.0)], vec![(8, 0.0)]],
            1.0 - 1.0 / 3.0,
        ),
        ("false positive each frame", vec![vec![(1, 0.0)]; 2], vec![vec![(7, 0.0), (9, 3.0)]; 2], 0.0),
        ("inside gate", vec![vec![(1, 0.0)]; 2], vec![vec![(7, 0.25 - eps)]; 2], 1.0),
        ("on the gate", vec![vec![(1, 0.0)]], vec![vec![(7, 0.25)]], -1.0),
        ("outside gate", vec![vec![(1, 0.0)]], vec![vec![(7, 0.25 + eps)]], -1.0),
        ("persistent miss", vec![vec![(1, 0.0), (2, 5.0)]; 4], vec![vec![(7, 0.0)]; 4], 0.5),
        (
            "identity swap",
            vec![vec![(1, 0.0), (2, 5.0)]; 3],
            vec![vec![(7, 0.0), (8, 5.0)], vec![(7, 0.0), (8, 5.0)], vec![(8, 0.0), (7, 5.0)]],
            1.0 - 2.0 / 6.0,
        ),
        (
            "correspondence kept inside gate",
            vec![vec![(1, 0.0)]; 2],
            vec![vec![(7, 0.0)], vec![(7, 0.2), (8, 0.0)]],
            0.5,
        ),
        (
            "lost and regained",
            vec![vec![(1, 0.0)]; 3],
            vec![vec![(7, 0.0)], vec![], vec![(7, 0.0)]],
            1.0 - 1.0 / 3.0,
        ),
    ];
    let mut failed = Vec::new();
    for (name, gt, pred, expected) in &scenarios {
        let (p, g) = dumps(gt, pred);
        let got = mota(&p, &g, &MotaParams::default()).map(|m| m.mota);
        if got.as_ref().ok() != Some(expected) {
            failed.push(format!("{name}: {got:?} != {expected}"));
        }
    }
    check(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} scripted scenarios exact", scenarios.len())
        } else {
            failed.join("; ")
        },
    )
}

struct Suite {
    report: noctrack::experiment::ExperimentReport,
    elapsed: Duration,
}

fn stress_suite() -> Suite {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 1;
    cfg.sequences = 20;
    cfg.scene.motion = MotionProfile::Stress;
    cfg.scene.min_objects = 2;
    cfg.scene.max_objects = 4;
    let start = Instant::now();
    let report = run_variants(&cfg, &cfg.sweep_variants()).expect("stress suite runs");
    Suite {
        report,
        elapsed: start.elapsed(),
    }
}

fn ablation_direction(s: &Suite) -> Outcome {
    let v = &s.report.variants;
    let (without, with) = (&v[0], &v[v.len() - 1]);
    let gain = with.mean_mota - without.mean_mota;
    check(
        s.report.sequences >= 20
            && s.report.stress_fraction >= 0.3
            && gain >= 0.03
            && s.elapsed < Duration::from_secs(600),
        format!(
            "{} sequences, {:.0}% low-overlap transitions, MOTA f=1 {:.3} vs f=0 {:.3} (+{gain:.3}), sweep {:.0?}",
            s.report.sequences,
            100.0 * s.report.stress_fraction,
            with.mean_mota,
            without.mean_mota,
            s.elapsed
        ),
    )
}

fn pose_direction(s: &Suite) -> Outcome {
    let v = &s.report.variants;
    let (without, with) = (&v[0], &v[v.len() - 1]);
    match (with.median_rotation_deg, without.median_rotation_deg) {
        (Some(a), Some(b)) => check(
            a <= b && a < 15.0 && b < 15.0,
            format!("median rotation error {a:.4}° with completion, {b:.4}° without"),
        ),
        other => Err(format!("missing pose statistics {other:?}")),
    }
}

fn completion_tracking_trend(s: &Suite) -> Outcome {
    let pts: Vec<String> = s
        .report
        .variants
        .iter()
        .map(|v| format!("({:.3}, {:.3})", v.mean_completion_iou.unwrap_or(0.0), v.mean_mota))
        .collect();
    match s.report.completion_mota_spearman {
        Some(r) => check(
            s.report.variants.len() == 5 && r > 0.8,
            format!("spearman {r:.3} over (IoU, MOTA) {}", pts.join(" ")),
        ),
        None => Err("rank correlation undefined".into()),
    }
}

fn noise_free_sanity() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 3;
    cfg.sequences = 10;
    cfg.scene.motion = MotionProfile::Slow;
    cfg.scene.frame_count = 20;
    cfg.detector = DetectorKnobs::NOISE_FREE;
    cfg.completion = CompletionKnobs::NOISE_FREE;
    let r = run_variants(&cfg, &[cfg.variant()]).map_err(|e| e.to_string())?;
    let v = &r.variants[0];
    let imperfect: Vec<&str> = v
        .sequences
        .iter()
        .filter(|s| s.mota != 1.0 || s.mismatches != 0)
        .map(|s| s.sequence.as_str())
        .collect();
    check(
        imperfect.is_empty(),
        format!("{} sequences, imperfect: {imperfect:?}", v.sequences.len()),
    )
}

/// Unsigned distance from `p` to the boundary of an axis-aligned box.
fn box_surface_distance(lo: &Vec3, hi: &Vec3, p: &Vec3) -> f64 {
    let outside = Vec3::new(
        (lo.x - p.x).max(p.x - hi.x).max(0.0),
        (lo.y - p.y).max(p.y - hi.y).max(0.0),
        (lo.z - p.z).max(p.z - hi.z).max(0.0),
    );
    if outside.norm() > 0.0 {
        outside.norm()
    } else {
        (p - lo).min().min((hi - p).min())
    }
}

fn tsdf_round_trip() -> Outcome {
    let occ = OccupancyGrid::from_bits(Dims::cube(64), vec![true; 64 * 64 * 64]).unwrap();
    let side = 0.6;
    let lo = Vec3::new(-0.3, -0.3, 0.0);
    let pose = SimilarityTransform::new(side, Mat3::identity(), lo).unwrap();
    let hi = lo + Vec3::repeat(side);
    let k = CameraIntrinsics::centered(160, 120, 140.0);
    let vs = 0.02;
    let mut grid = DenseTsdfGrid::new(Vec3::new(-0.5, -0.5, -0.2), vs, Dims([50, 50, 50]), vs).unwrap();
    let target = Vec3::new(0.0, 0.0, 0.3);
    for i in 0..8 {
        let az = i as f64 * std::f64::consts::TAU / 8.0;
        let eye = target + Vec3::new(2.0 * az.cos(), 2.0 * az.sin(), 1.2);
        let cam = look_at(eye, target);
        let (depth, _) = render_depth(&k, &cam, &[(&occ, &pose)], None).map_err(|e| e.to_string())?;
        grid.integrate(&depth, &k, &cam).map_err(|e| e.to_string())?;
    }
    let surface = extract_surface(&grid);
    let near = surface
        .voxels
        .iter()
        .filter(|v| box_surface_distance(&lo, &hi, &surface.voxel_center(v)) <= vs)
        .count();
    let frac = near as f64 / surface.len().max(1) as f64;
    check(
        !surface.is_empty() && frac >= 0.95,
        format!("{near}/{} surface voxels within one voxel ({:.1}%)", surface.len(), 100.0 * frac),
    )
}

fn loss_spot_checks() -> Outcome {
    let l = bce(0.5, 1.0);
    let a = smooth_l1(0.5);
    let b = smooth_l1(2.0);
    check(
        (l - std::f64::consts::LN_2).abs() < 1e-12 && a == 0.125 && b == 1.5,
        format!("bce(0.5) = {l}, smooth_l1(0.5) = {a}, smooth_l1(2) = {b}"),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &outcome {
        Ok(d) => println!("criterion {n:>2} {name}: PASS ({d})"),
        Err(d) => println!("criterion {n:>2} {name}: FAIL ({d})"),
    }
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= run(1, "umeyama exactness", umeyama_exactness);
    ok &= run(2, "hungarian optimality", hungarian_optimality);
    ok &= run(3, "volumetric and box IoU oracles", iou_oracles);
    ok &= run(4, "MOTA hand counts", mota_hand_counts);
    let suite = catch_unwind(stress_suite);
    match &suite {
        Ok(s) => {
            ok &= run(5, "ablation direction", || ablation_direction(s));
            ok &= run(6, "pose error direction", || pose_direction(s));
            ok &= run(7, "completion-tracking trend", || completion_tracking_trend(s));
        }
        Err(_) => {
            for (n, name) in [(5, "ablation direction"), (6, "pose error direction"), (7, "completion-tracking trend")] {
                ok &= run(n, name, || Err("stress suite failed to run".into()));
            }
        }
    }
    ok &= run(8, "noise-free end-to-end", noise_free_sanity);
    ok &= run(9, "TSDF round trip", tsdf_round_trip);
    ok &= run(10, "loss spot checks", loss_spot_checks);
    if !ok {
        std::process::exit(1);
    }
}
