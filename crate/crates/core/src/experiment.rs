//! End-to-end runs: render each sequence, fuse a per-frame TSDF, extract
//! proposals from oracle prediction fields, complete each proposal, track,
//! and score. Rendering and detection are shared by every variant of a run;
//! only completion and tracking are repeated.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complete::{
    canonical_representation, ground_truth_crop, oracle_complete, pose_from_completion, GtObjectView,
};
use crate::config::{ExperimentConfig, Variant};
use crate::detect::{mean_shift_proposals, oracle_predictions, oracle_targets, InstanceTarget};
use crate::eval::{
    average_precision, mota, pose_error_stats, sequence_average, spearman, GtDump, GtFrame, GtRecord,
    Labeled, MotaBreakdown, Scored,
};
use crate::geom::{box_iou_3d, volumetric_iou, Box3, SimilarityTransform, Vec3};
use crate::pose::SymmetryClass;
use crate::synth::{canonical_center, generate_scene, GroundTruthFrame, Scene, SceneScript, NUM_CLASSES};
use crate::track::{Detection, TrackDump, Tracker};
use crate::voxel::{binarize, extract_surface, DenseTsdfGrid, Dims, SparseSurfaceGrid};
use crate::{seed, Error, Result};

/// Scene scripts named by the config, or generated from its seed.
pub fn load_scripts(cfg: &ExperimentConfig) -> Result<Vec<SceneScript>> {
    if cfg.scripts.is_empty() {
        (0..cfg.sequences)
            .map(|i| generate_scene(&cfg.scene, cfg.seed, i as u64))
            .collect()
    } else {
        cfg.scripts.iter().map(|p| SceneScript::read(p)).collect()
    }
}

/// A proposal with the ground-truth object most of its voxels belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProposal {
    pub bbox: Box3,
    pub class_id: usize,
    pub confidence: f64,
    /// Script object index; `None` when background voxels dominate.
    pub object: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub frame: usize,
    pub proposals: Vec<LabeledProposal>,
    pub gt: GroundTruthFrame,
}

/// Consecutive-frame overlap of visible geometry, per object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StressStats {
    pub transitions: usize,
    /// Transitions with visible-geometry box IoU below 0.3.
    pub low_overlap: usize,
}

impl StressStats {
    pub fn fraction(&self) -> f64 {
        if self.transitions == 0 {
            0.0
        } else {
            self.low_overlap as f64 / self.transitions as f64
        }
    }
}

/// A rendered and detected sequence, ready for any number of variants.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    pub index: usize,
    pub scene: Scene,
    pub frames: Vec<PreparedFrame>,
    pub gt: GtDump,
    pub stress: StressStats,
}

impl PreparedSequence {
    pub fn name(&self) -> &str {
        &self.scene.script().name
    }
}

/// Object index of each surface voxel: its center must project onto a
/// pixel of that object with depth agreeing within `band`.
pub fn label_surface(
    surface: &SparseSurfaceGrid,
    script: &SceneScript,
    frame: usize,
    depth: &crate::voxel::DepthImage,
    instance: &[Option<u16>],
    band: f64,
) -> Vec<Option<usize>> {
    let k = &script.intrinsics;
    let world_to_cam = script.camera[frame].inverse();
    surface
        .voxels
        .iter()
        .map(|v| {
            let pc = world_to_cam.apply(&surface.voxel_center(v));
            let (u, row) = k.project(&pc)?;
            let obj = instance[row * k.width + u]?;
            let d = depth.get(u, row)?;
            ((d - pc.z).abs() < band).then_some(obj as usize)
        })
        .collect()
}

fn majority_object(members: &[usize], labels: &[Option<usize>]) -> Option<usize> {
    let mut counts: HashMap<Option<usize>, usize> = HashMap::new();
    for &m in members {
        *counts.entry(labels[m]).or_default() += 1;
    }
    // background wins ties; among objects the lowest index does
    let mut best: (usize, Option<usize>) = (0, None);
    let mut keys: Vec<_> = counts.into_iter().collect();
    keys.sort_by_key(|(k, _)| k.map_or(0, |o| o + 1));
    for (k, c) in keys {
        if c > best.0 {
            best = (c, k);
        }
    }
    best.1
}

/// World box of an object's visible canonical voxels.
fn visible_box(gt: &crate::synth::GroundTruthObject) -> Option<Box3> {
    let dims = gt.visible.dims();
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for i in gt.visible.occupied() {
        let p = gt.pose.apply(&canonical_center(dims, i));
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    let pad = Vec3::repeat(0.5 * gt.pose.scale() / dims.0[0] as f64);
    Box3::from_min_max(lo - pad, hi + pad).ok()
}

fn scene_grid(script: &SceneScript, voxel_size: f64, truncation: f64) -> Result<DenseTsdfGrid> {
    let e = script.bounds.extents();
    let n = |x: f64| (x / voxel_size).ceil().max(1.0) as usize;
    DenseTsdfGrid::new(script.bounds.min(), voxel_size, Dims([n(e.x), n(e.y), n(e.z)]), truncation)
}

/// Renders, fuses and detects every frame of a script.
pub fn prepare_sequence(script: SceneScript, index: usize, cfg: &ExperimentConfig) -> Result<PreparedSequence> {
    let p = &cfg.pipeline;
    let scene = Scene::new(script)?;
    let script = scene.script();
    let noise_seed = seed::derive(cfg.seed, &[index as u64]);
    let mut frames = Vec::with_capacity(script.frame_count);
    let mut gt_frames = Vec::with_capacity(script.frame_count);
    let mut stress = StressStats::default();
    let mut prev_boxes: Vec<Option<Box3>> = vec![None; script.objects.len()];

    for f in 0..script.frame_count {
        let rf = scene.render_frame(f, p.truncation, noise_seed)?;
        let mut grid = scene_grid(script, p.voxel_size, p.truncation)?;
        grid.integrate(&rf.depth, &script.intrinsics, &rf.gt.camera_pose)?;
        let surface = extract_surface(&grid);
        let labels = label_surface(&surface, script, f, &rf.depth, &rf.instance, p.truncation);
        let instances: Vec<InstanceTarget> = rf
            .gt
            .objects
            .iter()
            .map(|o| InstanceTarget {
                bbox: o.bbox,
                class_id: o.class_id,
            })
            .collect();
        let targets = oracle_targets(&surface, &labels, &instances)?;
        let mut rng = seed::rng(cfg.seed, &[seed::stream::DETECTOR, index as u64, f as u64]);
        let fields = oracle_predictions(&surface, &targets, NUM_CLASSES, &cfg.detector, &mut rng)?;
        let proposals = mean_shift_proposals(&fields, &p.mean_shift)?
            .into_iter()
            .map(|pr| LabeledProposal {
                object: majority_object(&pr.members, &labels),
                bbox: pr.bbox,
                class_id: pr.class_id,
                confidence: pr.mean_objectness,
            })
            .collect();

        let mut records = Vec::new();
        for o in &rf.gt.objects {
            let seen = o.visible_count() >= p.min_visible_voxels.max(1);
            let vb = if seen { visible_box(o) } else { None };
            if let (Some(a), Some(b)) = (&prev_boxes[o.object], &vb) {
                stress.transitions += 1;
                if box_iou_3d(a, b) < 0.3 {
                    stress.low_overlap += 1;
                }
            }
            prev_boxes[o.object] = vb;
            if seen {
                records.push(GtRecord {
                    id: o.object as u64,
                    class_id: o.class_id,
                    bbox: o.bbox,
                    pose: o.pose,
                    symmetry: o.symmetry,
                    visible_voxels: o.visible_count(),
                });
            }
        }
        gt_frames.push(GtFrame {
            frame: f,
            objects: records,
        });
        frames.push(PreparedFrame {
            frame: f,
            proposals,
            gt: rf.gt,
        });
    }
    let gt = GtDump {
        sequence: script.name.clone(),
        frames: gt_frames,
    };
    Ok(PreparedSequence {
        index,
        scene,
        frames,
        gt,
        stress,
    })
}

/// Ground-truth key for AP matching: `(frame, object)`.
type GtKey = (usize, usize);

/// A scored detection with its precomputed overlaps against same-frame
/// ground truth.
#[derive(Debug, Clone, PartialEq)]
struct ApItem {
    box_iou: Vec<(GtKey, f64)>,
    canonical_iou: Vec<(GtKey, f64)>,
}

/// Result of one variant on one sequence.
#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub dump: TrackDump,
    pub mota: MotaBreakdown,
    pub completion_iou_sum: f64,
    pub completions: usize,
    pub poses: Vec<(SimilarityTransform, SimilarityTransform, SymmetryClass)>,
    detections: Vec<Scored<ApItem>>,
    ground_truth: Vec<Labeled<GtKey>>,
}

impl SequenceOutcome {
    pub fn mean_completion_iou(&self) -> Option<f64> {
        (self.completions > 0).then(|| self.completion_iou_sum / self.completions as f64)
    }
}

/// Completes every proposal and tracks one prepared sequence.
pub fn track_sequence(seq: &PreparedSequence, variant: &Variant, cfg: &ExperimentConfig) -> Result<SequenceOutcome> {
    let thr = cfg.pipeline.occupancy_threshold;
    let templates = seq.scene.templates();
    let mut tracker = Tracker::new(variant.tracker);
    let mut out = SequenceOutcome {
        dump: TrackDump {
            sequence: String::new(),
            frames: Vec::new(),
        },
        mota: MotaBreakdown::pooled(&[]),
        completion_iou_sum: 0.0,
        completions: 0,
        poses: Vec::new(),
        detections: Vec::new(),
        ground_truth: Vec::new(),
    };

    for (pf, gf) in seq.frames.iter().zip(&seq.gt.frames) {
        for g in &gf.objects {
            out.ground_truth.push(Labeled {
                group: pf.frame,
                class_id: g.class_id,
                item: (pf.frame, g.id as usize),
            });
        }
        let mut detections = Vec::with_capacity(pf.proposals.len());
        for (j, prop) in pf.proposals.iter().enumerate() {
            let mut det = Detection::new(prop.bbox, prop.class_id);
            det.confidence = prop.confidence;
            let mut canonical_bin = None;
            if let Some(k) = prop.object {
                let gt = &pf.gt.objects[k];
                let template = &templates[k];
                let view = GtObjectView {
                    occupancy: template.occupancy(),
                    pose: &gt.pose,
                    visible: &gt.visible,
                };
                let key = seed::derive(cfg.seed, &[seq.index as u64, pf.frame as u64, k as u64, j as u64]);
                match oracle_complete(&prop.bbox, view, &variant.completion, key) {
                    Ok(c) => {
                        let truth = ground_truth_crop(&c.placement, c.dims(), template.occupancy(), &gt.pose);
                        out.completion_iou_sum += volumetric_iou(&binarize(&c.occupancy, thr), &truth)?;
                        out.completions += 1;
                        det.pose = pose_from_completion(&c, thr).ok();
                        if let Some(p) = det.pose {
                            out.poses.push((p, gt.pose, gt.symmetry));
                        }
                        let canonical = canonical_representation(&c, thr);
                        canonical_bin = Some(binarize(&canonical, thr));
                        det.canonical = Some(canonical);
                    }
                    Err(Error::EmptyOverlap) => {}
                    Err(e) => return Err(e),
                }
            }
            let mut item = ApItem {
                box_iou: Vec::new(),
                canonical_iou: Vec::new(),
            };
            for g in gf.objects.iter().filter(|g| g.class_id == prop.class_id) {
                let key = (pf.frame, g.id as usize);
                item.box_iou.push((key, box_iou_3d(&prop.bbox, &g.bbox)));
                let c = match &canonical_bin {
                    Some(b) => volumetric_iou(b, templates[g.id as usize].occupancy())?,
                    None => 0.0,
                };
                item.canonical_iou.push((key, c));
            }
            out.detections.push(Scored {
                group: pf.frame,
                class_id: prop.class_id,
                confidence: prop.confidence,
                item,
            });
            detections.push(det);
        }
        tracker.step(pf.frame, detections)?;
    }
    let tracklets = tracker.finish()?;
    out.dump = TrackDump::from_tracklets(seq.name(), seq.frames.len(), &tracklets);
    out.mota = mota(&out.dump, &seq.gt, &cfg.mota)?;
    Ok(out)
}

fn lookup(list: &[(GtKey, f64)], key: &GtKey) -> f64 {
    list.iter().find(|(k, _)| k == key).map_or(0.0, |(_, v)| *v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub sequence: String,
    pub mota: f64,
    pub gt: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub completion_iou: Option<f64>,
    pub stress_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub name: String,
    pub completion_fraction: f64,
    pub rescue: bool,
    /// Unweighted mean of per-sequence MOTA.
    pub mean_mota: f64,
    /// MOTA over the pooled counts of all sequences.
    pub pooled_mota: f64,
    pub mismatches: usize,
    /// Mean over all completed detections.
    pub mean_completion_iou: Option<f64>,
    pub median_rotation_deg: Option<f64>,
    pub median_translation_m: Option<f64>,
    pub detection_map: f64,
    pub completion_map: f64,
    pub sequences: Vec<SequenceMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub sequences: usize,
    /// Share of consecutive-frame object transitions whose visible-geometry
    /// box IoU falls below 0.3.
    pub stress_fraction: f64,
    pub variants: Vec<VariantMetrics>,
    /// Rank correlation of mean completion IoU and mean MOTA across
    /// variants, when defined.
    pub completion_mota_spearman: Option<f64>,
    #[serde(skip)]
    pub dumps: Vec<Vec<TrackDump>>,
    #[serde(skip)]
    pub ground_truth: Vec<GtDump>,
}

fn summarize(
    variant: &Variant,
    outcomes: &[&SequenceOutcome],
    prepared: &[(String, StressStats)],
    cfg: &ExperimentConfig,
) -> Result<VariantMetrics> {
    let motas: Vec<MotaBreakdown> = outcomes.iter().map(|o| o.mota.clone()).collect();
    let pooled = MotaBreakdown::pooled(&motas);
    let iou_sum: f64 = outcomes.iter().map(|o| o.completion_iou_sum).sum();
    let completions: usize = outcomes.iter().map(|o| o.completions).sum();
    let poses: Vec<_> = outcomes.iter().flat_map(|o| o.poses.iter().copied()).collect();
    let pose_stats = match pose_error_stats(&poses) {
        Ok(s) => Some(s),
        Err(Error::EmptyMatchSet) => None,
        Err(e) => return Err(e),
    };

    // groups are made unique across sequences
    let stride = outcomes.iter().map(|o| o.mota.frames.len()).max().unwrap_or(0) + 1;
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for (s, o) in outcomes.iter().enumerate() {
        for d in &o.detections {
            dets.push(Scored {
                group: s * stride + d.group,
                class_id: d.class_id,
                confidence: d.confidence,
                item: (s, &d.item),
            });
        }
        for g in &o.ground_truth {
            gts.push(Labeled {
                group: s * stride + g.group,
                class_id: g.class_id,
                item: (s, g.item),
            });
        }
    }
    let same = |a: &(usize, &ApItem), b: &(usize, GtKey)| a.0 == b.0;
    let detection_map = average_precision(
        &dets,
        &gts,
        |a, b| if same(a, b) { lookup(&a.1.box_iou, &b.1) } else { 0.0 },
        cfg.detection_map_iou,
    );
    let completion_map = average_precision(
        &dets,
        &gts,
        |a, b| if same(a, b) { lookup(&a.1.canonical_iou, &b.1) } else { 0.0 },
        cfg.completion_map_iou,
    );

    let sequences = outcomes
        .iter()
        .zip(prepared)
        .map(|(o, (name, stress))| SequenceMetrics {
            sequence: name.clone(),
            mota: o.mota.mota,
            gt: o.mota.gt,
            misses: o.mota.misses,
            false_positives: o.mota.false_positives,
            mismatches: o.mota.mismatches,
            completion_iou: o.mean_completion_iou(),
            stress_fraction: stress.fraction(),
        })
        .collect();
    Ok(VariantMetrics {
        name: variant.name.clone(),
        completion_fraction: variant.completion.completion_fraction,
        rescue: variant.tracker.rescue,
        mean_mota: sequence_average(&motas),
        pooled_mota: pooled.mota,
        mismatches: pooled.mismatches,
        mean_completion_iou: (completions > 0).then(|| iou_sum / completions as f64),
        median_rotation_deg: pose_stats.map(|s| s.median_rotation_deg),
        median_translation_m: pose_stats.map(|s| s.median_translation_m),
        detection_map,
        completion_map,
        sequences,
    })
}

/// Runs every variant over the configured sequences. Sequences are
/// processed in parallel; results are ordered by sequence index.
pub fn run_variants(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no variants to run".into()));
    }
    let scripts = load_scripts(cfg)?;
    let per_sequence: Vec<(String, StressStats, GtDump, Vec<SequenceOutcome>)> = scripts
        .into_par_iter()
        .enumerate()
        .map(|(i, script)| {
            let seq = prepare_sequence(script, i, cfg)?;
            let outcomes = variants
                .iter()
                .map(|v| track_sequence(&seq, v, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok((seq.name().to_string(), seq.stress, seq.gt, outcomes))
        })
        .collect::<Result<_>>()?;

    let prepared: Vec<(String, StressStats)> = per_sequence.iter().map(|(n, s, _, _)| (n.clone(), *s)).collect();
    let mut metrics = Vec::with_capacity(variants.len());
    for (v_idx, v) in variants.iter().enumerate() {
        let outcomes: Vec<&SequenceOutcome> = per_sequence.iter().map(|(_, _, _, o)| &o[v_idx]).collect();
        metrics.push(summarize(v, &outcomes, &prepared, cfg)?);
    }
    let stress = per_sequence.iter().fold(StressStats::default(), |acc, (_, s, _, _)| StressStats {
        transitions: acc.transitions + s.transitions,
        low_overlap: acc.low_overlap + s.low_overlap,
    });
    let ious: Vec<f64> = metrics.iter().map(|m| m.mean_completion_iou.unwrap_or(0.0)).collect();
    let motas: Vec<f64> = metrics.iter().map(|m| m.mean_mota).collect();
    let dumps = (0..variants.len())
        .map(|v| per_sequence.iter().map(|(_, _, _, o)| o[v].dump.clone()).collect())
        .collect();
    Ok(ExperimentReport {
        seed: cfg.seed,
        sequences: per_sequence.len(),
        stress_fraction: stress.fraction(),
        completion_mota_spearman: spearman(&ious, &motas),
        variants: metrics,
        dumps,
        ground_truth: per_sequence.into_iter().map(|(_, _, g, _)| g).collect(),
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    variant: &'a str,
    sequence: &'a str,
    completion_fraction: f64,
    rescue: bool,
    mota: f64,
    gt: usize,
    misses: usize,
    false_positives: usize,
    mismatches: usize,
    completion_iou: Option<f64>,
    stress_fraction: f64,
}

#[derive(Debug, Serialize)]
struct SweepRow<'a> {
    variant: &'a str,
    completion_fraction: f64,
    mean_completion_iou: Option<f64>,
    mean_mota: f64,
    pooled_mota: f64,
    median_rotation_deg: Option<f64>,
    median_translation_m: Option<f64>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `metrics.json`, `metrics.csv` (one row per sequence and
/// variant), `sweep.csv` (one row per variant), the tracklet dumps under
/// `tracks/<variant>/` and ground truth under `gt/`.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();

    let metrics = dir.join("metrics.json");
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&metrics, json + "\n").map_err(|e| Error::io(&metrics, e))?;
    written.push(metrics);

    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for v in &report.variants {
        for s in &v.sequences {
            w.serialize(CsvRow {
                variant: &v.name,
                sequence: &s.sequence,
                completion_fraction: v.completion_fraction,
                rescue: v.rescue,
                mota: s.mota,
                gt: s.gt,
                misses: s.misses,
                false_positives: s.false_positives,
                mismatches: s.mismatches,
                completion_iou: s.completion_iou,
                stress_fraction: s.stress_fraction,
            })
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for v in &report.variants {
        w.serialize(SweepRow {
            variant: &v.name,
            completion_fraction: v.completion_fraction,
            mean_completion_iou: v.mean_completion_iou,
            mean_mota: v.mean_mota,
            pooled_mota: v.pooled_mota,
            median_rotation_deg: v.median_rotation_deg,
            median_translation_m: v.median_translation_m,
        })
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    for (v, dumps) in report.variants.iter().zip(&report.dumps) {
        let vdir = dir.join("tracks").join(file_stem(&v.name));
        create_dir(&vdir)?;
        for d in dumps {
            let p = vdir.join(format!("{}.json", file_stem(&d.sequence)));
            d.write(&p)?;
            written.push(p);
        }
    }
    let gdir = dir.join("gt");
    create_dir(&gdir)?;
    for g in &report.ground_truth {
        let p = gdir.join(format!("{}.json", file_stem(&g.sequence)));
        g.write(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// The configured run with ablation flags applied, written to the output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_variants(cfg, &[cfg.variant()])?;
    write_artifacts(&report, &cfg.output_dir)?;
    Ok(report)
}

/// One variant per configured completion fraction.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_variants(cfg, &cfg.sweep_variants())?;
    write_artifacts(&report, &cfg.output_dir)?;
    Ok(report)
}

/// Writes scene scripts, ground-truth indices and canonical object grids:
/// `<dir>/<sequence>/scene.json`, `gt.json` and
/// `objects/<k>_<template>.{occ,noc}.ntv`.
pub fn generate_dataset(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let scripts = load_scripts(cfg)?;
    let mut written = Vec::new();
    for (i, script) in scripts.into_iter().enumerate() {
        let sdir = dir.join(file_stem(&script.name));
        let odir = sdir.join("objects");
        create_dir(&odir)?;
        let p = sdir.join("scene.json");
        script.write(&p)?;
        written.push(p);

        let seq = prepare_gt_only(script, i, cfg)?;
        let p = sdir.join("gt.json");
        seq.0.write(&p)?;
        written.push(p);

        for (k, t) in seq.1.templates().iter().enumerate() {
            use crate::voxel::io::{write, GridMeta, GridPayload};
            let meta = GridMeta {
                origin: Vec3::zeros(),
                voxel_size: 1.0 / t.occupancy().dims().0[0] as f64,
            };
            let p = odir.join(format!("{k}_{}.occ.ntv", t.id));
            write(&p, &GridPayload::Occupancy(t.occupancy().clone()), meta)?;
            written.push(p);
            let noc = crate::synth::ground_truth_noc(t, &SimilarityTransform::identity()).noc;
            let p = odir.join(format!("{k}_{}.noc.ntv", t.id));
            write(&p, &GridPayload::Noc(noc), meta)?;
            written.push(p);
        }
    }
    Ok(written)
}

fn prepare_gt_only(script: SceneScript, index: usize, cfg: &ExperimentConfig) -> Result<(GtDump, Scene)> {
    let scene = Scene::new(script)?;
    let noise_seed = seed::derive(cfg.seed, &[index as u64]);
    let min_visible = cfg.pipeline.min_visible_voxels.max(1);
    let frames = scene
        .frames(cfg.pipeline.truncation, noise_seed)
        .map(|rf| {
            let rf = rf?;
            Ok(GtFrame {
                frame: rf.gt.frame,
                objects: rf
                    .gt
                    .objects
                    .iter()
                    .filter(|o| o.visible_count() >= min_visible)
                    .map(|o| GtRecord {
                        id: o.object as u64,
                        class_id: o.class_id,
                        bbox: o.bbox,
                        pose: o.pose,
                        symmetry: o.symmetry,
                        visible_voxels: o.visible_count(),
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gt = GtDump {
        sequence: scene.script().name.clone(),
        frames,
    };
    Ok((gt, scene))
}
