//! Tracklet management: frame-by-frame box association, running-average
//! canonical reconstructions and the final canonical rescue pass.

mod hungarian;

pub use hungarian::{hungarian, Assignment, CostMatrix};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{box_iou_3d, volumetric_iou, Box3, SimilarityTransform};
use crate::voxel::{binarize, ensure_same_dims, ProbGrid};
use crate::{Error, Result};

pub type TrackId = u64;

/// One per-frame object proposal after completion and pose estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: Box3,
    pub class_id: usize,
    pub confidence: f64,
    /// Canonical reconstruction on the 64³ lattice, when completion ran.
    pub canonical: Option<ProbGrid>,
    pub pose: Option<SimilarityTransform>,
}

impl Detection {
    pub fn new(bbox: Box3, class_id: usize) -> Self {
        Self {
            bbox,
            class_id,
            confidence: 1.0,
            canonical: None,
            pose: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame: usize,
    pub bbox: Box3,
    pub class_id: usize,
    pub pose: Option<SimilarityTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    id: TrackId,
    class_id: usize,
    last_box: Box3,
    canonical_avg: Option<ProbGrid>,
    history: Vec<Observation>,
    active: bool,
    missed: usize,
    /// Ids of orphan tracklets folded into this one by the rescue pass.
    absorbed: Vec<TrackId>,
}

impl Tracklet {
    fn start(id: TrackId, frame: usize, det: Detection) -> Self {
        Self {
            id,
            class_id: det.class_id,
            last_box: det.bbox,
            canonical_avg: det.canonical,
            history: vec![Observation {
                frame,
                bbox: det.bbox,
                class_id: det.class_id,
                pose: det.pose,
            }],
            active: true,
            missed: 0,
            absorbed: Vec::new(),
        }
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn last_box(&self) -> &Box3 {
        &self.last_box
    }

    pub fn canonical_avg(&self) -> Option<&ProbGrid> {
        self.canonical_avg.as_ref()
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn pose_history(&self) -> impl Iterator<Item = (usize, &SimilarityTransform)> {
        self.history
            .iter()
            .filter_map(|o| o.pose.as_ref().map(|p| (o.frame, p)))
    }

    pub fn first_frame(&self) -> usize {
        self.history[0].frame
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn absorbed(&self) -> &[TrackId] {
        &self.absorbed
    }

    fn frames(&self) -> BTreeSet<usize> {
        self.history.iter().map(|o| o.frame).collect()
    }
}

/// `avg ← w·avg + (1 − w)·new` per voxel; the first observation initializes.
pub fn update_canonical(avg: &mut Option<ProbGrid>, new: &ProbGrid, keep_weight: f32) -> Result<()> {
    match avg {
        None => *avg = Some(new.clone()),
        Some(old) => {
            ensure_same_dims(old.dims(), new.dims())?;
            for (o, n) in old.values_mut().iter_mut().zip(new.values()) {
                *o = (keep_weight * *o + (1.0 - keep_weight) * n).clamp(0.0, 1.0);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Box matches below this IoU are rejected.
    pub association_iou: f64,
    /// Canonical matches below this IoU are rejected.
    pub rescue_iou: f64,
    pub binarize_threshold: f32,
    /// Weight of the old value in the canonical running mean (4:1 → 0.8).
    pub running_mean_weight: f32,
    /// Only match tracklets and detections of the same class.
    pub class_gated: bool,
    /// Run the canonical rescue pass after the sequential pass.
    pub rescue: bool,
    /// Deactivate tracklets after this many consecutive unmatched frames.
    pub max_missed: Option<usize>,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            association_iou: 0.3,
            rescue_iou: 0.3,
            binarize_threshold: 0.5,
            running_mean_weight: 0.8,
            class_gated: false,
            rescue: true,
            max_missed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub tracklet: TrackId,
    pub detection: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentResult {
    pub matches: Vec<Match>,
    pub unmatched_tracklets: Vec<TrackId>,
    pub unmatched_detections: Vec<usize>,
}

/// Hungarian assignment on `1 − score`, rejecting pairs scoring below
/// `min_score`. `score(i, j)` must lie in `[0, 1]`.
fn assign_by_score(
    tracklet_ids: &[TrackId],
    n_det: usize,
    min_score: f64,
    score: impl Fn(usize, usize) -> f64,
) -> AssignmentResult {
    let scores = CostMatrix::from_fn(tracklet_ids.len(), n_det, &score);
    let cost = CostMatrix::from_fn(tracklet_ids.len(), n_det, |r, c| 1.0 - scores.get(r, c));
    let a = hungarian(&cost);
    let mut out = AssignmentResult::default();
    let mut det_used = vec![false; n_det];
    for (r, col) in a.row_to_col.iter().enumerate() {
        match col {
            Some(c) if scores.get(r, *c) >= min_score => {
                det_used[*c] = true;
                out.matches.push(Match {
                    tracklet: tracklet_ids[r],
                    detection: *c,
                    score: scores.get(r, *c),
                });
            }
            _ => out.unmatched_tracklets.push(tracklet_ids[r]),
        }
    }
    out.unmatched_detections = (0..n_det).filter(|&c| !det_used[c]).collect();
    out
}

/// Matches active tracklets to detections by 3D box IoU.
pub fn associate_frame(tracklets: &[Tracklet], detections: &[Detection], params: &TrackerParams) -> AssignmentResult {
    let active: Vec<&Tracklet> = tracklets.iter().filter(|t| t.active).collect();
    let ids: Vec<TrackId> = active.iter().map(|t| t.id).collect();
    assign_by_score(&ids, detections.len(), params.association_iou, |r, c| {
        let (t, d) = (active[r], &detections[c]);
        if params.class_gated && t.class_id != d.class_id {
            return 0.0;
        }
        box_iou_3d(&t.last_box, &d.bbox)
    })
}

fn canonical_iou(a: Option<&ProbGrid>, b: Option<&ProbGrid>, threshold: f32) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) if a.dims() == b.dims() => {
            volumetric_iou(&binarize(a, threshold), &binarize(b, threshold)).unwrap_or(0.0)
        }
        _ => 0.0,
    }
}

/// Second-pass matching of orphan tracklets (started mid-sequence by an
/// unmatched detection) to earlier tracklets by volumetric IoU of their
/// binarized canonical reconstructions. Pairs observed in a common frame
/// never match. `detection` indices in the result index `orphans`.
pub fn rescue_match(tracklets: &[&Tracklet], orphans: &[&Tracklet], params: &TrackerParams) -> AssignmentResult {
    let ids: Vec<TrackId> = tracklets.iter().map(|t| t.id).collect();
    let frames: Vec<BTreeSet<usize>> = tracklets.iter().map(|t| t.frames()).collect();
    let orphan_frames: Vec<BTreeSet<usize>> = orphans.iter().map(|t| t.frames()).collect();
    assign_by_score(&ids, orphans.len(), params.rescue_iou, |r, c| {
        let (t, o) = (tracklets[r], orphans[c]);
        if params.class_gated && t.class_id != o.class_id {
            return 0.0;
        }
        if !frames[r].is_disjoint(&orphan_frames[c]) {
            return 0.0;
        }
        canonical_iou(t.canonical_avg(), o.canonical_avg(), params.binarize_threshold)
    })
}

/// Sequential tracker state. Feed frames in order with [`Tracker::step`],
/// then call [`Tracker::finish`].
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracklets: Vec<Tracklet>,
    next_id: TrackId,
    first_frame: Option<usize>,
    last_frame: Option<usize>,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Self {
            params,
            tracklets: Vec::new(),
            next_id: 1,
            first_frame: None,
            last_frame: None,
        }
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    pub fn step(&mut self, frame: usize, detections: Vec<Detection>) -> Result<AssignmentResult> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameIndexMismatch(format!(
                    "frame {frame} after frame {last}"
                )));
            }
        }
        self.first_frame.get_or_insert(frame);
        self.last_frame = Some(frame);

        let result = associate_frame(&self.tracklets, &detections, &self.params);
        let mut detections: Vec<Option<Detection>> = detections.into_iter().map(Some).collect();
        for m in &result.matches {
            let det = detections[m.detection].take().expect("detection matched once");
            let t = self
                .tracklets
                .iter_mut()
                .find(|t| t.id == m.tracklet)
                .expect("matched tracklet exists");
            t.last_box = det.bbox;
            t.missed = 0;
            if let Some(c) = &det.canonical {
                update_canonical(&mut t.canonical_avg, c, self.params.running_mean_weight)?;
            }
            t.history.push(Observation {
                frame,
                bbox: det.bbox,
                class_id: det.class_id,
                pose: det.pose,
            });
        }
        for id in &result.unmatched_tracklets {
            if let Some(t) = self.tracklets.iter_mut().find(|t| t.id == *id) {
                t.missed += 1;
                if self.params.max_missed.is_some_and(|k| t.missed > k) {
                    t.active = false;
                }
            }
        }
        for &d in &result.unmatched_detections {
            let det = detections[d].take().expect("unmatched detection unused");
            self.tracklets.push(Tracklet::start(self.next_id, frame, det));
            self.next_id += 1;
        }
        Ok(result)
    }

    /// Runs the rescue pass (when enabled) and returns the final tracklets
    /// sorted by id.
    pub fn finish(mut self) -> Result<Vec<Tracklet>> {
        if self.params.rescue {
            self.rescue()?;
        }
        self.tracklets.sort_by_key(|t| t.id);
        Ok(self.tracklets)
    }

    /// Orphans are grouped by birth frame and processed in time order, so a
    /// chain of orphans can fold back into the original tracklet.
    fn rescue(&mut self) -> Result<()> {
        let Some(first) = self.first_frame else {
            return Ok(());
        };
        let births: BTreeSet<usize> = self
            .tracklets
            .iter()
            .map(Tracklet::first_frame)
            .filter(|&f| f > first)
            .collect();
        for birth in births {
            let (targets, orphans): (Vec<&Tracklet>, Vec<&Tracklet>) = {
                let targets = self.tracklets.iter().filter(|t| t.first_frame() < birth).collect();
                let orphans = self.tracklets.iter().filter(|t| t.first_frame() == birth).collect();
                (targets, orphans)
            };
            let result = rescue_match(&targets, &orphans, &self.params);
            let merges: Vec<(TrackId, TrackId)> = result
                .matches
                .iter()
                .map(|m| (m.tracklet, orphans[m.detection].id))
                .collect();
            for (target, orphan) in merges {
                self.merge(target, orphan)?;
            }
        }
        Ok(())
    }

    fn merge(&mut self, target: TrackId, orphan: TrackId) -> Result<()> {
        let pos = self
            .tracklets
            .iter()
            .position(|t| t.id == orphan)
            .expect("orphan exists");
        let o = self.tracklets.remove(pos);
        let t = self
            .tracklets
            .iter_mut()
            .find(|t| t.id == target)
            .expect("target exists");
        if let Some(c) = &o.canonical_avg {
            update_canonical(&mut t.canonical_avg, c, self.params.running_mean_weight)?;
        }
        t.history.extend(o.history);
        t.history.sort_by_key(|ob| ob.frame);
        t.last_box = t.history.last().expect("non-empty history").bbox;
        t.active = t.active || o.active;
        t.missed = t.missed.min(o.missed);
        t.absorbed.push(o.id);
        t.absorbed.extend(o.absorbed);
        Ok(())
    }
}

/// One tracked object in one frame of a dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: TrackId,
    pub class_id: usize,
    #[serde(rename = "box")]
    pub bbox: Box3,
    pub pose: Option<SimilarityTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: usize,
    pub tracks: Vec<TrackRecord>,
}

/// Per-sequence tracker output: one entry per frame, records sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDump {
    pub sequence: String,
    pub frames: Vec<TrackFrame>,
}

impl TrackDump {
    pub fn from_tracklets(sequence: impl Into<String>, frame_count: usize, tracklets: &[Tracklet]) -> Self {
        let mut frames: Vec<TrackFrame> = (0..frame_count)
            .map(|frame| TrackFrame {
                frame,
                tracks: Vec::new(),
            })
            .collect();
        for t in tracklets {
            for o in &t.history {
                if let Some(f) = frames.get_mut(o.frame) {
                    f.tracks.push(TrackRecord {
                        id: t.id,
                        class_id: o.class_id,
                        bbox: o.bbox,
                        pose: o.pose,
                    });
                }
            }
        }
        for f in &mut frames {
            f.tracks.sort_by_key(|r| r.id);
        }
        Self {
            sequence: sequence.into(),
            frames,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::voxel::Dims;
    use rand::{Rng, SeedableRng};

    fn bx(x: f64) -> Box3 {
        Box3::new(Vec3::new(x, 0.0, 0.0), Vec3::repeat(1.0)).unwrap()
    }

    fn det(x: f64) -> Detection {
        Detection::new(bx(x), 0)
    }

    fn det_with_canonical(x: f64, canon: ProbGrid) -> Detection {
        Detection {
            canonical: Some(canon),
            ..det(x)
        }
    }

    /// Box shifted along x so that IoU with `bx(0)` equals `iou`.
    fn shift_for_iou(iou: f64) -> f64 {
        // overlap o: o / (2 - o) = iou
        1.0 - 2.0 * iou / (1.0 + iou)
    }

    #[test]
    fn identical_boxes_match() {
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det(0.0)]).unwrap();
        let r = associate_frame(tr.tracklets(), &[det(0.0)], tr.params());
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].score, 1.0);
    }

    #[test]
    fn low_iou_is_rejected() {
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det(0.0)]).unwrap();
        let d = det(shift_for_iou(0.2));
        assert!((box_iou_3d(&bx(0.0), &d.bbox) - 0.2).abs() < 1e-12);
        let r = associate_frame(tr.tracklets(), &[d], tr.params());
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_tracklets, vec![1]);
        assert_eq!(r.unmatched_detections, vec![0]);
        tr.step(1, vec![det(shift_for_iou(0.2))]).unwrap();
        assert_eq!(tr.tracklets().len(), 2);
    }

    #[test]
    fn crossed_costs_follow_brute_force() {
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det(0.0), det(0.9)]).unwrap();
        let dets = [det(0.85), det(0.1)];
        let r = associate_frame(tr.tracklets(), &dets, tr.params());
        // permutation oracle over both assignments
        let ious = |a: usize, b: usize| box_iou_3d(tr.tracklets()[a].last_box(), &dets[b].bbox);
        let straight = (1.0 - ious(0, 0)) + (1.0 - ious(1, 1));
        let crossed = (1.0 - ious(0, 1)) + (1.0 - ious(1, 0));
        let mut got: Vec<(TrackId, usize)> = r.matches.iter().map(|m| (m.tracklet, m.detection)).collect();
        got.sort();
        let expect = if crossed < straight { vec![(1, 1), (2, 0)] } else { vec![(1, 0), (2, 1)] };
        // pairs below the IoU gate are dropped after assignment
        let expect: Vec<(TrackId, usize)> = expect
            .into_iter()
            .filter(|&(t, d)| ious(t as usize - 1, d) >= 0.3)
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn assignment_lists_are_disjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut tr = Tracker::new(TrackerParams::default());
        for f in 0..30 {
            let n = rng.gen_range(0..5);
            let dets = (0..n).map(|_| det(rng.gen_range(-3.0..3.0))).collect();
            let r = tr.step(f, dets).unwrap();
            let mut seen_t = BTreeSet::new();
            let mut seen_d = BTreeSet::new();
            for m in &r.matches {
                assert!(m.score >= 0.3);
                assert!(seen_t.insert(m.tracklet));
                assert!(seen_d.insert(m.detection));
            }
            assert!(r.unmatched_tracklets.iter().all(|t| seen_t.insert(*t)));
            assert!(r.unmatched_detections.iter().all(|d| seen_d.insert(*d)));
            assert_eq!(seen_d.len(), n);
        }
        let ids: BTreeSet<TrackId> = tr.tracklets().iter().map(|t| t.id()).collect();
        assert_eq!(ids.len(), tr.tracklets().len());
        for t in tr.tracklets() {
            assert!(t.history().windows(2).all(|w| w[0].frame < w[1].frame));
        }
    }

    #[test]
    fn frames_must_increase() {
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(3, vec![]).unwrap();
        assert!(matches!(tr.step(3, vec![]), Err(Error::FrameIndexMismatch(_))));
    }

    #[test]
    fn running_mean_examples() {
        let d = Dims::cube(2);
        let mut avg = Some(ProbGrid::filled(d, 0.6));
        update_canonical(&mut avg, &ProbGrid::filled(d, 0.6), 0.8).unwrap();
        assert!(avg.as_ref().unwrap().values().iter().all(|&v| (v - 0.6).abs() < 1e-7));

        let mut avg = Some(ProbGrid::filled(d, 1.0));
        update_canonical(&mut avg, &ProbGrid::zeros(d), 0.8).unwrap();
        assert!(avg.as_ref().unwrap().values().iter().all(|&v| (v - 0.8).abs() < 1e-7));

        let (y, x) = (0.9f32, 0.1f32);
        let mut avg = Some(ProbGrid::filled(d, y));
        for _ in 0..3 {
            update_canonical(&mut avg, &ProbGrid::filled(d, x), 0.8).unwrap();
        }
        // geometric series: y·0.8³ + x·(1 − 0.8³)
        let expect = y * 0.8f32.powi(3) + x * (1.0 - 0.8f32.powi(3));
        assert!(avg.unwrap().values().iter().all(|&v| (v - expect).abs() < 1e-6));

        let mut avg = Some(ProbGrid::zeros(d));
        assert!(matches!(
            update_canonical(&mut avg, &ProbGrid::zeros(Dims::cube(3)), 0.8),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn running_mean_stays_in_unit_interval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let d = Dims::cube(3);
        let mut avg = None;
        for _ in 0..50 {
            let g = ProbGrid::from_values(d, (0..27).map(|_| rng.gen::<f32>()).collect()).unwrap();
            update_canonical(&mut avg, &g, 0.8).unwrap();
            assert!(avg.as_ref().unwrap().values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    fn blob(d: Dims, ids: impl Iterator<Item = usize>) -> ProbGrid {
        let mut g = ProbGrid::zeros(d);
        for i in ids {
            g.set_index(i, 1.0);
        }
        g
    }

    #[test]
    fn rescue_merges_identical_canonical() {
        let d = Dims::cube(4);
        let shape = blob(d, 0..20);
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det_with_canonical(0.0, shape.clone())]).unwrap();
        // jump far away: a second tracklet starts
        tr.step(1, vec![det_with_canonical(5.0, shape.clone())]).unwrap();
        tr.step(2, vec![det_with_canonical(5.1, shape)]).unwrap();
        assert_eq!(tr.tracklets().len(), 2);
        let done = tr.finish().unwrap();
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].id(), 1);
        assert_eq!(done[0].absorbed(), &[2]);
        let frames: Vec<usize> = done[0].history().iter().map(|o| o.frame).collect();
        assert_eq!(frames, vec![0, 1, 2]);
        let dump = TrackDump::from_tracklets("s", 3, &done);
        assert!(dump.frames.iter().all(|f| f.tracks.len() == 1 && f.tracks[0].id == 1));
    }

    #[test]
    fn rescue_needs_overlap() {
        let d = Dims::cube(4);
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det_with_canonical(0.0, blob(d, 0..20))]).unwrap();
        tr.step(1, vec![det_with_canonical(5.0, blob(d, 30..50))]).unwrap();
        assert_eq!(tr.finish().unwrap().len(), 2);
    }

    #[test]
    fn rescue_disabled_keeps_orphans() {
        let d = Dims::cube(4);
        let shape = blob(d, 0..20);
        let params = TrackerParams {
            rescue: false,
            ..TrackerParams::default()
        };
        let mut tr = Tracker::new(params);
        tr.step(0, vec![det_with_canonical(0.0, shape.clone())]).unwrap();
        tr.step(1, vec![det_with_canonical(5.0, shape)]).unwrap();
        assert_eq!(tr.finish().unwrap().len(), 2);
    }

    #[test]
    fn concurrent_tracklets_never_merge() {
        let d = Dims::cube(4);
        let shape = blob(d, 0..20);
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det_with_canonical(0.0, shape.clone())]).unwrap();
        // same shape appears elsewhere while the first is still observed
        tr.step(1, vec![det_with_canonical(0.0, shape.clone()), det_with_canonical(5.0, shape)])
            .unwrap();
        assert_eq!(tr.finish().unwrap().len(), 2);
    }

    #[test]
    fn rescue_pairing_matches_brute_force() {
        let d = Dims::cube(4);
        // two established tracklets, two orphans with asymmetric overlaps
        let t_a = blob(d, 0..20);
        let t_b = blob(d, 20..40);
        let o_1 = blob(d, 5..25); // IoU with a: 15/25, with b: 5/35
        let o_2 = blob(d, 12..36); // IoU with a: 8/36, with b: 16/28
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det_with_canonical(0.0, t_a.clone()), det_with_canonical(10.0, t_b.clone())])
            .unwrap();
        tr.step(1, vec![det_with_canonical(20.0, o_1.clone()), det_with_canonical(30.0, o_2.clone())])
            .unwrap();
        let ious = |a: &ProbGrid, b: &ProbGrid| canonical_iou(Some(a), Some(b), 0.5);
        let straight = ious(&t_a, &o_1) + ious(&t_b, &o_2);
        let crossed = ious(&t_a, &o_2) + ious(&t_b, &o_1);
        assert!(straight > crossed);
        let done = tr.finish().unwrap();
        assert_eq!(done.len(), 2);
        assert_eq!(done[0].absorbed(), &[3]);
        assert_eq!(done[1].absorbed(), &[4]);
    }

    #[test]
    fn orphan_chain_folds_back() {
        let d = Dims::cube(4);
        let shape = blob(d, 0..20);
        let mut tr = Tracker::new(TrackerParams::default());
        for (f, x) in [(0, 0.0), (1, 5.0), (2, 10.0), (3, 15.0)] {
            tr.step(f, vec![det_with_canonical(x, shape.clone())]).unwrap();
        }
        let done = tr.finish().unwrap();
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].history().len(), 4);
    }

    #[test]
    fn class_gate_blocks_cross_class_matches() {
        let params = TrackerParams {
            class_gated: true,
            ..TrackerParams::default()
        };
        let mut tr = Tracker::new(params);
        tr.step(0, vec![det(0.0)]).unwrap();
        let other = Detection::new(bx(0.0), 4);
        assert!(associate_frame(tr.tracklets(), &[other], tr.params()).matches.is_empty());
    }

    #[test]
    fn deactivation_after_k_misses() {
        let params = TrackerParams {
            max_missed: Some(1),
            ..TrackerParams::default()
        };
        let mut tr = Tracker::new(params);
        tr.step(0, vec![det(0.0)]).unwrap();
        tr.step(1, vec![]).unwrap();
        assert!(tr.tracklets()[0].is_active());
        tr.step(2, vec![]).unwrap();
        assert!(!tr.tracklets()[0].is_active());
        tr.step(3, vec![det(0.0)]).unwrap();
        assert_eq!(tr.tracklets().len(), 2);
    }

    #[test]
    fn dump_round_trip() {
        let mut tr = Tracker::new(TrackerParams::default());
        tr.step(0, vec![det(0.0)]).unwrap();
        tr.step(2, vec![det(0.1)]).unwrap();
        let dump = TrackDump::from_tracklets("seq", 3, &tr.finish().unwrap());
        assert_eq!(dump.frames.len(), 3);
        assert!(dump.frames[1].tracks.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        dump.write(&p).unwrap();
        assert_eq!(TrackDump::read(&p).unwrap(), dump);
    }
}
