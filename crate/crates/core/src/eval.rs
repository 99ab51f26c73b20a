//! Tracking and detection metrics: CLEAR-MOT MOTA with a center-distance
//! gate, median pose errors, mean average precision.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Box3, SimilarityTransform};
use crate::pose::{rotation_error, SymmetryClass};
use crate::track::{hungarian, CostMatrix, TrackDump};
use crate::{Error, Result};

/// One ground-truth object in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub id: u64,
    pub class_id: usize,
    #[serde(rename = "box")]
    pub bbox: Box3,
    pub pose: SimilarityTransform,
    #[serde(default)]
    pub symmetry: SymmetryClass,
    #[serde(default)]
    pub visible_voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub frame: usize,
    pub objects: Vec<GtRecord>,
}

/// Per-sequence ground-truth index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtDump {
    pub sequence: String,
    pub frames: Vec<GtFrame>,
}

impl GtDump {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotaParams {
    /// Matches need a center distance strictly below this, meters.
    pub gate: f64,
    /// Only match predictions and ground truth of the same class.
    pub class_gated: bool,
}

impl Default for MotaParams {
    fn default() -> Self {
        Self {
            gate: 0.25,
            class_gated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameCounts {
    pub frame: usize,
    pub gt: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotaBreakdown {
    pub frames: Vec<FrameCounts>,
    pub gt: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub mota: f64,
}

impl MotaBreakdown {
    fn from_frames(frames: Vec<FrameCounts>) -> Self {
        let sum = |f: fn(&FrameCounts) -> usize| frames.iter().map(f).sum::<usize>();
        let (gt, misses, false_positives, mismatches) =
            (sum(|c| c.gt), sum(|c| c.misses), sum(|c| c.false_positives), sum(|c| c.mismatches));
        let errors = (misses + false_positives + mismatches) as f64;
        Self {
            mota: 1.0 - errors / gt.max(1) as f64,
            frames,
            gt,
            misses,
            false_positives,
            mismatches,
        }
    }

    /// Pooled breakdown over several sequences: a ratio of summed counts.
    pub fn pooled(parts: &[MotaBreakdown]) -> Self {
        Self::from_frames(parts.iter().flat_map(|p| p.frames.iter().copied()).collect())
    }
}

/// Cost standing in for pairs outside the gate.
const GATED: f64 = 1e6;

/// CLEAR-MOT evaluation. Correspondences from the previous frame are kept
/// while still inside the gate; remaining objects are paired by Hungarian
/// assignment on center distance. A mismatch is counted when a ground-truth
/// object is matched to a different track id than at its last match.
pub fn mota(pred: &TrackDump, gt: &GtDump, params: &MotaParams) -> Result<MotaBreakdown> {
    if !(params.gate > 0.0) {
        return Err(Error::InvalidConfig("MOTA gate must be positive".into()));
    }
    if pred.frames.len() != gt.frames.len() {
        return Err(Error::FrameIndexMismatch(format!(
            "{} predicted frames vs {} ground-truth frames",
            pred.frames.len(),
            gt.frames.len()
        )));
    }
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut previous: HashMap<u64, u64> = HashMap::new();
    let mut frames = Vec::with_capacity(gt.frames.len());
    for (pf, gf) in pred.frames.iter().zip(&gt.frames) {
        if pf.frame != gf.frame {
            return Err(Error::FrameIndexMismatch(format!(
                "predicted frame {} aligned with ground-truth frame {}",
                pf.frame, gf.frame
            )));
        }
        let allowed = |g: &GtRecord, h: &crate::track::TrackRecord| {
            (!params.class_gated || g.class_id == h.class_id)
                && (g.bbox.center() - h.bbox.center()).norm() < params.gate
        };
        let mut gt_used = vec![false; gf.objects.len()];
        let mut pred_used = vec![false; pf.tracks.len()];
        let mut matches: Vec<(u64, u64)> = Vec::new();

        for (gi, g) in gf.objects.iter().enumerate() {
            let Some(&h_id) = previous.get(&g.id) else { continue };
            if let Some(hi) = pf.tracks.iter().position(|h| h.id == h_id) {
                if !pred_used[hi] && allowed(g, &pf.tracks[hi]) {
                    gt_used[gi] = true;
                    pred_used[hi] = true;
                    matches.push((g.id, h_id));
                }
            }
        }

        let gi_free: Vec<usize> = (0..gf.objects.len()).filter(|&i| !gt_used[i]).collect();
        let hi_free: Vec<usize> = (0..pf.tracks.len()).filter(|&i| !pred_used[i]).collect();
        let cost = CostMatrix::from_fn(gi_free.len(), hi_free.len(), |r, c| {
            let (g, h) = (&gf.objects[gi_free[r]], &pf.tracks[hi_free[c]]);
            if allowed(g, h) {
                (g.bbox.center() - h.bbox.center()).norm()
            } else {
                GATED
            }
        });
        for (r, c) in hungarian(&cost).pairs() {
            if cost.get(r, c) < GATED {
                matches.push((gf.objects[gi_free[r]].id, pf.tracks[hi_free[c]].id));
            }
        }

        let mut mismatches = 0;
        previous.clear();
        for &(g, h) in &matches {
            if last_match.insert(g, h).is_some_and(|old| old != h) {
                mismatches += 1;
            }
            previous.insert(g, h);
        }
        frames.push(FrameCounts {
            frame: gf.frame,
            gt: gf.objects.len(),
            misses: gf.objects.len() - matches.len(),
            false_positives: pf.tracks.len() - matches.len(),
            mismatches,
        });
    }
    Ok(MotaBreakdown::from_frames(frames))
}

/// Unweighted mean of per-sequence MOTA.
pub fn sequence_average(parts: &[MotaBreakdown]) -> f64 {
    if parts.is_empty() {
        return 0.0;
    }
    parts.iter().map(|p| p.mota).sum::<f64>() / parts.len() as f64
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrorStats {
    pub median_rotation_deg: f64,
    pub median_translation_m: f64,
    pub count: usize,
}

/// Medians of symmetry-aware rotation error and translation distance over
/// matched `(prediction, ground truth, symmetry)` triples.
pub fn pose_error_stats(pairs: &[(SimilarityTransform, SimilarityTransform, SymmetryClass)]) -> Result<PoseErrorStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyMatchSet);
    }
    let mut rot: Vec<f64> = pairs
        .iter()
        .map(|(p, g, s)| rotation_error(p.rotation(), g.rotation(), *s))
        .collect();
    let mut trans: Vec<f64> = pairs
        .iter()
        .map(|(p, g, _)| (p.translation() - g.translation()).norm())
        .collect();
    Ok(PoseErrorStats {
        median_rotation_deg: median(&mut rot).expect("non-empty"),
        median_translation_m: median(&mut trans).expect("non-empty"),
        count: pairs.len(),
    })
}

/// A detection to be scored; `group` separates images or frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored<T> {
    pub group: usize,
    pub class_id: usize,
    pub confidence: f64,
    pub item: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeled<U> {
    pub group: usize,
    pub class_id: usize,
    pub item: U,
}

/// Area under the all-point interpolated precision-recall curve.
fn all_point_ap(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        precision.push(hits as f64 / (k + 1) as f64);
        recall.push(hits as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}

/// Mean over ground-truth classes of average precision. Detections are
/// taken in decreasing confidence (stable on ties) and greedily matched to
/// the unmatched ground truth of the same class and group with the highest
/// IoU, which must reach `threshold`.
pub fn average_precision<T, U>(
    detections: &[Scored<T>],
    gt: &[Labeled<U>],
    iou: impl Fn(&T, &U) -> f64,
    threshold: f64,
) -> f64 {
    let mut classes: Vec<usize> = gt.iter().map(|g| g.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &c in &classes {
        let gts: Vec<&Labeled<U>> = gt.iter().filter(|g| g.class_id == c).collect();
        let mut dets: Vec<&Scored<T>> = detections.iter().filter(|d| d.class_id == c).collect();
        dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let mut used = vec![false; gts.len()];
        let tp: Vec<bool> = dets
            .iter()
            .map(|d| {
                let best = gts
                    .iter()
                    .enumerate()
                    .filter(|(i, g)| !used[*i] && g.group == d.group)
                    .map(|(i, g)| (i, iou(&d.item, &g.item)))
                    .filter(|(_, v)| *v >= threshold)
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                match best {
                    Some((i, _)) => {
                        used[i] = true;
                        true
                    }
                    None => false,
                }
            })
            .collect();
        total += all_point_ap(&tp, gts.len());
    }
    total / classes.len() as f64
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ranks = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0 + 1.0;
            for &i in &idx[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}
