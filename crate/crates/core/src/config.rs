//! Experiment configuration: a versioned JSON document whose defaults are
//! the published thresholds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complete::CompletionKnobs;
use crate::detect::{DetectorKnobs, MeanShiftParams};
use crate::eval::MotaParams;
use crate::synth::SceneParams;
use crate::track::TrackerParams;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Completion oracle restricted to visible geometry (`f = 0`).
    pub no_completion: bool,
    /// Skip the canonical rescue pass.
    pub no_correspondence_matching: bool,
}

impl Ablation {
    /// Parses a comma-separated flag list such as `no_completion,no_corr`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut a = Self::default();
        for flag in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match flag.replace('-', "_").as_str() {
                "no_completion" | "no_compl" => a.no_completion = true,
                "no_correspondence_matching" | "no_corr" => a.no_correspondence_matching = true,
                "none" | "full" => {}
                other => {
                    return Err(Error::InvalidArgument(format!("unknown ablation flag `{other}`")));
                }
            }
        }
        Ok(a)
    }

    pub fn label(&self) -> &'static str {
        match (self.no_completion, self.no_correspondence_matching) {
            (false, false) => "full",
            (true, false) => "no_compl",
            (false, true) => "no_corr",
            (true, true) => "no_corr_no_compl",
        }
    }
}

/// Per-frame front end: TSDF fusion, surface labeling, mean-shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Scene TSDF voxel size, meters.
    pub voxel_size: f64,
    /// TSDF truncation and visibility band, meters.
    pub truncation: f64,
    pub mean_shift: MeanShiftParams,
    /// Occupancy threshold for correspondences and canonical scatter.
    pub occupancy_threshold: f32,
    /// Ground-truth objects need this many visible canonical voxels to
    /// count in a frame.
    pub min_visible_voxels: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.05,
            truncation: 0.15,
            mean_shift: MeanShiftParams::default(),
            occupancy_threshold: 0.5,
            min_visible_voxels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    /// Scene scripts to run; when empty, `sequences` scenes are generated.
    pub scripts: Vec<PathBuf>,
    pub sequences: usize,
    pub scene: SceneParams,
    pub detector: DetectorKnobs,
    pub completion: CompletionKnobs,
    pub ablation: Ablation,
    pub pipeline: PipelineParams,
    pub tracker: TrackerParams,
    pub mota: MotaParams,
    /// Completion fractions visited by `sweep`.
    pub sweep: Vec<f64>,
    pub detection_map_iou: f64,
    pub completion_map_iou: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            scripts: Vec::new(),
            sequences: 20,
            scene: SceneParams::default(),
            detector: DetectorKnobs::default(),
            completion: CompletionKnobs::default(),
            ablation: Ablation::default(),
            pipeline: PipelineParams::default(),
            tracker: TrackerParams::default(),
            mota: MotaParams::default(),
            sweep: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            detection_map_iou: 0.5,
            completion_map_iou: 0.25,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn unit_interval(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {x}")))
    }
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.scripts.is_empty() && self.sequences == 0 {
            return Err(Error::InvalidConfig("no scene scripts and zero generated sequences".into()));
        }
        self.scene.validate()?;
        self.detector.validate()?;
        self.completion.validate()?;
        unit_interval("tracker.association_iou", self.tracker.association_iou)?;
        unit_interval("tracker.rescue_iou", self.tracker.rescue_iou)?;
        unit_interval("tracker.binarize_threshold", self.tracker.binarize_threshold as f64)?;
        if !(0.0..1.0).contains(&self.tracker.running_mean_weight) {
            return Err(Error::InvalidConfig("tracker.running_mean_weight must lie in [0, 1)".into()));
        }
        unit_interval("pipeline.occupancy_threshold", self.pipeline.occupancy_threshold as f64)?;
        unit_interval("detection_map_iou", self.detection_map_iou)?;
        unit_interval("completion_map_iou", self.completion_map_iou)?;
        if !(self.mota.gate > 0.0 && self.mota.gate.is_finite()) {
            return Err(Error::InvalidConfig("mota.gate must be positive".into()));
        }
        let p = &self.pipeline;
        if !(p.voxel_size > 0.0 && p.truncation > 0.0) {
            return Err(Error::InvalidConfig("voxel size and truncation must be positive".into()));
        }
        let ms = &p.mean_shift;
        if !(ms.radius > 0.0) || ms.iterations == 0 {
            return Err(Error::InvalidConfig("mean-shift radius and iterations must be positive".into()));
        }
        if self.sweep.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidConfig("sweep fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Completion knobs and tracker parameters after applying the ablation
    /// flags.
    pub fn variant(&self) -> Variant {
        let mut completion = self.completion;
        if self.ablation.no_completion {
            completion.completion_fraction = 0.0;
        }
        let mut tracker = self.tracker;
        if self.ablation.no_correspondence_matching {
            tracker.rescue = false;
        }
        Variant {
            name: self.ablation.label().to_string(),
            completion,
            tracker,
        }
    }

    /// One variant per sweep fraction, other settings as in [`Self::variant`].
    pub fn sweep_variants(&self) -> Vec<Variant> {
        let base = self.variant();
        self.sweep
            .iter()
            .map(|&f| Variant {
                name: format!("f={f}"),
                completion: CompletionKnobs {
                    completion_fraction: f,
                    ..base.completion
                },
                tracker: base.tracker,
            })
            .collect()
    }
}

/// Settings that differ between runs sharing the same detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub completion: CompletionKnobs,
    pub tracker: TrackerParams,
}
