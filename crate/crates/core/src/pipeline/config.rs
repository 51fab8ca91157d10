//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::{DegradeParams, SegmentParams};
use crate::metrics::{LossType, ModelVariant};
use crate::pointcloud::CoarseOptions;
use crate::radar::{ApertureConfig, FftOptions, RadarConfig, ScatterOptions, VibrationMode, VibrationModel};
use crate::reconstruct::{Architecture, TrainingConfig};

use super::scenes::scene_objects;

/// Viewpoints on a horizontal ring around the scene center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewConfig {
    pub count: usize,
    pub radius: f64,
    pub height: f64,
}

impl Default for ViewConfig {
    /// Four views, 90° apart. Ring geometry is an assumption.
    fn default() -> Self {
        Self { count: 4, radius: 3.5, height: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    /// Skip SAR synthesis (the depth stand-in does not read the heatmap).
    pub enabled: bool,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub samples_per_chirp: usize,
    pub sample_rate_hz: f64,
    pub aperture_width: usize,
    pub aperture_height: usize,
    /// Element spacing in meters; half a wavelength when absent.
    pub spacing: Option<f64>,
    pub scatter: ScatterOptions,
    pub fft: FftOptions,
}

impl Default for RadarSection {
    fn default() -> Self {
        let r = RadarConfig::default();
        let a = ApertureConfig::default();
        Self {
            enabled: true,
            carrier_hz: r.carrier_hz,
            bandwidth_hz: r.bandwidth_hz,
            samples_per_chirp: r.samples_per_chirp,
            sample_rate_hz: r.sample_rate_hz,
            aperture_width: a.width,
            aperture_height: a.height,
            spacing: None,
            scatter: ScatterOptions::default(),
            fft: FftOptions::default(),
        }
    }
}

impl RadarSection {
    pub fn radar(&self) -> RadarConfig {
        RadarConfig::with_bandwidth(self.carrier_hz, self.bandwidth_hz, self.samples_per_chirp, self.sample_rate_hz)
    }

    pub fn aperture(&self) -> ApertureConfig {
        let s = self.spacing.unwrap_or(self.radar().wavelength() / 2.0);
        ApertureConfig {
            width: self.aperture_width,
            height: self.aperture_height,
            spacing_h: s,
            spacing_v: s,
            ..ApertureConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VibrationSection {
    pub sigma: [f64; 3],
    pub mode: VibrationMode,
}

impl Default for VibrationSection {
    fn default() -> Self {
        let v = VibrationModel::default();
        Self { sigma: v.sigma, mode: v.mode }
    }
}

impl VibrationSection {
    pub fn model(&self, seed: u64) -> VibrationModel {
        VibrationModel { sigma: self.sigma, mode: self.mode, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub size: usize,
    pub focal: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self { size: 128, focal: 128.0 }
    }
}

/// Where Model 2 gets its per-pixel object labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentationSource {
    Oracle,
    Classical {
        #[serde(default = "default_discontinuity")]
        discontinuity: f64,
        #[serde(default = "default_min_region")]
        min_region: usize,
    },
    /// Oracle labels with a fraction `p` of one object's pixels dropped.
    /// `target` defaults to the object with the smallest surface area.
    Corrupted {
        p: f64,
        #[serde(default)]
        target: Option<u32>,
    },
}

fn default_discontinuity() -> f64 {
    SegmentParams::default().discontinuity
}

fn default_min_region() -> usize {
    SegmentParams::default().min_region
}

impl Default for SegmentationSource {
    fn default() -> Self {
        Self::Oracle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefinerSpec {
    #[default]
    Baseline,
    /// Model 1: a checkpoint file. Model 2: a directory of `object_<label>.bin`.
    Learned { checkpoint: PathBuf },
}

/// One evaluated row: pipeline variant, training loss, refiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub variant: ModelVariant,
    #[serde(default)]
    pub loss: LossType,
    #[serde(default)]
    pub refiner: RefinerSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub emd_tolerance: f64,
    /// Fraction of instances used for training; the rest are the test split.
    pub train_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { emd_tolerance: 0.01, train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Scene types (see [`scene_objects`]) or scene files.
    pub scenes: Vec<String>,
    pub views: ViewConfig,
    pub radar: RadarSection,
    pub vibration: VibrationSection,
    pub camera: CameraSection,
    pub degrade: DegradeParams,
    pub segmentation: SegmentationSource,
    pub coarse: CoarseOptions,
    #[serde(rename = "setting")]
    pub settings: Vec<Setting>,
    pub training: TrainingConfig,
    pub architecture: Architecture,
    pub evaluation: EvaluationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: vec!["two_objects".into()],
            views: ViewConfig::default(),
            radar: RadarSection::default(),
            vibration: VibrationSection::default(),
            camera: CameraSection::default(),
            degrade: DegradeParams::default(),
            segmentation: SegmentationSource::Oracle,
            coarse: CoarseOptions::default(),
            settings: vec![Setting { variant: ModelVariant::Model1, loss: LossType::Cd, refiner: RefinerSpec::Baseline }],
            training: TrainingConfig::default(),
            architecture: Architecture::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads and validates a config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.scenes {
            if s.ends_with(".toml") && Path::new(s.as_str()).is_relative() {
                *s = base.join(&*s).to_string_lossy().into_owned();
            }
        }
        for st in &mut cfg.settings {
            if let RefinerSpec::Learned { checkpoint } = &mut st.refiner {
                if checkpoint.is_relative() {
                    *checkpoint = base.join(&*checkpoint);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::Config("at least one scene is required".into()));
        }
        for s in &self.scenes {
            if s.ends_with(".toml") {
                if !Path::new(s).exists() {
                    return Err(Error::Config(format!("scene file {s} does not exist")));
                }
            } else {
                scene_objects(s)?;
            }
        }
        if self.views.count == 0 {
            return Err(Error::Config("views.count must be at least 1".into()));
        }
        if !(self.views.radius > 0.0) {
            return Err(Error::Config("views.radius must be positive".into()));
        }
        if self.camera.size == 0 || !(self.camera.focal > 0.0) {
            return Err(Error::Config("camera size and focal length must be positive".into()));
        }
        self.degrade.validate()?;
        if self.radar.enabled {
            self.radar.radar().validate()?;
            self.radar.aperture().validate()?;
        }
        if self.vibration.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("vibration sigma must be non-negative".into()));
        }
        match self.segmentation {
            SegmentationSource::Corrupted { p, .. } if !(0.0..=1.0).contains(&p) => {
                return Err(Error::Config("corruption fraction must lie in [0, 1]".into()));
            }
            SegmentationSource::Classical { discontinuity, .. } if !(discontinuity > 0.0) => {
                return Err(Error::Config("discontinuity threshold must be positive".into()));
            }
            _ => {}
        }
        if self.settings.is_empty() {
            return Err(Error::Config("at least one [[setting]] is required".into()));
        }
        self.training.validate()?;
        self.architecture.validate()?;
        if !(self.evaluation.train_fraction > 0.0 && self.evaluation.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie strictly between 0 and 1".into()));
        }
        Ok(())
    }

    /// Every learned setting's checkpoint must exist before evaluation.
    pub fn require_checkpoints(&self) -> Result<()> {
        for s in &self.settings {
            if let RefinerSpec::Learned { checkpoint } = &s.refiner {
                if !checkpoint.exists() {
                    return Err(Error::MissingCheckpoint(checkpoint.clone()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_file_and_validation() {
        let c = ExperimentConfig::parse(
            r#"
seed = 3
scenes = ["three_objects"]
[segmentation]
source = "corrupted"
p = 0.5
[[setting]]
variant = "model2"
loss = "emd"
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.segmentation, SegmentationSource::Corrupted { p: 0.5, target: None });
        assert_eq!(c.settings[0].variant, ModelVariant::Model2);
        c.validate().unwrap();
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        let bad = ExperimentConfig { scenes: vec![], ..ExperimentConfig::default() };
        assert!(bad.validate().is_err());
        let mut bad = ExperimentConfig::default();
        bad.views.count = 0;
        assert!(bad.validate().is_err());
        let mut missing = ExperimentConfig::default();
        missing.settings[0].refiner = RefinerSpec::Learned { checkpoint: "/nonexistent/model.bin".into() };
        missing.validate().unwrap();
        assert!(matches!(missing.require_checkpoints(), Err(Error::MissingCheckpoint(_))));
    }
}
